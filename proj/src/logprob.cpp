#include "nbce/logprob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nbce/random.hpp"

namespace nbce {

static void check_entries(const LogProbVector & v) {
    if (v.empty()) {
        throw dimension_mismatch_error("log-prob vector is empty");
    }
    for (double x : v) {
        if (std::isnan(x) || x == std::numeric_limits<double>::infinity()) {
            throw dimension_mismatch_error("log-prob entries must be finite or -inf");
        }
    }
}

double log_sum_exp(const LogProbVector & v) {
    check_entries(v);
    const double max_arg = *std::max_element(v.begin(), v.end());
    if (max_arg == -std::numeric_limits<double>::infinity()) {
        throw all_zero_probability_error();
    }
    double sum = 0.0;
    for (double x : v) {
        sum += std::exp(x - max_arg);
    }
    return max_arg + std::log(sum);
}

LogProbVector normalize(const LogProbVector & v) {
    const double z = log_sum_exp(v);
    LogProbVector out(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        out[i] = v[i] - z;
    }
    return out;
}

double entropy(const LogProbVector & v) {
    const double z = log_sum_exp(v);
    if (std::fabs(z) > k_norm_tol_loose) {
        throw not_normalized_error(z);
    }
    double h = 0.0;
    for (double x : v) {
        const double p = std::exp(x);
        if (p > 0.0) {
            h -= p * x;
        }
    }
    return std::max(h, 0.0);
}

static void check_scores(const StepScores & scores) {
    if (scores.per_window.empty()) {
        throw empty_windows_error();
    }
    const size_t vocab = scores.context_free.size();
    if (vocab == 0) {
        throw dimension_mismatch_error("context-free vector is empty");
    }
    for (const auto & w : scores.per_window) {
        if (w.size() != vocab) {
            throw dimension_mismatch_error("per-window vocab size " + std::to_string(w.size()) +
                                           " != context-free vocab size " + std::to_string(vocab));
        }
    }
}

PoolResult pool(const StepScores & scores, const PoolingMode & mode, uint64_t draw) {
    check_scores(scores);
    const size_t n = scores.window_count();
    const size_t vocab = scores.vocab_size();

    switch (mode.kind) {
        case PoolingKind::average: {
            LogProbVector out(vocab, 0.0);
            for (const auto & w : scores.per_window) {
                for (size_t j = 0; j < vocab; ++j) {
                    out[j] += w[j];
                }
            }
            for (double & x : out) {
                x /= static_cast<double>(n);
            }
            return {std::move(out), std::nullopt};
        }
        case PoolingKind::entropy_vote: {
            size_t best = 0;
            double best_h = entropy(scores.per_window[0]);
            for (size_t k = 1; k < n; ++k) {
                const double h = entropy(scores.per_window[k]);
                if (h < best_h) {  // ties keep the lowest index
                    best_h = h;
                    best = k;
                }
            }
            return {scores.per_window[best], best};
        }
        case PoolingKind::random: {
            auto rng = make_rng(mode.seed, draw);
            const size_t k = static_cast<size_t>(bounded_rand(rng, n));
            return {scores.per_window[k], k};
        }
    }
    throw nbce_error("unknown pooling kind");
}

static double floored(double x) {
    return x < k_log_floor ? k_log_floor : x;
}

CombineResult combine_traced(const StepScores & scores, const NbceParams & params,
                             uint64_t draw, bool with_entropies) {
    check_scores(scores);
    if (params.beta < 0.0 || std::isnan(params.beta)) {
        throw dimension_mismatch_error("beta must be >= 0");
    }

    PoolResult pooled = pool(scores, params.pooling, draw);

    CombineResult res;
    res.chosen_index = pooled.chosen_index;
    if (with_entropies) {
        res.entropies.reserve(scores.window_count());
        for (const auto & w : scores.per_window) {
            res.entropies.push_back(entropy(w));
        }
    }

    const size_t vocab = scores.vocab_size();
    res.raw.resize(vocab);
    for (size_t j = 0; j < vocab; ++j) {
        res.raw[j] = (params.beta + 1.0) * floored(pooled.values[j]) -
                     params.beta * floored(scores.context_free[j]);
    }
    res.combined = normalize(res.raw);
    return res;
}

LogProbVector combine(const StepScores & scores, const NbceParams & params, uint64_t draw) {
    return combine_traced(scores, params, draw, false).combined;
}

size_t argmax(const LogProbVector & v) {
    check_entries(v);
    size_t best = 0;
    for (size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) {
            best = i;
        }
    }
    return best;
}

const char * pooling_name(PoolingKind kind) {
    switch (kind) {
        case PoolingKind::average:      return "avg";
        case PoolingKind::entropy_vote: return "entropy";
        case PoolingKind::random:       return "random";
    }
    return "?";
}

std::optional<PoolingKind> pooling_from_name(const std::string & name) {
    if (name == "avg" || name == "average") {
        return PoolingKind::average;
    }
    if (name == "entropy" || name == "vote") {
        return PoolingKind::entropy_vote;
    }
    if (name == "random" || name == "rand") {
        return PoolingKind::random;
    }
    return std::nullopt;
}

}  // namespace nbce
