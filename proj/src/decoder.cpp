#include "nbce/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nbce/random.hpp"

namespace nbce {

static std::string window_prompt(const ContextWindow & w, const std::string & separator,
                                 const std::string & query, const std::string & suffix) {
    std::string prompt = w.rendered_text;
    if (!prompt.empty() && !query.empty()) {
        prompt += separator;
    }
    prompt += query;
    prompt += suffix;
    return prompt;
}

StepScores collect_step_scores(const PackingPlan & windows, const std::string & query,
                               const std::string & suffix, Backend & backend) {
    std::vector<ScoreRequest> reqs;
    reqs.reserve(windows.windows.size() + 1);
    for (const auto & w : windows.windows) {
        reqs.push_back({window_prompt(w, windows.separator, query, suffix), true});
    }
    reqs.push_back({query + suffix, true});  // context-free: no demonstrations

    auto results = backend.score_batch(reqs);
    for (const auto & r : results) {
        if (!r.ok()) {
            raise_score_error(r);
        }
    }

    StepScores scores;
    scores.per_window.reserve(windows.windows.size());
    for (size_t i = 0; i < windows.windows.size(); ++i) {
        scores.per_window.push_back(normalize(results[i].response.logprobs));
    }
    scores.context_free = normalize(results.back().response.logprobs);
    return scores;
}

LogProbVector apply_sampling_filter(const LogProbVector & v, double temperature, double top_p) {
    if (temperature <= 0.0) {
        throw dimension_mismatch_error("temperature must be > 0");
    }
    if (temperature == 1.0 && top_p >= 1.0) {
        return v;
    }
    LogProbVector out = v;
    if (temperature != 1.0) {
        for (double & x : out) {
            x /= temperature;
        }
        out = normalize(out);
    }
    if (top_p < 1.0) {
        // keep the smallest probability-sorted prefix whose mass reaches top_p
        std::vector<size_t> order(out.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return out[a] > out[b]; });
        double mass = 0.0;
        size_t keep = out.size();
        for (size_t i = 0; i < order.size(); ++i) {
            mass += std::exp(out[order[i]]);
            if (mass >= top_p) {
                keep = i + 1;
                break;
            }
        }
        LogProbVector masked(out.size(), -std::numeric_limits<double>::infinity());
        for (size_t i = 0; i < keep; ++i) {
            masked[order[i]] = out[order[i]];
        }
        out = normalize(masked);
    }
    return out;
}

static int sample_token(const LogProbVector & v, std::mt19937_64 & rng) {
    const double u = canonical_double(rng);
    double cum = 0.0;
    int last_live = -1;
    for (size_t i = 0; i < v.size(); ++i) {
        const double p = std::exp(v[i]);
        if (p > 0.0) {
            last_live = static_cast<int>(i);
        }
        cum += p;
        if (u < cum) {
            return static_cast<int>(i);
        }
    }
    return last_live;  // rounding pushed the total just under u
}

DecodeTrace decode(const PackingPlan & windows, const std::string & query,
                   const NbceParams & params, const DecodeConfig & cfg, Backend & backend) {
    if (cfg.max_new_tokens < 1) {
        throw dimension_mismatch_error("max_new_tokens must be >= 1");
    }
    DecodeTrace trace;
    auto rng = make_rng(cfg.seed, 0x5a5a5a5aULL);
    std::string suffix;

    for (int step = 0; step < cfg.max_new_tokens; ++step) {
        StepScores scores;
        try {
            scores = collect_step_scores(windows, query, suffix, backend);
        } catch (const context_overflow_error & e) {
            trace.finish_reason = FinishReason::context_overflow;
            trace.overflow_message = e.what();
            return trace;
        }

        const auto step_result =
            combine_traced(scores, params, static_cast<uint64_t>(step), /*with_entropies=*/true);
        const size_t amax = argmax(step_result.combined);

        int token;
        if (cfg.strategy == DecodeStrategy::greedy) {
            token = static_cast<int>(amax);
        } else {
            const auto filtered = apply_sampling_filter(step_result.combined, cfg.temperature, cfg.top_p);
            token = sample_token(filtered, rng);
        }

        if (cfg.stop_tokens.count(token)) {
            trace.finish_reason = FinishReason::stop_token;
            return trace;
        }

        trace.tokens.push_back(token);
        trace.per_step.push_back({step_result.chosen_index, step_result.entropies,
                                  step_result.combined[amax]});
        suffix += backend.append_text(token);
    }
    trace.finish_reason = FinishReason::max_tokens;
    return trace;
}

}  // namespace nbce
