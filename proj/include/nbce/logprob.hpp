#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nbce/errors.hpp"

// Log-space combination core: normalization, entropy, pooling and the
// context-extension rule
//
//     combined = normalize((beta + 1) * P[per-window log-probs] - beta * context-free)
//
// where P is average pooling, minimum-entropy voting, or a seeded random pick.
// All log-probabilities are natural log; entropy is in nats.

namespace nbce {

// Full-vocabulary next-token distribution in log space. Entries may be -inf
// (hard zero) but never NaN or +inf.
using LogProbVector = std::vector<double>;

// The n per-window vectors plus the context-free vector for one decoding step.
struct StepScores {
    std::vector<LogProbVector> per_window;
    LogProbVector              context_free;

    size_t window_count() const { return per_window.size(); }
    size_t vocab_size() const { return context_free.size(); }
};

enum class PoolingKind {
    average,       // elementwise mean of the per-window vectors
    entropy_vote,  // the single vector with minimal entropy
    random,        // seeded uniform pick of one window
};

struct PoolingMode {
    PoolingKind kind = PoolingKind::average;
    uint64_t    seed = 0;  // used by random pooling only

    static PoolingMode average() { return {PoolingKind::average, 0}; }
    static PoolingMode entropy_vote() { return {PoolingKind::entropy_vote, 0}; }
    static PoolingMode random(uint64_t seed) { return {PoolingKind::random, seed}; }
};

struct NbceParams {
    double      beta = 0.25;
    PoolingMode pooling = PoolingMode::average();
};

// Log-probs below this are clamped before combination so that beta-scaled
// subtraction stays finite (0 * -inf would poison the result).
inline constexpr double k_log_floor = -80.0;

// Normalization tolerances: outputs must satisfy |logsumexp| <= strict;
// entropy/voting inputs are accepted within loose.
inline constexpr double k_norm_tol_strict = 1e-9;
inline constexpr double k_norm_tol_loose  = 1e-6;

// log(sum(exp(v))), max-shifted. Requires entries finite or -inf, not all -inf.
double log_sum_exp(const LogProbVector & v);

// v - logsumexp(v); the realized "+ constant". Throws all_zero_probability_error
// if every entry is -inf.
LogProbVector normalize(const LogProbVector & v);

// -sum p*log p in nats, with 0*log 0 = 0. Requires v normalized within
// k_norm_tol_loose, else throws not_normalized_error.
double entropy(const LogProbVector & v);

struct PoolResult {
    LogProbVector         values;
    std::optional<size_t> chosen_index;  // set by entropy_vote and random
};

// Merge the per-window vectors. `draw` distinguishes successive random picks
// made under the same seed (decode step, eval example); average and
// entropy_vote ignore it. Entropy ties break to the lowest index.
PoolResult pool(const StepScores & scores, const PoolingMode & mode, uint64_t draw = 0);

struct CombineResult {
    LogProbVector         combined;    // normalized
    LogProbVector         raw;         // pre-normalization affine scores
    std::optional<size_t> chosen_index;
    std::vector<double>   entropies;   // per window; empty unless computed
};

// The full combination rule. `with_entropies` additionally reports per-window
// entropies for tracing (always computed for entropy_vote).
CombineResult combine_traced(const StepScores & scores, const NbceParams & params,
                             uint64_t draw = 0, bool with_entropies = false);

LogProbVector combine(const StepScores & scores, const NbceParams & params, uint64_t draw = 0);

// Smallest index attaining the maximum.
size_t argmax(const LogProbVector & v);

const char * pooling_name(PoolingKind kind);
std::optional<PoolingKind> pooling_from_name(const std::string & name);

}  // namespace nbce
