#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nbce {

struct nbce_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// core_math
struct all_zero_probability_error : nbce_error {
    all_zero_probability_error() : nbce_error("all entries are -inf (zero total probability mass)") {}
};
struct not_normalized_error : nbce_error {
    explicit not_normalized_error(double logsumexp)
        : nbce_error("vector is not normalized: logsumexp = " + std::to_string(logsumexp)) {}
};
struct empty_windows_error : nbce_error {
    empty_windows_error() : nbce_error("step scores contain no context windows") {}
};
struct dimension_mismatch_error : nbce_error {
    using nbce_error::nbce_error;
};

// windowing
struct demo_too_large_error : nbce_error {
    explicit demo_too_large_error(std::size_t idx, int tokens, int budget)
        : nbce_error("demonstration " + std::to_string(idx) + " needs " + std::to_string(tokens) +
                     " tokens, budget is " + std::to_string(budget)),
          index(idx) {}
    std::size_t index;
};
struct insufficient_demos_error : nbce_error {
    using nbce_error::nbce_error;
};
struct pool_too_small_error : nbce_error {
    using nbce_error::nbce_error;
};
struct missing_placeholder_error : nbce_error {
    explicit missing_placeholder_error(const std::string & placeholder)
        : nbce_error("pattern is missing required placeholder " + placeholder) {}
};

// backend
struct context_overflow_error : nbce_error {
    using nbce_error::nbce_error;
};
struct backend_unavailable_error : nbce_error {
    using nbce_error::nbce_error;
};
struct truncated_vocab_error : nbce_error {
    using nbce_error::nbce_error;
};

// stats
struct degenerate_samples_error : nbce_error {
    using nbce_error::nbce_error;
};

}  // namespace nbce
