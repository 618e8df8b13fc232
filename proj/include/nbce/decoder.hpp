#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nbce/backend.hpp"
#include "nbce/logprob.hpp"
#include "nbce/windowing.hpp"

// Autoregressive generation that applies the combination rule at every step.
// Each step issues one request per window (window + query + generated prefix)
// plus a context-free request (query + prefix, no demonstrations), coalesced
// into a single batch.

namespace nbce {

enum class DecodeStrategy { greedy, sample };

struct DecodeConfig {
    DecodeStrategy strategy = DecodeStrategy::greedy;
    double temperature = 1.0;  // sampling only
    double top_p = 1.0;        // sampling only
    int max_new_tokens = 16;
    std::set<int> stop_tokens;
    uint64_t seed = 0;         // sampling only
};

struct StepTrace {
    std::optional<size_t> chosen_window_index;  // which window pooling selected
    std::vector<double> entropy_per_window;
    double combined_argmax_logprob = 0.0;
};

enum class FinishReason { max_tokens, stop_token, context_overflow };

struct DecodeTrace {
    std::vector<int> tokens;          // generated token ids; stop token excluded
    std::vector<StepTrace> per_step;  // one entry per generated token
    FinishReason finish_reason = FinishReason::max_tokens;
    std::string overflow_message;     // set when finish_reason == context_overflow
};

// Scores one step: n window-conditioned prompts plus the context-free prompt,
// with every returned vector renormalized. `suffix` is the already-generated
// text. Throws on any failed slot.
StepScores collect_step_scores(const PackingPlan & windows, const std::string & query,
                               const std::string & suffix, Backend & backend);

// Temperature scaling followed by nucleus filtering. temperature=1, top_p=1
// returns the input unchanged.
LogProbVector apply_sampling_filter(const LogProbVector & v, double temperature, double top_p);

// Runs the decode loop. Mid-decode context overflow aborts with the partial
// trace rather than truncating a window.
DecodeTrace decode(const PackingPlan & windows, const std::string & query,
                   const NbceParams & params, const DecodeConfig & cfg, Backend & backend);

}  // namespace nbce
