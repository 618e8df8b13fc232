#pragma once

#include <string>
#include <vector>

#include "nbce/errors.hpp"
#include "nbce/logprob.hpp"

// Uniform contract for obtaining full next-token log-prob vectors from a
// language model. An empty prompt requests the context-free distribution
// (what the backend does with it - empty input or a lone BOS - is its call).

namespace nbce {

struct ScoreRequest {
    std::string prompt;
    bool want_full_vocab = true;
};

struct ScoreResponse {
    LogProbVector logprobs;  // natural log, normalized within 1e-4 by the backend
    std::string model_id;
    double latency_ms = 0.0;
    bool approximate = false;  // set when rebuilt from a truncated top-k response
};

enum class ScoreErrorKind {
    none,
    context_overflow,
    backend_unavailable,
    truncated_vocab,
};

// One slot of a batched call. Errors are positional; a failed slot never
// poisons its neighbours.
struct ScoreResult {
    ScoreResponse response;
    ScoreErrorKind error = ScoreErrorKind::none;
    std::string message;

    bool ok() const { return error == ScoreErrorKind::none; }
};

class Backend {
public:
    virtual ~Backend() = default;

    // Full-vocabulary log-prob vector for the next token after the prompt.
    // Throws context_overflow_error / backend_unavailable_error /
    // truncated_vocab_error.
    virtual ScoreResponse score_next_token(const ScoreRequest & req) = 0;

    // Positionally aligned with the requests; semantically identical to
    // sequential score_next_token calls.
    virtual std::vector<ScoreResult> score_batch(const std::vector<ScoreRequest> & reqs);

    virtual size_t vocab_size() const = 0;
    virtual int max_context_tokens() const = 0;
    virtual std::string model_id() const = 0;

    virtual int count_tokens(const std::string & text) const = 0;
    virtual std::vector<int> tokenize(const std::string & text) const = 0;
    // Text to append when token `id` is generated after an existing prompt.
    virtual std::string append_text(int token_id) const = 0;
};

// Throw the exception matching a failed slot.
[[noreturn]] void raise_score_error(const ScoreResult & result);

}  // namespace nbce
