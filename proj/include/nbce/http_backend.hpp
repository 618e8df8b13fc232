#pragma once

#include <string>
#include <vector>

#include "nbce/backend.hpp"

// Client for a local inference server that exposes full next-token log-probs.
//
// Wire contract (JSON over HTTP):
//   POST /score       {"prompt": str, "full_logprobs": true, "bos_only": bool}
//                  -> {"model_id": str, "logprobs": [float|null, ...]}
//                     (null stands for -inf; JSON cannot carry infinities)
//                  or {"model_id": str, "vocab_size": int,
//                      "top_logprobs": [{"id": int, "logprob": float}, ...]}
//   POST /tokenize    {"text": str}   -> {"ids": [int, ...]}
//   POST /detokenize  {"ids": [int]}  -> {"text": str}
//   GET  /health                      -> {"status": "ok", "model_id": str,
//                                         "vocab_size": int, "max_context": int}
// Application errors come back as HTTP 4xx with
//   {"error": {"code": "context_overflow" | ..., "message": str}}.

namespace nbce {

struct HttpBackendConfig {
    std::string base_url;          // e.g. http://127.0.0.1:8080
    std::string auth_header_name = "Authorization";
    std::string auth_token;        // sent as "Bearer <token>" when non-empty
    int timeout_ms = 30000;
    int max_attempts = 3;          // idempotent requests only
    int backoff_initial_ms = 250;  // doubles per retry
    bool bos_for_empty = true;     // send bos_only for the context-free prompt
    bool allow_truncated = false;  // rebuild full vectors from top-k responses
    int jobs = 4;                  // concurrent requests in score_batch

    // NBCE_BACKEND_URL / NBCE_BACKEND_TOKEN / NBCE_TIMEOUT_MS
    static HttpBackendConfig from_env();
};

class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig cfg);

    ScoreResponse score_next_token(const ScoreRequest & req) override;
    std::vector<ScoreResult> score_batch(const std::vector<ScoreRequest> & reqs) override;

    size_t vocab_size() const override { return vocab_size_; }
    int max_context_tokens() const override { return max_context_; }
    std::string model_id() const override { return model_id_; }

    int count_tokens(const std::string & text) const override;
    std::vector<int> tokenize(const std::string & text) const override;
    std::string append_text(int token_id) const override;

private:
    std::string post_json(const std::string & path, const std::string & body) const;

    HttpBackendConfig cfg_;
    std::string model_id_;
    size_t vocab_size_ = 0;
    int max_context_ = 0;
};

}  // namespace nbce
