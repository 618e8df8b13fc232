#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "nbce/backend.hpp"

// Deterministic table-driven backend used as the test oracle substrate.
// Tokenization is whitespace splitting against a small vocab; scoring looks
// up the last `suffix_len` prompt tokens in the conditional table, falling
// back to shorter suffixes and finally to default_row, so the model is a
// total function of the prompt.

namespace nbce {

struct MockModelSpec {
    std::vector<std::string> vocab;                       // size <= 64
    int suffix_len = 2;                                   // m <= 2
    std::map<std::string, std::vector<double>> table;     // key: suffix tokens joined by ' '
    std::vector<double> default_row;                      // covers missing keys and empty prompts
    int max_context = 4096;
    std::string name = "mock";

    void validate() const;  // rows sum to 1 within 1e-12, sizes match
};

// JSON round-trip for --mock-spec files:
// {"vocab": [...], "suffix_len": 2, "table": {"a b": [...]}, "default_row": [...],
//  "max_context": N, "name": "..."}
MockModelSpec load_mock_spec(const std::string & path);
std::string mock_spec_to_json(const MockModelSpec & spec);

class MockBackend : public Backend {
public:
    explicit MockBackend(MockModelSpec spec);

    ScoreResponse score_next_token(const ScoreRequest & req) override;
    std::vector<ScoreResult> score_batch(const std::vector<ScoreRequest> & reqs) override;

    size_t vocab_size() const override { return spec_.vocab.size(); }
    int max_context_tokens() const override { return spec_.max_context; }
    std::string model_id() const override { return spec_.name; }

    int count_tokens(const std::string & text) const override;
    std::vector<int> tokenize(const std::string & text) const override;  // throws on out-of-vocab words
    std::string append_text(int token_id) const override;

    std::vector<std::string> split_tokens(const std::string & text) const;
    int token_id(const std::string & token) const;  // -1 when out of vocab

    // call log, for step-count and batching assertions
    uint64_t call_count() const;
    std::vector<std::string> recorded_prompts() const;
    void clear_log();

private:
    const std::vector<double> & row_for(const std::vector<std::string> & tokens) const;

    MockModelSpec spec_;
    mutable std::mutex log_mutex_;
    uint64_t calls_ = 0;
    std::vector<std::string> prompts_;
};

}  // namespace nbce
