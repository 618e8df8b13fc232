#include "nbce/mock_backend.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace nbce {

using json = nlohmann::json;

void MockModelSpec::validate() const {
    if (vocab.empty() || vocab.size() > 64) {
        throw nbce_error("mock vocab must have 1..64 tokens");
    }
    if (suffix_len < 1 || suffix_len > 2) {
        throw nbce_error("mock suffix_len must be 1 or 2");
    }
    auto check_row = [&](const std::vector<double> & row, const std::string & what) {
        if (row.size() != vocab.size()) {
            throw nbce_error("mock row '" + what + "' has size " + std::to_string(row.size()) +
                             ", vocab is " + std::to_string(vocab.size()));
        }
        double sum = 0.0;
        for (double p : row) {
            if (p < 0.0 || std::isnan(p)) {
                throw nbce_error("mock row '" + what + "' has a negative or NaN probability");
            }
            sum += p;
        }
        if (std::fabs(sum - 1.0) > 1e-12) {
            throw nbce_error("mock row '" + what + "' sums to " + std::to_string(sum));
        }
    };
    check_row(default_row, "default_row");
    for (const auto & [key, row] : table) {
        check_row(row, key);
    }
}

MockBackend::MockBackend(MockModelSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
}

std::vector<std::string> MockBackend::split_tokens(const std::string & text) const {
    std::vector<std::string> tokens;
    std::stringstream ss(text);
    std::string tok;
    while (ss >> tok) {
        tokens.push_back(tok);
    }
    return tokens;
}

int MockBackend::token_id(const std::string & token) const {
    for (size_t i = 0; i < spec_.vocab.size(); ++i) {
        if (spec_.vocab[i] == token) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

int MockBackend::count_tokens(const std::string & text) const {
    return static_cast<int>(split_tokens(text).size());
}

std::vector<int> MockBackend::tokenize(const std::string & text) const {
    std::vector<int> ids;
    for (const auto & tok : split_tokens(text)) {
        const int id = token_id(tok);
        if (id < 0) {
            throw nbce_error("token not in mock vocab: '" + tok + "'");
        }
        ids.push_back(id);
    }
    return ids;
}

std::string MockBackend::append_text(int token_id) const {
    if (token_id < 0 || static_cast<size_t>(token_id) >= spec_.vocab.size()) {
        throw nbce_error("token id out of range: " + std::to_string(token_id));
    }
    return " " + spec_.vocab[token_id];
}

const std::vector<double> & MockBackend::row_for(const std::vector<std::string> & tokens) const {
    const int max_len = std::min<int>(spec_.suffix_len, static_cast<int>(tokens.size()));
    for (int len = max_len; len >= 1; --len) {
        std::string key;
        for (size_t i = tokens.size() - len; i < tokens.size(); ++i) {
            if (!key.empty()) {
                key += ' ';
            }
            key += tokens[i];
        }
        const auto it = spec_.table.find(key);
        if (it != spec_.table.end()) {
            return it->second;
        }
    }
    return spec_.default_row;
}

ScoreResponse MockBackend::score_next_token(const ScoreRequest & req) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto tokens = split_tokens(req.prompt);
    if (static_cast<int>(tokens.size()) > spec_.max_context) {
        throw context_overflow_error("prompt has " + std::to_string(tokens.size()) +
                                     " tokens, mock max context is " + std::to_string(spec_.max_context));
    }
    {
        std::lock_guard<std::mutex> lock(log_mutex_);
        ++calls_;
        prompts_.push_back(req.prompt);
    }
    const auto & row = row_for(tokens);
    ScoreResponse resp;
    resp.logprobs.resize(row.size());
    for (size_t i = 0; i < row.size(); ++i) {
        resp.logprobs[i] = row[i] > 0.0 ? std::log(row[i]) : -std::numeric_limits<double>::infinity();
    }
    resp.model_id = spec_.name;
    resp.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return resp;
}

std::vector<ScoreResult> MockBackend::score_batch(const std::vector<ScoreRequest> & reqs) {
    // sequential map, so batching is transparent bit-for-bit
    std::vector<ScoreResult> out;
    out.reserve(reqs.size());
    for (const auto & req : reqs) {
        ScoreResult slot;
        try {
            slot.response = score_next_token(req);
        } catch (const context_overflow_error & e) {
            slot.error = ScoreErrorKind::context_overflow;
            slot.message = e.what();
        }
        out.push_back(std::move(slot));
    }
    return out;
}

uint64_t MockBackend::call_count() const {
    std::lock_guard<std::mutex> lock(log_mutex_);
    return calls_;
}

std::vector<std::string> MockBackend::recorded_prompts() const {
    std::lock_guard<std::mutex> lock(log_mutex_);
    return prompts_;
}

void MockBackend::clear_log() {
    std::lock_guard<std::mutex> lock(log_mutex_);
    calls_ = 0;
    prompts_.clear();
}

MockModelSpec load_mock_spec(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw nbce_error("cannot open mock spec: " + path);
    }
    json j = json::parse(in);
    MockModelSpec spec;
    spec.vocab = j.at("vocab").get<std::vector<std::string>>();
    spec.suffix_len = j.value("suffix_len", 2);
    spec.default_row = j.at("default_row").get<std::vector<double>>();
    if (j.contains("table")) {
        for (const auto & [key, row] : j.at("table").items()) {
            spec.table[key] = row.get<std::vector<double>>();
        }
    }
    spec.max_context = j.value("max_context", 4096);
    spec.name = j.value("name", std::string("mock"));
    spec.validate();
    return spec;
}

std::string mock_spec_to_json(const MockModelSpec & spec) {
    json j;
    j["vocab"] = spec.vocab;
    j["suffix_len"] = spec.suffix_len;
    j["default_row"] = spec.default_row;
    j["table"] = json::object();
    for (const auto & [key, row] : spec.table) {
        j["table"][key] = row;
    }
    j["max_context"] = spec.max_context;
    j["name"] = spec.name;
    return j.dump(2);
}

}  // namespace nbce
