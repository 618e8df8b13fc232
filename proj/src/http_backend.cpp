#include "nbce/http_backend.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace nbce {

using json = nlohmann::json;

HttpBackendConfig HttpBackendConfig::from_env() {
    HttpBackendConfig cfg;
    if (const char * url = std::getenv("NBCE_BACKEND_URL")) {
        cfg.base_url = url;
    }
    if (const char * token = std::getenv("NBCE_BACKEND_TOKEN")) {
        cfg.auth_token = token;
    }
    if (const char * timeout = std::getenv("NBCE_TIMEOUT_MS")) {
        cfg.timeout_ms = std::atoi(timeout);
    }
    return cfg;
}

static httplib::Headers make_headers(const HttpBackendConfig & cfg) {
    httplib::Headers headers;
    if (!cfg.auth_token.empty()) {
        headers.emplace(cfg.auth_header_name, "Bearer " + cfg.auth_token);
    }
    return headers;
}

// httplib::Client is not thread-safe, so each request gets its own.
static httplib::Client make_client(const HttpBackendConfig & cfg) {
    httplib::Client cli(cfg.base_url);
    cli.set_connection_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
    cli.set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
    cli.set_write_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
    return cli;
}

[[noreturn]] static void raise_app_error(int status, const std::string & body) {
    std::string code = "http_" + std::to_string(status);
    std::string message = body;
    try {
        json j = json::parse(body);
        if (j.contains("error")) {
            code = j["error"].value("code", code);
            message = j["error"].value("message", message);
        }
    } catch (const json::exception &) {
        // non-JSON error body, keep raw text
    }
    if (code == "context_overflow") {
        throw context_overflow_error(message);
    }
    throw backend_unavailable_error("server error " + std::to_string(status) + " (" + code + "): " + message);
}

std::string HttpBackend::post_json(const std::string & path, const std::string & body) const {
    const auto headers = make_headers(cfg_);
    std::string last_error;
    int backoff_ms = cfg_.backoff_initial_ms;
    for (int attempt = 0; attempt < std::max(1, cfg_.max_attempts); ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
        auto cli = make_client(cfg_);
        auto res = cli.Post(path, headers, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;  // transport failure, retry
        }
        if (res->status >= 200 && res->status < 300) {
            return res->body;
        }
        if (res->status >= 500) {
            last_error = "status " + std::to_string(res->status);
            continue;  // server-side failure, retry
        }
        raise_app_error(res->status, res->body);  // 4xx: no retry
    }
    throw backend_unavailable_error("POST " + cfg_.base_url + path + " failed after " +
                                    std::to_string(cfg_.max_attempts) + " attempts: " + last_error);
}

HttpBackend::HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) {
        throw backend_unavailable_error("no backend URL configured (set --backend-url or NBCE_BACKEND_URL)");
    }
    auto cli = make_client(cfg_);
    auto res = cli.Get("/health", make_headers(cfg_));
    if (!res || res->status != 200) {
        throw backend_unavailable_error("health check against " + cfg_.base_url + " failed" +
                                        (res ? " with status " + std::to_string(res->status)
                                             : ": " + httplib::to_string(res.error())));
    }
    try {
        json j = json::parse(res->body);
        model_id_ = j.value("model_id", std::string("unknown"));
        vocab_size_ = j.at("vocab_size").get<size_t>();
        max_context_ = j.value("max_context", 0);
    } catch (const json::exception & e) {
        throw backend_unavailable_error(std::string("bad /health response: ") + e.what());
    }
}

static LogProbVector parse_full_logprobs(const json & arr) {
    LogProbVector out;
    out.reserve(arr.size());
    for (const auto & x : arr) {
        out.push_back(x.is_null() ? -std::numeric_limits<double>::infinity() : x.get<double>());
    }
    return out;
}

// Rebuild a full vector from a top-k response: listed ids keep their
// log-probs, the residual mass is spread uniformly over unlisted tokens.
static LogProbVector expand_truncated(const json & top, size_t vocab) {
    LogProbVector out(vocab, 0.0);
    std::vector<bool> listed(vocab, false);
    double mass = 0.0;
    size_t listed_count = 0;
    for (const auto & item : top) {
        const size_t id = item.at("id").get<size_t>();
        const double lp = item.at("logprob").get<double>();
        if (id >= vocab) {
            throw backend_unavailable_error("top_logprobs id out of range");
        }
        out[id] = lp;
        listed[id] = true;
        mass += std::exp(lp);
        ++listed_count;
    }
    const size_t rest = vocab - listed_count;
    const double residual = std::max(1.0 - mass, 0.0);
    const double fill = (rest > 0 && residual > 0.0)
                            ? std::log(residual / static_cast<double>(rest))
                            : -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < vocab; ++i) {
        if (!listed[i]) {
            out[i] = fill;
        }
    }
    return out;
}

ScoreResponse HttpBackend::score_next_token(const ScoreRequest & req) {
    const auto t0 = std::chrono::steady_clock::now();
    json body = {
        {"prompt", req.prompt},
        {"full_logprobs", req.want_full_vocab},
        {"bos_only", req.prompt.empty() && cfg_.bos_for_empty},
    };
    const std::string raw = post_json("/score", body.dump());

    json j;
    try {
        j = json::parse(raw);
    } catch (const json::exception & e) {
        throw backend_unavailable_error(std::string("bad /score response: ") + e.what());
    }

    ScoreResponse resp;
    resp.model_id = j.value("model_id", model_id_);
    if (j.contains("logprobs")) {
        resp.logprobs = parse_full_logprobs(j["logprobs"]);
    } else if (j.contains("top_logprobs")) {
        if (!cfg_.allow_truncated) {
            throw truncated_vocab_error("server returned top-k log-probs only; "
                                        "enable truncated mode to accept approximate vectors");
        }
        const size_t vocab = j.value("vocab_size", vocab_size_);
        resp.logprobs = expand_truncated(j["top_logprobs"], vocab);
        resp.approximate = true;
    } else {
        throw backend_unavailable_error("/score response has neither logprobs nor top_logprobs");
    }
    if (vocab_size_ != 0 && resp.logprobs.size() != vocab_size_) {
        throw backend_unavailable_error("vocab size mismatch: /score returned " +
                                        std::to_string(resp.logprobs.size()) + ", /health advertised " +
                                        std::to_string(vocab_size_));
    }
    resp.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return resp;
}

std::vector<ScoreResult> HttpBackend::score_batch(const std::vector<ScoreRequest> & reqs) {
    std::vector<ScoreResult> out(reqs.size());
    const int jobs = std::max(1, cfg_.jobs);
    std::vector<std::thread> workers;
    std::atomic<size_t> next{0};
    const int worker_count = static_cast<int>(std::min<size_t>(jobs, reqs.size()));
    for (int w = 0; w < worker_count; ++w) {
        workers.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < reqs.size(); i = next.fetch_add(1)) {
                try {
                    out[i].response = score_next_token(reqs[i]);
                } catch (const context_overflow_error & e) {
                    out[i].error = ScoreErrorKind::context_overflow;
                    out[i].message = e.what();
                } catch (const truncated_vocab_error & e) {
                    out[i].error = ScoreErrorKind::truncated_vocab;
                    out[i].message = e.what();
                } catch (const backend_unavailable_error & e) {
                    out[i].error = ScoreErrorKind::backend_unavailable;
                    out[i].message = e.what();
                }
            }
        });
    }
    for (auto & t : workers) {
        t.join();
    }
    return out;
}

int HttpBackend::count_tokens(const std::string & text) const {
    return static_cast<int>(tokenize(text).size());
}

std::vector<int> HttpBackend::tokenize(const std::string & text) const {
    json body = {{"text", text}};
    const std::string raw = post_json("/tokenize", body.dump());
    try {
        return json::parse(raw).at("ids").get<std::vector<int>>();
    } catch (const json::exception & e) {
        throw backend_unavailable_error(std::string("bad /tokenize response: ") + e.what());
    }
}

std::string HttpBackend::append_text(int token_id) const {
    json body = {{"ids", json::array({token_id})}};
    const std::string raw = post_json("/detokenize", body.dump());
    try {
        return json::parse(raw).at("text").get<std::string>();
    } catch (const json::exception & e) {
        throw backend_unavailable_error(std::string("bad /detokenize response: ") + e.what());
    }
}

}  // namespace nbce
