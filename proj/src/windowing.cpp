#include "nbce/windowing.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nbce/random.hpp"

namespace nbce {

static size_t count_occurrences(const std::string & hay, const std::string & needle) {
    size_t count = 0;
    for (size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + needle.size())) {
        ++count;
    }
    return count;
}

static std::string substitute(std::string pattern, const std::string & placeholder,
                              const std::string & value) {
    const size_t pos = pattern.find(placeholder);
    if (pos == std::string::npos) {
        throw missing_placeholder_error(placeholder);
    }
    pattern.replace(pos, placeholder.size(), value);
    return pattern;
}

void validate_template(const PromptTemplate & tmpl) {
    if (count_occurrences(tmpl.demo_pattern, "{input}") != 1) {
        throw missing_placeholder_error("{input} (exactly once in demo_pattern)");
    }
    if (count_occurrences(tmpl.demo_pattern, "{label}") != 1) {
        throw missing_placeholder_error("{label} (exactly once in demo_pattern)");
    }
    if (tmpl.query_pattern.find("{input}") == std::string::npos) {
        throw missing_placeholder_error("{input} (in query_pattern)");
    }
}

std::string render_demo(const PromptTemplate & tmpl, const Demonstration & demo) {
    return substitute(substitute(tmpl.demo_pattern, "{input}", demo.input_text), "{label}",
                      demo.label_text);
}

std::string render_query(const PromptTemplate & tmpl, const std::string & test_input) {
    if (test_input.empty()) {
        std::fprintf(stderr, "nbce: warning: rendering query with empty input\n");
    }
    return substitute(tmpl.query_pattern, "{input}", test_input);
}

static std::string join_demos(const PromptTemplate & tmpl,
                              const std::vector<Demonstration> & demos) {
    std::string out;
    for (size_t i = 0; i < demos.size(); ++i) {
        if (i > 0) {
            out += tmpl.demo_separator;
        }
        out += render_demo(tmpl, demos[i]);
    }
    return out;
}

PackingPlan pack(const std::vector<Demonstration> & demos, const PromptTemplate & tmpl,
                 const TokenCounter & count_tokens, int budget, int window_count) {
    validate_template(tmpl);
    if (window_count < 1) {
        throw insufficient_demos_error("window count must be >= 1");
    }
    if (demos.empty()) {
        throw insufficient_demos_error("no demonstrations to pack");
    }
    if (static_cast<int>(demos.size()) < window_count) {
        throw insufficient_demos_error("need at least " + std::to_string(window_count) +
                                       " demonstrations for " + std::to_string(window_count) +
                                       " windows, got " + std::to_string(demos.size()));
    }
    for (size_t i = 0; i < demos.size(); ++i) {
        if (demos[i].input_text.empty() || demos[i].label_text.empty()) {
            throw nbce_error("demonstration " + std::to_string(i) + " has an empty input or label");
        }
        const int t = count_tokens(render_demo(tmpl, demos[i]));
        if (t > budget) {
            throw demo_too_large_error(i, t, budget);
        }
    }

    PackingPlan plan;
    plan.window_count = window_count;
    plan.separator = tmpl.demo_separator;
    plan.windows.resize(window_count);
    for (auto & w : plan.windows) {
        w.budget = budget;
    }

    for (size_t i = 0; i < demos.size(); ++i) {
        ContextWindow & w = plan.windows[i % window_count];
        std::vector<Demonstration> attempt = w.demos;
        attempt.push_back(demos[i]);
        const std::string rendered = join_demos(tmpl, attempt);
        const int tokens = count_tokens(rendered);
        if (tokens <= budget) {
            w.demos = std::move(attempt);
            w.rendered_text = rendered;
            w.token_count = tokens;
        } else {
            plan.leftover.push_back(demos[i]);
        }
    }

    for (const auto & w : plan.windows) {
        plan.shots_per_window = std::max(plan.shots_per_window, static_cast<int>(w.demos.size()));
    }
    return plan;
}

std::vector<std::vector<Demonstration>> sample_demo_sets(
    const std::vector<Demonstration> & train_pool, int set_count, uint64_t seed, int set_size) {
    if (set_size < 0 || static_cast<size_t>(set_size) > train_pool.size()) {
        throw pool_too_small_error("cannot sample " + std::to_string(set_size) + " demos from a pool of " +
                                   std::to_string(train_pool.size()));
    }
    std::vector<std::vector<Demonstration>> sets;
    sets.reserve(static_cast<size_t>(set_count));
    for (int j = 0; j < set_count; ++j) {
        auto rng = make_rng(seed, static_cast<uint64_t>(j));
        // partial Fisher-Yates over indices
        std::vector<size_t> idx(train_pool.size());
        for (size_t i = 0; i < idx.size(); ++i) {
            idx[i] = i;
        }
        std::vector<Demonstration> set;
        set.reserve(static_cast<size_t>(set_size));
        for (int i = 0; i < set_size; ++i) {
            const size_t pick = i + bounded_rand(rng, idx.size() - i);
            std::swap(idx[i], idx[pick]);
            set.push_back(train_pool[idx[i]]);
        }
        sets.push_back(std::move(set));
    }
    return sets;
}

std::string unescape_template_value(const std::string & raw) {
    std::string out;
    out.reserve(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == '\\' && i + 1 < raw.size()) {
            switch (raw[i + 1]) {
                case 'n':  out += '\n'; ++i; continue;
                case 't':  out += '\t'; ++i; continue;
                case '\\': out += '\\'; ++i; continue;
                default: break;
            }
        }
        out += raw[i];
    }
    return out;
}

PromptTemplate load_template(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw nbce_error("cannot open template file: " + path);
    }
    PromptTemplate tmpl;
    tmpl.demo_separator.clear();
    bool have_separator = false;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw nbce_error("bad template line (expected key=value): " + line);
        }
        const std::string key = line.substr(0, eq);
        const std::string value = unescape_template_value(line.substr(eq + 1));
        if (key == "demo_pattern") {
            tmpl.demo_pattern = value;
        } else if (key == "query_pattern") {
            tmpl.query_pattern = value;
        } else if (key == "demo_separator") {
            tmpl.demo_separator = value;
            have_separator = true;
        } else if (key == "labels") {
            tmpl.label_set.clear();
            std::stringstream ss(value);
            std::string label;
            while (std::getline(ss, label, ',')) {
                tmpl.label_set.push_back(label);
            }
        } else {
            throw nbce_error("unknown template key: " + key);
        }
    }
    if (!have_separator) {
        tmpl.demo_separator = "\n";
    }
    validate_template(tmpl);
    return tmpl;
}

}  // namespace nbce
