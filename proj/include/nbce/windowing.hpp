#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nbce/errors.hpp"

// Packs a demonstration set into equal-budget context windows and renders
// prompts from templates. Token counts are model-specific, so the counting
// function is injected (the backend supplies it).

namespace nbce {

struct Demonstration {
    std::string input_text;
    std::string label_text;

    bool operator==(const Demonstration &) const = default;
};

struct PromptTemplate {
    std::string demo_pattern;   // contains {input} and {label} exactly once
    std::string query_pattern;  // contains {input}; ends where the label begins
    std::string demo_separator = "\n";
    std::vector<std::string> label_set;
};

// One packed group of demonstrations. Demos are whole; none is split across
// windows.
struct ContextWindow {
    std::vector<Demonstration> demos;
    std::string rendered_text;
    int token_count = 0;
    int budget = 0;
};

struct PackingPlan {
    std::vector<ContextWindow> windows;
    int window_count = 0;     // B
    int shots_per_window = 0; // K: the largest shot count across windows
    std::vector<Demonstration> leftover;
    std::string separator;    // the separator the windows were rendered with
};

using TokenCounter = std::function<int(const std::string &)>;

std::string render_demo(const PromptTemplate & tmpl, const Demonstration & demo);

// query_pattern with {input} substituted; the text appended to every window
// for scoring. Throws missing_placeholder_error if the pattern lacks {input}.
std::string render_query(const PromptTemplate & tmpl, const std::string & test_input);

// Round-robin packing: demo i goes to window i mod B, in input order. Demos
// that would push their window past `budget` tokens go to leftover. A single
// demo larger than the whole budget is an error (demo_too_large_error with
// its index); fewer demos than B is insufficient_demos_error.
PackingPlan pack(const std::vector<Demonstration> & demos, const PromptTemplate & tmpl,
                 const TokenCounter & count_tokens, int budget, int window_count);

// set_count independent samples of set_size demos each, without replacement
// within a set. Fully determined by seed; set j of a run is identical to set
// j of any longer run with the same seed.
std::vector<std::vector<Demonstration>> sample_demo_sets(
    const std::vector<Demonstration> & train_pool, int set_count, uint64_t seed, int set_size);

// Template file format: key=value lines (demo_pattern, query_pattern,
// demo_separator, labels), values keep exact text with \n and \t escapes
// honored; labels are comma-separated in label_set order.
PromptTemplate load_template(const std::string & path);
std::string unescape_template_value(const std::string & raw);

void validate_template(const PromptTemplate & tmpl);

}  // namespace nbce
