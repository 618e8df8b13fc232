#pragma once

// Hand-built mock worlds shared by the decoder/eval tests and the acceptance
// suite.

#include <string>
#include <vector>

#include "nbce/eval.hpp"
#include "nbce/mock_backend.hpp"
#include "nbce/windowing.hpp"

namespace fixtures {

// --- bigram chain world -----------------------------------------------------
//
// Three single-token windows "w0" "w1" "w2". Only w2 starts a deterministic
// chain c0 -> c1 -> ... -> c5 -> c0; w0/w1 see a near-uniform row whose argmax
// is the distractor "u". Once two chain tokens have been generated the suffix
// is window-independent and every window agrees on the chain continuation.

inline std::vector<double> chain_point_row(size_t vocab, size_t target) {
    std::vector<double> row(vocab, 0.003);
    row[target] = 1.0 - 0.003 * static_cast<double>(vocab - 1);
    return row;
}

inline std::vector<double> chain_noise_row(size_t vocab, size_t distractor) {
    std::vector<double> row(vocab, 0.09);
    row[distractor] = 1.0 - 0.09 * static_cast<double>(vocab - 1);
    return row;
}

inline nbce::MockModelSpec chain_spec() {
    nbce::MockModelSpec spec;
    spec.vocab = {"w0", "w1", "w2", "c0", "c1", "c2", "c3", "c4", "c5", "u"};
    spec.suffix_len = 2;
    const size_t vocab = spec.vocab.size();
    const size_t u = 9;
    auto chain_id = [](int i) { return static_cast<size_t>(3 + (i % 6)); };

    spec.default_row = chain_noise_row(vocab, u);
    spec.table["w0"] = chain_noise_row(vocab, u);
    spec.table["w1"] = chain_noise_row(vocab, u);
    spec.table["w2"] = chain_point_row(vocab, chain_id(0));
    spec.table["w0 c0"] = chain_noise_row(vocab, u);
    spec.table["w1 c0"] = chain_noise_row(vocab, u);
    spec.table["w2 c0"] = chain_point_row(vocab, chain_id(1));
    for (int i = 0; i + 1 < 12; ++i) {
        const std::string key = spec.vocab[chain_id(i)] + " " + spec.vocab[chain_id(i + 1)];
        spec.table[key] = chain_point_row(vocab, chain_id(i + 2));
    }
    spec.max_context = 4096;
    spec.name = "chain-mock";
    return spec;
}

inline nbce::PackingPlan chain_plan() {
    nbce::PackingPlan plan;
    plan.window_count = 3;
    plan.shots_per_window = 1;
    plan.separator = " ";
    for (const char * text : {"w0", "w1", "w2"}) {
        nbce::ContextWindow w;
        w.rendered_text = text;
        w.token_count = 1;
        w.budget = 4096;
        plan.windows.push_back(std::move(w));
    }
    return plan;
}

inline constexpr size_t chain_informative_window = 2;

inline std::vector<int> chain_tokens(int count) {
    std::vector<int> out;
    for (int i = 0; i < count; ++i) {
        out.push_back(3 + (i % 6));
    }
    return out;
}

// --- two-class experiment world ----------------------------------------------
//
// Train pool of exactly three one-shot demos; sampling the whole pool per seed
// guarantees one informative window ("wi wi2") and two noise windows per run.
// The informative window resolves the query; noise windows are an exact
// pos/neg tie, so tie-breaking pins their accuracy to 50% on a balanced set.

inline nbce::MockModelSpec experiment_spec() {
    nbce::MockModelSpec spec;
    spec.vocab = {"wa", "wa2", "wb", "wb2", "wi", "wi2", "qpos", "qneg", "pos", "neg"};
    spec.suffix_len = 2;
    const size_t vocab = spec.vocab.size();
    const size_t pos = 8, neg = 9;

    auto informative_row = [&](size_t label) {
        std::vector<double> row(vocab, 0.01);
        row[label] = 0.9;
        row[label == pos ? neg : pos] = 0.02;
        return row;
    };
    auto tie_row = [&]() {
        std::vector<double> row(vocab, 0.0125);
        row[pos] = 0.45;
        row[neg] = 0.45;
        return row;
    };

    spec.default_row = std::vector<double>(vocab, 0.1);
    spec.table["wi2 qpos"] = informative_row(pos);
    spec.table["wi2 qneg"] = informative_row(neg);
    for (const char * marker : {"wa2", "wb2"}) {
        spec.table[std::string(marker) + " qpos"] = tie_row();
        spec.table[std::string(marker) + " qneg"] = tie_row();
    }
    spec.max_context = 4096;
    spec.name = "experiment-mock";
    return spec;
}

inline nbce::PromptTemplate experiment_template() {
    nbce::PromptTemplate tmpl;
    tmpl.demo_pattern = "{input} {label}";
    tmpl.query_pattern = "{input}";
    tmpl.demo_separator = " ";
    tmpl.label_set = {"pos", "neg"};
    return tmpl;
}

inline nbce::EvalDataset experiment_dataset(int eval_examples) {
    nbce::EvalDataset ds;
    ds.name = "mock2class";
    ds.train_pool = {{"wa", "wa2"}, {"wb", "wb2"}, {"wi", "wi2"}};
    for (int i = 0; i < eval_examples; ++i) {
        if (i % 2 == 0) {
            ds.examples.push_back({"qpos", "pos", {}});
        } else {
            ds.examples.push_back({"qneg", "neg", {}});
        }
    }
    return ds;
}

}  // namespace fixtures
