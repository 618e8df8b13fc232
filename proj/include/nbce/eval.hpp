#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nbce/backend.hpp"
#include "nbce/logprob.hpp"
#include "nbce/stats.hpp"
#include "nbce/windowing.hpp"

// Classification / multiple-choice harness: sample a demo set per seed, pack
// it into B windows, score every candidate label through the combination
// rule, aggregate accuracy across seeds.

namespace nbce {

struct LabeledExample {
    std::string input_text;
    std::string gold_label;
    std::vector<std::string> candidates;  // non-empty for multiple-choice
};

struct EvalDataset {
    std::string name;
    std::vector<LabeledExample> examples;       // evaluation split
    std::vector<Demonstration> train_pool;      // demo sampling pool
};

struct ScoreOptions {
    bool length_normalize = false;  // divide the label score by its token count
    bool raw_scores = false;        // skip the final per-step renormalization
};

struct ExperimentConfig {
    int window_count = 3;       // B
    int shots_per_window = 0;   // K; 0 derives a safe value from the budget
    int query_allowance = 128;  // tokens reserved after each window for query + label
    int model_max_override = 0; // 0 = trust backend.max_context_tokens()
    std::vector<uint64_t> seeds;
    NbceParams params;
    ScoreOptions score;
    int jobs = 1;               // concurrent examples within a seed
    int max_eval_examples = 0;  // 0 = all
};

struct RunReport {
    std::string dataset;
    std::string model;
    int window_count = 0;
    int shots_per_window = 0;
    double beta = 0.0;
    std::string pooling;
    std::vector<uint64_t> seeds;
    std::vector<double> per_seed_accuracy;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;  // sample std, n-1
    std::string config_fingerprint;
    bool complete = true;
    std::vector<uint64_t> failed_seeds;
    std::optional<SignificanceResult> vs_baseline;
};

// Sum over label positions of the combined log-prob of each label token,
// conditioned on the windows, the query and the label prefix. No sampling.
// `draw_base` keys random pooling so distinct examples draw distinct windows.
double score_label(const PackingPlan & windows, const std::string & query,
                   const std::vector<int> & label_tokens, const NbceParams & params,
                   Backend & backend, const ScoreOptions & opts = {}, uint64_t draw_base = 0);

// Argmax of score_label over the candidate labels; ties break to the earliest
// candidate.
std::string classify(const PackingPlan & windows, const PromptTemplate & tmpl,
                     const std::string & input, const std::vector<std::string> & candidates,
                     const NbceParams & params, Backend & backend,
                     const ScoreOptions & opts = {}, uint64_t draw_base = 0);

// One full protocol run: per seed, sample a demo set, pack into B windows,
// classify every example; aggregate mean/std across seeds. A seed that hits a
// systematic backend failure is recorded in failed_seeds and the report is
// marked incomplete.
RunReport run_experiment(const EvalDataset & dataset, const PromptTemplate & tmpl,
                         const ExperimentConfig & cfg, Backend & backend);

struct SweepGrid {
    std::vector<double> betas;
    std::vector<PoolingMode> poolings;
};

// One report per grid point, all points sharing cfg.seeds (paired
// comparisons). Points after the first carry a Welch test against the first.
std::vector<RunReport> sweep(const EvalDataset & dataset, const PromptTemplate & tmpl,
                             const ExperimentConfig & cfg, const SweepGrid & grid,
                             Backend & backend);

// Checks every gold label against its candidate set (or the template's label
// set when the example carries none). Throws on the first violation.
void validate_gold_labels(const std::vector<LabeledExample> & examples,
                          const std::vector<std::string> & label_set);

// Line-delimited records: {"input": str, "label": str, "candidates": [str]?}
std::vector<LabeledExample> load_examples_jsonl(const std::string & path);
std::vector<Demonstration> to_demonstrations(const std::vector<LabeledExample> & examples);

std::string report_to_json(const RunReport & report);
// "62.1 ± 4.0"-style cell in percent
std::string report_table_cell(const RunReport & report);
// {dataset}_{B}_{pooling}_{beta}.report
std::string report_filename(const RunReport & report);
std::string config_fingerprint(const std::string & dataset, const std::string & model,
                               const ExperimentConfig & cfg);

}  // namespace nbce
