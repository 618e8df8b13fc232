#include "nbce/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "nbce/decoder.hpp"

namespace nbce {

using json = nlohmann::json;

// score_label draws for random pooling: example index spaces the streams so
// every example (and every label position within it) gets its own draw.
static constexpr uint64_t k_draw_stride = 65537;

double score_label(const PackingPlan & windows, const std::string & query,
                   const std::vector<int> & label_tokens, const NbceParams & params,
                   Backend & backend, const ScoreOptions & opts, uint64_t draw_base) {
    if (label_tokens.empty()) {
        throw dimension_mismatch_error("label has no tokens");
    }
    double total = 0.0;
    std::string suffix;
    for (size_t t = 0; t < label_tokens.size(); ++t) {
        const StepScores scores = collect_step_scores(windows, query, suffix, backend);
        const auto res = combine_traced(scores, params, draw_base + t);
        const auto & v = opts.raw_scores ? res.raw : res.combined;
        const size_t id = static_cast<size_t>(label_tokens[t]);
        if (id >= v.size()) {
            throw dimension_mismatch_error("label token id out of vocab range");
        }
        total += v[id];
        suffix += backend.append_text(label_tokens[t]);
    }
    if (opts.length_normalize) {
        total /= static_cast<double>(label_tokens.size());
    }
    return total;
}

std::string classify(const PackingPlan & windows, const PromptTemplate & tmpl,
                     const std::string & input, const std::vector<std::string> & candidates,
                     const NbceParams & params, Backend & backend,
                     const ScoreOptions & opts, uint64_t draw_base) {
    if (candidates.empty()) {
        throw dimension_mismatch_error("no candidate labels");
    }
    const std::string query = render_query(tmpl, input);
    size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < candidates.size(); ++i) {
        const auto tokens = backend.tokenize(candidates[i]);
        const double s = score_label(windows, query, tokens, params, backend, opts, draw_base);
        if (s > best_score) {  // ties keep the earliest candidate
            best_score = s;
            best = i;
        }
    }
    return candidates[best];
}

static int derive_shots_per_window(const std::vector<Demonstration> & pool,
                                   const PromptTemplate & tmpl, Backend & backend, int budget,
                                   int window_count) {
    int max_demo_tokens = 1;
    for (const auto & demo : pool) {
        max_demo_tokens = std::max(max_demo_tokens, backend.count_tokens(render_demo(tmpl, demo)));
    }
    const int sep_tokens = backend.count_tokens(tmpl.demo_separator);
    const int fits_budget = budget / (max_demo_tokens + sep_tokens + 1);
    // the seed's sample of B*K demos must also fit the pool
    const int fits_pool = static_cast<int>(pool.size()) / window_count;
    return std::max(1, std::min(fits_budget, fits_pool));
}

static void parallel_for(size_t count, int jobs, const std::function<void(size_t)> & fn) {
    if (jobs <= 1 || count <= 1) {
        for (size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    const size_t nworkers = std::min<size_t>(static_cast<size_t>(jobs), count);
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (size_t w = 0; w < nworkers; ++w) {
        workers.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                if (failed.load()) {
                    return;
                }
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) {
                        first_error = std::current_exception();
                    }
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto & t : workers) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

static double run_one_seed(const EvalDataset & dataset, const PromptTemplate & tmpl,
                           const ExperimentConfig & cfg, uint64_t seed, int shots,
                           int budget, Backend & backend) {
    const int set_size = cfg.window_count * shots;
    const auto demo_set = sample_demo_sets(dataset.train_pool, 1, seed, set_size)[0];
    const PackingPlan plan =
        pack(demo_set, tmpl, [&](const std::string & s) { return backend.count_tokens(s); },
             budget, cfg.window_count);

    size_t count = dataset.examples.size();
    if (cfg.max_eval_examples > 0) {
        count = std::min(count, static_cast<size_t>(cfg.max_eval_examples));
    }
    std::atomic<size_t> correct{0};
    parallel_for(count, cfg.jobs, [&](size_t i) {
        const auto & ex = dataset.examples[i];
        const auto & candidates = ex.candidates.empty() ? tmpl.label_set : ex.candidates;
        const std::string predicted = classify(plan, tmpl, ex.input_text, candidates, cfg.params,
                                               backend, cfg.score, i * k_draw_stride);
        if (predicted == ex.gold_label) {
            correct.fetch_add(1);
        }
    });
    return count == 0 ? 0.0 : static_cast<double>(correct.load()) / static_cast<double>(count);
}

void validate_gold_labels(const std::vector<LabeledExample> & examples,
                          const std::vector<std::string> & label_set) {
    for (size_t i = 0; i < examples.size(); ++i) {
        const auto & ex = examples[i];
        const auto & candidates = ex.candidates.empty() ? label_set : ex.candidates;
        if (std::find(candidates.begin(), candidates.end(), ex.gold_label) == candidates.end()) {
            throw nbce_error("example " + std::to_string(i) + ": gold label '" + ex.gold_label +
                             "' is not among its candidate labels");
        }
    }
}

RunReport run_experiment(const EvalDataset & dataset, const PromptTemplate & tmpl,
                         const ExperimentConfig & cfg, Backend & backend) {
    if (dataset.examples.empty()) {
        throw nbce_error("dataset has no evaluation examples");
    }
    validate_gold_labels(dataset.examples, tmpl.label_set);
    if (cfg.window_count < 1) {
        throw nbce_error("window count must be >= 1");
    }
    if (cfg.seeds.empty()) {
        throw nbce_error("no seeds given");
    }
    if (cfg.params.beta > static_cast<double>(cfg.window_count) - 1.0) {
        std::fprintf(stderr,
                     "nbce: warning: beta=%g exceeds n-1=%d; this leaves the exact "
                     "combination regime\n",
                     cfg.params.beta, cfg.window_count - 1);
    }

    const int model_max = cfg.model_max_override > 0 ? cfg.model_max_override
                                                     : backend.max_context_tokens();
    const int budget = model_max - cfg.query_allowance;
    if (budget <= 0) {
        throw nbce_error("query allowance leaves no window budget");
    }
    const int shots = cfg.shots_per_window > 0
                          ? cfg.shots_per_window
                          : derive_shots_per_window(dataset.train_pool, tmpl, backend, budget,
                                                    cfg.window_count);

    RunReport report;
    report.dataset = dataset.name;
    report.model = backend.model_id();
    report.window_count = cfg.window_count;
    report.shots_per_window = shots;
    report.beta = cfg.params.beta;
    report.pooling = pooling_name(cfg.params.pooling.kind);
    report.seeds = cfg.seeds;
    report.config_fingerprint = config_fingerprint(dataset.name, backend.model_id(), cfg);

    for (uint64_t seed : cfg.seeds) {
        try {
            report.per_seed_accuracy.push_back(
                run_one_seed(dataset, tmpl, cfg, seed, shots, budget, backend));
        } catch (const nbce_error & e) {
            std::fprintf(stderr, "nbce: seed %llu aborted: %s\n",
                         static_cast<unsigned long long>(seed), e.what());
            report.failed_seeds.push_back(seed);
            report.complete = false;
        }
    }
    if (!report.per_seed_accuracy.empty()) {
        report.mean_accuracy = mean(report.per_seed_accuracy);
        report.std_accuracy =
            report.per_seed_accuracy.size() >= 2 ? sample_std(report.per_seed_accuracy) : 0.0;
    }
    return report;
}

std::vector<RunReport> sweep(const EvalDataset & dataset, const PromptTemplate & tmpl,
                             const ExperimentConfig & cfg, const SweepGrid & grid,
                             Backend & backend) {
    if (grid.betas.empty() || grid.poolings.empty()) {
        throw nbce_error("sweep grid is empty");
    }
    std::vector<RunReport> reports;
    for (const auto & pooling : grid.poolings) {
        for (double beta : grid.betas) {
            ExperimentConfig point = cfg;  // shared seeds: paired comparisons
            point.params.beta = beta;
            point.params.pooling = pooling;
            try {
                RunReport report = run_experiment(dataset, tmpl, point, backend);
                if (!reports.empty() && reports.front().per_seed_accuracy.size() >= 2 &&
                    report.per_seed_accuracy.size() >= 2) {
                    try {
                        report.vs_baseline =
                            welch_t_test(report.per_seed_accuracy, reports.front().per_seed_accuracy);
                    } catch (const degenerate_samples_error &) {
                        // both points degenerate (zero variance); leave unset
                    }
                }
                reports.push_back(std::move(report));
            } catch (const nbce_error & e) {
                std::fprintf(stderr, "nbce: sweep point (beta=%g, pooling=%s) failed: %s\n", beta,
                             pooling_name(pooling.kind), e.what());
                RunReport failed;
                failed.dataset = dataset.name;
                failed.beta = beta;
                failed.pooling = pooling_name(pooling.kind);
                failed.window_count = cfg.window_count;
                failed.complete = false;
                reports.push_back(std::move(failed));
            }
        }
    }
    return reports;
}

std::vector<LabeledExample> load_examples_jsonl(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw nbce_error("cannot open dataset: " + path);
    }
    std::vector<LabeledExample> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            json j = json::parse(line);
            LabeledExample ex;
            ex.input_text = j.at("input").get<std::string>();
            ex.gold_label = j.at("label").get<std::string>();
            if (j.contains("candidates")) {
                ex.candidates = j.at("candidates").get<std::vector<std::string>>();
            }
            out.push_back(std::move(ex));
        } catch (const json::exception & e) {
            throw nbce_error(path + ":" + std::to_string(lineno) + ": bad record: " + e.what());
        }
    }
    return out;
}

std::vector<Demonstration> to_demonstrations(const std::vector<LabeledExample> & examples) {
    std::vector<Demonstration> demos;
    demos.reserve(examples.size());
    for (const auto & ex : examples) {
        demos.push_back({ex.input_text, ex.gold_label});
    }
    return demos;
}

static uint64_t fnv1a(const std::string & s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string config_fingerprint(const std::string & dataset, const std::string & model,
                               const ExperimentConfig & cfg) {
    std::string canon = dataset + "|" + model + "|B=" + std::to_string(cfg.window_count) +
                        "|K=" + std::to_string(cfg.shots_per_window) +
                        "|beta=" + std::to_string(cfg.params.beta) +
                        "|pooling=" + pooling_name(cfg.params.pooling.kind) +
                        "|pseed=" + std::to_string(cfg.params.pooling.seed) +
                        "|ln=" + std::to_string(cfg.score.length_normalize) +
                        "|raw=" + std::to_string(cfg.score.raw_scores) + "|seeds=";
    for (uint64_t s : cfg.seeds) {
        canon += std::to_string(s) + ",";
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(canon)));
    return buf;
}

static std::string format_beta(double beta) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", beta);
    return buf;
}

std::string report_table_cell(const RunReport & report) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f ± %.1f", report.mean_accuracy * 100.0,
                  report.std_accuracy * 100.0);
    return buf;
}

std::string report_filename(const RunReport & report) {
    return report.dataset + "_" + std::to_string(report.window_count) + "_" + report.pooling +
           "_" + format_beta(report.beta) + ".report";
}

std::string report_to_json(const RunReport & report) {
    json j;
    j["dataset"] = report.dataset;
    j["model"] = report.model;
    j["B"] = report.window_count;
    j["shots_per_window"] = report.shots_per_window;
    j["beta"] = report.beta;
    j["pooling"] = report.pooling;
    j["seeds"] = report.seeds;
    j["per_seed_accuracy"] = report.per_seed_accuracy;
    j["mean"] = report.mean_accuracy;
    j["std"] = report.std_accuracy;
    j["config_fingerprint"] = report.config_fingerprint;
    j["complete"] = report.complete;
    j["failed_seeds"] = report.failed_seeds;
    j["table"] = report_table_cell(report);
    if (report.vs_baseline) {
        j["significance"] = {
            {"t_statistic", report.vs_baseline->t_statistic},
            {"p_value", report.vs_baseline->p_value},
            {"significant", report.vs_baseline->significant},
        };
    }
    return j.dump(2);
}

}  // namespace nbce
