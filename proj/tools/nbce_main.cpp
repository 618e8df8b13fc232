// nbce: context extension by combining next-token distributions from many
// independently encoded context windows.
//
// Subcommands: generate, classify, experiment, sweep, selftest.
// Exit codes: 0 success, 1 usage error, 2 backend failure, 3 selftest failure.
// Option precedence: flags > config file > environment > defaults.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "nbce/decoder.hpp"
#include "nbce/eval.hpp"
#include "nbce/http_backend.hpp"
#include "nbce/logprob.hpp"
#include "nbce/mock_backend.hpp"
#include "nbce/stats.hpp"
#include "nbce/windowing.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace nbce;

namespace {

struct BackendOptions {
    std::string backend_url;
    std::string auth_token;
    int timeout_ms = 30000;
    bool use_mock = false;
    std::string mock_spec_path;
    bool allow_truncated = false;
    bool no_bos_for_empty = false;
    int jobs = 4;
};

struct NbceOptions {
    double beta = 0.25;
    std::string pooling = "entropy";
    uint64_t pooling_seed = 0;
};

// Small self-contained demo model: three windows "w0 w1 w2", of which only
// "w2" starts a deterministic token chain; the others see near-uniform noise.
MockModelSpec builtin_mock_spec() {
    MockModelSpec spec;
    spec.vocab = {"w0", "w1", "w2", "c0", "c1", "c2", "c3", "c4", "c5", "u"};
    spec.suffix_len = 2;
    const size_t vocab = spec.vocab.size();
    auto point_row = [&](size_t target) {
        std::vector<double> row(vocab, 0.003);
        row[target] = 1.0 - 0.003 * static_cast<double>(vocab - 1);
        return row;
    };
    auto noise_row = [&]() {
        std::vector<double> row(vocab, 0.09);
        row[9] = 1.0 - 0.09 * static_cast<double>(vocab - 1);
        return row;
    };
    auto chain_id = [](int i) { return static_cast<size_t>(3 + (i % 6)); };
    spec.default_row = noise_row();
    spec.table["w0"] = noise_row();
    spec.table["w1"] = noise_row();
    spec.table["w2"] = point_row(chain_id(0));
    spec.table["w0 c0"] = noise_row();
    spec.table["w1 c0"] = noise_row();
    spec.table["w2 c0"] = point_row(chain_id(1));
    for (int i = 0; i + 1 < 12; ++i) {
        spec.table[spec.vocab[chain_id(i)] + " " + spec.vocab[chain_id(i + 1)]] =
            point_row(chain_id(i + 2));
    }
    spec.name = "builtin-mock";
    return spec;
}

std::unique_ptr<Backend> make_backend(const BackendOptions & opts) {
    if (!opts.mock_spec_path.empty()) {
        return std::make_unique<MockBackend>(load_mock_spec(opts.mock_spec_path));
    }
    if (opts.use_mock) {
        return std::make_unique<MockBackend>(builtin_mock_spec());
    }
    HttpBackendConfig cfg;
    cfg.base_url = opts.backend_url;
    cfg.auth_token = opts.auth_token;
    cfg.timeout_ms = opts.timeout_ms;
    cfg.allow_truncated = opts.allow_truncated;
    cfg.bos_for_empty = !opts.no_bos_for_empty;
    cfg.jobs = opts.jobs;
    return std::make_unique<HttpBackend>(cfg);
}

PoolingMode make_pooling(const NbceOptions & opts) {
    const auto kind = pooling_from_name(opts.pooling);
    if (!kind) {
        throw nbce_error("unknown pooling '" + opts.pooling + "' (expected avg, entropy or random)");
    }
    PoolingMode mode;
    mode.kind = *kind;
    mode.seed = opts.pooling_seed;
    return mode;
}

std::vector<uint64_t> make_seeds(int seeds, const std::string & seed_list) {
    std::vector<uint64_t> out;
    if (!seed_list.empty()) {
        std::stringstream ss(seed_list);
        std::string item;
        while (std::getline(ss, item, ',')) {
            out.push_back(std::stoull(item));
        }
        return out;
    }
    for (int s = 0; s < seeds; ++s) {
        out.push_back(static_cast<uint64_t>(s));
    }
    return out;
}

std::string read_file(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw nbce_error("cannot open file: " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
        text.pop_back();
    }
    return text;
}

void write_file(const fs::path & path, const std::string & content) {
    std::ofstream out(path);
    if (!out) {
        throw nbce_error("cannot write file: " + path.string());
    }
    out << content;
}

// Every run persists its fully resolved configuration next to its outputs;
// feeding that file back through --config reproduces the run.
void write_resolved_config(CLI::App & app, const std::string & out_dir) {
    if (out_dir.empty()) {
        return;
    }
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "resolved_config.ini", app.config_to_str(true, false));
}

std::string dataset_stem(const std::string & path) {
    return fs::path(path).stem().string();
}

EvalDataset load_dataset(const std::string & dataset_path, const std::string & train_path) {
    EvalDataset ds;
    ds.name = dataset_stem(dataset_path);
    ds.examples = load_examples_jsonl(dataset_path);
    if (!train_path.empty()) {
        ds.train_pool = to_demonstrations(load_examples_jsonl(train_path));
    } else {
        std::fprintf(stderr,
                     "nbce: warning: no --train given; sampling demonstrations from the "
                     "evaluation file\n");
        ds.train_pool = to_demonstrations(ds.examples);
    }
    return ds;
}

json trace_to_json(const DecodeTrace & trace, Backend & backend) {
    json steps = json::array();
    for (size_t t = 0; t < trace.per_step.size(); ++t) {
        const auto & s = trace.per_step[t];
        json step;
        step["token"] = trace.tokens[t];
        step["token_text"] = backend.append_text(trace.tokens[t]);
        if (s.chosen_window_index) {
            step["chosen_window"] = *s.chosen_window_index;
        }
        step["entropy_per_window"] = s.entropy_per_window;
        step["combined_argmax_logprob"] = s.combined_argmax_logprob;
        steps.push_back(std::move(step));
    }
    const char * reason = trace.finish_reason == FinishReason::max_tokens   ? "max_tokens"
                          : trace.finish_reason == FinishReason::stop_token ? "stop_token"
                                                                            : "context_overflow";
    json out;
    out["tokens"] = trace.tokens;
    out["steps"] = std::move(steps);
    out["finish_reason"] = reason;
    if (!trace.overflow_message.empty()) {
        out["overflow_message"] = trace.overflow_message;
    }
    return out;
}

int run_generate(const BackendOptions & bopts, const NbceOptions & nopts,
                 const std::vector<std::string> & window_files, const std::string & query_file,
                 const std::string & query_text, const std::string & separator,
                 DecodeConfig dcfg, const std::string & strategy,
                 const std::vector<int> & stop_tokens, const std::string & out_dir,
                 CLI::App & app) {
    auto backend = make_backend(bopts);
    PackingPlan plan;
    plan.separator = unescape_template_value(separator);
    plan.window_count = static_cast<int>(window_files.size());
    for (const auto & file : window_files) {
        ContextWindow w;
        w.rendered_text = read_file(file);
        w.token_count = backend->count_tokens(w.rendered_text);
        w.budget = backend->max_context_tokens();
        plan.windows.push_back(std::move(w));
    }
    std::string query = query_text;
    if (!query_file.empty()) {
        query = read_file(query_file);
    }

    dcfg.strategy = strategy == "sample" ? DecodeStrategy::sample : DecodeStrategy::greedy;
    dcfg.stop_tokens = std::set<int>(stop_tokens.begin(), stop_tokens.end());

    const NbceParams params{nopts.beta, make_pooling(nopts)};
    if (params.beta > static_cast<double>(plan.window_count) - 1.0) {
        std::fprintf(stderr, "nbce: warning: beta=%g exceeds n-1=%d\n", params.beta,
                     plan.window_count - 1);
    }
    const auto trace = decode(plan, query, params, dcfg, *backend);

    std::string text;
    for (int tok : trace.tokens) {
        text += backend->append_text(tok);
    }
    std::printf("%s\n", text.c_str());
    const json jtrace = trace_to_json(trace, *backend);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "generate_trace.json", jtrace.dump(2));
        write_file(fs::path(out_dir) / "generated.txt", text);
        write_resolved_config(app, out_dir);
    } else {
        std::fprintf(stderr, "%s\n", jtrace.dump(2).c_str());
    }
    return trace.finish_reason == FinishReason::context_overflow ? 2 : 0;
}

int run_classify(const BackendOptions & bopts, const NbceOptions & nopts,
                 const std::string & dataset_path, const std::string & train_path,
                 const std::string & template_path, int B, int shots, int query_allowance,
                 int model_max, uint64_t demo_seed, int max_examples,
                 const std::string & out_dir, CLI::App & app) {
    auto backend = make_backend(bopts);
    const auto ds = load_dataset(dataset_path, train_path);
    const auto tmpl = load_template(template_path);
    validate_gold_labels(ds.examples, tmpl.label_set);

    const int effective_max = model_max > 0 ? model_max : backend->max_context_tokens();
    const int budget = effective_max - query_allowance;
    if (budget <= 0) {
        throw nbce_error("query allowance leaves no window budget");
    }
    const int effective_shots = shots > 0 ? shots : 1;
    const auto demo_set =
        sample_demo_sets(ds.train_pool, 1, demo_seed, B * effective_shots)[0];
    const auto plan = pack(demo_set, tmpl,
                           [&](const std::string & s) { return backend->count_tokens(s); },
                           budget, B);
    const NbceParams params{nopts.beta, make_pooling(nopts)};

    size_t count = ds.examples.size();
    if (max_examples > 0) {
        count = std::min(count, static_cast<size_t>(max_examples));
    }
    size_t correct = 0;
    std::string lines;
    for (size_t i = 0; i < count; ++i) {
        const auto & ex = ds.examples[i];
        const auto & candidates = ex.candidates.empty() ? tmpl.label_set : ex.candidates;
        const auto predicted =
            classify(plan, tmpl, ex.input_text, candidates, params, *backend, {}, i * 65537);
        const bool ok = predicted == ex.gold_label;
        correct += ok;
        json rec = {{"input", ex.input_text}, {"gold", ex.gold_label}, {"predicted", predicted}};
        lines += rec.dump() + "\n";
        std::printf("%s\t%s\t%s\n", ok ? "ok " : "MISS", predicted.c_str(), ex.input_text.c_str());
    }
    const double accuracy = count ? static_cast<double>(correct) / count : 0.0;
    std::printf("accuracy: %.4f (%zu/%zu)\n", accuracy, correct, count);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "predictions.jsonl", lines);
        write_resolved_config(app, out_dir);
    }
    return 0;
}

void print_report(const RunReport & report) {
    std::printf("%-14s B=%d K=%d %-8s beta=%-5g %s", report.dataset.c_str(), report.window_count,
                report.shots_per_window, report.pooling.c_str(), report.beta,
                report_table_cell(report).c_str());
    if (report.vs_baseline) {
        std::printf("  (t=%.3f p=%.4f%s)", report.vs_baseline->t_statistic,
                    report.vs_baseline->p_value, report.vs_baseline->significant ? " *" : "");
    }
    if (!report.complete) {
        std::printf("  [incomplete: %zu failed seed(s)]", report.failed_seeds.size());
    }
    std::printf("\n");
}

void write_report(const RunReport & report, const std::string & out_dir) {
    if (out_dir.empty()) {
        return;
    }
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / report_filename(report), report_to_json(report));
}

int run_experiment_cmd(const BackendOptions & bopts, const std::string & dataset_path,
                       const std::string & train_path, const std::string & template_path,
                       const ExperimentConfig & cfg, const std::string & baseline_report_path,
                       const std::string & out_dir, CLI::App & app) {
    auto backend = make_backend(bopts);
    const auto ds = load_dataset(dataset_path, train_path);
    const auto tmpl = load_template(template_path);

    RunReport report = run_experiment(ds, tmpl, cfg, *backend);
    if (!baseline_report_path.empty()) {
        const json baseline = json::parse(read_file(baseline_report_path));
        const auto other = baseline.at("per_seed_accuracy").get<std::vector<double>>();
        report.vs_baseline = welch_t_test(report.per_seed_accuracy, other);
    }
    print_report(report);
    write_report(report, out_dir);
    write_resolved_config(app, out_dir);
    return report.complete ? 0 : 2;
}

int run_sweep_cmd(const BackendOptions & bopts, const std::string & dataset_path,
                  const std::string & train_path, const std::string & template_path,
                  const ExperimentConfig & cfg, const std::vector<double> & betas,
                  const std::vector<std::string> & poolings, uint64_t pooling_seed,
                  const std::string & out_dir, CLI::App & app) {
    auto backend = make_backend(bopts);
    const auto ds = load_dataset(dataset_path, train_path);
    const auto tmpl = load_template(template_path);

    SweepGrid grid;
    grid.betas = betas;
    for (const auto & name : poolings) {
        const auto kind = pooling_from_name(name);
        if (!kind) {
            throw nbce_error("unknown pooling in --poolings: " + name);
        }
        PoolingMode mode;
        mode.kind = *kind;
        mode.seed = pooling_seed;
        grid.poolings.push_back(mode);
    }
    const auto reports = sweep(ds, tmpl, cfg, grid, *backend);
    for (const auto & report : reports) {
        print_report(report);
        write_report(report, out_dir);
    }
    write_resolved_config(app, out_dir);
    for (const auto & report : reports) {
        if (!report.complete) {
            return 2;
        }
    }
    return 0;
}

// --- selftest ----------------------------------------------------------------
// Compact validation pass over the mock backend with its own long-double
// brute-force evaluator. Exit code 3 when any check fails.

namespace selftest {

int checks = 0;
int failed = 0;

void check(bool ok, const char * what) {
    ++checks;
    if (!ok) {
        ++failed;
        std::printf("FAIL %s\n", what);
    }
}

std::vector<double> brute_normalize(const std::vector<double> & v) {
    long double sum = 0.0L;
    for (double x : v) {
        sum += expl(static_cast<long double>(x));
    }
    const long double z = logl(sum);
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<double>(v[i] - z);
    }
    return out;
}

double brute_entropy(const std::vector<double> & v) {
    long double h = 0.0L;
    for (double x : v) {
        const long double p = expl(static_cast<long double>(x));
        if (p > 0.0L) {
            h -= p * x;
        }
    }
    return static_cast<double>(h);
}

int run() {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> dist(-6.0, 2.0);
    auto random_scores = [&](size_t vocab, size_t n) {
        StepScores s;
        for (size_t k = 0; k < n; ++k) {
            std::vector<double> v(vocab);
            for (auto & x : v) {
                x = dist(rng);
            }
            s.per_window.push_back(normalize(v));
        }
        std::vector<double> cf(vocab);
        for (auto & x : cf) {
            x = dist(rng);
        }
        s.context_free = normalize(cf);
        return s;
    };

    // combination rule vs brute force
    for (int i = 0; i < 200; ++i) {
        const size_t vocab = 2 + rng() % 15;
        const size_t n = 1 + rng() % 4;
        const double beta = (rng() % 2001) / 1000.0;
        const auto s = random_scores(vocab, n);

        std::vector<double> pooled(vocab, 0.0);
        for (size_t j = 0; j < vocab; ++j) {
            long double acc = 0.0L;
            for (const auto & w : s.per_window) {
                acc += w[j];
            }
            pooled[j] = static_cast<double>(acc / static_cast<long double>(n));
        }
        std::vector<double> raw(vocab);
        for (size_t j = 0; j < vocab; ++j) {
            raw[j] = (beta + 1.0) * pooled[j] - beta * s.context_free[j];
        }
        const auto expected = brute_normalize(raw);
        const auto got = combine(s, {beta, PoolingMode::average()});
        bool ok = true;
        for (size_t j = 0; j < vocab; ++j) {
            ok = ok && std::fabs(got[j] - expected[j]) < 1e-9;
        }
        check(ok, "combine matches brute-force average pooling");

        size_t argmin = 0;
        for (size_t k = 1; k < n; ++k) {
            if (brute_entropy(s.per_window[k]) < brute_entropy(s.per_window[argmin])) {
                argmin = k;
            }
        }
        const auto vote = combine_traced(s, {beta, PoolingMode::entropy_vote()});
        check(vote.chosen_index == argmin, "entropy voting picks the brute-force argmin");
    }

    // reduction identity
    for (int i = 0; i < 500; ++i) {
        const auto s = random_scores(2 + rng() % 15, 1);
        check(combine(s, {0.0, PoolingMode::average()}) == normalize(s.per_window[0]),
              "n=1 beta=0 reduces exactly");
    }

    // chain decode audit on the builtin mock
    {
        MockBackend backend(builtin_mock_spec());
        PackingPlan plan;
        plan.window_count = 3;
        plan.separator = " ";
        for (const char * text : {"w0", "w1", "w2"}) {
            ContextWindow w;
            w.rendered_text = text;
            plan.windows.push_back(w);
        }
        DecodeConfig cfg;
        cfg.max_new_tokens = 6;
        const auto trace = decode(plan, "", {0.25, PoolingMode::entropy_vote()}, cfg, backend);
        check(trace.tokens.size() == 6, "decode produced the requested tokens");
        for (size_t t = 0; t < trace.per_step.size(); ++t) {
            const auto & step = trace.per_step[t];
            size_t offline = 0;
            for (size_t k = 1; k < step.entropy_per_window.size(); ++k) {
                if (step.entropy_per_window[k] < step.entropy_per_window[offline]) {
                    offline = k;
                }
            }
            check(step.chosen_window_index == offline, "voting trace is internally consistent");
            check(trace.tokens[t] == static_cast<int>(3 + (t % 6)), "chain token recovered");
        }
        check(backend.call_count() == 6 * 4, "n+1 backend calls per step");
    }

    // statistics
    {
        const std::vector<double> same{0.5, 0.6, 0.7};
        const auto eq = welch_t_test(same, same);
        check(std::fabs(eq.t_statistic) < 1e-12 && std::fabs(eq.p_value - 1.0) < 1e-12,
              "identical samples give t=0 p=1");
        const auto sep = welch_t_test({0.9, 0.91, 0.92}, {0.5, 0.51, 0.49});
        check(sep.significant && sep.p_value < 0.05, "separated samples are significant");
    }

    std::printf("selftest: %d checks, %d failed\n", checks, failed);
    return failed == 0 ? 0 : 3;
}

}  // namespace selftest

}  // namespace

int main(int argc, char ** argv) {
    CLI::App app{"NBCE: context extension by combining per-window next-token distributions"};
    app.set_config("--config", "", "read options from an INI config file");

    // Every subcommand owns its option storage so config-file sections for one
    // subcommand can never leak into another.
    struct DataOptions {
        std::string dataset, train, template_path;
        int B = 3, shots = 0, query_allowance = 128, model_max = 0, max_examples = 0;
        bool length_normalize = false, raw_scores = false;
    };
    struct RunOptions {
        BackendOptions backend;
        NbceOptions nbce;
        std::string out_dir;
        DataOptions data;
        int seeds = 30;
        std::string seed_list;
    };
    RunOptions gen_opts, cls_opts, exp_opts, swp_opts;

    auto add_backend_options = [](CLI::App * cmd, RunOptions & o) {
        cmd->add_option("--backend-url", o.backend.backend_url, "inference server base URL")
            ->envname("NBCE_BACKEND_URL");
        cmd->add_option("--backend-token", o.backend.auth_token, "bearer token for the server")
            ->envname("NBCE_BACKEND_TOKEN");
        cmd->add_option("--timeout-ms", o.backend.timeout_ms, "HTTP timeout in milliseconds")
            ->envname("NBCE_TIMEOUT_MS")
            ->capture_default_str();
        cmd->add_flag("--mock", o.backend.use_mock, "use the built-in mock model");
        cmd->add_option("--mock-spec", o.backend.mock_spec_path, "JSON mock model spec file");
        cmd->add_flag("--allow-truncated", o.backend.allow_truncated,
                      "accept top-k responses, spreading residual mass uniformly");
        cmd->add_flag("--no-bos-for-empty", o.backend.no_bos_for_empty,
                      "send a truly empty context-free prompt instead of BOS-only");
        cmd->add_option("--jobs", o.backend.jobs, "maximum concurrent backend requests")
            ->capture_default_str();
        cmd->add_option("--out", o.out_dir, "output directory (reports, traces, resolved config)");
    };
    auto add_nbce_options = [](CLI::App * cmd, RunOptions & o) {
        cmd->add_option("--beta", o.nbce.beta, "context-free subtraction weight")
            ->check(CLI::NonNegativeNumber)
            ->capture_default_str();
        cmd->add_option("--pooling", o.nbce.pooling, "avg | entropy | random")
            ->capture_default_str();
        cmd->add_option("--pooling-seed", o.nbce.pooling_seed, "seed for random pooling")
            ->capture_default_str();
    };
    auto add_data_options = [](CLI::App * cmd, RunOptions & o) {
        cmd->add_option("--dataset", o.data.dataset, "evaluation examples (JSONL)")->required();
        cmd->add_option("--train", o.data.train,
                        "demonstration pool (JSONL); defaults to --dataset");
        cmd->add_option("--template", o.data.template_path, "prompt template file")->required();
        cmd->add_option("--B", o.data.B, "number of context windows")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd->add_option("--shots", o.data.shots, "demonstrations per window (0 = derive from budget)")
            ->capture_default_str();
        cmd->add_option("--query-allowance", o.data.query_allowance,
                        "tokens reserved for the query and label after each window")
            ->capture_default_str();
        cmd->add_option("--model-max", o.data.model_max, "override the backend's max context length")
            ->capture_default_str();
        cmd->add_option("--max-examples", o.data.max_examples, "cap evaluation examples per seed")
            ->capture_default_str();
        cmd->add_flag("--length-normalize", o.data.length_normalize,
                      "divide label scores by their token count");
        cmd->add_flag("--raw-scores", o.data.raw_scores,
                      "score labels without the final per-step renormalization");
    };

    // generate
    auto * generate = app.add_subcommand("generate", "decode text from pre-rendered windows");
    std::vector<std::string> window_files;
    std::string query_file, query_text, separator = "\\n", strategy = "greedy";
    DecodeConfig dcfg;
    std::vector<int> stop_tokens;
    generate->add_option("--windows", window_files, "window text files (one per window)")
        ->required()
        ->expected(-1);
    generate->add_option("--query", query_file, "file holding the query text");
    generate->add_option("--query-text", query_text, "literal query text");
    generate->add_option("--separator", separator, "separator between window text and query")
        ->capture_default_str();
    generate->add_option("--strategy", strategy, "greedy | sample")->capture_default_str();
    generate->add_option("--temperature", dcfg.temperature, "sampling temperature")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    generate->add_option("--top-p", dcfg.top_p, "nucleus mass")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    generate->add_option("--max-new-tokens", dcfg.max_new_tokens, "generation length cap")
        ->capture_default_str();
    generate->add_option("--stop-token", stop_tokens, "token id(s) that end generation")
        ->run_callback_for_default(false);
    generate->add_option("--seed", dcfg.seed, "sampling seed")->capture_default_str();
    add_backend_options(generate, gen_opts);
    add_nbce_options(generate, gen_opts);

    // classify
    auto * classify_cmd = app.add_subcommand("classify", "classify a dataset with one demo set");
    uint64_t demo_seed = 0;
    add_data_options(classify_cmd, cls_opts);
    classify_cmd->add_option("--demo-seed", demo_seed, "seed for the demonstration sample")
        ->capture_default_str();
    add_backend_options(classify_cmd, cls_opts);
    add_nbce_options(classify_cmd, cls_opts);

    // experiment
    auto * experiment = app.add_subcommand("experiment", "seeded protocol run with a report");
    std::string baseline_report;
    add_data_options(experiment, exp_opts);
    experiment->add_option("--seeds", exp_opts.seeds, "number of seeds (0..N-1)")
        ->capture_default_str();
    experiment->add_option("--seed-list", exp_opts.seed_list,
                           "explicit comma-separated seed list");
    experiment->add_option("--baseline-report", baseline_report,
                           "existing .report file to test significance against");
    add_backend_options(experiment, exp_opts);
    add_nbce_options(experiment, exp_opts);

    // sweep
    auto * sweep_cmd = app.add_subcommand("sweep", "grid of beta x pooling with shared seeds");
    std::vector<double> sweep_betas{0.25, 0.5, 0.75};
    std::vector<std::string> sweep_poolings{"avg", "entropy", "random"};
    add_data_options(sweep_cmd, swp_opts);
    sweep_cmd->add_option("--seeds", swp_opts.seeds, "number of seeds (0..N-1)")
        ->capture_default_str();
    sweep_cmd->add_option("--seed-list", swp_opts.seed_list,
                          "explicit comma-separated seed list");
    sweep_cmd->add_option("--betas", sweep_betas, "beta grid")->capture_default_str();
    sweep_cmd->add_option("--poolings", sweep_poolings, "pooling grid")->capture_default_str();
    add_backend_options(sweep_cmd, swp_opts);
    add_nbce_options(sweep_cmd, swp_opts);

    // selftest
    auto * selftest_cmd = app.add_subcommand("selftest", "validate the engine against the mock");

    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError & e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage errors are exit code 1
    }

    auto build_cfg = [&](const RunOptions & o) {
        ExperimentConfig cfg;
        cfg.window_count = o.data.B;
        cfg.shots_per_window = o.data.shots;
        cfg.query_allowance = o.data.query_allowance;
        cfg.model_max_override = o.data.model_max;
        cfg.seeds = make_seeds(o.seeds, o.seed_list);
        cfg.params = NbceParams{o.nbce.beta, make_pooling(o.nbce)};
        cfg.jobs = o.backend.jobs;
        cfg.max_eval_examples = o.data.max_examples;
        cfg.score.length_normalize = o.data.length_normalize;
        cfg.score.raw_scores = o.data.raw_scores;
        return cfg;
    };

    try {
        if (generate->parsed()) {
            return run_generate(gen_opts.backend, gen_opts.nbce, window_files, query_file,
                                query_text, separator, dcfg, strategy, stop_tokens,
                                gen_opts.out_dir, app);
        }
        if (classify_cmd->parsed()) {
            return run_classify(cls_opts.backend, cls_opts.nbce, cls_opts.data.dataset,
                                cls_opts.data.train, cls_opts.data.template_path, cls_opts.data.B,
                                cls_opts.data.shots, cls_opts.data.query_allowance,
                                cls_opts.data.model_max, demo_seed, cls_opts.data.max_examples,
                                cls_opts.out_dir, app);
        }
        if (experiment->parsed()) {
            return run_experiment_cmd(exp_opts.backend, exp_opts.data.dataset, exp_opts.data.train,
                                      exp_opts.data.template_path, build_cfg(exp_opts),
                                      baseline_report, exp_opts.out_dir, app);
        }
        if (sweep_cmd->parsed()) {
            return run_sweep_cmd(swp_opts.backend, swp_opts.data.dataset, swp_opts.data.train,
                                 swp_opts.data.template_path, build_cfg(swp_opts), sweep_betas,
                                 sweep_poolings, swp_opts.nbce.pooling_seed, swp_opts.out_dir, app);
        }
        if (selftest_cmd->parsed()) {
            return selftest::run();
        }
    } catch (const backend_unavailable_error & e) {
        std::fprintf(stderr, "nbce: backend failure: %s\n", e.what());
        return 2;
    } catch (const nbce_error & e) {
        std::fprintf(stderr, "nbce: error: %s\n", e.what());
        return 1;
    } catch (const std::exception & e) {
        std::fprintf(stderr, "nbce: error: %s\n", e.what());
        return 1;
    }
    return 0;
}
