#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>

#include "mas/backend.hpp"
#include "mas/bench.hpp"
#include "mas/executor.hpp"
#include "mas/jsonl.hpp"
#include "mas/ledger.hpp"
#include "mas/prompts.hpp"
#include "mas/retriever.hpp"
#include "mas/rollout.hpp"
#include "mas/util.hpp"

namespace fs = std::filesystem;
using namespace mas;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string dom_level = "high";
    std::string backend_config_path;
    std::string template_dir;
    std::size_t concurrency_limit = 128;
    bool strict_dataflow = true;
    std::string price_table_path;
    std::uint64_t seed = 0;
    std::string output_dir = ".";
    std::string orchestrator_library;
    std::string orchestrator_backend_path;
    std::string corpus_path;
    std::size_t task_workers = 1;
    bool sequential = false;

    nlohmann::json to_json() const {
        return {{"dom_level", dom_level},
                {"backend_config_path", backend_config_path},
                {"template_dir", template_dir},
                {"concurrency_limit", concurrency_limit},
                {"strict_dataflow", strict_dataflow},
                {"price_table_path", price_table_path},
                {"seed", seed},
                {"output_dir", output_dir},
                {"orchestrator_library", orchestrator_library},
                {"orchestrator_backend_path", orchestrator_backend_path},
                {"corpus_path", corpus_path},
                {"task_workers", task_workers},
                {"sequential", sequential}};
    }

    void check() const {
        if (concurrency_limit < 1) throw UsageError("concurrency_limit must be at least 1");
        if (!dom_level_from_string(dom_level)) throw UsageError("unknown dom_level: " + dom_level);
        for (const auto& p : {backend_config_path, template_dir, price_table_path, orchestrator_library,
                              orchestrator_backend_path, corpus_path}) {
            if (!p.empty() && !fs::exists(p)) throw UsageError("path does not exist: " + p);
        }
    }
};

std::vector<int> parse_values(const std::string& text) {
    std::vector<int> out;
    for (const auto& part : split(text, ',')) {
        auto t = trim(part);
        if (t.empty()) continue;
        try {
            std::size_t used = 0;
            int v = std::stoi(t, &used);
            if (used != t.size()) throw std::invalid_argument(t);
            out.push_back(v);
        } catch (const std::exception&) {
            throw UsageError("bad axis value: " + t);
        }
    }
    if (out.empty()) throw UsageError("no axis values given");
    return out;
}

std::vector<BenchInstance> load_instances(const std::string& path) {
    std::vector<BenchInstance> out;
    for (const auto& rec : read_jsonl(path).records) out.push_back(bench_instance_from_json(rec));
    return out;
}

std::vector<ExecutionTrace> load_traces(const std::vector<std::string>& paths) {
    std::vector<ExecutionTrace> out;
    for (const auto& p : paths) {
        for (const auto& rec : read_jsonl(p).records) out.push_back(rec.get<ExecutionTrace>());
    }
    return out;
}

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return nlohmann::json::parse(in);
}

std::string out_path(const RunConfig& cfg, const std::string& explicit_path, const std::string& name) {
    if (!explicit_path.empty()) return explicit_path;
    fs::create_directories(cfg.output_dir);
    return (fs::path(cfg.output_dir) / name).string();
}

// Everything a run/eval/rollout command needs, built from the config.
struct Pipeline {
    std::unique_ptr<ChatBackend> subagents;
    std::unique_ptr<ChatBackend> orchestrator_chat;
    std::shared_ptr<OrchestratorBackend> orchestrator;
    std::optional<PriceTable> prices;
    std::optional<Bm25Retriever> retriever;
    std::unique_ptr<CallLimiter> limiter;
    RunOptions options;
    std::string template_hash;

    explicit Pipeline(const RunConfig& cfg) {
        BackendConfig bc;
        if (!cfg.backend_config_path.empty()) {
            bc = BackendConfig::from_json(load_json(cfg.backend_config_path),
                                          fs::path(cfg.backend_config_path).parent_path().string());
        }
        subagents = make_backend(bc, derive_seed(cfg.seed, "backend-jitter"));
        if (!cfg.orchestrator_library.empty()) {
            orchestrator = ScriptedOrchestrator::load(cfg.orchestrator_library);
        } else if (!cfg.orchestrator_backend_path.empty()) {
            if (cfg.template_dir.empty()) throw UsageError("a chat orchestrator needs template_dir");
            auto oc = BackendConfig::from_json(load_json(cfg.orchestrator_backend_path),
                                               fs::path(cfg.orchestrator_backend_path).parent_path().string());
            orchestrator_chat = make_backend(oc, derive_seed(cfg.seed, "backend-jitter"));
            auto prompts = PromptSet::load(cfg.template_dir);
            template_hash = prompts.content_hash();
            orchestrator = std::make_shared<ChatOrchestrator>(*orchestrator_chat, std::move(prompts), subagents->model(),
                                                              derive_seed(cfg.seed, "orchestrator-sampling"));
        } else {
            throw UsageError("set orchestrator_library or orchestrator_backend_path");
        }
        if (!cfg.template_dir.empty() && template_hash.empty()) template_hash = PromptSet::load(cfg.template_dir).content_hash();
        if (!cfg.price_table_path.empty()) prices = PriceTable::load(cfg.price_table_path);
        if (!cfg.corpus_path.empty()) retriever = Bm25Retriever::load(cfg.corpus_path);
        limiter = std::make_unique<CallLimiter>(cfg.concurrency_limit);
        options.dom = *dom_level_from_string(cfg.dom_level);
        options.task_workers = cfg.task_workers;
        options.exec.parallel = !cfg.sequential;
        options.exec.concurrency_limit = cfg.concurrency_limit;
        options.exec.dataflow = cfg.strict_dataflow ? DataflowMode::Strict : DataflowMode::Lenient;
        options.exec.prices = prices ? &*prices : nullptr;
        options.exec.retriever = retriever ? &*retriever : nullptr;
        options.exec.limiter = limiter.get();
    }
};

nlohmann::json header_for(const std::string& command, const RunConfig& cfg, nlohmann::json extra) {
    extra["command"] = command;
    extra["config"] = cfg.to_json();
    extra["bench_template_version"] = kBenchTemplateVersion;
    return extra;
}

int cmd_gen(const RunConfig& cfg, const std::string& axis_name, const std::string& values_text, int count,
            std::uint64_t salt, double split_ratio, std::optional<std::int64_t> modulus, const std::string& profile,
            const std::string& out_file) {
    GenConfig gc;
    gc.modulus = modulus;
    const auto gen_seed = derive_seed(cfg.seed, "gen");
    std::vector<BenchInstance> instances;
    if (!profile.empty()) {
        if (profile != "published") throw UsageError("unknown profile: " + profile);
        instances = generate_profile(published_profile(), gen_seed, salt, split_ratio, gc);
    } else {
        if (axis_name.empty()) throw UsageError("--axis or --profile is required");
        auto axis = axis_from_string(axis_name);
        if (!axis) throw UsageError("unknown axis: " + axis_name);
        if (count < 1) throw UsageError("--count must be positive");
        auto values = parse_values(values_text);
        auto [lo, hi] = axis_range(*axis);
        for (int v : values) {
            if (v < lo || v > hi) throw UsageError("value " + std::to_string(v) + " outside the supported range");
        }
        for (int v : values) {
            for (int i = 0; i < count; ++i) {
                auto inst = generate(*axis, v, derive_seed(gen_seed, std::to_string(v) + ":" + std::to_string(i)), gc);
                inst.split = assign_split(inst, salt, split_ratio);
                instances.push_back(std::move(inst));
            }
        }
    }
    for (const auto& inst : instances) {
        if (measure_axis(inst) != inst.axis_value) {
            throw std::runtime_error("axis fidelity check failed for " + inst.instance_id);
        }
    }
    auto path = out_path(cfg, out_file, "instances.jsonl");
    JsonlWriter w(path, header_for("gen", cfg,
                                   {{"axis", axis_name}, {"values", values_text}, {"count", count}, {"salt", salt},
                                    {"split_ratio", split_ratio}, {"profile", profile},
                                    {"modulus", modulus ? nlohmann::json(*modulus) : nlohmann::json(nullptr)}}));
    std::map<std::string, std::size_t> cells;
    for (const auto& inst : instances) {
        w.write(to_json(inst));
        ++cells[std::string(to_string(inst.axis)) + " " + std::to_string(inst.axis_value) + " " +
                std::string(to_string(inst.split))];
    }
    std::cerr << "wrote " << instances.size() << " instances to " << path << "\n";
    for (const auto& [cell, n] : cells) std::cerr << "  " << cell << ": " << n << "\n";
    return 0;
}

std::vector<BenchInstance> filter_split(std::vector<BenchInstance> v, const std::string& split_name) {
    if (split_name.empty() || split_name == "all") return v;
    if (split_name != "train" && split_name != "test") throw UsageError("split must be train, test or all");
    std::vector<BenchInstance> out;
    for (auto& i : v) {
        if (to_string(i.split) == split_name) out.push_back(std::move(i));
    }
    return out;
}

int cmd_eval(const std::string& name, const RunConfig& cfg, const std::string& instances_path,
             const std::vector<std::string>& trace_paths, int n, const std::string& split_name,
             const std::string& out_file, const std::string& report_file) {
    std::vector<ExecutionTrace> traces;
    if (!trace_paths.empty()) {
        traces = load_traces(trace_paths);
    } else {
        if (instances_path.empty()) throw UsageError("--instances is required");
        if (n < 1) throw UsageError("--n must be at least 1");
        Pipeline p(cfg);
        auto tasks = filter_split(load_instances(instances_path), split_name);
        std::cerr << name << ": " << tasks.size() << " tasks x " << n << " samples\n";
        auto trace_path = out_path(cfg, out_file, name == "run" ? "traces.jsonl" : "eval_traces.jsonl");
        JsonlWriter w(trace_path, header_for(name, cfg, {{"n", n}, {"instances", instances_path},
                                                         {"template_hash", p.template_hash},
                                                         {"orchestrator", p.orchestrator->describe()}}));
        std::size_t done = 0;
        for (const auto& task : tasks) {
            auto res = evaluate_avg_at_n({task}, *p.orchestrator, *p.subagents, n, p.options);
            for (auto& t : res.traces) {
                w.write(t);
                traces.push_back(std::move(t));
            }
            if (++done % 10 == 0 || done == tasks.size()) std::cerr << "  " << done << "/" << tasks.size() << "\n";
        }
    }
    if (name == "run") return 0;
    auto report = build_report(traces);
    auto rp = out_path(cfg, report_file, "report.json");
    std::ofstream(rp) << nlohmann::json{{"header", header_for("eval", cfg, {{"n", n}})}, {"report", to_json(report)}}.dump(2)
                      << "\n";
    std::cout << render_report(report);
    return 0;
}

int cmd_rollout(const RunConfig& cfg, const std::string& instances_path, int k, const std::string& split_name,
                const std::string& out_file, const std::string& traces_file) {
    if (instances_path.empty()) throw UsageError("--instances is required");
    if (k < 2) throw UsageError("--k must be at least 2");
    Pipeline p(cfg);
    auto tasks = filter_split(load_instances(instances_path), split_name);
    auto header = header_for("rollout", cfg, {{"k", k}, {"instances", instances_path}, {"template_hash", p.template_hash}});
    JsonlWriter groups(out_path(cfg, out_file, "groups.jsonl"), header);
    JsonlWriter traces(out_path(cfg, traces_file, "rollout_traces.jsonl"), header);
    std::size_t failed = 0;
    for (const auto& task : tasks) {
        try {
            auto g = collect_group(task, *p.orchestrator, *p.subagents, k, p.options);
            for (const auto& t : g.traces) traces.write(t);
            groups.write(to_json(g.group));
        } catch (const BackendError& e) {
            ++failed;
            std::cerr << "  " << task.instance_id << ": " << e.what() << "\n";
        }
    }
    std::cerr << "rollout: " << tasks.size() - failed << " groups of " << k << ", " << failed << " failed\n";
    return failed == tasks.size() && !tasks.empty() ? kExitRuntime : 0;
}

int cmd_stats(const RunConfig& cfg, const std::vector<std::string>& trace_paths, const std::string& out_file) {
    if (trace_paths.empty()) throw UsageError("--traces is required");
    auto summary = summarize_costs(load_traces(trace_paths));
    if (!out_file.empty()) {
        std::ofstream(out_file) << nlohmann::json{{"header", header_for("stats", cfg, {})}, {"stats", to_json(summary)}}.dump(2)
                                << "\n";
    }
    std::cout << render_cost_table(summary);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent orchestration toolkit: benchmark generation, execution, evaluation and rollouts"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "Flat key = value config file (keys match the long option names)");

    RunConfig cfg;
    app.add_option("--dom-level,--dom_level", cfg.dom_level, "Degree of MAS: low or high");
    app.add_option("--backend-config,--backend_config_path", cfg.backend_config_path, "Sub-agent backend JSON");
    app.add_option("--template-dir,--template_dir", cfg.template_dir, "Orchestrator prompt templates");
    app.add_option("--concurrency-limit,--concurrency_limit", cfg.concurrency_limit, "Max in-flight backend calls");
    app.add_option("--strict-dataflow,--strict_dataflow", cfg.strict_dataflow, "Reject edge/placeholder mismatches");
    app.add_option("--price-table,--price_table_path", cfg.price_table_path, "Per-model prices JSON");
    app.add_option("--seed", cfg.seed, "Root seed");
    app.add_option("--output-dir,--output_dir", cfg.output_dir, "Directory for output files");
    app.add_option("--orchestrator-library,--orchestrator_library", cfg.orchestrator_library, "Scripted plan library");
    app.add_option("--orchestrator-backend,--orchestrator_backend_path", cfg.orchestrator_backend_path,
                   "Orchestrator chat backend JSON");
    app.add_option("--corpus,--corpus_path", cfg.corpus_path, "Search corpus (JSON lines)");
    app.add_option("--task-workers,--task_workers", cfg.task_workers, "Tasks evaluated concurrently");
    app.add_flag("--sequential", cfg.sequential, "Run graph nodes one at a time");

    auto* gen = app.add_subcommand("gen", "Generate benchmark instances");
    std::string axis, values = "2", profile, gen_out;
    int count = 1;
    std::uint64_t salt = 0;
    double split_ratio = 0.2;
    std::optional<std::int64_t> modulus;
    gen->add_option("--axis", axis, "depth, horizon, breadth, parallel or robustness");
    gen->add_option("--values", values, "Comma-separated axis values");
    gen->add_option("--count", count, "Instances per value");
    gen->add_option("--salt", salt, "Split hash salt");
    gen->add_option("--split-ratio", split_ratio, "Fraction of templates assigned to test")->check(CLI::Range(0.0, 1.0));
    gen->add_option("--modulus", modulus, "Evaluate operations modulo this prime");
    gen->add_option("--profile", profile, "Preset cell counts (published)");
    gen->add_option("--out", gen_out, "Output file");

    std::string instances, split_name = "all", run_out, report_out, groups_out, traces_out;
    std::vector<std::string> trace_inputs;
    int n = 8, k = 32, run_n = 1;

    auto* run = app.add_subcommand("run", "Execute one sample per instance and write traces");
    run->add_option("--instances", instances, "Instance file");
    run->add_option("--n", run_n, "Samples per instance");
    run->add_option("--split", split_name, "train, test or all");
    run->add_option("--out", run_out, "Trace file");

    auto* eval = app.add_subcommand("eval", "avg@n evaluation report");
    eval->add_option("--instances", instances, "Instance file");
    eval->add_option("--traces", trace_inputs, "Existing trace files (skips execution)");
    eval->add_option("--n", n, "Samples per instance");
    eval->add_option("--split", split_name, "train, test or all");
    eval->add_option("--out", run_out, "Trace file");
    eval->add_option("--report", report_out, "Report file");

    auto* rollout = app.add_subcommand("rollout", "Collect K-sample groups with advantages");
    rollout->add_option("--instances", instances, "Instance file");
    rollout->add_option("--k", k, "Group size");
    rollout->add_option("--split", split_name, "train, test or all");
    rollout->add_option("--out", groups_out, "Group file");
    rollout->add_option("--traces-out", traces_out, "Trace file");

    auto* stats = app.add_subcommand("stats", "Cost and structure tables from trace files");
    stats->add_option("--traces", trace_inputs, "Trace files")->required();
    stats->add_option("--out", report_out, "JSON output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        cfg.check();
        if (gen->parsed()) return cmd_gen(cfg, axis, values, count, salt, split_ratio, modulus, profile, gen_out);
        if (run->parsed()) return cmd_eval("run", cfg, instances, {}, run_n, split_name, run_out, "");
        if (eval->parsed()) return cmd_eval("eval", cfg, instances, trace_inputs, n, split_name, run_out, report_out);
        if (rollout->parsed()) return cmd_rollout(cfg, instances, k, split_name, groups_out, traces_out);
        if (stats->parsed()) return cmd_stats(cfg, trace_inputs, report_out);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const BenchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == BenchErrorKind::UnsupportedAxisValue ? kExitUsage : kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
