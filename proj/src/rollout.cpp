#include "mas/rollout.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "mas/jsonl.hpp"
#include "mas/util.hpp"

namespace mas {

std::shared_ptr<ScriptedOrchestrator> ScriptedOrchestrator::load(const std::string& path) {
    auto out = std::make_shared<ScriptedOrchestrator>();
    for (const auto& rec : read_jsonl(path).records) {
        out->add(rec.at("task_id").get<std::string>(), rec.at("proposals").get<std::vector<std::string>>());
    }
    return out;
}

void ScriptedOrchestrator::add(const std::string& task_id, std::vector<std::string> proposals) {
    if (proposals.empty()) throw std::invalid_argument("empty proposal list for " + task_id);
    library_[task_id] = std::move(proposals);
}

std::string ScriptedOrchestrator::propose(const OrchestratorTask& task, DomLevel, const std::string&, int sample_index) {
    auto it = library_.find(task.id);
    if (it == library_.end()) it = library_.find("*");
    if (it == library_.end()) throw BackendError("no scripted proposals for task " + task.id);
    const auto& p = it->second;
    return p[static_cast<std::size_t>(sample_index) % p.size()];
}

ChatOrchestrator::ChatOrchestrator(ChatBackend& backend, PromptSet prompts, std::string subagent_model,
                                   std::uint64_t seed, double temperature, int max_tokens)
    : backend_(backend),
      prompts_(std::move(prompts)),
      subagent_model_(std::move(subagent_model)),
      seed_(seed),
      temperature_(temperature),
      max_tokens_(max_tokens) {}

std::string ChatOrchestrator::propose(const OrchestratorTask& task, DomLevel dom, const std::string& prompt_profile,
                                      int sample_index) {
    auto req = assemble_prompt(prompts_.for_level(dom), task.question, subagent_model_);
    req.temperature = temperature_;
    req.max_tokens = max_tokens_;
    req.sample = sample_index;
    req.seed = derive_seed(seed_, prompt_profile + ":" + task.id + ":" + std::to_string(sample_index));
    return backend_.complete(req).content;
}

std::string ChatOrchestrator::describe() const { return backend_.model() + "@" + prompts_.content_hash(); }

TraceScore score_trace(const ExecutionTrace& trace, const BenchInstance& instance, const ScoreOptions& opts) {
    TraceScore s;
    s.gold = instance.gold;
    s.axis = std::string(to_string(instance.axis));
    s.axis_value = instance.axis_value;
    switch (trace.status) {
        case TraceStatus::ParseError: s.failure = "ParseError"; break;
        case TraceStatus::ValidationError: s.failure = "ValidationError"; break;
        case TraceStatus::BackendError: s.failure = "ExecError"; break;
        case TraceStatus::Ok:
        case TraceStatus::Incomplete: break;
    }
    if (!s.failure.empty()) {
        s.per_answer.assign(s.gold.size(), false);
        return s;
    }
    s.predictions = predictions_from_answer(trace.final_answer);
    Judgment j = opts.judge ? external_judge(s.predictions, s.gold, instance.question, *opts.judge)
                            : judge_exact(s.predictions, s.gold);
    s.per_answer = j.per_answer;
    s.overall = j.overall;
    s.reward = compute_reward(j, opts.mode);
    if (!s.overall) s.failure = "WrongAnswer";
    return s;
}

nlohmann::json to_json(const RolloutGroup& g) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& it : g.items) {
        items.push_back({{"orchestration_text", it.orchestration_text},
                         {"reward", it.reward},
                         {"advantage", it.advantage},
                         {"trace_ref", it.trace_ref}});
    }
    return {{"task_id", g.task_id}, {"K", g.k}, {"items", items}};
}

RolloutGroup rollout_group_from_json(const nlohmann::json& j) {
    RolloutGroup g;
    g.task_id = j.at("task_id").get<std::string>();
    g.k = j.at("K").get<int>();
    for (const auto& it : j.at("items")) {
        g.items.push_back({it.at("orchestration_text").get<std::string>(), it.at("reward").get<double>(),
                           it.at("advantage").get<double>(), it.value("trace_ref", "")});
    }
    return g;
}

namespace {

std::string trace_ref(const std::string& task_id, int sample) { return task_id + "#" + std::to_string(sample); }

ExecutionTrace proposal_failure(const BenchInstance& task, DomLevel dom, int sample, const std::string& what) {
    ExecutionTrace t;
    t.task_id = task.instance_id;
    t.dom = dom;
    t.sample_index = sample;
    t.plan = nullptr;
    t.status = TraceStatus::BackendError;
    t.error = "orchestrator: " + what;
    return t;
}

ExecutionTrace run_sample(const BenchInstance& task, OrchestratorBackend& orchestrator, ChatBackend& subagents,
                          int sample, const RunOptions& opts, bool* unjudged) {
    std::string text;
    try {
        text = orchestrator.propose({task.instance_id, task.question}, opts.dom, opts.prompt_profile, sample);
    } catch (const std::exception& e) {
        auto t = proposal_failure(task, opts.dom, sample, e.what());
        t.score = score_trace(t, task, opts.scoring);
        if (unjudged) *unjudged = true;
        return t;
    }
    auto t = run_orchestration(text, opts.dom, task.question, task.instance_id, subagents, opts.exec);
    t.sample_index = sample;
    try {
        t.score = score_trace(t, task, opts.scoring);
    } catch (const JudgeUnavailable& e) {
        TraceScore s;
        s.gold = task.gold;
        s.axis = std::string(to_string(task.axis));
        s.axis_value = task.axis_value;
        s.judged = false;
        s.per_answer.assign(s.gold.size(), false);
        s.failure = "Unjudged";
        t.score = s;
        t.warnings.push_back(std::string("judge: ") + e.what());
        if (unjudged) *unjudged = true;
    }
    return t;
}

void bump(std::map<std::size_t, std::size_t>& h, std::size_t key) { ++h[key]; }

}  // namespace

GroupResult collect_group(const BenchInstance& task, OrchestratorBackend& orchestrator, ChatBackend& subagents, int k,
                          const RunOptions& opts) {
    if (k < 2) throw GroupTooSmall("group size " + std::to_string(k) + " < 2");
    GroupResult out;
    out.group.task_id = task.instance_id;
    out.group.k = k;
    int sample = 0;
    std::string last_error;
    while (static_cast<int>(out.traces.size()) < k && sample < k + opts.max_refills) {
        bool failed = false;
        auto t = run_sample(task, orchestrator, subagents, sample, opts, &failed);
        ++sample;
        if (failed) {
            last_error = t.error.empty() && !t.warnings.empty() ? t.warnings.back() : t.error;
            continue;
        }
        out.group.items.push_back({t.orchestration_text, t.score->reward, 0.0, trace_ref(task.instance_id, t.sample_index)});
        out.traces.push_back(std::move(t));
    }
    if (static_cast<int>(out.traces.size()) < k) {
        throw BackendError("task " + task.instance_id + ": only " + std::to_string(out.traces.size()) + " of " +
                           std::to_string(k) + " proposals usable; last error: " + last_error);
    }
    std::vector<double> rewards;
    for (const auto& it : out.group.items) rewards.push_back(it.reward);
    auto adv = group_advantages(rewards);
    for (std::size_t i = 0; i < adv.size(); ++i) out.group.items[i].advantage = adv[i];
    return out;
}

RunReport build_report(const std::vector<ExecutionTrace>& traces) {
    RunReport r;
    struct TaskAcc {
        double sum = 0.0;
        std::size_t count = 0;
        std::optional<std::string> axis;
        std::optional<int> value;
    };
    std::map<std::string, TaskAcc> tasks;
    for (const auto& t : traces) {
        auto& acc = tasks[t.task_id];
        ++acc.count;
        if (t.score) {
            acc.sum += t.score->reward;
            if (!acc.axis) acc.axis = t.score->axis;
            if (!acc.value) acc.value = t.score->axis_value;
            if (!t.score->failure.empty()) ++r.failures[t.score->failure];
        } else {
            ++r.failures["Unscored"];
        }
        ++r.statuses[std::string(to_string(t.status))];
        if (t.stats) {
            bump(r.num_agents, t.stats->num_agents);
            bump(r.sequential_length, t.stats->sequential_length);
            bump(r.parallel_width, t.stats->parallel_width);
        }
        r.ledger += t.ledger;
    }
    r.samples = traces.size();
    r.tasks = tasks.size();
    double total = 0.0;
    std::map<std::string, std::pair<double, std::size_t>> axis_sum;
    std::map<std::string, std::map<int, std::pair<double, std::size_t>>> value_sum;
    for (const auto& [id, acc] : tasks) {
        double mean = acc.sum / static_cast<double>(acc.count);
        total += mean;
        r.n = std::max(r.n, static_cast<int>(acc.count));
        if (acc.axis) {
            auto& a = axis_sum[*acc.axis];
            a.first += mean;
            ++a.second;
            auto& ac = r.per_axis[*acc.axis];
            ++ac.tasks;
            ac.samples += acc.count;
            if (acc.value) {
                auto& v = value_sum[*acc.axis][*acc.value];
                v.first += mean;
                ++v.second;
                auto& vc = r.per_axis_value[*acc.axis][*acc.value];
                ++vc.tasks;
                vc.samples += acc.count;
            }
        }
    }
    r.accuracy_avg_at_n = tasks.empty() ? 0.0 : total / static_cast<double>(tasks.size());
    for (auto& [axis, c] : r.per_axis) c.accuracy = axis_sum[axis].first / static_cast<double>(axis_sum[axis].second);
    for (auto& [axis, m] : r.per_axis_value) {
        for (auto& [v, c] : m) c.accuracy = value_sum[axis][v].first / static_cast<double>(value_sum[axis][v].second);
    }
    return r;
}

namespace {

nlohmann::json histogram_json(const std::map<std::size_t, std::size_t>& h) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : h) j[std::to_string(k)] = v;
    return j;
}

nlohmann::json cell_json(const CellStats& c) {
    return {{"tasks", c.tasks}, {"samples", c.samples}, {"accuracy", c.accuracy}};
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string dollars_text(const CostLedger& l) {
    auto d = l.dollars();
    return d ? fmt("%.6f", *d) : "n/a";
}

std::string histogram_text(const std::map<std::size_t, std::size_t>& h) {
    std::vector<std::string> parts;
    for (const auto& [k, v] : h) parts.push_back(std::to_string(k) + ":" + std::to_string(v));
    return parts.empty() ? "-" : join(parts, " ");
}

}  // namespace

nlohmann::json to_json(const RunReport& r) {
    nlohmann::json axes = nlohmann::json::object();
    for (const auto& [a, c] : r.per_axis) {
        auto j = cell_json(c);
        nlohmann::json values = nlohmann::json::object();
        if (auto it = r.per_axis_value.find(a); it != r.per_axis_value.end()) {
            for (const auto& [v, vc] : it->second) values[std::to_string(v)] = cell_json(vc);
        }
        j["values"] = values;
        axes[a] = j;
    }
    return {{"n", r.n},
            {"tasks", r.tasks},
            {"samples", r.samples},
            {"accuracy_avg_at_n", r.accuracy_avg_at_n},
            {"axes", axes},
            {"num_agents", histogram_json(r.num_agents)},
            {"sequential_length", histogram_json(r.sequential_length)},
            {"parallel_width", histogram_json(r.parallel_width)},
            {"failures", r.failures},
            {"statuses", r.statuses},
            {"ledger", r.ledger}};
}

std::string render_report(const RunReport& r) {
    std::ostringstream os;
    os << "avg@" << r.n << " accuracy: " << fmt("%.4f", r.accuracy_avg_at_n) << " over " << r.tasks << " tasks ("
       << r.samples << " samples)\n";
    for (const auto& [a, c] : r.per_axis) {
        os << "  " << a << ": " << fmt("%.4f", c.accuracy) << " (" << c.tasks << " tasks)\n";
        if (auto it = r.per_axis_value.find(a); it != r.per_axis_value.end()) {
            for (const auto& [v, vc] : it->second) {
                os << "    " << v << ": " << fmt("%.4f", vc.accuracy) << " (" << vc.tasks << " tasks)\n";
            }
        }
    }
    os << "agents: " << histogram_text(r.num_agents) << "\n";
    os << "sequential length: " << histogram_text(r.sequential_length) << "\n";
    os << "parallel width: " << histogram_text(r.parallel_width) << "\n";
    os << "failures:";
    for (const auto& [f, c] : r.failures) os << " " << f << "=" << c;
    os << "\ncalls " << r.ledger.llm_calls << ", prompt tokens " << r.ledger.prompt_tokens << ", completion tokens "
       << r.ledger.completion_tokens << ", dollars " << dollars_text(r.ledger) << "\n";
    return os.str();
}

EvalResult evaluate_avg_at_n(const std::vector<BenchInstance>& tasks, OrchestratorBackend& orchestrator,
                             ChatBackend& subagents, int n, const RunOptions& opts) {
    if (n < 1) throw std::invalid_argument("n must be at least 1");
    std::vector<std::vector<ExecutionTrace>> per_task(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            for (int s = 0; s < n; ++s) per_task[i].push_back(run_sample(tasks[i], orchestrator, subagents, s, opts, nullptr));
        }
    };
    std::size_t workers = std::max<std::size_t>(1, std::min(opts.task_workers, tasks.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    EvalResult out;
    for (auto& v : per_task) {
        for (auto& t : v) out.traces.push_back(std::move(t));
    }
    out.report = build_report(out.traces);
    return out;
}

CostSummary summarize_costs(const std::vector<ExecutionTrace>& traces) {
    CostSummary s;
    std::map<std::string, CostRow> rows;
    for (const auto& t : traces) {
        ++s.traces;
        s.total += t.ledger;
        for (const auto& node : t.node_results) {
            auto& row = rows[node.agent_name];
            row.name = node.agent_name;
            ++row.instances;
            row.ledger += node.ledger;
        }
        if (t.stats) {
            bump(s.num_agents, t.stats->num_agents);
            bump(s.sequential_length, t.stats->sequential_length);
            bump(s.parallel_width, t.stats->parallel_width);
        }
    }
    for (auto& [name, row] : rows) s.by_agent.push_back(row);
    return s;
}

nlohmann::json to_json(const CostSummary& s) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : s.by_agent) rows.push_back({{"agent", r.name}, {"instances", r.instances}, {"ledger", r.ledger}});
    return {{"traces", s.traces},
            {"total", s.total},
            {"by_agent", rows},
            {"num_agents", histogram_json(s.num_agents)},
            {"sequential_length", histogram_json(s.sequential_length)},
            {"parallel_width", histogram_json(s.parallel_width)}};
}

std::string render_cost_table(const CostSummary& s) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-16s %8s %8s %12s %12s %12s %12s\n", "agent", "runs", "calls", "prompt_tok",
                  "compl_tok", "wall_s", "dollars");
    os << line;
    auto row = [&](const std::string& name, std::size_t runs, const CostLedger& l) {
        std::snprintf(line, sizeof line, "%-16s %8zu %8llu %12llu %12llu %12.3f %12s\n", name.c_str(), runs,
                      static_cast<unsigned long long>(l.llm_calls), static_cast<unsigned long long>(l.prompt_tokens),
                      static_cast<unsigned long long>(l.completion_tokens), static_cast<double>(l.wall_time_us) / 1e6,
                      dollars_text(l).c_str());
        os << line;
    };
    for (const auto& r : s.by_agent) row(r.name, r.instances, r.ledger);
    row("TOTAL", s.traces, s.total);
    os << "agents: " << histogram_text(s.num_agents) << "\n";
    os << "sequential length: " << histogram_text(s.sequential_length) << "\n";
    os << "parallel width: " << histogram_text(s.parallel_width) << "\n";
    return os.str();
}

}  // namespace mas
