#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mas/backend.hpp"
#include "mas/bench.hpp"
#include "mas/executor.hpp"
#include "mas/prompts.hpp"
#include "mas/reward.hpp"

namespace mas {

struct OrchestratorTask {
    std::string id;
    std::string question;
};

// Produces one orchestration text per call. Must not keep state between calls.
class OrchestratorBackend {
public:
    virtual ~OrchestratorBackend() = default;
    virtual std::string propose(const OrchestratorTask& task, DomLevel dom, const std::string& prompt_profile,
                                int sample_index) = 0;
    virtual std::string describe() const = 0;
};

// Plan library in JSON lines: {"task_id": "...", "proposals": ["...", ...]}.
// A task_id of "*" applies to tasks without their own entry. Sample i gets
// proposals[i % size].
class ScriptedOrchestrator : public OrchestratorBackend {
public:
    ScriptedOrchestrator() = default;
    static std::shared_ptr<ScriptedOrchestrator> load(const std::string& path);
    void add(const std::string& task_id, std::vector<std::string> proposals);
    std::string propose(const OrchestratorTask& task, DomLevel dom, const std::string& prompt_profile,
                        int sample_index) override;
    std::string describe() const override { return "scripted"; }

private:
    std::map<std::string, std::vector<std::string>> library_;
};

// Samples orchestrations from a chat model using the prompt templates.
class ChatOrchestrator : public OrchestratorBackend {
public:
    ChatOrchestrator(ChatBackend& backend, PromptSet prompts, std::string subagent_model, std::uint64_t seed,
                     double temperature = 1.0, int max_tokens = 4096);
    std::string propose(const OrchestratorTask& task, DomLevel dom, const std::string& prompt_profile,
                        int sample_index) override;
    std::string describe() const override;

private:
    ChatBackend& backend_;
    PromptSet prompts_;
    std::string subagent_model_;
    std::uint64_t seed_;
    double temperature_;
    int max_tokens_;
};

struct ScoreOptions {
    RewardMode mode = RewardMode::Binary;
    ChatBackend* judge = nullptr;  // external judge; exact match when null
};

// Attaches a TraceScore. Failures before execution finishes score 0 with the
// stage recorded. Throws JudgeUnavailable when the external judge fails.
TraceScore score_trace(const ExecutionTrace& trace, const BenchInstance& instance, const ScoreOptions& opts = {});

struct RolloutItem {
    std::string orchestration_text;
    double reward = 0.0;
    double advantage = 0.0;
    std::string trace_ref;
};

struct RolloutGroup {
    std::string task_id;
    int k = 0;
    std::vector<RolloutItem> items;
};

nlohmann::json to_json(const RolloutGroup& g);
RolloutGroup rollout_group_from_json(const nlohmann::json& j);

struct RunOptions {
    DomLevel dom = DomLevel::High;
    std::string prompt_profile = "default";
    ScoreOptions scoring{};
    ExecConfig exec{};
    // Tasks evaluated concurrently; results are placed by index either way.
    std::size_t task_workers = 1;
    // Extra proposals tried when a proposal or its judgment fails outright.
    int max_refills = 8;
};

struct GroupResult {
    RolloutGroup group;
    std::vector<ExecutionTrace> traces;
};

// Samples K orchestrations, runs and scores each, and normalizes rewards
// within the group. K < 2 throws GroupTooSmall; a group where every proposal
// failed to arrive throws BackendError.
GroupResult collect_group(const BenchInstance& task, OrchestratorBackend& orchestrator, ChatBackend& subagents, int k,
                          const RunOptions& opts = {});

struct CellStats {
    std::size_t tasks = 0;
    std::size_t samples = 0;
    double accuracy = 0.0;  // mean over tasks of the per-task mean reward
};

struct RunReport {
    int n = 0;
    std::size_t tasks = 0;
    std::size_t samples = 0;
    double accuracy_avg_at_n = 0.0;
    std::map<std::string, CellStats> per_axis;
    std::map<std::string, std::map<int, CellStats>> per_axis_value;
    std::map<std::size_t, std::size_t> num_agents;
    std::map<std::size_t, std::size_t> sequential_length;
    std::map<std::size_t, std::size_t> parallel_width;
    std::map<std::string, std::size_t> failures;
    std::map<std::string, std::size_t> statuses;
    CostLedger ledger;
};

// Pure fold over scored traces; traces without a score count as reward 0.
// Task grouping uses task_id, so the input order does not matter.
RunReport build_report(const std::vector<ExecutionTrace>& traces);
nlohmann::json to_json(const RunReport& r);
std::string render_report(const RunReport& r);

struct EvalResult {
    RunReport report;
    std::vector<ExecutionTrace> traces;  // task-major, sample-minor
};

// n independent samples per task; per-task failures are recorded in the
// traces and never abort the run.
EvalResult evaluate_avg_at_n(const std::vector<BenchInstance>& tasks, OrchestratorBackend& orchestrator,
                             ChatBackend& subagents, int n = 8, const RunOptions& opts = {});

// Cost and structure totals per agent kind plus the overall fold.
struct CostRow {
    std::string name;
    std::size_t instances = 0;  // node executions, or traces for the total row
    CostLedger ledger;
};

struct CostSummary {
    std::size_t traces = 0;
    CostLedger total;
    std::vector<CostRow> by_agent;
    std::map<std::size_t, std::size_t> num_agents;
    std::map<std::size_t, std::size_t> sequential_length;
    std::map<std::size_t, std::size_t> parallel_width;
};

CostSummary summarize_costs(const std::vector<ExecutionTrace>& traces);
nlohmann::json to_json(const CostSummary& s);
std::string render_cost_table(const CostSummary& s);

}  // namespace mas
