#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mas/backend.hpp"
#include "mas/graph.hpp"
#include "mas/ledger.hpp"
#include "mas/protocol.hpp"
#include "mas/retriever.hpp"
#include "mas/subagents.hpp"

namespace mas {

class UnresolvedPlaceholder : public std::runtime_error {
public:
    explicit UnresolvedPlaceholder(const std::string& id)
        : std::runtime_error("UnresolvedPlaceholder: ${" + id + "}"), id_(id) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

// "Original task: <original>; Current Sub-task: <sub>", or the original when sub is empty.
std::string compose_subtask(const std::string& original, const std::string& sub_input);

// Replaces every ${id} with results[id] in one pass; substituted text is not
// rescanned. Unknown ids throw in strict mode and stay literal otherwise (and
// are appended to `unresolved` when given).
std::string substitute_placeholders(const std::string& text, const std::map<std::string, std::string>& results,
                                    bool strict = true, std::vector<std::string>* unresolved = nullptr);

enum class TraceStatus { Ok, ParseError, ValidationError, BackendError, Incomplete };

std::string_view to_string(TraceStatus s);
TraceStatus trace_status_from_string(std::string_view s);

struct NodeResult {
    std::string agent_id;
    std::string agent_name;
    std::string input_text;
    std::string thinking;
    std::string answer;
    std::size_t calls_made = 0;
    std::size_t retrievals = 0;
    CostLedger ledger;
    bool incomplete = false;
    std::string error;  // non-empty when the node failed
    // Logical clock: a node's start_seq is greater than every predecessor's end_seq.
    std::uint64_t start_seq = 0;
    std::uint64_t end_seq = 0;

    // Content equality; schedule-dependent fields (seqs, wall time) are ignored.
    bool same_outcome(const NodeResult& o) const;
};

// Reward annotation attached by the evaluation harness.
struct TraceScore {
    std::vector<std::string> gold;
    std::vector<std::string> predictions;
    std::vector<bool> per_answer;
    bool judged = true;
    bool overall = false;
    double reward = 0.0;
    std::string failure;  // "", ParseError, ValidationError, ExecError or WrongAnswer
    std::optional<std::string> axis;
    std::optional<int> axis_value;
};

struct ExecutionTrace {
    std::string task_id;
    DomLevel dom = DomLevel::High;
    int sample_index = 0;
    std::string orchestration_text;
    nlohmann::json plan;  // structured plan; null when parsing failed
    std::vector<NodeResult> node_results;  // execution (topological) order
    std::string final_answer;
    CostLedger ledger;
    std::optional<GraphStats> stats;
    TraceStatus status = TraceStatus::Ok;
    std::string error;
    std::vector<std::string> warnings;
    std::int64_t elapsed_us = 0;  // end to end, unlike ledger.wall_time_us
    std::optional<TraceScore> score;
};

struct ExecConfig {
    bool parallel = true;  // run independent ready nodes concurrently
    std::size_t concurrency_limit = 128;
    DataflowMode dataflow = DataflowMode::Strict;
    AgentConfig agent{};
    const PriceTable* prices = nullptr;
    const Retriever* retriever = nullptr;
    // Shared limiter across executions; a private one of concurrency_limit is used when null.
    CallLimiter* limiter = nullptr;
};

ExecutionTrace execute(const LowDomDecision& decision, const std::string& task, ChatBackend& backend,
                       const ExecConfig& cfg = {});
ExecutionTrace execute(const OrchestrationGraph& graph, const std::string& task, ChatBackend& backend,
                       const ExecConfig& cfg = {});
// Direct answers short-circuit; graph plans are validated first.
ExecutionTrace execute(const HighDomPlan& plan, const std::string& task, ChatBackend& backend,
                       const ExecConfig& cfg = {});

// Parse, validate and execute raw orchestrator text. Never throws: every
// failure is reported through the trace status.
ExecutionTrace run_orchestration(const std::string& orchestration_text, DomLevel dom, const std::string& task,
                                 const std::string& task_id, ChatBackend& backend, const ExecConfig& cfg = {});

nlohmann::json plan_to_json(const LowDomDecision& decision);
nlohmann::json plan_to_json(const HighDomPlan& plan);
nlohmann::json graph_to_json(const OrchestrationGraph& graph);
nlohmann::json agent_spec_to_json(const AgentSpec& spec);

void to_json(nlohmann::json& j, const GraphStats& s);
void from_json(const nlohmann::json& j, GraphStats& s);
void to_json(nlohmann::json& j, const NodeResult& n);
void from_json(const nlohmann::json& j, NodeResult& n);
void to_json(nlohmann::json& j, const TraceScore& s);
void from_json(const nlohmann::json& j, TraceScore& s);
void to_json(nlohmann::json& j, const ExecutionTrace& t);
void from_json(const nlohmann::json& j, ExecutionTrace& t);

}  // namespace mas
