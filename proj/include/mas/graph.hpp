#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mas/protocol.hpp"

namespace mas {

enum class GraphErrorKind {
    EmptyPlan,
    UndefinedEdgeEndpoint,
    SelfLoop,
    NoStartNode,
    MultipleSinks,
    NoSink,
    IsolatedAgents,
    CycleDetected,
    DataflowViolation,
};

std::string_view to_string(GraphErrorKind kind);

class GraphError : public std::runtime_error {
public:
    GraphError(GraphErrorKind kind, const std::string& detail);
    GraphErrorKind kind() const noexcept { return kind_; }

private:
    GraphErrorKind kind_;
};

enum class DataflowMode { Strict, Lenient };

struct DataflowViolation {
    enum class Kind { MissingReference, MissingEdge };
    Kind kind;
    std::string from;
    std::string to;
    bool operator==(const DataflowViolation&) const = default;
};

struct GraphStats {
    std::size_t num_agents = 0;
    std::size_t sequential_length = 0;  // nodes on the longest directed path
    std::size_t parallel_width = 0;     // maximum in-degree
    bool operator==(const GraphStats&) const = default;
};

// Immutable once built by validate().
class OrchestrationGraph {
public:
    const std::vector<AgentSpec>& nodes() const { return nodes_; }
    const AgentSpec& node(const std::string& id) const { return nodes_.at(index_.at(id)); }
    bool contains(const std::string& id) const { return index_.count(id) != 0; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<std::string>& topo_order() const { return topo_order_; }
    const std::string& sink_id() const { return sink_id_; }
    const std::vector<std::string>& start_ids() const { return start_ids_; }
    const std::vector<std::string>& predecessors(const std::string& id) const { return preds_.at(id); }
    const std::vector<std::string>& successors(const std::string& id) const { return succs_.at(id); }
    // Exact duplicate edges dropped during validation.
    std::size_t duplicate_edges() const { return duplicate_edges_; }
    // Populated in lenient mode only; strict mode rejects instead.
    const std::vector<DataflowViolation>& dataflow_warnings() const { return dataflow_warnings_; }

private:
    friend OrchestrationGraph validate(const AgentGraphPlan& plan, DataflowMode mode);

    std::vector<AgentSpec> nodes_;
    std::map<std::string, std::size_t> index_;
    std::vector<Edge> edges_;
    std::vector<std::string> topo_order_;
    std::string sink_id_;
    std::vector<std::string> start_ids_;
    std::map<std::string, std::vector<std::string>> preds_;
    std::map<std::string, std::vector<std::string>> succs_;
    std::size_t duplicate_edges_ = 0;
    std::vector<DataflowViolation> dataflow_warnings_;
};

// Kahn's algorithm, FIFO queue seeded in declaration order. A result shorter
// than `ids` means the edges contain a cycle; detecting that is the caller's job.
std::vector<std::string> topo_sort(const std::vector<std::string>& ids, const std::vector<Edge>& edges);

// Checks run in this order and the first failure is reported: edge endpoints,
// self-loops, start existence, unique sink, connectivity, acyclicity, then
// (strict mode) dataflow consistency.
OrchestrationGraph validate(const AgentGraphPlan& plan, DataflowMode mode = DataflowMode::Strict);

GraphStats graph_stats(const OrchestrationGraph& graph);

// ${id} references in an agent input, in order of first appearance.
std::vector<std::string> placeholder_refs(std::string_view text);

std::vector<DataflowViolation> check_dataflow_consistency(const std::vector<AgentSpec>& specs,
                                                          const std::vector<Edge>& edges);
std::vector<DataflowViolation> check_dataflow_consistency(const OrchestrationGraph& graph);

}  // namespace mas
