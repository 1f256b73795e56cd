#include "mas/graph.hpp"

#include <algorithm>
#include <deque>
#include <set>

namespace mas {

std::string_view to_string(GraphErrorKind kind) {
    switch (kind) {
        case GraphErrorKind::EmptyPlan: return "EmptyPlan";
        case GraphErrorKind::UndefinedEdgeEndpoint: return "UndefinedEdgeEndpoint";
        case GraphErrorKind::SelfLoop: return "SelfLoop";
        case GraphErrorKind::NoStartNode: return "NoStartNode";
        case GraphErrorKind::MultipleSinks: return "MultipleSinks";
        case GraphErrorKind::NoSink: return "NoSink";
        case GraphErrorKind::IsolatedAgents: return "IsolatedAgents";
        case GraphErrorKind::CycleDetected: return "CycleDetected";
        case GraphErrorKind::DataflowViolation: return "DataflowViolation";
    }
    return "Unknown";
}

GraphError::GraphError(GraphErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

std::vector<std::string> topo_sort(const std::vector<std::string>& ids, const std::vector<Edge>& edges) {
    std::map<std::string, std::size_t> in_deg;
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& id : ids) {
        in_deg[id] = 0;
        adj[id];
    }
    for (const auto& e : edges) {
        adj[e.from].push_back(e.to);
        ++in_deg[e.to];
    }
    std::deque<std::string> queue;
    for (const auto& id : ids) {
        if (in_deg[id] == 0) queue.push_back(id);
    }
    std::vector<std::string> order;
    while (!queue.empty()) {
        auto u = queue.front();
        queue.pop_front();
        order.push_back(u);
        for (const auto& v : adj[u]) {
            if (--in_deg[v] == 0) queue.push_back(v);
        }
    }
    return order;
}

std::vector<std::string> placeholder_refs(std::string_view text) {
    std::vector<std::string> refs;
    std::size_t pos = 0;
    while ((pos = text.find("${", pos)) != std::string_view::npos) {
        auto close = text.find('}', pos + 2);
        if (close == std::string_view::npos) break;
        auto id = text.substr(pos + 2, close - pos - 2);
        bool ok = !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
            return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
        });
        if (ok && std::find(refs.begin(), refs.end(), id) == refs.end()) refs.emplace_back(id);
        pos = ok ? close + 1 : pos + 2;
    }
    return refs;
}

std::vector<DataflowViolation> check_dataflow_consistency(const std::vector<AgentSpec>& specs,
                                                          const std::vector<Edge>& edges) {
    std::set<Edge> edge_set(edges.begin(), edges.end());
    std::vector<DataflowViolation> out;
    for (const auto& spec : specs) {
        for (const auto& ref : placeholder_refs(spec.agent_input)) {
            if (!edge_set.count({ref, spec.agent_id})) {
                out.push_back({DataflowViolation::Kind::MissingEdge, ref, spec.agent_id});
            }
        }
    }
    std::map<std::string, std::vector<std::string>> refs_by_node;
    for (const auto& spec : specs) refs_by_node[spec.agent_id] = placeholder_refs(spec.agent_input);
    std::set<Edge> reported;
    for (const auto& e : edges) {
        if (!reported.insert(e).second) continue;
        const auto& refs = refs_by_node[e.to];
        if (std::find(refs.begin(), refs.end(), e.from) == refs.end()) {
            out.push_back({DataflowViolation::Kind::MissingReference, e.from, e.to});
        }
    }
    return out;
}

std::vector<DataflowViolation> check_dataflow_consistency(const OrchestrationGraph& graph) {
    return check_dataflow_consistency(graph.nodes(), graph.edges());
}

OrchestrationGraph validate(const AgentGraphPlan& plan, DataflowMode mode) {
    if (plan.agents.empty()) throw GraphError(GraphErrorKind::EmptyPlan, "plan has no agents");

    OrchestrationGraph g;
    g.nodes_ = plan.agents;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
        g.index_[g.nodes_[i].agent_id] = i;
        ids.push_back(g.nodes_[i].agent_id);
    }

    for (const auto& e : plan.edges) {
        if (!g.index_.count(e.from) || !g.index_.count(e.to)) {
            throw GraphError(GraphErrorKind::UndefinedEdgeEndpoint,
                             "undefined agent referenced by edge " + e.from + " -> " + e.to);
        }
    }
    for (const auto& e : plan.edges) {
        if (e.from == e.to) throw GraphError(GraphErrorKind::SelfLoop, e.from + " -> " + e.to);
    }

    std::set<Edge> seen;
    for (const auto& e : plan.edges) {
        if (seen.insert(e).second) {
            g.edges_.push_back(e);
        } else {
            ++g.duplicate_edges_;
        }
    }

    for (const auto& id : ids) {
        g.preds_[id];
        g.succs_[id];
    }
    for (const auto& e : g.edges_) {
        g.succs_[e.from].push_back(e.to);
        g.preds_[e.to].push_back(e.from);
    }

    for (const auto& id : ids) {
        if (g.preds_[id].empty()) g.start_ids_.push_back(id);
    }
    if (g.start_ids_.empty()) throw GraphError(GraphErrorKind::NoStartNode, "no start node");

    std::vector<std::string> sinks;
    for (const auto& id : ids) {
        if (g.succs_[id].empty()) sinks.push_back(id);
    }
    if (sinks.empty()) throw GraphError(GraphErrorKind::NoSink, "must have exactly one sink node (found 0)");
    if (sinks.size() > 1) {
        throw GraphError(GraphErrorKind::MultipleSinks,
                         "must have exactly one sink node (found " + std::to_string(sinks.size()) + ")");
    }
    g.sink_id_ = sinks.front();

    auto reach = [&](std::vector<std::string> frontier, const std::map<std::string, std::vector<std::string>>& adj) {
        std::set<std::string> visited(frontier.begin(), frontier.end());
        while (!frontier.empty()) {
            auto u = frontier.back();
            frontier.pop_back();
            for (const auto& v : adj.at(u)) {
                if (visited.insert(v).second) frontier.push_back(v);
            }
        }
        return visited;
    };
    auto forward = reach(g.start_ids_, g.succs_);
    auto backward = reach({g.sink_id_}, g.preds_);
    std::vector<std::string> isolated;
    for (const auto& id : ids) {
        if (!forward.count(id) || !backward.count(id)) isolated.push_back(id);
    }
    if (!isolated.empty()) throw GraphError(GraphErrorKind::IsolatedAgents, "isolated agents exist: " + isolated.front());

    g.topo_order_ = topo_sort(ids, g.edges_);
    if (g.topo_order_.size() != ids.size()) throw GraphError(GraphErrorKind::CycleDetected, "cycle detected");

    auto violations = check_dataflow_consistency(g.nodes_, g.edges_);
    if (!violations.empty()) {
        if (mode == DataflowMode::Strict) {
            const auto& v = violations.front();
            std::string what = v.kind == DataflowViolation::Kind::MissingEdge
                                   ? v.to + " references ${" + v.from + "} without an edge"
                                   : "edge " + v.from + " -> " + v.to + " has no ${" + v.from + "} reference";
            throw GraphError(GraphErrorKind::DataflowViolation, what);
        }
        g.dataflow_warnings_ = std::move(violations);
    }
    return g;
}

GraphStats graph_stats(const OrchestrationGraph& graph) {
    GraphStats s;
    s.num_agents = graph.nodes().size();
    std::map<std::string, std::size_t> longest;
    for (const auto& id : graph.topo_order()) {
        std::size_t best = 0;
        for (const auto& p : graph.predecessors(id)) best = std::max(best, longest[p]);
        longest[id] = best + 1;
        s.sequential_length = std::max(s.sequential_length, best + 1);
        s.parallel_width = std::max(s.parallel_width, graph.predecessors(id).size());
    }
    return s;
}

}  // namespace mas
