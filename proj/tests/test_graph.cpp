#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <random>
#include <set>

#include "mas/graph.hpp"
#include "mas/protocol.hpp"
#include "support.hpp"

using namespace mas;

namespace {

using EdgeList = std::vector<std::pair<std::string, std::string>>;

// Inputs reference every predecessor so dataflow checks pass.
AgentGraphPlan make_plan(const std::vector<std::string>& ids, const EdgeList& edges) {
    AgentGraphPlan p;
    for (const auto& id : ids) {
        AgentSpec s;
        s.agent_id = id;
        s.kind = AgentKind::CoT;
        for (const auto& [a, b] : edges) {
            if (b == id) s.agent_input += "${" + a + "} ";
        }
        p.agents.push_back(s);
    }
    for (const auto& [a, b] : edges) p.edges.push_back({a, b});
    return p;
}

std::optional<GraphErrorKind> error_of(const AgentGraphPlan& p, DataflowMode mode = DataflowMode::Strict) {
    try {
        validate(p, mode);
    } catch (const GraphError& e) {
        return e.kind();
    }
    return std::nullopt;
}

AgentGraphPlan housing() { return std::get<AgentGraphPlan>(parse_high_dom(testing::fixture("high_housing.txt")).value); }

// Longest path in nodes and max in-degree by enumerating every path.
std::pair<std::size_t, std::size_t> brute_stats(const std::vector<std::string>& ids, const EdgeList& edges) {
    std::size_t longest = 0;
    std::function<void(const std::string&, std::size_t)> walk = [&](const std::string& at, std::size_t len) {
        longest = std::max(longest, len);
        for (const auto& [a, b] : edges) {
            if (a == at) walk(b, len + 1);
        }
    };
    for (const auto& id : ids) walk(id, 1);
    std::size_t width = 0;
    for (const auto& id : ids) {
        std::size_t in = 0;
        for (const auto& e : edges) in += e.second == id;
        width = std::max(width, in);
    }
    return {longest, width};
}

}  // namespace

TEST_CASE("housing example validates") {
    auto g = validate(housing());
    CHECK(g.sink_id() == "FINAL");
    CHECK(g.nodes().size() == 7);
    CHECK(g.edges().size() == 7);
    CHECK(g.start_ids() == std::vector<std::string>{"WS_NYC", "WS_LA", "WS_CHI"});
    CHECK(graph_stats(g) == GraphStats{7, 5, 3});
    CHECK(check_dataflow_consistency(g).empty());
    CHECK(g.topo_order() == std::vector<std::string>{"WS_NYC", "WS_LA", "WS_CHI", "EXT", "VOTE", "QA", "FINAL"});
}

TEST_CASE("pope example validates") {
    auto g = validate(std::get<AgentGraphPlan>(parse_high_dom(testing::fixture("high_pope.txt")).value));
    CHECK(g.sink_id() == "FINAL");
    CHECK(g.nodes().size() == 6);
}

TEST_CASE("each error class has a minimal fixture") {
    CHECK(error_of(make_plan({"A", "B"}, {{"A", "Z"}})) == GraphErrorKind::UndefinedEdgeEndpoint);
    CHECK(error_of(make_plan({"A"}, {{"A", "A"}})) == GraphErrorKind::SelfLoop);
    CHECK(error_of(make_plan({"A", "B"}, {{"A", "B"}, {"B", "A"}})) == GraphErrorKind::NoStartNode);
    CHECK(error_of(make_plan({"A", "B", "C"}, {{"A", "B"}, {"A", "C"}})) == GraphErrorKind::MultipleSinks);
    CHECK(error_of(make_plan({"A", "B", "C"}, {{"A", "B"}, {"B", "C"}, {"C", "B"}})) == GraphErrorKind::NoSink);
    CHECK(error_of(make_plan({"S", "T", "X", "Y"}, {{"S", "T"}, {"X", "Y"}, {"Y", "X"}})) == GraphErrorKind::IsolatedAgents);
    CHECK(error_of(make_plan({"S", "A", "B", "T"}, {{"S", "A"}, {"A", "B"}, {"B", "A"}, {"B", "T"}})) ==
          GraphErrorKind::CycleDetected);
}

TEST_CASE("check order reports the earliest failing check") {
    // Undefined endpoint beats self-loop; self-loop beats missing start.
    CHECK(error_of(make_plan({"A"}, {{"A", "A"}, {"A", "Q"}})) == GraphErrorKind::UndefinedEdgeEndpoint);
    CHECK(error_of(make_plan({"A", "B"}, {{"A", "B"}, {"B", "A"}, {"B", "B"}})) == GraphErrorKind::SelfLoop);
    // Two sinks and an isolated pair: the sink check runs first.
    CHECK(error_of(make_plan({"A", "B", "C", "D", "E"}, {{"A", "B"}, {"A", "C"}, {"D", "E"}})) ==
          GraphErrorKind::MultipleSinks);
}

TEST_CASE("dataflow consistency") {
    auto p = make_plan({"A", "B"}, {{"A", "B"}});
    p.agents[1].agent_input = "no reference";
    auto v = check_dataflow_consistency(p.agents, p.edges);
    REQUIRE(v.size() == 1);
    CHECK(v[0].kind == DataflowViolation::Kind::MissingReference);
    CHECK(error_of(p) == GraphErrorKind::DataflowViolation);
    auto lenient = validate(p, DataflowMode::Lenient);
    CHECK(lenient.dataflow_warnings().size() == 1);

    auto q = make_plan({"A", "B", "Z"}, {{"A", "B"}, {"Z", "B"}});
    q.agents[1].agent_input = "${A} ${Z} ${Q}";
    q.agents.push_back(AgentSpec{"Q", AgentKind::CoT, "", "", std::nullopt, std::nullopt, false});
    auto w = check_dataflow_consistency(q.agents, q.edges);
    REQUIRE(w.size() == 1);
    CHECK(w[0].kind == DataflowViolation::Kind::MissingEdge);
    CHECK(w[0].from == "Q");
}

TEST_CASE("topo_sort") {
    CHECK(topo_sort({}, {}).empty());
    CHECK(topo_sort({"A", "B", "C"}, {{"B", "C"}, {"A", "B"}}) == std::vector<std::string>{"A", "B", "C"});
    CHECK(topo_sort({"A", "B", "C", "D"}, {{"A", "B"}, {"A", "C"}, {"B", "D"}, {"C", "D"}}) ==
          std::vector<std::string>{"A", "B", "C", "D"});
    CHECK(topo_sort({"A", "B"}, {{"A", "B"}, {"B", "A"}}).empty());
}

TEST_CASE("graph stats on small shapes") {
    CHECK(graph_stats(validate(make_plan({"A"}, {}))) == GraphStats{1, 1, 0});
    CHECK(graph_stats(validate(make_plan({"A", "B", "C", "D"}, {{"A", "B"}, {"B", "C"}, {"C", "D"}}))) ==
          GraphStats{4, 4, 1});
}

TEST_CASE("duplicate edges are dropped and counted") {
    auto g = validate(make_plan({"A", "B"}, {{"A", "B"}, {"A", "B"}}));
    CHECK(g.edges().size() == 1);
    CHECK(g.duplicate_edges() == 1);
}

TEST_CASE("placeholder references") {
    CHECK(placeholder_refs("x ${A} ${B} ${A} $ {C} ${}") == std::vector<std::string>{"A", "B"});
}

TEST_CASE("random DAGs satisfy the validated-graph invariants") {
    std::mt19937 rng(11);
    for (int iter = 0; iter < 300; ++iter) {
        int n = 1 + static_cast<int>(rng() % 8);
        std::vector<std::string> ids;
        for (int i = 0; i < n; ++i) ids.push_back("N" + std::to_string(i));
        // Random DAG over index order, then every non-final node feeds a later
        // node so there is a single sink.
        EdgeList edges;
        std::set<std::pair<int, int>> seen;
        for (int i = 0; i + 1 < n; ++i) {
            int j = i + 1 + static_cast<int>(rng() % static_cast<unsigned>(n - i - 1));
            seen.insert({i, j});
        }
        for (int extra = static_cast<int>(rng() % 5); extra > 0 && n > 2; --extra) {
            int a = static_cast<int>(rng() % static_cast<unsigned>(n - 1));
            int b = a + 1 + static_cast<int>(rng() % static_cast<unsigned>(n - a - 1));
            seen.insert({a, b});
        }
        for (auto [a, b] : seen) edges.push_back({ids[a], ids[b]});
        std::shuffle(edges.begin(), edges.end(), rng);
        auto g = validate(make_plan(ids, edges));
        const auto& order = g.topo_order();
        REQUIRE(order.size() == ids.size());
        std::map<std::string, std::size_t> pos;
        for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
        for (const auto& e : g.edges()) CHECK(pos[e.from] < pos[e.to]);
        CHECK(g.sink_id() == ids.back());
        auto [longest, width] = brute_stats(ids, edges);
        auto s = graph_stats(g);
        CHECK(s.num_agents == ids.size());
        CHECK(s.sequential_length == longest);
        CHECK(s.parallel_width == width);
    }
}

TEST_CASE("error fixture files") {
    const std::vector<std::pair<std::string, GraphErrorKind>> cases{
        {"undefined_endpoint", GraphErrorKind::UndefinedEdgeEndpoint}, {"self_loop", GraphErrorKind::SelfLoop},
        {"no_start", GraphErrorKind::NoStartNode},       {"multiple_sinks", GraphErrorKind::MultipleSinks},
        {"no_sink", GraphErrorKind::NoSink},             {"isolated", GraphErrorKind::IsolatedAgents},
        {"cycle", GraphErrorKind::CycleDetected}};
    for (const auto& [name, kind] : cases) {
        CAPTURE(name);
        auto plan = std::get<AgentGraphPlan>(parse_high_dom(testing::fixture("graph_err_" + name + ".txt")).value);
        CHECK(error_of(plan) == kind);
    }
}
