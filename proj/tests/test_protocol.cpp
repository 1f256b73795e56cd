#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "mas/protocol.hpp"
#include "support.hpp"

using namespace mas;
using testing::agent_xml;
using testing::edges_xml;
using testing::fixture;

TEST_CASE("extract_channel takes the first complete span") {
    CHECK(extract_channel("<answer>1073</answer>", "answer") == "1073");
    CHECK_FALSE(extract_channel("no tags here", "answer").has_value());
    CHECK(extract_channel("<agent><agent_id>A1</agent_id></agent>", "agent_id") == "A1");
    CHECK(extract_channel("<answer> a </answer><answer>b</answer>", "answer") == "a");
    CHECK_FALSE(extract_channel("<answer>never closed", "answer").has_value());
    CHECK(extract_channel("<answer>unclosed <answer>x</answer>", "answer").has_value());
}

TEST_CASE("split_channels") {
    auto empty = split_channels("");
    CHECK_FALSE(empty.thinking);
    CHECK(empty.agent_blocks.empty());
    CHECK_FALSE(empty.edge_block);
    CHECK_FALSE(empty.answer);

    auto only = split_channels("<thinking>plan</thinking>");
    CHECK(only.thinking == "plan");
    CHECK(only.agent_blocks.empty());
    CHECK_FALSE(only.answer);

    auto c1 = split_channels(fixture("magic_calc_plan.txt"));
    CHECK(c1.thinking.has_value());
    CHECK(c1.agent_blocks.size() == 3);
    CHECK(c1.edge_block.has_value());
    CHECK(c1.edge_block_count == 1);
}

TEST_CASE("agent blocks from the single-agent examples") {
    auto cot = parse_low_dom(fixture("low_cot.txt"));
    auto* del = std::get_if<SingleDelegation>(&cot.value);
    REQUIRE(del);
    CHECK(del->agent.kind == AgentKind::CoT);
    CHECK(del->agent.output_id == "calc_agent_output");
    CHECK(del->agent.agent_input.empty());
    CHECK(del->answer_ref == "calc_agent_output");

    auto debate = parse_low_dom(fixture("low_debate.txt"));
    auto* d = std::get_if<SingleDelegation>(&debate.value);
    REQUIRE(d);
    CHECK(d->agent.kind == AgentKind::Debate);
    REQUIRE(d->agent.debate_roles.has_value());
    CHECK(*d->agent.debate_roles == std::vector<std::string>{"Mathematics Professor", "Statistics Teacher"});

    auto refl = parse_low_dom(fixture("low_reflexion.txt"));
    auto* r = std::get_if<SingleDelegation>(&refl.value);
    REQUIRE(r);
    CHECK(r->agent.kind == AgentKind::Reflexion);
    CHECK(r->answer_ref == "reflexion_agent_output");

    auto sc = parse_low_dom(fixture("low_sc.txt"));
    CHECK(std::get<SingleDelegation>(sc.value).agent.kind == AgentKind::SC);
}

TEST_CASE("low DoM direct answer") {
    auto d = parse_low_dom(fixture("low_direct.txt"));
    auto* direct = std::get_if<DirectAnswer>(&d.value);
    REQUIRE(direct);
    CHECK(direct->text == "1073");
}

TEST_CASE("low DoM rejects two agents") {
    std::string two = "<thinking>t</thinking><agent><agent_name>CoTAgent</agent_name><agent_description>x</agent_description>"
                      "<required_arguments><agent_input></agent_input></required_arguments><agent_output_id>a</agent_output_id></agent>"
                      "<agent><agent_name>SCAgent</agent_name><agent_description>x</agent_description>"
                      "<required_arguments><agent_input></agent_input></required_arguments><agent_output_id>b</agent_output_id></agent>"
                      "<answer>a</answer>";
    try {
        parse_low_dom(two);
        FAIL("expected TooManyAgents");
    } catch (const ProtocolError& e) {
        CHECK(e.kind() == ProtocolErrorKind::TooManyAgents);
    }
}

TEST_CASE("unknown agent names are rejected") {
    std::string block = "<agent_id>A</agent_id><agent_name>FooAgent</agent_name><agent_description>x</agent_description>"
                        "<required_arguments><agent_input></agent_input></required_arguments>";
    try {
        parse_agent_block(block, DomLevel::High);
        FAIL("expected InvalidAgentName");
    } catch (const ProtocolError& e) {
        CHECK(e.kind() == ProtocolErrorKind::InvalidAgentName);
    }
}

TEST_CASE("agent names match case-insensitively") {
    std::string block = "<agent_id>A</agent_id><agent_name>cotagent</agent_name><agent_description>x</agent_description>"
                        "<required_arguments><agent_input>q</agent_input></required_arguments>";
    CHECK(parse_agent_block(block, DomLevel::High).kind == AgentKind::CoT);
}

TEST_CASE("agent ids must be alphanumeric or underscore") {
    std::string block = "<agent_id>bad id</agent_id><agent_name>CoTAgent</agent_name><agent_description>x</agent_description>"
                        "<required_arguments><agent_input>q</agent_input></required_arguments>";
    try {
        parse_agent_block(block, DomLevel::High);
        FAIL("expected InvalidAgentId");
    } catch (const ProtocolError& e) {
        CHECK(e.kind() == ProtocolErrorKind::InvalidAgentId);
    }
}

TEST_CASE("debate roles need two entries of two characters") {
    auto block = [](const std::string& roles) {
        return "<agent_id>D</agent_id><agent_name>DebateAgent</agent_name><agent_description>x</agent_description>"
               "<required_arguments><agent_input>q</agent_input><debate_roles>" +
               roles + "</debate_roles></required_arguments>";
    };
    CHECK_THROWS_AS(parse_agent_block(block("[\"Solo\"]"), DomLevel::High), ProtocolError);
    CHECK_THROWS_AS(parse_agent_block(block("[\"A\", \"Bee\"]"), DomLevel::High), ProtocolError);
    auto ok = parse_agent_block(block("\"Judge\"\n\"Critic\""), DomLevel::High);
    CHECK(*ok.debate_roles == std::vector<std::string>{"Judge", "Critic"});
    CHECK(ok.roles_normalized);
}

TEST_CASE("high DoM housing example") {
    auto plan = parse_high_dom(fixture("high_housing.txt"));
    auto* g = std::get_if<AgentGraphPlan>(&plan.value);
    REQUIRE(g);
    CHECK(g->agents.size() == 7);
    CHECK(g->edges.size() == 7);
    CHECK(g->agents[0].agent_id == "WS_NYC");
    CHECK(g->agents[0].kind == AgentKind::WebSearch);
    CHECK(g->agents[4].kind == AgentKind::SC);
    CHECK(g->agents[5].kind == AgentKind::Reflexion);
}

TEST_CASE("high DoM single agent without edges") {
    auto plan = parse_high_dom(fixture("high_single_search.txt"));
    auto& g = std::get<AgentGraphPlan>(plan.value);
    REQUIRE(g.agents.size() == 1);
    CHECK(g.agents[0].agent_id == "SEARCH");
    CHECK(g.edges.empty());
}

TEST_CASE("high DoM structural errors") {
    auto kind_of = [](const std::string& text) {
        try {
            parse_high_dom(text);
        } catch (const ProtocolError& e) {
            return std::optional(e.kind());
        }
        return std::optional<ProtocolErrorKind>{};
    };
    auto a = agent_xml("A", "CoTAgent", "x");
    auto b = agent_xml("B", "CoTAgent", "${A}");
    CHECK(kind_of(a + b) == ProtocolErrorKind::MultipleAgentsNoEdges);
    CHECK(kind_of(a + agent_xml("A", "SCAgent", "y") + edges_xml({{"A", "A"}})) == ProtocolErrorKind::DuplicateAgentId);
    CHECK(kind_of(a + b + edges_xml({{"A", "B"}}) + edges_xml({{"A", "B"}})) == ProtocolErrorKind::MultipleEdgeBlocks);
    CHECK(kind_of("<thinking>nothing</thinking>") == ProtocolErrorKind::MissingAnswer);
    CHECK(kind_of(a + b + "<edge><from>A</from></edge>") == ProtocolErrorKind::MalformedEdge);
}

TEST_CASE("high DoM direct answer") {
    auto plan = parse_high_dom("<thinking>easy</thinking><answer>42</answer>");
    CHECK(std::get<DirectAnswer>(plan.value).text == "42");
}

TEST_CASE("answer channel next to agents is kept aside") {
    auto plan = parse_high_dom(agent_xml("A", "CoTAgent", "") + "<answer>ignored</answer>");
    auto& g = std::get<AgentGraphPlan>(plan.value);
    CHECK(g.ignored_answer == "ignored");
}

TEST_CASE("render then parse is the identity on random plans") {
    std::mt19937 rng(7);
    const char* names[] = {"CoTAgent", "SCAgent", "DebateAgent", "ReflexionAgent", "WebSearchAgent"};
    for (int iter = 0; iter < 200; ++iter) {
        AgentGraphPlan g;
        int n = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < n; ++i) {
            AgentSpec s;
            s.agent_id = "N" + std::to_string(i);
            s.kind = *agent_kind_from_name(names[rng() % 5]);
            s.description = "node " + std::to_string(i);
            s.agent_input = i == 0 ? "" : "use ${N" + std::to_string(i - 1) + "}";
            if (s.kind == AgentKind::Debate) s.debate_roles = std::vector<std::string>{"Optimist", "Skeptic"};
            g.agents.push_back(s);
            if (i > 0) g.edges.push_back({"N" + std::to_string(i - 1), s.agent_id});
        }
        HighDomPlan plan{g};
        auto back = parse_high_dom(render_high_dom(plan, "why"));
        CHECK(back == plan);
    }
    LowDomDecision low{SingleDelegation{AgentSpec{"", AgentKind::SC, "desc", "", std::nullopt, "out", false}, "out"}};
    CHECK(parse_low_dom(render_low_dom(low)) == low);
    LowDomDecision direct{DirectAnswer{"1073"}};
    CHECK(parse_low_dom(render_low_dom(direct)) == direct);
}
