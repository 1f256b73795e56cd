#include "mas/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <array>
#include <set>

#include "mas/util.hpp"

namespace mas {

namespace {

constexpr std::array<std::pair<AgentKind, std::string_view>, 5> kAgentNames{{
    {AgentKind::CoT, "CoTAgent"},
    {AgentKind::SC, "SCAgent"},
    {AgentKind::Debate, "DebateAgent"},
    {AgentKind::Reflexion, "ReflexionAgent"},
    {AgentKind::WebSearch, "WebSearchAgent"},
}};

bool valid_identifier(std::string_view id) {
    if (id.empty()) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    });
}

struct Span {
    std::size_t open;   // position of '<' of the opening tag
    std::size_t begin;  // content start
    std::size_t end;    // content end (position of the closing tag)
    std::size_t after;  // first position after the closing tag
};

std::optional<Span> find_span(std::string_view text, std::string_view tag, std::size_t from) {
    const std::string open = "<" + std::string(tag) + ">";
    const std::string close = "</" + std::string(tag) + ">";
    auto o = text.find(open, from);
    if (o == std::string_view::npos) return std::nullopt;
    auto begin = o + open.size();
    auto c = text.find(close, begin);
    if (c == std::string_view::npos) return std::nullopt;
    return Span{o, begin, c, c + close.size()};
}

// "" and '' are how the prompts spell an intentionally empty input.
std::string normalize_input(std::string s) {
    if (s == "\"\"" || s == "''") return {};
    return s;
}

std::vector<Edge> parse_edges(std::string_view block) {
    struct Item {
        std::size_t pos;
        bool is_from;
        std::string value;
    };
    std::vector<Item> items;
    for (bool is_from : {true, false}) {
        std::size_t pos = 0;
        while (auto span = find_span(block, is_from ? "from" : "to", pos)) {
            items.push_back({span->open, is_from, trim(block.substr(span->begin, span->end - span->begin))});
            pos = span->after;
        }
    }
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.pos < b.pos; });
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < items.size(); i += 2) {
        if (!items[i].is_from || i + 1 >= items.size() || items[i + 1].is_from) {
            throw ProtocolError(ProtocolErrorKind::MalformedEdge, "unpaired <from>/<to> in edge block");
        }
        edges.push_back({items[i].value, items[i + 1].value});
    }
    return edges;
}

// Reads one quoted item starting at text[i] (which must be a quote).
std::optional<std::string> read_quoted(std::string_view text, std::size_t& i) {
    const char q = text[i];
    std::string out;
    for (++i; i < text.size(); ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) {
            out.push_back(text[++i]);
            continue;
        }
        if (text[i] == q) {
            ++i;
            return out;
        }
        out.push_back(text[i]);
    }
    return std::nullopt;
}

bool is_quote(char c) { return c == '"' || c == '\''; }

std::optional<std::vector<std::string>> parse_bracket_list(std::string_view inner) {
    std::vector<std::string> out;
    std::size_t i = 0;
    bool expect_item = true;
    while (i < inner.size()) {
        char c = inner[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == ',' && !expect_item) {
            expect_item = true;
            ++i;
        } else if (is_quote(c) && expect_item) {
            auto item = read_quoted(inner, i);
            if (!item) return std::nullopt;
            out.push_back(trim(*item));
            expect_item = false;
        } else {
            return std::nullopt;
        }
    }
    if (out.empty()) return std::nullopt;
    return out;
}

std::optional<std::vector<std::string>> parse_line_list(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& raw_line : split(text, '\n')) {
        auto line = trim_view(raw_line);
        if (line.empty()) continue;
        if (line.back() == ',') line = trim_view(line.substr(0, line.size() - 1));
        if (line.size() < 2 || !is_quote(line.front()) || line.back() != line.front()) return std::nullopt;
        std::size_t i = 0;
        auto item = read_quoted(line, i);
        if (!item || i != line.size()) return std::nullopt;
        out.push_back(trim(*item));
    }
    if (out.empty()) return std::nullopt;
    return out;
}

std::string quote_role(const std::string& role) {
    const char q = role.find('"') == std::string::npos ? '"' : '\'';
    std::string out(1, q);
    for (char c : role) {
        if (c == q || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    out.push_back(q);
    return out;
}

}  // namespace

std::string_view to_string(DomLevel level) { return level == DomLevel::Low ? "low" : "high"; }

std::optional<DomLevel> dom_level_from_string(std::string_view s) {
    auto l = to_lower(trim_view(s));
    if (l == "low") return DomLevel::Low;
    if (l == "high") return DomLevel::High;
    return std::nullopt;
}

std::string_view agent_name(AgentKind kind) {
    for (const auto& [k, name] : kAgentNames) {
        if (k == kind) return name;
    }
    return "UnknownAgent";
}

std::optional<AgentKind> agent_kind_from_name(std::string_view name) {
    auto lowered = to_lower(trim_view(name));
    for (const auto& [k, canonical] : kAgentNames) {
        if (to_lower(canonical) == lowered) return k;
    }
    return std::nullopt;
}

std::string_view to_string(ProtocolErrorKind kind) {
    switch (kind) {
        case ProtocolErrorKind::MissingField: return "MissingField";
        case ProtocolErrorKind::InvalidAgentName: return "InvalidAgentName";
        case ProtocolErrorKind::InvalidAgentId: return "InvalidAgentId";
        case ProtocolErrorKind::BadRoleList: return "BadRoleList";
        case ProtocolErrorKind::InvalidDebateRoles: return "InvalidDebateRoles";
        case ProtocolErrorKind::TooManyAgents: return "TooManyAgents";
        case ProtocolErrorKind::MissingAnswer: return "MissingAnswer";
        case ProtocolErrorKind::MultipleAgentsNoEdges: return "MultipleAgentsNoEdges";
        case ProtocolErrorKind::DuplicateAgentId: return "DuplicateAgentId";
        case ProtocolErrorKind::MultipleEdgeBlocks: return "MultipleEdgeBlocks";
        case ProtocolErrorKind::MalformedEdge: return "MalformedEdge";
    }
    return "Unknown";
}

ProtocolError::ProtocolError(ProtocolErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind), detail_(detail) {}

std::optional<std::string> extract_channel(std::string_view text, std::string_view tag) {
    auto span = find_span(text, tag, 0);
    if (!span) return std::nullopt;
    return trim(text.substr(span->begin, span->end - span->begin));
}

std::vector<std::string> extract_all_spans(std::string_view text, std::string_view tag) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (auto span = find_span(text, tag, pos)) {
        out.emplace_back(text.substr(span->begin, span->end - span->begin));
        pos = span->after;
    }
    return out;
}

OrchestratorOutput split_channels(std::string_view raw) {
    OrchestratorOutput out;
    out.raw_text = std::string(raw);
    out.thinking = extract_channel(raw, "thinking");
    out.agent_blocks = extract_all_spans(raw, "agent");
    auto edges = extract_all_spans(raw, "edge");
    out.edge_block_count = edges.size();
    if (!edges.empty()) out.edge_block = edges.front();
    out.answer = extract_channel(raw, "answer");
    return out;
}

std::optional<std::vector<std::string>> parse_role_list(std::string_view text, bool* normalized) {
    auto t = trim_view(text);
    if (normalized) *normalized = false;
    if (t.size() >= 2 && t.front() == '[' && t.back() == ']') {
        return parse_bracket_list(t.substr(1, t.size() - 2));
    }
    auto lines = parse_line_list(t);
    if (lines && normalized) *normalized = true;
    return lines;
}

AgentSpec parse_agent_block(std::string_view block, DomLevel level) {
    AgentSpec spec;
    auto name = extract_channel(block, "agent_name");
    if (!name || name->empty()) throw ProtocolError(ProtocolErrorKind::MissingField, "agent_name");
    auto kind = agent_kind_from_name(*name);
    if (!kind) throw ProtocolError(ProtocolErrorKind::InvalidAgentName, *name);
    spec.kind = *kind;

    auto id = extract_channel(block, "agent_id");
    if (level == DomLevel::High && (!id || id->empty())) {
        throw ProtocolError(ProtocolErrorKind::MissingField, "agent_id");
    }
    if (id && !id->empty()) {
        if (!valid_identifier(*id)) throw ProtocolError(ProtocolErrorKind::InvalidAgentId, *id);
        spec.agent_id = *id;
    }

    spec.output_id = extract_channel(block, "agent_output_id");
    spec.description = extract_channel(block, "agent_description").value_or("");

    auto args = extract_channel(block, "required_arguments");
    std::string_view scope = args ? std::string_view(*args) : block;
    spec.agent_input = normalize_input(extract_channel(scope, "agent_input").value_or(""));

    if (auto roles_text = extract_channel(scope, "debate_roles")) {
        bool normalized = false;
        auto roles = parse_role_list(*roles_text, &normalized);
        if (!roles) throw ProtocolError(ProtocolErrorKind::BadRoleList, *roles_text);
        spec.debate_roles = std::move(*roles);
        spec.roles_normalized = normalized;
    }
    if (spec.kind == AgentKind::Debate) {
        if (!spec.debate_roles) throw ProtocolError(ProtocolErrorKind::MissingField, "debate_roles");
        const auto& roles = *spec.debate_roles;
        bool short_role = std::any_of(roles.begin(), roles.end(), [](const std::string& r) { return r.size() < 2; });
        if (roles.size() < 2 || short_role) {
            throw ProtocolError(ProtocolErrorKind::InvalidDebateRoles,
                                "DebateAgent needs at least two roles of length >= 2");
        }
    }
    return spec;
}

LowDomDecision parse_low_dom(std::string_view raw) {
    auto out = split_channels(raw);
    if (out.agent_blocks.empty()) {
        if (!out.answer) throw ProtocolError(ProtocolErrorKind::MissingAnswer, "no agent block and no <answer>");
        return {DirectAnswer{*out.answer}};
    }
    if (out.agent_blocks.size() > 1) {
        throw ProtocolError(ProtocolErrorKind::TooManyAgents, std::to_string(out.agent_blocks.size()) + " agent blocks");
    }
    return {SingleDelegation{parse_agent_block(out.agent_blocks.front(), DomLevel::Low), out.answer.value_or("")}};
}

HighDomPlan parse_high_dom(std::string_view raw) {
    auto out = split_channels(raw);
    if (out.agent_blocks.empty()) {
        if (!out.answer) throw ProtocolError(ProtocolErrorKind::MissingAnswer, "no agent block and no <answer>");
        return {DirectAnswer{*out.answer}};
    }
    if (out.multiple_edge_blocks()) {
        throw ProtocolError(ProtocolErrorKind::MultipleEdgeBlocks, std::to_string(out.edge_block_count) + " edge blocks");
    }
    AgentGraphPlan plan;
    std::set<std::string> seen;
    for (const auto& block : out.agent_blocks) {
        auto spec = parse_agent_block(block, DomLevel::High);
        if (!seen.insert(spec.agent_id).second) throw ProtocolError(ProtocolErrorKind::DuplicateAgentId, spec.agent_id);
        plan.agents.push_back(std::move(spec));
    }
    if (out.edge_block) plan.edges = parse_edges(*out.edge_block);
    if (plan.agents.size() > 1 && plan.edges.empty()) {
        throw ProtocolError(ProtocolErrorKind::MultipleAgentsNoEdges, "multiple agents require edges");
    }
    plan.ignored_answer = out.answer;
    return {std::move(plan)};
}

std::string render_agent_block(const AgentSpec& spec, DomLevel level) {
    std::string out = "<agent>\n";
    if (level == DomLevel::High || !spec.agent_id.empty()) out += "  <agent_id>" + spec.agent_id + "</agent_id>\n";
    out += "  <agent_name>" + std::string(agent_name(spec.kind)) + "</agent_name>\n";
    out += "  <agent_description>" + spec.description + "</agent_description>\n";
    out += "  <required_arguments>\n";
    out += "    <agent_input>" + spec.agent_input + "</agent_input>\n";
    if (spec.debate_roles) {
        std::vector<std::string> quoted;
        for (const auto& r : *spec.debate_roles) quoted.push_back(quote_role(r));
        if (spec.roles_normalized) {
            out += "    <debate_roles>\n" + join(quoted, "\n") + "\n    </debate_roles>\n";
        } else {
            out += "    <debate_roles>[" + join(quoted, ", ") + "]</debate_roles>\n";
        }
    }
    out += "  </required_arguments>\n";
    if (spec.output_id) out += "  <agent_output_id>" + *spec.output_id + "</agent_output_id>\n";
    out += "</agent>\n";
    return out;
}

std::string render_low_dom(const LowDomDecision& decision, std::string_view thinking) {
    std::string out;
    if (!thinking.empty()) out += "<thinking>\n" + std::string(thinking) + "\n</thinking>\n";
    if (const auto* direct = std::get_if<DirectAnswer>(&decision.value)) {
        out += "<answer>" + direct->text + "</answer>\n";
        return out;
    }
    const auto& single = std::get<SingleDelegation>(decision.value);
    out += render_agent_block(single.agent, DomLevel::Low);
    if (!single.answer_ref.empty()) out += "<answer>" + single.answer_ref + "</answer>\n";
    return out;
}

std::string render_high_dom(const HighDomPlan& plan, std::string_view thinking) {
    std::string out;
    if (!thinking.empty()) out += "<thinking>\n" + std::string(thinking) + "\n</thinking>\n";
    if (const auto* direct = std::get_if<DirectAnswer>(&plan.value)) {
        out += "<answer>" + direct->text + "</answer>\n";
        return out;
    }
    const auto& graph = std::get<AgentGraphPlan>(plan.value);
    for (const auto& a : graph.agents) out += render_agent_block(a, DomLevel::High);
    if (!graph.edges.empty()) {
        out += "<edge>\n";
        for (const auto& e : graph.edges) out += "  <from>" + e.from + "</from><to>" + e.to + "</to>\n";
        out += "</edge>\n";
    }
    if (graph.ignored_answer) out += "<answer>" + *graph.ignored_answer + "</answer>\n";
    return out;
}

}  // namespace mas
