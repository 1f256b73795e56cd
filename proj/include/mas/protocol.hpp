#pragma once

// Parsing of single-shot orchestrator output into structured decisions.
//
// The wire form is a loose XML dialect: <thinking>, <agent> (one per
// sub-agent), <edge> (one block of <from>/<to> pairs) and <answer>. Only the
// first complete span of a tag counts; unclosed tags are treated as absent.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace mas {

enum class DomLevel { Low, High };

std::string_view to_string(DomLevel level);
std::optional<DomLevel> dom_level_from_string(std::string_view s);

enum class AgentKind { CoT, SC, Debate, Reflexion, WebSearch };

// Canonical wire name, e.g. "CoTAgent".
std::string_view agent_name(AgentKind kind);
// Case-insensitive match against the five canonical names.
std::optional<AgentKind> agent_kind_from_name(std::string_view name);

enum class ProtocolErrorKind {
    MissingField,
    InvalidAgentName,
    InvalidAgentId,
    BadRoleList,
    InvalidDebateRoles,
    TooManyAgents,
    MissingAnswer,
    MultipleAgentsNoEdges,
    DuplicateAgentId,
    MultipleEdgeBlocks,
    MalformedEdge,
};

std::string_view to_string(ProtocolErrorKind kind);

class ProtocolError : public std::runtime_error {
public:
    ProtocolError(ProtocolErrorKind kind, const std::string& detail);
    ProtocolErrorKind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ProtocolErrorKind kind_;
    std::string detail_;
};

struct OrchestratorOutput {
    std::string raw_text;
    std::optional<std::string> thinking;
    std::vector<std::string> agent_blocks;  // inner text of each <agent> span
    std::optional<std::string> edge_block;  // inner text of the first <edge> span
    std::optional<std::string> answer;
    std::size_t edge_block_count = 0;

    bool multiple_edge_blocks() const { return edge_block_count > 1; }
};

struct AgentSpec {
    std::string agent_id;  // empty under Low DoM when not given
    AgentKind kind = AgentKind::CoT;
    std::string description;
    std::string agent_input;  // empty: inherit the original question
    std::optional<std::vector<std::string>> debate_roles;
    std::optional<std::string> output_id;
    // Roles were given in the newline-separated form and normalized.
    bool roles_normalized = false;

    bool operator==(const AgentSpec&) const = default;
};

struct DirectAnswer {
    std::string text;
    bool operator==(const DirectAnswer&) const = default;
};

struct SingleDelegation {
    AgentSpec agent;
    std::string answer_ref;  // content of <answer>, possibly empty
    bool operator==(const SingleDelegation&) const = default;
};

struct Edge {
    std::string from;
    std::string to;
    bool operator==(const Edge&) const = default;
    auto operator<=>(const Edge&) const = default;
};

struct AgentGraphPlan {
    std::vector<AgentSpec> agents;
    std::vector<Edge> edges;
    // An <answer> channel that coexisted with agent blocks; the sink output
    // wins, so this is kept only for logging and re-serialization.
    std::optional<std::string> ignored_answer;
    bool operator==(const AgentGraphPlan&) const = default;
};

struct LowDomDecision {
    std::variant<DirectAnswer, SingleDelegation> value;
    bool operator==(const LowDomDecision&) const = default;
};

struct HighDomPlan {
    std::variant<DirectAnswer, AgentGraphPlan> value;
    bool operator==(const HighDomPlan&) const = default;
};

// Trimmed content of the first complete <tag>...</tag> span.
std::optional<std::string> extract_channel(std::string_view text, std::string_view tag);

// All complete, non-overlapping <tag>...</tag> spans in document order (untrimmed).
std::vector<std::string> extract_all_spans(std::string_view text, std::string_view tag);

OrchestratorOutput split_channels(std::string_view raw);

// Parses a bracketed quoted list (["a", "b"]) or newline-separated quoted
// items. Returns nullopt when the text is neither.
std::optional<std::vector<std::string>> parse_role_list(std::string_view text, bool* normalized = nullptr);

AgentSpec parse_agent_block(std::string_view block, DomLevel level);

LowDomDecision parse_low_dom(std::string_view raw);
HighDomPlan parse_high_dom(std::string_view raw);

// Canonical text forms; parsing them yields the same structured value.
std::string render_agent_block(const AgentSpec& spec, DomLevel level);
std::string render_low_dom(const LowDomDecision& decision, std::string_view thinking = {});
std::string render_high_dom(const HighDomPlan& plan, std::string_view thinking = {});

}  // namespace mas
