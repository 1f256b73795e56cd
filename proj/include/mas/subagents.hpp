#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mas/backend.hpp"
#include "mas/ledger.hpp"
#include "mas/protocol.hpp"
#include "mas/retriever.hpp"

namespace mas {

inline constexpr const char* kCotInstruction = "Please think step by step and then solve the task.";
inline constexpr const char* kDebateInstruction =
    "Given solutions from other agents, consider their opinions as advice and provide an updated answer.";
inline constexpr const char* kFinalDecisionInstruction =
    "Given all reasoning and answers, carefully provide a final answer.";
inline constexpr const char* kReflectInstruction =
    "Given previous attempts and feedback, carefully consider where you could go wrong in your latest attempt. "
    "Using insights from previous attempts, try to solve the task better.";
inline constexpr const char* kCriticInstruction =
    "Please review the answer above and criticize where it might be wrong. If you are absolutely sure it is "
    "correct, output exactly 'True' in 'correct'.";

struct AgentConfig {
    double temperature = 0.5;
    int sc_samples = 5;
    int debate_rounds = 5;
    int reflexion_rounds = 5;
    int search_rounds = 5;
    int max_tokens = 512;
    int search_top_k = 3;
    // SC samples and the per-role calls of a debate round run concurrently.
    bool concurrent_samples = false;

    // Throws SubagentError(InvalidConfig) when out of range.
    void validate() const;
};

enum class SubagentErrorKind { EmptyInput, TooFewRoles, InvalidConfig, EmptyVote, MissingRetriever };

std::string_view to_string(SubagentErrorKind kind);

class SubagentError : public std::runtime_error {
public:
    SubagentError(SubagentErrorKind kind, const std::string& detail);
    SubagentErrorKind kind() const noexcept { return kind_; }

private:
    SubagentErrorKind kind_;
};

// A backend failure inside a workflow, carrying what was spent before it.
class AgentCallError : public BackendError {
public:
    AgentCallError(const std::string& what, CostLedger partial, std::size_t calls_made)
        : BackendError(what), partial_(partial), calls_made_(calls_made) {}
    const CostLedger& partial_ledger() const noexcept { return partial_; }
    std::size_t calls_made() const noexcept { return calls_made_; }

private:
    CostLedger partial_;
    std::size_t calls_made_;
};

struct AgentAnswer {
    std::string thinking;
    std::string answer;
    std::size_t calls_made = 0;
    CostLedger ledger;
    std::size_t retrievals = 0;
    bool incomplete = false;  // search agent ran out of rounds
};

struct AgentContext {
    ChatBackend& backend;
    const Retriever* retriever = nullptr;
    const PriceTable* prices = nullptr;  // null: calls are unpriced
    AgentConfig config{};
};

// Splits a completion into <thinking>/<answer>; without an answer tag the
// whole completion is the answer.
std::pair<std::string, std::string> split_thinking_answer(const std::string& completion);

// Most frequent trimmed answer; ties go to the earliest first occurrence.
std::string majority_vote(const std::vector<std::string>& answers);

AgentAnswer cot_agent(const std::string& input, AgentContext& ctx);
AgentAnswer sc_agent(const std::string& input, AgentContext& ctx);
AgentAnswer debate_agent(const std::string& input, const std::vector<std::string>& roles, AgentContext& ctx);
AgentAnswer reflexion_agent(const std::string& input, AgentContext& ctx);
AgentAnswer search_agent(const std::string& input, AgentContext& ctx);

// Dispatches on spec.kind with `input` as the fully resolved agent input.
AgentAnswer run_agent(const AgentSpec& spec, const std::string& input, AgentContext& ctx);

// Request for one workflow step: input blocks followed by the instruction.
ChatRequest build_request(const std::vector<std::string>& inputs, const std::string& instruction,
                          const AgentConfig& cfg, const std::string& role = "",
                          const std::vector<std::string>& output_fields = {"thinking", "answer"}, int sample = 0);

}  // namespace mas
