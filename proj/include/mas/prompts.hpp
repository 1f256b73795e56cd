#pragma once

#include <string>

#include "mas/backend.hpp"
#include "mas/protocol.hpp"

namespace mas {

// One DoM level's orchestrator prompt: system, develop and user parts.
// The user part carries a [QUESTION] slot; system carries [MODEL].
struct PromptTemplates {
    std::string system;
    std::string develop;
    std::string user;

    // 16 hex digits over all three parts.
    std::string content_hash() const;
    // Reads system.txt, develop.txt and user.txt from `dir`.
    static PromptTemplates load(const std::string& dir);
};

struct PromptSet {
    PromptTemplates low;
    PromptTemplates high;

    const PromptTemplates& for_level(DomLevel level) const { return level == DomLevel::Low ? low : high; }
    std::string content_hash() const;
    // Expects low/ and high/ subdirectories.
    static PromptSet load(const std::string& dir);
};

// System and develop parts are concatenated into the system prompt; the
// task replaces [QUESTION] in the user part.
ChatRequest assemble_prompt(const PromptTemplates& t, const std::string& task, const std::string& model);

}  // namespace mas
