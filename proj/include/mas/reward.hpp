#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mas/backend.hpp"

namespace mas {

// Contents of every \boxed{...} span in order; braces inside are balanced.
// An unbalanced trailing box is ignored.
std::vector<std::string> extract_boxed(std::string_view text);

// "\boxed{a}\n\n\boxed{b}"; the inverse of extract_boxed for balanced payloads.
std::string box_answers(const std::vector<std::string>& answers);

// Boxed contents of a final answer, or the whole trimmed answer when unboxed.
std::vector<std::string> predictions_from_answer(std::string_view final_answer);

// Trim, collapse whitespace runs, strip leading zeros from plain integers.
std::string normalize_answer(std::string_view s);

enum class JudgeKind { ExactMatch, ExternalJudge };

struct Judgment {
    std::vector<bool> per_answer;
    bool overall = false;
    JudgeKind kind = JudgeKind::ExactMatch;
    std::string verdict;  // raw judge text for external judgments
};

Judgment judge_exact(const std::vector<std::string>& pred, const std::vector<std::string>& gold);

enum class RewardMode { Binary, Fractional };

// Binary: 1 iff overall. Fractional: share of gold positions answered correctly.
double compute_reward(const Judgment& j, RewardMode mode = RewardMode::Binary);

class GroupTooSmall : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// (R_i - mean) / std with the population std; all zeros when std is 0.
std::vector<double> group_advantages(const std::vector<double>& rewards);

class JudgeUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

ChatRequest build_judge_request(const std::vector<std::string>& pred, const std::vector<std::string>& gold,
                                const std::string& question);

// Verdict must be CORRECT or INCORRECT; anything else, or a backend failure,
// throws JudgeUnavailable.
Judgment external_judge(const std::vector<std::string>& pred, const std::vector<std::string>& gold,
                        const std::string& question, ChatBackend& judge);

}  // namespace mas
