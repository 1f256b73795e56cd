#include "mas/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "mas/util.hpp"

namespace mas {

std::vector<std::string> extract_boxed(std::string_view text) {
    static constexpr std::string_view kOpen = "\\boxed{";
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = text.find(kOpen, pos)) != std::string_view::npos) {
        std::size_t start = pos + kOpen.size();
        int depth = 1;
        std::size_t i = start;
        for (; i < text.size() && depth > 0; ++i) {
            if (text[i] == '{') ++depth;
            if (text[i] == '}') --depth;
        }
        if (depth != 0) break;
        out.emplace_back(text.substr(start, i - 1 - start));
        pos = i;
    }
    return out;
}

std::string box_answers(const std::vector<std::string>& answers) {
    std::string out;
    for (std::size_t i = 0; i < answers.size(); ++i) {
        if (i) out += "\n\n";
        out += "\\boxed{" + answers[i] + "}";
    }
    return out;
}

std::vector<std::string> predictions_from_answer(std::string_view final_answer) {
    auto boxed = extract_boxed(final_answer);
    if (!boxed.empty()) return boxed;
    auto t = trim(final_answer);
    if (t.empty()) return {};
    return {t};
}

std::string normalize_answer(std::string_view s) {
    auto out = collapse_whitespace(s);
    std::size_t sign = (!out.empty() && (out[0] == '-' || out[0] == '+')) ? 1 : 0;
    bool integer = out.size() > sign &&
                   std::all_of(out.begin() + static_cast<std::ptrdiff_t>(sign), out.end(),
                               [](unsigned char c) { return std::isdigit(c) != 0; });
    if (integer) {
        auto first = out.find_first_not_of('0', sign);
        out = out.substr(0, sign) + (first == std::string::npos ? "0" : out.substr(first));
    }
    return out;
}

Judgment judge_exact(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    Judgment j;
    j.kind = JudgeKind::ExactMatch;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        j.per_answer.push_back(i < pred.size() && normalize_answer(pred[i]) == normalize_answer(gold[i]));
    }
    j.overall = pred.size() == gold.size() && std::all_of(j.per_answer.begin(), j.per_answer.end(), [](bool b) { return b; });
    return j;
}

double compute_reward(const Judgment& j, RewardMode mode) {
    if (mode == RewardMode::Binary || j.per_answer.empty()) return j.overall ? 1.0 : 0.0;
    auto hits = std::count(j.per_answer.begin(), j.per_answer.end(), true);
    return static_cast<double>(hits) / static_cast<double>(j.per_answer.size());
}

std::vector<double> group_advantages(const std::vector<double>& rewards) {
    if (rewards.size() < 2) throw GroupTooSmall("group needs at least 2 rewards, got " + std::to_string(rewards.size()));
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= n;
    double sd = std::sqrt(var);
    std::vector<double> out(rewards.size(), 0.0);
    bool all_equal = std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); });
    if (all_equal || sd == 0.0) return out;
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
    return out;
}

ChatRequest build_judge_request(const std::vector<std::string>& pred, const std::vector<std::string>& gold,
                                const std::string& question) {
    ChatRequest req;
    req.system =
        "You are a strict grader. Decide whether the predicted answer matches the reference answer for the "
        "question. Reply with exactly one word: CORRECT or INCORRECT.";
    std::string user = "Question:\n" + question + "\n\nReference answer:\n" + join(gold, "\n") +
                       "\n\nPredicted answer:\n" + join(pred, "\n");
    req.messages.push_back({"user", user});
    req.temperature = 0.0;
    req.max_tokens = 16;
    return req;
}

Judgment external_judge(const std::vector<std::string>& pred, const std::vector<std::string>& gold,
                        const std::string& question, ChatBackend& judge) {
    ChatResponse resp;
    try {
        resp = judge.complete(build_judge_request(pred, gold, question));
    } catch (const std::exception& e) {
        throw JudgeUnavailable(std::string("judge call failed: ") + e.what());
    }
    auto verdict = trim(resp.content);
    auto word = verdict;
    while (!word.empty() && (word.back() == '.' || word.back() == '!')) word.pop_back();
    Judgment j;
    j.kind = JudgeKind::ExternalJudge;
    j.verdict = verdict;
    if (word == "CORRECT") {
        j.overall = true;
    } else if (word == "INCORRECT") {
        j.overall = false;
    } else {
        throw JudgeUnavailable("unrecognized judge verdict: " + verdict);
    }
    j.per_answer = {j.overall};
    return j;
}

}  // namespace mas
