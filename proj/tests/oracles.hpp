#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <vector>

#include "mas/bench.hpp"

namespace testing {

// Plain recursion, no memo, no topological order.
inline std::int64_t naive_value(const mas::DepGraph& g, const std::string& id, int depth = 0) {
    if (depth > 64) throw std::runtime_error("naive evaluator: too deep");
    const auto& e = g.defs.at(id);
    if (e.kind == mas::ExprKind::Const) return e.k;
    auto get = [&](std::size_t i) { return naive_value(g, e.refs.at(i), depth + 1); };
    auto inner = [&](bool diff) {
        if (diff) return get(0) - get(1);
        std::int64_t s = 0;
        for (std::size_t i = 0; i < e.refs.size(); ++i) s += get(i);
        return s;
    };
    std::int64_t v = 0;
    if (e.kind == mas::ExprKind::Sum) v = inner(false);
    if (e.kind == mas::ExprKind::Diff) v = inner(true);
    if (e.kind == mas::ExprKind::ScaledSum) v = e.k * inner(e.combine == mas::Combine::Diff);
    if (e.kind == mas::ExprKind::OffsetRef) v = e.k + inner(e.combine == mas::Combine::Diff);
    if (g.modulus) {
        v %= *g.modulus;
        if (v < 0) v += *g.modulus;
    }
    return v;
}

inline std::vector<std::string> naive_eval(const mas::DepGraph& g) {
    std::vector<std::string> out;
    for (const auto& q : g.query_ids) out.push_back(std::to_string(naive_value(g, q)));
    return out;
}

// Reads the relation sentences of a rendered question back into equations and
// solves them. Knows nothing about the DepGraph.
class SentenceSolver {
public:
    void add_block(const std::string& text) {
        static const std::regex rel(R"(The number of each ([^\n]+?) equals ([^\n]+?)\.(?=\s|$))");
        static const std::regex carry(R"(Using the result \[answer(\d+)\] from the previous calculation, (\[variable\d+\]) = \[answer\d+\]\.)");
        for (std::sregex_iterator it(text.begin(), text.end(), rel), end; it != end; ++it) {
            rhs_[(*it)[1]] = (*it)[2];
        }
        for (std::sregex_iterator it(text.begin(), text.end(), carry), end; it != end; ++it) {
            int k = std::stoi((*it)[1]);
            known_[(*it)[2]] = answers_.at(static_cast<std::size_t>(k - 1));
        }
    }

    std::int64_t value(const std::string& name, int depth = 0) {
        if (auto it = known_.find(name); it != known_.end()) return it->second;
        if (depth > 64) throw std::runtime_error("solver: cyclic text");
        auto it = rhs_.find(name);
        if (it == rhs_.end()) throw std::runtime_error("solver: no sentence for " + name);
        std::string r = it->second;
        static const std::regex times(R"(^(\d+) times as much as (.+)$)");
        static const std::regex more(R"(^(\d+) more than (.+)$)");
        static const std::regex num(R"(^\d+$)");
        std::smatch m;
        std::int64_t v;
        if (std::regex_match(r, m, num)) {
            v = std::stoll(r);
        } else if (std::regex_match(r, m, times)) {
            v = std::stoll(m[1]) * refs(m[2], depth);
        } else if (std::regex_match(r, m, more)) {
            v = std::stoll(m[1]) + refs(m[2], depth);
        } else {
            v = refs(r, depth);
        }
        known_[name] = v;
        return v;
    }

    void push_answer(std::int64_t a) { answers_.push_back(a); }
    void reset_scope() {
        rhs_.clear();
        known_.clear();
    }

private:
    std::int64_t refs(const std::string& phrase, int depth) {
        auto names = [](std::string s) {
            std::vector<std::string> out;
            static const std::regex sep(R"(, each | and each )");
            s = s.substr(5);  // "each "
            std::sregex_token_iterator it(s.begin(), s.end(), sep, -1), end;
            for (; it != end; ++it) out.push_back(*it);
            return out;
        };
        if (phrase.rfind("the difference of ", 0) == 0) {
            auto n = names(phrase.substr(18));
            if (n.size() != 2) throw std::runtime_error("solver: bad difference " + phrase);
            return value(n[0], depth + 1) - value(n[1], depth + 1);
        }
        auto body = phrase.rfind("the sum of ", 0) == 0 ? phrase.substr(11) : phrase;
        std::int64_t s = 0;
        for (const auto& n : names(body)) s += value(n, depth + 1);
        return s;
    }

    std::map<std::string, std::string> rhs_;
    std::map<std::string, std::int64_t> known_;
    std::vector<std::int64_t> answers_;
};

// Answers recovered from the question text alone.
inline std::vector<std::string> solve_rendered(const mas::BenchInstance& inst) {
    const std::string q = inst.question;
    std::vector<std::string> out;
    SentenceSolver solver;
    if (inst.axis == mas::Axis::Depth || inst.axis == mas::Axis::Breadth) {
        static const std::regex ask(R"(How many (.+) does (.+) have\?$)");
        std::smatch m;
        if (!std::regex_search(q, m, ask)) throw std::runtime_error("solver: no question");
        solver.add_block(q);
        out.push_back(std::to_string(solver.value(m[2].str() + "'s " + m[1].str())));
        return out;
    }
    if (inst.axis == mas::Axis::Horizon || inst.axis == mas::Axis::Parallel) {
        static const std::regex problem(R"(Problem \d+: (The number[^\n]*?) What is the value of ([^\n]+)\?)");
        for (std::sregex_iterator it(q.begin(), q.end(), problem), end; it != end; ++it) {
            solver.reset_scope();
            solver.add_block((*it)[1]);
            auto a = solver.value((*it)[2]);
            solver.push_answer(a);
            out.push_back(std::to_string(a));
        }
        return out;
    }
    // Robustness: drop notes, collect needles, then answer the final request.
    std::string text = std::regex_replace(q, std::regex(R"( ?Note: verify the information before you take it - [^\n]*?\d+\.(?=\s|$))"), "");
    std::map<std::string, std::string> needles;
    static const std::regex needle(R"(One of the special magic numbers for (\S+) is: (\d+)\.)");
    for (std::sregex_iterator it(text.begin(), text.end(), needle), end; it != end; ++it) {
        if (!needles.emplace((*it)[1], (*it)[2]).second) throw std::runtime_error("solver: needle repeated");
    }
    auto cut = text.find("From the passage, identify and return ");
    solver.add_block(text.substr(0, cut));
    std::string asks = text.substr(cut + 38);
    asks = asks.substr(0, asks.find(", wrapped in \\boxed{}"));
    static const std::regex item(R"(the magic number for (\S+?)(?=,|$| and )|the number of (.+?) that (.+?) has)");
    for (std::sregex_iterator it(asks.begin(), asks.end(), item), end; it != end; ++it) {
        if ((*it)[1].matched) {
            out.push_back(needles.at((*it)[1]));
        } else {
            out.push_back(std::to_string(solver.value((*it)[3].str() + "'s " + (*it)[2].str())));
        }
    }
    return out;
}

}  // namespace testing
