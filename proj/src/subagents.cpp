#include "mas/subagents.hpp"

#include <algorithm>
#include <chrono>
#include <future>
#include <map>
#include <mutex>

#include "mas/util.hpp"

namespace mas {

std::string_view to_string(SubagentErrorKind kind) {
    switch (kind) {
        case SubagentErrorKind::EmptyInput: return "EmptyInput";
        case SubagentErrorKind::TooFewRoles: return "TooFewRoles";
        case SubagentErrorKind::InvalidConfig: return "InvalidConfig";
        case SubagentErrorKind::EmptyVote: return "EmptyVote";
        case SubagentErrorKind::MissingRetriever: return "MissingRetriever";
    }
    return "Unknown";
}

SubagentError::SubagentError(SubagentErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

void AgentConfig::validate() const {
    auto bad = [](const std::string& what) { throw SubagentError(SubagentErrorKind::InvalidConfig, what); };
    if (!(temperature >= 0.0 && temperature <= 2.0)) bad("temperature must be in [0, 2]");
    if (sc_samples < 1) bad("sc_samples must be >= 1");
    if (debate_rounds < 1) bad("debate_rounds must be >= 1");
    if (reflexion_rounds < 1) bad("reflexion_rounds must be >= 1");
    if (search_rounds < 1) bad("search_rounds must be >= 1");
    if (max_tokens < 1) bad("max_tokens must be >= 1");
    if (search_top_k < 1) bad("search_top_k must be >= 1");
}

std::pair<std::string, std::string> split_thinking_answer(const std::string& completion) {
    auto answer = extract_channel(completion, "answer");
    if (!answer) return {extract_channel(completion, "thinking").value_or(""), trim(completion)};
    return {extract_channel(completion, "thinking").value_or(""), *answer};
}

std::string majority_vote(const std::vector<std::string>& answers) {
    if (answers.empty()) throw SubagentError(SubagentErrorKind::EmptyVote, "no answers to vote over");
    std::vector<std::pair<std::string, std::size_t>> counts;  // first-seen order
    for (const auto& a : answers) {
        auto t = trim(a);
        auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& c) { return c.first == t; });
        if (it == counts.end()) {
            counts.emplace_back(t, 1);
        } else {
            ++it->second;
        }
    }
    const auto* best = &counts.front();
    for (const auto& c : counts) {
        if (c.second > best->second) best = &c;
    }
    return best->first;
}

ChatRequest build_request(const std::vector<std::string>& inputs, const std::string& instruction,
                          const AgentConfig& cfg, const std::string& role,
                          const std::vector<std::string>& output_fields, int sample) {
    ChatRequest req;
    req.system = "You are a helpful assistant.";
    if (!role.empty()) req.system += " You are a " + role + ".";
    req.system += "\nReply in the following format:";
    for (const auto& f : output_fields) req.system += "\n<" + f + ">...</" + f + ">";
    std::string user;
    for (const auto& in : inputs) user += in + "\n\n";
    user += instruction;
    req.messages.push_back({"user", user});
    req.temperature = cfg.temperature;
    req.max_tokens = cfg.max_tokens;
    req.sample = sample;
    return req;
}

namespace {

// Issues backend calls and accounts each of them exactly once.
class Caller {
public:
    explicit Caller(AgentContext& ctx) : ctx_(ctx) {}

    std::string call(const ChatRequest& req) {
        auto t0 = std::chrono::steady_clock::now();
        ChatResponse resp;
        try {
            resp = ctx_.backend.complete(req);
        } catch (const std::exception& e) {
            auto us = elapsed_us(t0);
            std::lock_guard lock(mu_);
            ++calls_;
            ledger_ += entry(0, 0, us);
            throw AgentCallError(e.what(), ledger_, calls_);
        }
        auto us = elapsed_us(t0);
        std::lock_guard lock(mu_);
        ++calls_;
        ledger_ += entry(resp.prompt_tokens, resp.completion_tokens, us);
        return resp.content;
    }

    void add_to(AgentAnswer& out) {
        std::lock_guard lock(mu_);
        out.calls_made = calls_;
        out.ledger = ledger_;
    }

    AgentCallError failure(const std::string& what) {
        std::lock_guard lock(mu_);
        return AgentCallError(what, ledger_, calls_);
    }

private:
    static std::int64_t elapsed_us(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - t0).count();
    }

    CostLedger entry(std::uint64_t p, std::uint64_t c, std::int64_t us) const {
        if (!ctx_.prices) return unpriced_call(p, c, us);
        return ctx_.prices->price_call(ctx_.backend.model(), p, c, us);
    }

    AgentContext& ctx_;
    std::mutex mu_;
    CostLedger ledger_{};
    std::size_t calls_ = 0;
};

// Runs fn(0..n-1), concurrently when asked; results keep index order.
template <typename Fn>
auto fan_out(int n, bool concurrent, Fn fn) {
    using R = decltype(fn(0));
    std::vector<R> out;
    if (!concurrent || n == 1) {
        for (int i = 0; i < n; ++i) out.push_back(fn(i));
        return out;
    }
    std::vector<std::future<R>> futures;
    for (int i = 0; i < n; ++i) futures.push_back(std::async(std::launch::async, fn, i));
    std::exception_ptr first_error;
    for (auto& f : futures) {
        try {
            out.push_back(f.get());
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

void require_input(const std::string& input) {
    if (trim_view(input).empty()) throw SubagentError(SubagentErrorKind::EmptyInput, "agent input is empty");
}

}  // namespace

AgentAnswer cot_agent(const std::string& input, AgentContext& ctx) {
    require_input(input);
    ctx.config.validate();
    Caller caller(ctx);
    auto content = caller.call(build_request({input}, kCotInstruction, ctx.config));
    AgentAnswer out;
    std::tie(out.thinking, out.answer) = split_thinking_answer(content);
    caller.add_to(out);
    return out;
}

AgentAnswer sc_agent(const std::string& input, AgentContext& ctx) {
    require_input(input);
    ctx.config.validate();
    Caller caller(ctx);
    struct Sample {
        bool ok = false;
        std::string thinking, answer, error;
    };
    auto samples = fan_out(ctx.config.sc_samples, ctx.config.concurrent_samples, [&](int i) {
        Sample s;
        try {
            auto content = caller.call(build_request({input}, kCotInstruction, ctx.config, "", {"thinking", "answer"}, i));
            std::tie(s.thinking, s.answer) = split_thinking_answer(content);
            s.ok = true;
        } catch (const AgentCallError& e) {
            s.error = e.what();
        }
        return s;
    });
    std::vector<std::string> answers;
    std::map<std::string, std::string> thinking_for;  // last sample wins, as in a dict overwrite
    for (const auto& s : samples) {
        if (!s.ok) continue;
        answers.push_back(s.answer);
        thinking_for[trim(s.answer)] = s.thinking;
    }
    if (answers.empty()) throw caller.failure("all self-consistency samples failed: " + samples.front().error);
    AgentAnswer out;
    out.answer = majority_vote(answers);
    out.thinking = thinking_for[out.answer];
    caller.add_to(out);
    return out;
}

AgentAnswer debate_agent(const std::string& input, const std::vector<std::string>& roles, AgentContext& ctx) {
    require_input(input);
    ctx.config.validate();
    if (roles.size() < 2) throw SubagentError(SubagentErrorKind::TooFewRoles, "debate needs at least two roles");
    for (const auto& r : roles) {
        if (trim(r).size() < 2) throw SubagentError(SubagentErrorKind::TooFewRoles, "debate role too short: '" + r + "'");
    }
    Caller caller(ctx);
    const int n = static_cast<int>(roles.size());
    std::vector<std::string> prev_thinking, prev_answers;
    for (int r = 0; r < ctx.config.debate_rounds; ++r) {
        auto results = fan_out(n, ctx.config.concurrent_samples, [&](int i) {
            ChatRequest req;
            if (r == 0) {
                req = build_request({input}, kCotInstruction, ctx.config, roles[i], {"thinking", "answer"}, r * n + i);
            } else {
                std::vector<std::string> infos{input, "Your previous thinking: " + prev_thinking[i]};
                for (int j = 0; j < n; ++j) {
                    if (j != i) infos.push_back("Thinking of " + roles[j] + ": " + prev_thinking[j]);
                }
                req = build_request(infos, kDebateInstruction, ctx.config, roles[i], {"thinking", "answer"}, r * n + i);
            }
            return split_thinking_answer(caller.call(req));
        });
        prev_thinking.clear();
        prev_answers.clear();
        for (auto& [t, a] : results) {
            prev_thinking.push_back(t);
            prev_answers.push_back(a);
        }
    }
    std::vector<std::string> infos{input};
    for (int i = 0; i < n; ++i) infos.push_back("Thinking of " + roles[i] + ": " + prev_thinking[i]);
    for (int i = 0; i < n; ++i) infos.push_back("Answer of " + roles[i] + ": " + prev_answers[i]);
    auto content = caller.call(build_request(infos, kFinalDecisionInstruction, ctx.config, "", {"thinking", "answer"},
                                             ctx.config.debate_rounds * n));
    AgentAnswer out;
    std::tie(out.thinking, out.answer) = split_thinking_answer(content);
    caller.add_to(out);
    return out;
}

AgentAnswer reflexion_agent(const std::string& input, AgentContext& ctx) {
    require_input(input);
    ctx.config.validate();
    Caller caller(ctx);
    std::vector<std::string> cot_inputs{input};
    auto [thinking, answer] = split_thinking_answer(caller.call(build_request(cot_inputs, kCotInstruction, ctx.config)));
    for (int i = 0; i < ctx.config.reflexion_rounds; ++i) {
        auto critique = caller.call(build_request({input, "Thinking: " + thinking, "Answer: " + answer},
                                                  kCriticInstruction, ctx.config, "", {"feedback", "correct"}, i));
        auto correct = extract_channel(critique, "correct");
        if (correct && *correct == "True") break;
        auto feedback = extract_channel(critique, "feedback").value_or(trim(critique));
        cot_inputs.push_back("Previous thinking: " + thinking);
        cot_inputs.push_back("Previous answer: " + answer);
        cot_inputs.push_back("Feedback: " + feedback);
        std::tie(thinking, answer) = split_thinking_answer(
            caller.call(build_request(cot_inputs, kReflectInstruction, ctx.config, "", {"thinking", "answer"}, i + 1)));
    }
    AgentAnswer out;
    out.thinking = thinking;
    out.answer = answer;
    caller.add_to(out);
    return out;
}

AgentAnswer search_agent(const std::string& input, AgentContext& ctx) {
    require_input(input);
    ctx.config.validate();
    if (!ctx.retriever) throw SubagentError(SubagentErrorKind::MissingRetriever, "search agent needs a retriever");
    Caller caller(ctx);
    auto req = build_request({input}, kCotInstruction, ctx.config);
    req.system +=
        "\nTo search the corpus instead of answering, reply with exactly one <search>query</search> tag; "
        "results are returned in the next message.";
    AgentAnswer out;
    std::string content;
    bool searching = false;
    for (int turn = 0; turn < ctx.config.search_rounds; ++turn) {
        req.sample = turn;
        content = caller.call(req);
        auto query = extract_channel(content, "search");
        searching = query.has_value();
        if (!searching) break;
        auto hits = ctx.retriever->search(*query, static_cast<std::size_t>(ctx.config.search_top_k));
        ++out.retrievals;
        std::string results = "Search results for \"" + *query + "\":";
        if (hits.empty()) results += "\n(no results)";
        for (std::size_t k = 0; k < hits.size(); ++k) {
            results += "\n[" + std::to_string(k + 1) + "] " + hits[k].doc_id + ": " + hits[k].snippet;
        }
        req.messages.push_back({"assistant", content});
        req.messages.push_back({"user", results});
    }
    std::tie(out.thinking, out.answer) = split_thinking_answer(content);
    out.incomplete = searching;
    caller.add_to(out);
    return out;
}

AgentAnswer run_agent(const AgentSpec& spec, const std::string& input, AgentContext& ctx) {
    switch (spec.kind) {
        case AgentKind::CoT: return cot_agent(input, ctx);
        case AgentKind::SC: return sc_agent(input, ctx);
        case AgentKind::Debate: return debate_agent(input, spec.debate_roles.value_or(std::vector<std::string>{}), ctx);
        case AgentKind::Reflexion: return reflexion_agent(input, ctx);
        case AgentKind::WebSearch: return search_agent(input, ctx);
    }
    throw SubagentError(SubagentErrorKind::InvalidConfig, "unknown agent kind");
}

}  // namespace mas
