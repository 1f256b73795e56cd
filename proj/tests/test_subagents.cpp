#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <map>
#include <random>

#include "mas/protocol.hpp"
#include "mas/retriever.hpp"
#include "mas/subagents.hpp"

using namespace mas;

namespace {

struct CountingBackend : ChatBackend {
    std::function<std::string(const ChatRequest&, int)> reply;
    std::atomic<int> calls{0};
    ChatResponse complete(const ChatRequest& req) override {
        int n = calls++;
        return {reply ? reply(req, n) : "<thinking>t</thinking><answer>7</answer>", 10, 3};
    }
    std::string model() const override { return "mock"; }
};

std::string last_user(const ChatRequest& r) { return r.messages.back().content; }

// Frequency count with first-seen tie-break, kept deliberately naive.
std::string frequency_oracle(const std::vector<std::string>& xs) {
    std::string best;
    int best_count = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        bool seen_before = false;
        for (std::size_t j = 0; j < i; ++j) seen_before |= xs[j] == xs[i];
        if (seen_before) continue;
        int c = 0;
        for (const auto& y : xs) c += y == xs[i];
        if (c > best_count) {
            best = xs[i];
            best_count = c;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("cot agent makes one call") {
    CountingBackend be;
    be.reply = [](const ChatRequest& r, int) {
        CHECK(last_user(r).find("(20+9)*(30+7)") != std::string::npos);
        return std::string("<thinking>600+140+270+63</thinking><answer>\\boxed{1073}</answer>");
    };
    AgentContext ctx{be};
    auto a = cot_agent("What is (20+9)*(30+7)?", ctx);
    CHECK(a.answer == "\\boxed{1073}");
    CHECK(a.calls_made == 1);
    CHECK(a.ledger.llm_calls == 1);
    CHECK(a.ledger.prompt_tokens == 10);
    CHECK(a.ledger.completion_tokens == 3);
    CHECK_THROWS_AS(cot_agent("   ", ctx), SubagentError);
    CHECK(be.calls == 1);
}

TEST_CASE("request layout") {
    AgentConfig cfg;
    auto req = build_request({"A", "B"}, "Do it.", cfg, "Critic", {"feedback", "correct"}, 3);
    CHECK(req.system == "You are a helpful assistant. You are a Critic.\nReply in the following format:\n"
                        "<feedback>...</feedback>\n<correct>...</correct>");
    REQUIRE(req.messages.size() == 1);
    CHECK(req.messages[0].content == "A\n\nB\n\nDo it.");
    CHECK(req.sample == 3);
}

TEST_CASE("self-consistency votes over samples") {
    for (bool concurrent : {false, true}) {
        CountingBackend be;
        const char* answers[] = {"7", "7", "3", "7", "3"};
        be.reply = [&](const ChatRequest& r, int) { return "<answer>" + std::string(answers[r.sample]) + "</answer>"; };
        AgentContext ctx{be};
        ctx.config.concurrent_samples = concurrent;
        auto a = sc_agent("q", ctx);
        CHECK(a.answer == "7");
        CHECK(a.calls_made == 5);
    }
    CountingBackend tie;
    tie.reply = [](const ChatRequest& r, int) { return std::string(r.sample == 0 ? "<answer>a</answer>" : "<answer>b</answer>"); };
    AgentContext tctx{tie};
    tctx.config.sc_samples = 2;
    CHECK(sc_agent("q", tctx).answer == "a");

    CountingBackend one;
    AgentContext octx{one};
    octx.config.sc_samples = 1;
    auto a = sc_agent("q", octx);
    CHECK(a.calls_made == 1);
    CHECK(a.answer == "7");
}

TEST_CASE("majority vote") {
    CHECK(majority_vote({"x", "y", "x"}) == "x");
    CHECK(majority_vote({"y", "x"}) == "y");
    CHECK(majority_vote({" 5 ", "5", "6"}) == "5");
    CHECK_THROWS_AS(majority_vote({}), SubagentError);
    std::mt19937 rng(3);
    for (int i = 0; i < 100; ++i) {
        std::vector<std::string> xs(1 + rng() % 12);
        for (auto& x : xs) x = std::string(1, static_cast<char>('a' + rng() % 4));
        CHECK(majority_vote(xs) == frequency_oracle(xs));
    }
}

TEST_CASE("debate call counts") {
    CountingBackend be;
    AgentContext ctx{be};
    auto a = debate_agent("q", {"Optimist", "Skeptic"}, ctx);
    CHECK(a.calls_made == 11);
    CHECK(be.calls == 11);

    CountingBackend be3;
    AgentContext ctx3{be3};
    ctx3.config.debate_rounds = 1;
    CHECK(debate_agent("q", {"A1", "B2", "C3"}, ctx3).calls_made == 4);

    CountingBackend lone;
    AgentContext lctx{lone};
    try {
        debate_agent("q", {"Solo"}, lctx);
        FAIL("expected TooFewRoles");
    } catch (const SubagentError& e) {
        CHECK(e.kind() == SubagentErrorKind::TooFewRoles);
    }
    CHECK(lone.calls == 0);
}

TEST_CASE("debate rounds see the other roles") {
    CountingBackend be;
    std::vector<ChatRequest> seen;
    std::mutex mu;
    be.reply = [&](const ChatRequest& r, int) {
        std::lock_guard lock(mu);
        seen.push_back(r);
        return std::string("<thinking>from sample ") + std::to_string(r.sample) + "</thinking><answer>1</answer>";
    };
    AgentContext ctx{be};
    ctx.config.debate_rounds = 2;
    debate_agent("q", {"Optimist", "Skeptic"}, ctx);
    REQUIRE(seen.size() == 5);
    CHECK(last_user(seen[2]).find("Thinking of Skeptic: from sample 1") != std::string::npos);
    CHECK(last_user(seen[4]).find("Answer of Optimist: 1") != std::string::npos);
}

TEST_CASE("reflexion call counts") {
    CountingBackend early;
    early.reply = [](const ChatRequest& r, int) {
        return std::string(r.system.find("<correct>") != std::string::npos ? "<feedback>fine</feedback><correct>True</correct>"
                                                                           : "<answer>4</answer>");
    };
    AgentContext ectx{early};
    CHECK(reflexion_agent("q", ectx).calls_made == 2);

    CountingBackend never;
    never.reply = [](const ChatRequest& r, int) {
        return std::string(r.system.find("<correct>") != std::string::npos ? "<feedback>wrong</feedback><correct>False</correct>"
                                                                           : "<answer>4</answer>");
    };
    AgentContext nctx{never};
    CHECK(reflexion_agent("q", nctx).calls_made == 11);

    CountingBackend lower;
    lower.reply = [](const ChatRequest& r, int) {
        return std::string(r.system.find("<correct>") != std::string::npos ? "<correct>true</correct>" : "<answer>4</answer>");
    };
    AgentContext lctx{lower};
    CHECK(reflexion_agent("q", lctx).calls_made == 11);
}

TEST_CASE("search agent loop") {
    Bm25Retriever corpus({{"d1", "the capital of France is Paris"}, {"d2", "bananas are yellow"}});
    CountingBackend once;
    once.reply = [](const ChatRequest& r, int) {
        if (r.messages.size() == 1) return std::string("<search>capital France</search>");
        CHECK(r.messages.back().content.find("[1] d1:") != std::string::npos);
        return std::string("<answer>Paris</answer>");
    };
    AgentContext ctx{once, &corpus};
    auto a = search_agent("capital?", ctx);
    CHECK(a.calls_made == 2);
    CHECK(a.retrievals == 1);
    CHECK(a.answer == "Paris");
    CHECK_FALSE(a.incomplete);

    CountingBackend direct;
    AgentContext dctx{direct, &corpus};
    auto d = search_agent("q", dctx);
    CHECK(d.calls_made == 1);
    CHECK(d.retrievals == 0);

    CountingBackend forever;
    forever.reply = [](const ChatRequest&, int) { return std::string("<search>more</search>"); };
    AgentContext fctx{forever, &corpus};
    auto f = search_agent("q", fctx);
    CHECK(f.calls_made == 5);
    CHECK(f.incomplete);

    AgentContext none{direct};
    CHECK_THROWS_AS(search_agent("q", none), SubagentError);
}

TEST_CASE("backend failure carries the partial ledger") {
    CountingBackend be;
    be.reply = [](const ChatRequest&, int n) -> std::string {
        if (n == 2) throw BackendError("down");
        return "<answer>1</answer>";
    };
    AgentContext ctx{be};
    try {
        debate_agent("q", {"Optimist", "Skeptic"}, ctx);
        FAIL("expected AgentCallError");
    } catch (const AgentCallError& e) {
        CHECK(e.calls_made() == 3);
        CHECK(e.partial_ledger().llm_calls == 3);
        CHECK(e.partial_ledger().prompt_tokens == 20);
    }
}

TEST_CASE("priced calls accumulate dollars") {
    CountingBackend be;
    PriceTable prices;
    prices.set("mock", 1.0, 2.0);
    AgentContext ctx{be, nullptr, &prices};
    auto a = sc_agent("q", ctx);
    REQUIRE(a.ledger.cost_picodollars.has_value());
    // 5 calls x (10 in at $1/M + 3 out at $2/M) = 80 micro-dollars.
    CHECK(*a.ledger.cost_picodollars == 5 * (10 * 1'000'000 + 3 * 2'000'000));
}

TEST_CASE("config validation") {
    AgentConfig c;
    c.sc_samples = 0;
    CHECK_THROWS_AS(c.validate(), SubagentError);
}

TEST_CASE("run_agent dispatches on kind") {
    CountingBackend be;
    AgentContext ctx{be};
    AgentSpec s;
    s.kind = AgentKind::SC;
    CHECK(run_agent(s, "q", ctx).calls_made == 5);
    s.kind = AgentKind::Debate;
    s.debate_roles = std::vector<std::string>{"Optimist", "Skeptic"};
    CHECK(run_agent(s, "q", ctx).calls_made == 11);
}
