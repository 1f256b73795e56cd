#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "mas/bench.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mas;

namespace {

DepGraph load_graph(const std::string& name) {
    return dep_graph_from_json(nlohmann::json::parse(testing::fixture(name)));
}

Variable var(const std::string& id) {
    Variable v;
    v.id = id;
    v.display = id;
    return v;
}

DepGraph random_graph(std::mt19937_64& rng, bool with_mod) {
    DepGraph g;
    int n = 1 + static_cast<int>(rng() % 10);
    for (int i = 0; i < n; ++i) {
        auto id = "x" + std::to_string(i);
        g.variables.push_back(var(id));
        Expr e;
        std::vector<std::string> pool;
        for (int j = 0; j < i; ++j) pool.push_back("x" + std::to_string(j));
        int kind = pool.empty() ? 0 : static_cast<int>(rng() % 5);
        e.k = static_cast<std::int64_t>(rng() % 20);
        if (kind != 0) {
            std::shuffle(pool.begin(), pool.end(), rng);
            std::size_t take = 1 + rng() % std::min<std::size_t>(pool.size(), 4);
            e.refs.assign(pool.begin(), pool.begin() + static_cast<long>(take));
        }
        switch (kind) {
            case 0: e.kind = ExprKind::Const; break;
            case 1: e.kind = ExprKind::Sum; break;
            case 2:
                e.kind = ExprKind::Diff;
                e.refs = {e.refs.front(), pool.back()};
                break;
            case 3: e.kind = ExprKind::ScaledSum; break;
            default: e.kind = ExprKind::OffsetRef; break;
        }
        if ((kind == 3 || kind == 4) && pool.size() >= 2 && rng() % 3 == 0) {
            e.combine = Combine::Diff;
            e.refs = {pool[0], pool[1]};
        }
        g.defs[id] = e;
    }
    g.query_ids = {"x" + std::to_string(n - 1)};
    if (n > 2 && rng() % 2) g.query_ids.push_back("x" + std::to_string(n / 2));
    if (with_mod) g.modulus = 23;
    return g;
}

int cell_count(Axis axis) { return axis == Axis::Robustness ? 20 : 60; }

}  // namespace

TEST_CASE("sample fixtures evaluate to their known answers") {
    CHECK(oracle_eval(load_graph("sample_depth.json")) == std::vector<std::string>{"10"});
    CHECK(oracle_eval(load_graph("sample_horizon.json")) == std::vector<std::string>{"14", "22", "11", "7"});
    CHECK(oracle_eval(load_graph("sample_breadth.json")) == std::vector<std::string>{"0"});
    CHECK(oracle_eval(load_graph("sample_parallel.json")) == std::vector<std::string>{"7", "17", "17", "18"});
    auto rob = bench_instance_from_json(nlohmann::json::parse(testing::fixture("sample_robustness.json")));
    std::vector<std::string> expected{"0", "2664863", "8", "4226067"};
    CHECK(rob.gold == expected);
    CHECK(oracle_eval(rob.graph) == expected);
    CHECK(measure_axis(rob) == 3);
    for (const auto& n : rob.adversarial->notes) {
        CHECK(n.value != expected.at(static_cast<std::size_t>(n.target)));
    }
    for (const char* f : {"sample_depth.json", "sample_horizon.json", "sample_breadth.json", "sample_parallel.json"}) {
        auto g = load_graph(f);
        CHECK(testing::naive_eval(g) == oracle_eval(g));
    }
}

TEST_CASE("oracle matches the naive recursive evaluator on random graphs") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 500; ++i) {
        auto g = random_graph(rng, i % 2 == 1);
        CHECK(oracle_eval(g) == testing::naive_eval(g));
    }
}

TEST_CASE("oracle errors and trivial graphs") {
    DepGraph consts;
    consts.variables = {var("a"), var("b")};
    consts.defs = {{"a", Expr{ExprKind::Const, 17, {}, Combine::Sum}}, {"b", Expr{ExprKind::Const, 0, {}, Combine::Sum}}};
    consts.query_ids = {"b", "a"};
    CHECK(oracle_eval(consts) == std::vector<std::string>{"0", "17"});

    DepGraph cyc;
    cyc.variables = {var("a"), var("b")};
    cyc.defs = {{"a", Expr{ExprKind::Sum, 0, {"b"}, Combine::Sum}}, {"b", Expr{ExprKind::Sum, 0, {"a"}, Combine::Sum}}};
    cyc.query_ids = {"a"};
    try {
        oracle_eval(cyc);
        FAIL("expected CycleDetected");
    } catch (const BenchError& e) {
        CHECK(e.kind() == BenchErrorKind::CycleDetected);
    }

    DepGraph undef;
    undef.variables = {var("a")};
    undef.defs = {{"a", Expr{ExprKind::Sum, 0, {"ghost"}, Combine::Sum}}};
    undef.query_ids = {"a"};
    try {
        oracle_eval(undef);
        FAIL("expected UndefinedVariable");
    } catch (const BenchError& e) {
        CHECK(e.kind() == BenchErrorKind::UndefinedVariable);
    }
}

TEST_CASE("measure_axis on hand-built graphs") {
    DepGraph chain;
    for (auto id : {"a", "b", "c", "d"}) chain.variables.push_back(var(id));
    chain.defs = {{"a", Expr{ExprKind::Const, 1, {}, Combine::Sum}},
                  {"b", Expr{ExprKind::OffsetRef, 1, {"a"}, Combine::Sum}},
                  {"c", Expr{ExprKind::OffsetRef, 1, {"b"}, Combine::Sum}},
                  {"d", Expr{ExprKind::OffsetRef, 1, {"c"}, Combine::Sum}}};
    chain.query_ids = {"d"};
    CHECK(measure_axis(chain, Axis::Depth) == 4);

    DepGraph wide;
    wide.variables.push_back(var("s"));
    Expr sum{ExprKind::Sum, 0, {}, Combine::Sum};
    for (int i = 0; i < 6; ++i) {
        auto id = "l" + std::to_string(i);
        wide.variables.push_back(var(id));
        wide.defs[id] = Expr{ExprKind::Const, i, {}, Combine::Sum};
        sum.refs.push_back(id);
    }
    wide.defs["s"] = sum;
    wide.query_ids = {"s"};
    CHECK(measure_axis(wide, Axis::Breadth) == 6);
    CHECK(measure_axis(wide, Axis::Depth) == 2);

    DepGraph three;
    for (int i = 0; i < 3; ++i) {
        auto a = "a" + std::to_string(i), b = "b" + std::to_string(i);
        three.variables.push_back(var(a));
        three.variables.push_back(var(b));
        three.defs[a] = Expr{ExprKind::Const, 2, {}, Combine::Sum};
        three.defs[b] = Expr{ExprKind::ScaledSum, 3, {a}, Combine::Sum};
        three.query_ids.push_back(b);
    }
    CHECK(measure_axis(three, Axis::Parallel) == 3);
    three.defs["b2"].refs.push_back("a0");
    CHECK(measure_axis(three, Axis::Parallel) == 2);
}

TEST_CASE("axis fidelity, oracle soundness and rendering faithfulness") {
    for (auto axis : all_axes()) {
        auto [lo, hi] = axis_range(axis);
        for (int v = lo; v <= hi; ++v) {
            for (int s = 0; s < cell_count(axis); ++s) {
                auto inst = generate(axis, v, static_cast<std::uint64_t>(s));
                CAPTURE(inst.instance_id);
                REQUIRE(inst.axis_value == v);
                REQUIRE(measure_axis(inst) == v);
                if (axis != Axis::Robustness) REQUIRE(measure_axis(inst.graph, axis) == v);
                REQUIRE(inst.gold == oracle_eval(inst.graph));
                REQUIRE(testing::naive_eval(inst.graph) == inst.gold);
                REQUIRE(testing::solve_rendered(inst) == inst.gold);
                for (const auto& g : inst.gold) REQUIRE(std::stoll(g) >= 0);
            }
        }
    }
}

TEST_CASE("unsupported axis values") {
    for (auto [axis, v] : std::vector<std::pair<Axis, int>>{{Axis::Depth, 1}, {Axis::Depth, 13}, {Axis::Parallel, 9}, {Axis::Robustness, 0}}) {
        try {
            generate(axis, v, 1);
            FAIL("expected UnsupportedAxisValue");
        } catch (const BenchError& e) {
            CHECK(e.kind() == BenchErrorKind::UnsupportedAxisValue);
        }
    }
}

TEST_CASE("generation is deterministic") {
    for (auto axis : all_axes()) {
        auto a = generate(axis, 4, 99);
        auto b = generate(axis, 4, 99);
        CHECK(to_json(a).dump() == to_json(b).dump());
        CHECK(to_json(a).dump() != to_json(generate(axis, 4, 100)).dump());
    }
}

TEST_CASE("depth 2 is a two-node chain") {
    auto inst = generate(Axis::Depth, 2, 3);
    CHECK(chain_length(inst.graph, inst.graph.query_ids.front()) == 2);
    CHECK(inst.gold.size() == 1);
}

TEST_CASE("robustness notes never carry the truth and needles appear once") {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        int v = 2 + static_cast<int>(seed % 7);
        auto inst = generate(Axis::Robustness, v, seed);
        REQUIRE(inst.adversarial.has_value());
        REQUIRE(static_cast<int>(inst.adversarial->notes.size()) == v);
        for (const auto& n : inst.adversarial->notes) {
            REQUIRE(n.value != inst.gold.at(static_cast<std::size_t>(n.target)));
            REQUIRE(inst.question.find("Note: verify the information before you take it - ") != std::string::npos);
        }
        for (const auto& nd : inst.adversarial->magic_needles) {
            auto sentence = "One of the special magic numbers for " + nd.label + " is: " + nd.number + ".";
            auto first = inst.question.find(sentence);
            REQUIRE(first != std::string::npos);
            REQUIRE(inst.question.find(sentence, first + 1) == std::string::npos);
            REQUIRE(nd.number.size() == 7);
        }
    }
}

TEST_CASE("inject_adversarial with zero or too many attacks") {
    auto core = generate(Axis::Depth, 4, 11);
    auto clean = inject_adversarial(core, 0, 5);
    CHECK(clean.adversarial->notes.empty());
    CHECK(measure_axis(clean) == 0);
    CHECK(clean.question.find("Note: verify") == std::string::npos);
    CHECK(clean.question.find("One of the special magic numbers for") != std::string::npos);
    CHECK(std::find(clean.gold.begin(), clean.gold.end(), core.gold.front()) != clean.gold.end());
    CHECK(clean.gold == oracle_eval(clean.graph));
    try {
        inject_adversarial(core, 3, 5);
        FAIL("expected TooManyAttacks");
    } catch (const BenchError& e) {
        CHECK(e.kind() == BenchErrorKind::TooManyAttacks);
    }
}

TEST_CASE("split assignment") {
    auto inst = generate(Axis::Breadth, 3, 42);
    CHECK(assign_split(inst, 7) == assign_split(inst, 7));

    // Same template with other constants stays on the same side.
    for (std::uint64_t salt = 0; salt < 50; ++salt) {
        auto other = inst;
        for (auto& [id, e] : other.graph.defs) {
            if (e.kind == ExprKind::Const) e.k += 3;
            else if (e.kind != ExprKind::Sum && e.kind != ExprKind::Diff) e.k += 1;
        }
        CHECK(template_key(other) == template_key(inst));
        CHECK(assign_split(other, salt) == assign_split(inst, salt));
    }

    std::size_t test = 0, total = 0;
    for (auto axis : {Axis::Depth, Axis::Breadth}) {
        for (std::uint64_t s = 0; s < 5000; ++s) {
            auto i = generate(axis, 3 + static_cast<int>(s % 4), s);
            test += assign_split(i, 1234, 0.25) == Split::Test;
            ++total;
        }
    }
    double ratio = static_cast<double>(test) / static_cast<double>(total);
    CHECK(std::abs(ratio - 0.25) <= 0.02);
}

TEST_CASE("published profile and profile generation") {
    auto profile = published_profile();
    REQUIRE(profile.size() == 5);
    CHECK(profile[0].axis == Axis::Depth);
    CHECK(profile[0].train_total == 3993);
    int depth_test = 0;
    for (auto [v, n] : profile[0].test_counts) depth_test += n;
    CHECK(depth_test == 1195);

    std::vector<AxisProfile> small{{Axis::Depth, {2, 3}, 9, {{4, 3}, {5, 2}}}, {Axis::Parallel, {2}, 4, {{3, 2}}}};
    auto out = generate_profile(small, 1, 77, 0.25);
    std::map<std::tuple<Axis, int, Split>, int> counts;
    for (const auto& i : out) {
        ++counts[{i.axis, i.axis_value, i.split}];
        CHECK(assign_split(i, 77, 0.25) == i.split);
        CHECK(measure_axis(i) == i.axis_value);
    }
    CHECK(counts[{Axis::Depth, 2, Split::Train}] == 5);
    CHECK(counts[{Axis::Depth, 3, Split::Train}] == 4);
    CHECK(counts[{Axis::Depth, 4, Split::Test}] == 3);
    CHECK(counts[{Axis::Depth, 5, Split::Test}] == 2);
    CHECK(counts[{Axis::Parallel, 2, Split::Train}] == 4);
    CHECK(counts[{Axis::Parallel, 3, Split::Test}] == 2);
    CHECK(out.size() == 20);
}

TEST_CASE("instance JSON round trip") {
    for (auto axis : all_axes()) {
        auto inst = generate(axis, 3, 8);
        auto back = bench_instance_from_json(to_json(inst));
        CHECK(back == inst);
        CHECK(to_json(back).dump() == to_json(inst).dump());
    }
    GenConfig mod;
    mod.modulus = 23;
    auto m = generate(Axis::Depth, 5, 4, mod);
    CHECK(bench_instance_from_json(to_json(m)) == m);
    CHECK(m.gold == testing::naive_eval(m.graph));
    for (const auto& g : m.gold) CHECK(std::stoll(g) < 23);
}
