#include "mas/bench.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>

#include "mas/util.hpp"

namespace mas {

extern const char* const kNameBankJson;

namespace {

constexpr const char* kFiller = "The grass is green. The sky is blue. The sun is yellow. Here we go. There and back again.";

std::int64_t reduce(std::int64_t v, const std::optional<std::int64_t>& mod) {
    if (!mod) return v;
    return ((v % *mod) + *mod) % *mod;
}

}  // namespace

std::string_view to_string(Axis axis) {
    switch (axis) {
        case Axis::Depth: return "depth";
        case Axis::Horizon: return "horizon";
        case Axis::Breadth: return "breadth";
        case Axis::Parallel: return "parallel";
        case Axis::Robustness: return "robustness";
    }
    return "unknown";
}

std::optional<Axis> axis_from_string(std::string_view s) {
    auto l = to_lower(trim(s));
    for (auto a : all_axes()) {
        if (to_string(a) == l) return a;
    }
    return std::nullopt;
}

const std::vector<Axis>& all_axes() {
    static const std::vector<Axis> axes{Axis::Depth, Axis::Horizon, Axis::Breadth, Axis::Parallel, Axis::Robustness};
    return axes;
}

std::pair<int, int> axis_range(Axis axis) { return axis == Axis::Depth ? std::pair{2, 12} : std::pair{2, 8}; }

std::string_view to_string(BenchErrorKind kind) {
    switch (kind) {
        case BenchErrorKind::UnsupportedAxisValue: return "UnsupportedAxisValue";
        case BenchErrorKind::GenerationRetryExhausted: return "GenerationRetryExhausted";
        case BenchErrorKind::UndefinedVariable: return "UndefinedVariable";
        case BenchErrorKind::CycleDetected: return "CycleDetected";
        case BenchErrorKind::TooManyAttacks: return "TooManyAttacks";
        case BenchErrorKind::InvalidInstance: return "InvalidInstance";
    }
    return "Unknown";
}

BenchError::BenchError(BenchErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

std::string_view to_string(ExprKind kind) {
    switch (kind) {
        case ExprKind::Const: return "const";
        case ExprKind::Sum: return "sum";
        case ExprKind::Diff: return "diff";
        case ExprKind::ScaledSum: return "scaled";
        case ExprKind::OffsetRef: return "offset";
    }
    return "unknown";
}

std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

const Variable* DepGraph::find(const std::string& id) const {
    for (const auto& v : variables) {
        if (v.id == id) return &v;
    }
    return nullptr;
}

NameBank NameBank::from_json(const nlohmann::json& j) {
    NameBank b;
    b.version = j.value("version", 0);
    for (const auto& t : j.at("themes")) {
        Theme th;
        th.name = t.at("name").get<std::string>();
        th.levels = t.at("levels").get<std::vector<std::vector<std::string>>>();
        if (th.levels.size() < 3) throw std::invalid_argument("theme " + th.name + " needs three levels");
        b.themes.push_back(std::move(th));
    }
    b.needle_adjectives = j.at("needle_adjectives").get<std::vector<std::string>>();
    b.needle_nouns = j.at("needle_nouns").get<std::vector<std::string>>();
    if (b.themes.size() < 4) throw std::invalid_argument("name bank needs at least four themes");
    return b;
}

NameBank NameBank::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open name bank: " + path);
    return from_json(nlohmann::json::parse(in));
}

const NameBank& default_name_bank() {
    static const NameBank bank = NameBank::from_json(nlohmann::json::parse(kNameBankJson));
    return bank;
}

// ---------------------------------------------------------------------------
// Evaluation and measures

namespace {

std::vector<std::string> eval_order(const DepGraph& g) {
    std::map<std::string, std::size_t> indeg;
    std::map<std::string, std::vector<std::string>> users;
    for (const auto& [id, e] : g.defs) {
        indeg.emplace(id, 0);
        for (const auto& r : e.refs) {
            if (!g.defs.count(r)) throw BenchError(BenchErrorKind::UndefinedVariable, r + " (used by " + id + ")");
        }
        std::set<std::string> distinct(e.refs.begin(), e.refs.end());
        indeg[id] = distinct.size();
        for (const auto& r : distinct) users[r].push_back(id);
    }
    std::deque<std::string> ready;
    for (const auto& [id, d] : indeg) {
        if (d == 0) ready.push_back(id);
    }
    std::vector<std::string> order;
    while (!ready.empty()) {
        auto u = ready.front();
        ready.pop_front();
        order.push_back(u);
        for (const auto& w : users[u]) {
            if (--indeg[w] == 0) ready.push_back(w);
        }
    }
    if (order.size() != g.defs.size()) throw BenchError(BenchErrorKind::CycleDetected, "definitions are cyclic");
    return order;
}

std::int64_t apply_expr(const Expr& e, const std::function<std::int64_t(const std::string&)>& val,
                        const std::optional<std::int64_t>& mod) {
    if (e.kind == ExprKind::Const) return e.k;
    auto combined = [&](Combine c) -> std::int64_t {
        if (c == Combine::Diff) {
            if (e.refs.size() != 2) throw BenchError(BenchErrorKind::InvalidInstance, "difference needs two operands");
            return val(e.refs[0]) - val(e.refs[1]);
        }
        std::int64_t s = 0;
        for (const auto& r : e.refs) s += val(r);
        return s;
    };
    std::int64_t v = 0;
    switch (e.kind) {
        case ExprKind::Sum: v = combined(Combine::Sum); break;
        case ExprKind::Diff: v = combined(Combine::Diff); break;
        case ExprKind::ScaledSum: v = e.k * combined(e.combine); break;
        case ExprKind::OffsetRef: v = e.k + combined(e.combine); break;
        case ExprKind::Const: break;
    }
    return reduce(v, mod);
}

std::map<std::string, std::set<std::string>> ancestor_sets(const DepGraph& g, const std::vector<std::string>& order) {
    std::map<std::string, std::set<std::string>> anc;
    for (const auto& id : order) {
        auto& a = anc[id];
        for (const auto& r : g.defs.at(id).refs) {
            a.insert(r);
            a.insert(anc[r].begin(), anc[r].end());
        }
    }
    return anc;
}

}  // namespace

std::map<std::string, std::int64_t> evaluate_graph(const DepGraph& graph) {
    for (const auto& v : graph.variables) {
        if (!graph.defs.count(v.id)) throw BenchError(BenchErrorKind::UndefinedVariable, v.id + " has no definition");
    }
    for (const auto& q : graph.query_ids) {
        if (!graph.defs.count(q)) throw BenchError(BenchErrorKind::UndefinedVariable, "query " + q);
    }
    std::map<std::string, std::int64_t> values;
    for (const auto& id : eval_order(graph)) {
        values[id] = apply_expr(graph.defs.at(id), [&](const std::string& r) { return values.at(r); }, graph.modulus);
    }
    return values;
}

std::vector<std::string> oracle_eval(const DepGraph& graph) {
    auto values = evaluate_graph(graph);
    std::vector<std::string> out;
    for (const auto& q : graph.query_ids) out.push_back(std::to_string(values.at(q)));
    return out;
}

int chain_length(const DepGraph& graph, const std::string& id) {
    std::map<std::string, int> memo;
    for (const auto& u : eval_order(graph)) {
        int best = 0;
        for (const auto& r : graph.defs.at(u).refs) best = std::max(best, memo[r]);
        memo[u] = best + 1;
    }
    auto it = memo.find(id);
    if (it == memo.end()) throw BenchError(BenchErrorKind::UndefinedVariable, id);
    return it->second;
}

int measure_axis(const DepGraph& graph, Axis axis) {
    switch (axis) {
        case Axis::Depth: {
            int best = 0;
            for (const auto& q : graph.query_ids) best = std::max(best, chain_length(graph, q));
            return best;
        }
        case Axis::Breadth: {
            std::size_t best = 0;
            for (const auto& [id, e] : graph.defs) {
                best = std::max(best, std::set<std::string>(e.refs.begin(), e.refs.end()).size());
            }
            return static_cast<int>(best);
        }
        case Axis::Parallel: {
            auto order = eval_order(graph);
            auto anc = ancestor_sets(graph, order);
            std::set<std::string> members;
            for (const auto& q : graph.query_ids) {
                members.insert(q);
                members.insert(anc[q].begin(), anc[q].end());
            }
            std::map<std::string, std::string> parent;
            for (const auto& m : members) parent[m] = m;
            std::function<std::string(const std::string&)> root = [&](const std::string& x) {
                return parent[x] == x ? x : parent[x] = root(parent[x]);
            };
            for (const auto& m : members) {
                for (const auto& r : graph.defs.at(m).refs) {
                    if (members.count(r)) parent[root(m)] = root(r);
                }
            }
            std::set<std::string> roots;
            for (const auto& m : members) roots.insert(root(m));
            return static_cast<int>(roots.size());
        }
        case Axis::Horizon: {
            auto order = eval_order(graph);
            auto anc = ancestor_sets(graph, order);
            std::map<std::string, std::size_t> pos;
            for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
            std::vector<std::string> qs(graph.query_ids.begin(), graph.query_ids.end());
            std::sort(qs.begin(), qs.end(), [&](const auto& a, const auto& b) { return pos[a] < pos[b]; });
            qs.erase(std::unique(qs.begin(), qs.end()), qs.end());
            std::vector<int> best(qs.size(), 1);
            int overall = 0;
            for (std::size_t i = 0; i < qs.size(); ++i) {
                for (std::size_t j = 0; j < i; ++j) {
                    if (anc[qs[i]].count(qs[j])) best[i] = std::max(best[i], best[j] + 1);
                }
                overall = std::max(overall, best[i]);
            }
            return overall;
        }
        case Axis::Robustness:
            throw BenchError(BenchErrorKind::InvalidInstance, "robustness is measured on the instance, not the graph");
    }
    return 0;
}

int measure_axis(const BenchInstance& instance) {
    if (instance.axis == Axis::Robustness) {
        return instance.adversarial ? static_cast<int>(instance.adversarial->notes.size()) : 0;
    }
    return measure_axis(instance.graph, instance.axis);
}

// ---------------------------------------------------------------------------
// Generation

namespace {

class Draft {
public:
    Draft(Rng& rng, const NameBank& bank, int theme) : rng_(rng), bank_(bank), theme_(theme) {}

    DepGraph g;

    std::string add(int problem, bool distractor = false) {
        const auto& th = bank_.themes[static_cast<std::size_t>(theme_)];
        for (;;) {
            int level = static_cast<int>(rng_.uniform(0, 1));
            int pi = static_cast<int>(rng_.uniform(0, static_cast<std::int64_t>(th.levels[level].size()) - 1));
            int ci = static_cast<int>(rng_.uniform(0, static_cast<std::int64_t>(th.levels[level + 1].size()) - 1));
            if (!used_.insert({level, pi, ci}).second) continue;
            Variable v;
            v.id = "v" + std::to_string(g.variables.size());
            v.parent = th.levels[level][pi];
            v.child = th.levels[level + 1][ci];
            v.display = v.parent + "'s " + v.child;
            v.theme = theme_;
            v.parent_level = level;
            v.parent_index = pi;
            v.child_index = ci;
            v.problem = problem;
            v.distractor = distractor;
            g.variables.push_back(v);
            g.defs[v.id] = Expr{};
            return v.id;
        }
    }

    std::string add_carry(int problem, const std::string& from_query) {
        Variable v;
        v.id = "v" + std::to_string(g.variables.size());
        v.display = "[variable" + std::to_string(problem + 1) + "]";
        v.problem = problem;
        v.carry = true;
        g.variables.push_back(v);
        g.defs[v.id] = Expr{ExprKind::Sum, 0, {from_query}, Combine::Sum};
        return v.id;
    }

    void set_refs(const std::string& id, std::vector<std::string> refs) {
        rng_.shuffle(refs);
        g.defs[id].refs = std::move(refs);
    }

    // Distractor with up to two refs drawn from `pool`.
    void add_distractor(int problem, const std::vector<std::string>& pool) {
        auto d = add(problem, true);
        if (pool.empty() || rng_.chance(1, 3)) return;
        std::vector<std::string> refs{rng_.pick(pool)};
        if (pool.size() > 1 && rng_.chance(1, 2)) {
            auto other = rng_.pick(pool);
            if (other != refs.front()) refs.push_back(other);
        }
        set_refs(d, refs);
    }

    Rng& rng() { return rng_; }

private:
    Rng& rng_;
    const NameBank& bank_;
    int theme_;
    std::set<std::tuple<int, int, int>> used_;
};

std::vector<std::string> ids_of_problem(const DepGraph& g, int problem) {
    std::vector<std::string> out;
    for (const auto& v : g.variables) {
        if (v.problem == problem && !v.distractor) out.push_back(v.id);
    }
    return out;
}

// Picks operations and constants in evaluation order. False when a value
// would leave the allowed range.
bool assign_values(DepGraph& g, Rng& rng, const GenConfig& cfg) {
    const auto& mod = g.modulus;
    const std::int64_t const_max = mod ? std::min<std::int64_t>(22, *mod - 1) : 22;
    std::map<std::string, std::int64_t> val;
    for (const auto& id : eval_order(g)) {
        auto& e = g.defs[id];
        const Variable* var = g.find(id);
        if (var && var->needle) {
            val[id] = e.k;
            continue;
        }
        if (e.refs.empty()) {
            e.kind = ExprKind::Const;
            e.k = rng.uniform(0, const_max);
            val[id] = e.k;
            continue;
        }
        if (var && var->carry) {
            val[id] = apply_expr(e, [&](const std::string& r) { return val.at(r); }, mod);
            continue;
        }
        if (e.refs.size() == 2 && !mod && val[e.refs[0]] < val[e.refs[1]]) std::swap(e.refs[0], e.refs[1]);
        std::int64_t sum = 0;
        for (const auto& r : e.refs) sum += val[r];
        std::int64_t diff = e.refs.size() == 2 ? val[e.refs[0]] - val[e.refs[1]] : 0;

        struct Option {
            ExprKind kind;
            Combine combine;
            std::int64_t base;
        };
        std::vector<Option> options{{ExprKind::Sum, Combine::Sum, sum}, {ExprKind::OffsetRef, Combine::Sum, sum}};
        auto scalable = [&](std::int64_t base) { return mod || base * 2 <= cfg.value_cap; };
        if (scalable(sum)) options.push_back({ExprKind::ScaledSum, Combine::Sum, sum});
        if (e.refs.size() == 2) {
            options.push_back({ExprKind::Diff, Combine::Diff, diff});
            options.push_back({ExprKind::OffsetRef, Combine::Diff, diff});
            if (scalable(diff)) options.push_back({ExprKind::ScaledSum, Combine::Diff, diff});
        }
        const auto& pick = rng.pick(options);
        e.kind = pick.kind;
        e.combine = pick.combine;
        if (pick.kind == ExprKind::ScaledSum) {
            std::int64_t hi = 20;
            if (!mod && pick.base > 0) hi = std::min<std::int64_t>(hi, cfg.value_cap / pick.base);
            e.k = rng.uniform(2, std::max<std::int64_t>(2, hi));
        } else if (pick.kind == ExprKind::OffsetRef) {
            e.k = rng.uniform(0, 20);
        } else {
            e.k = 0;
        }
        auto v = apply_expr(e, [&](const std::string& r) { return val.at(r); }, mod);
        if (v < 0 || (!mod && v > cfg.value_cap)) return false;
        val[id] = v;
    }
    return true;
}

// Chain ending at the returned id; `prev` (if non-empty) feeds the first link.
std::string build_chain(Draft& d, int problem, int length, const std::string& prev) {
    std::vector<std::string> chain;
    for (int i = 0; i < length; ++i) {
        auto x = d.add(problem);
        std::vector<std::string> refs;
        if (i == 0 && !prev.empty()) refs.push_back(prev);
        if (i > 0) refs.push_back(chain.back());
        if (!refs.empty()) {
            int extras = static_cast<int>(d.rng().uniform(0, 1));
            for (int k = 0; k < extras; ++k) {
                if (i >= 2 && d.rng().chance(1, 2)) {
                    refs.push_back(chain[static_cast<std::size_t>(d.rng().uniform(0, i - 2))]);
                } else {
                    refs.push_back(d.add(problem));
                }
            }
            d.set_refs(x, refs);
        }
        chain.push_back(x);
    }
    return chain.back();
}

void build_depth(Draft& d, int v) {
    std::vector<std::string> chain;
    for (int i = 0; i < v; ++i) {
        auto x = d.add(0);
        if (i > 0) {
            std::vector<std::string> refs{chain.back()};
            int extras = static_cast<int>(d.rng().uniform(0, 2));
            for (int k = 0; k < extras; ++k) {
                if (i >= 2 && d.rng().chance(1, 2)) {
                    auto r = chain[static_cast<std::size_t>(d.rng().uniform(0, i - 2))];
                    if (std::find(refs.begin(), refs.end(), r) == refs.end()) refs.push_back(r);
                } else {
                    refs.push_back(d.add(0));
                }
            }
            d.set_refs(x, refs);
        }
        chain.push_back(x);
    }
    auto pool = ids_of_problem(d.g, 0);
    int nd = static_cast<int>(d.rng().uniform(1, 3));
    for (int k = 0; k < nd; ++k) d.add_distractor(0, pool);
    d.g.query_ids = {chain.back()};
}

void build_breadth(Draft& d, int v) {
    auto hub = d.add(0);
    std::vector<std::string> refs;
    std::vector<std::string> leaves;
    for (int i = 0; i < v; ++i) {
        if (d.rng().chance(1, 2)) {
            auto leaf = d.add(0);
            leaves.push_back(leaf);
            refs.push_back(leaf);
        } else {
            auto mid = d.add(0);
            std::vector<std::string> mid_refs{d.add(0)};
            if (d.rng().chance(1, 2)) {
                if (!leaves.empty() && d.rng().chance(1, 2)) {
                    mid_refs.push_back(d.rng().pick(leaves));
                } else {
                    mid_refs.push_back(d.add(0));
                }
            }
            d.set_refs(mid, mid_refs);
            refs.push_back(mid);
        }
    }
    d.set_refs(hub, refs);
    std::string query = hub;
    if (d.rng().chance(1, 2)) {
        query = d.add(0);
        std::vector<std::string> top{hub};
        if (d.rng().chance(1, 2)) top.push_back(d.add(0));
        d.set_refs(query, top);
    }
    auto pool = ids_of_problem(d.g, 0);
    int nd = static_cast<int>(d.rng().uniform(1, 3));
    for (int k = 0; k < nd; ++k) d.add_distractor(0, pool);
    d.g.query_ids = {query};
}

void build_parallel(Draft& d, int v) {
    for (int p = 0; p < v; ++p) {
        auto q = build_chain(d, p, static_cast<int>(d.rng().uniform(2, 3)), "");
        d.g.query_ids.push_back(q);
        if (d.rng().chance(1, 2)) d.add_distractor(p, ids_of_problem(d.g, p));
    }
}

void build_horizon(Draft& d, int v) {
    for (int p = 0; p < v; ++p) {
        std::string q;
        if (p == 0) {
            q = build_chain(d, p, static_cast<int>(d.rng().uniform(2, 3)), "");
        } else {
            auto carry = d.add_carry(p, d.g.query_ids.back());
            q = build_chain(d, p, static_cast<int>(d.rng().uniform(1, 2)), carry);
        }
        d.g.query_ids.push_back(q);
        if (d.rng().chance(1, 2)) d.add_distractor(p, ids_of_problem(d.g, p));
    }
}

// Shuffles sentence order; carry sentences stay last within their problem
// at render time, so their position here does not matter.
void shuffle_sentences(DepGraph& g, Rng& rng) { rng.shuffle(g.variables); }

std::string seven_digits(Rng& rng) { return std::to_string(rng.uniform(1'000'000, 9'999'999)); }

BenchInstance generate_structured(Axis axis, int v, std::uint64_t seed, const GenConfig& cfg) {
    const NameBank& bank = cfg.names ? *cfg.names : default_name_bank();
    Rng rng(derive_seed(seed, std::string(to_string(axis)) + ":" + std::to_string(v)));
    for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
        int theme = static_cast<int>(rng.uniform(0, static_cast<std::int64_t>(bank.themes.size()) - 1));
        Draft d(rng, bank, theme);
        d.g.modulus = cfg.modulus;
        switch (axis) {
            case Axis::Depth: build_depth(d, v); break;
            case Axis::Breadth: build_breadth(d, v); break;
            case Axis::Parallel: build_parallel(d, v); break;
            case Axis::Horizon: build_horizon(d, v); break;
            case Axis::Robustness: break;
        }
        if (!assign_values(d.g, rng, cfg)) continue;
        shuffle_sentences(d.g, rng);
        BenchInstance inst;
        inst.axis = axis;
        inst.axis_value = v;
        inst.seed = seed;
        inst.instance_id = std::string(to_string(axis)) + "-" + std::to_string(v) + "-" + std::to_string(seed);
        inst.graph = std::move(d.g);
        inst.gold = oracle_eval(inst.graph);
        inst.question = render_question(inst);
        return inst;
    }
    throw BenchError(BenchErrorKind::GenerationRetryExhausted,
                     std::string(to_string(axis)) + "=" + std::to_string(v) + " seed " + std::to_string(seed));
}

std::string join_list(const std::vector<std::string>& items) {
    if (items.size() == 1) return items.front();
    if (items.size() == 2) return items[0] + " and " + items[1];
    std::string out;
    for (std::size_t i = 0; i + 1 < items.size(); ++i) out += items[i] + ", ";
    return out + "and " + items.back();
}

std::string refs_phrase(const DepGraph& g, const std::vector<std::string>& refs, Combine combine) {
    std::vector<std::string> names;
    for (const auto& r : refs) names.push_back("each " + g.find(r)->display);
    if (combine == Combine::Diff) return "the difference of " + names[0] + " and " + names[1];
    if (names.size() == 1) return names.front();
    std::string out = "the sum of ";
    for (std::size_t i = 0; i + 1 < names.size(); ++i) out += names[i] + (i + 2 < names.size() ? ", " : " and ");
    return out + names.back();
}

std::string sentence_for(const DepGraph& g, const Variable& v) {
    const auto& e = g.defs.at(v.id);
    if (v.carry) {
        const auto& from = e.refs.front();
        auto idx = std::find(g.query_ids.begin(), g.query_ids.end(), from) - g.query_ids.begin();
        auto token = "[answer" + std::to_string(idx + 1) + "]";
        return "Using the result " + token + " from the previous calculation, " + v.display + " = " + token + ".";
    }
    std::string rhs;
    switch (e.kind) {
        case ExprKind::Const: rhs = std::to_string(e.k); break;
        case ExprKind::Sum: rhs = refs_phrase(g, e.refs, Combine::Sum); break;
        case ExprKind::Diff: rhs = refs_phrase(g, e.refs, Combine::Diff); break;
        case ExprKind::ScaledSum: rhs = std::to_string(e.k) + " times as much as " + refs_phrase(g, e.refs, e.combine); break;
        case ExprKind::OffsetRef: rhs = std::to_string(e.k) + " more than " + refs_phrase(g, e.refs, e.combine); break;
    }
    return "The number of each " + v.display + " equals " + rhs + ".";
}

std::string problem_sentences(const DepGraph& g, int problem) {
    std::vector<std::string> sentences;
    std::string carry;
    for (const auto& v : g.variables) {
        if (v.problem != problem || v.needle) continue;
        if (v.carry) {
            carry = sentence_for(g, v);
        } else {
            sentences.push_back(sentence_for(g, v));
        }
    }
    if (!carry.empty()) sentences.push_back(carry);
    return join(sentences, " ");
}

std::string answers_footer(std::size_t n) {
    std::string out = "Solve all problems step by step and provide the answers for all problems in the following format:\n\n### Final Answers";
    for (std::size_t k = 1; k <= n; ++k) out += "\n\nProblem " + std::to_string(k) + ": \\boxed{[answer" + std::to_string(k) + "]}";
    return out;
}

std::string math_phrase(const Variable& v) { return "the number of " + v.child + " that " + v.parent + " has"; }

}  // namespace

std::string render_question(const BenchInstance& inst) {
    const auto& g = inst.graph;
    switch (inst.axis) {
        case Axis::Depth:
        case Axis::Breadth: {
            const auto* q = g.find(g.query_ids.front());
            return problem_sentences(g, 0) + " How many " + q->child + " does " + q->parent + " have?";
        }
        case Axis::Parallel:
        case Axis::Horizon: {
            std::vector<std::string> parts;
            for (std::size_t p = 0; p < g.query_ids.size(); ++p) {
                parts.push_back("Problem " + std::to_string(p + 1) + ": " + problem_sentences(g, static_cast<int>(p)) +
                                " What is the value of " + g.find(g.query_ids[p])->display + "?");
            }
            std::string note = "Note: In this problem set:\n\n";
            if (inst.axis == Axis::Parallel) {
                note += "- Each problem is INDEPENDENT and can be solved in parallel.";
            } else {
                note += "- [variablek] represents the calculated variable needed to solve problem k.\n\n"
                        "- [answerk] represents the answer to problem k.";
            }
            return join(parts, "\n\n") + "\n\n" + note + "\n\n" + answers_footer(parts.size());
        }
        case Axis::Robustness: {
            if (!inst.adversarial) throw BenchError(BenchErrorKind::InvalidInstance, "robustness instance without passage");
            const auto& adv = *inst.adversarial;
            std::size_t cores = adv.haystack_blocks.size();
            std::vector<std::string> blocks;
            for (std::size_t i = 0; i < cores; ++i) {
                blocks.push_back(problem_sentences(g, static_cast<int>(i)));
                blocks.push_back(adv.haystack_blocks[i]);
            }
            for (const auto& n : adv.notes) blocks.at(static_cast<std::size_t>(n.position)) += " " + n.text;
            std::vector<std::string> asks;
            for (const auto& qid : g.query_ids) {
                const auto* v = g.find(qid);
                asks.push_back(v->needle ? "the magic number for " + v->display : math_phrase(*v));
            }
            return "Read the following passage carefully.\n\n" + join(blocks, "\n\n") + "\n\n" + std::string(60, '=') +
                   "\n\nFrom the passage, identify and return " + join_list(asks) +
                   ", wrapped in \\boxed{} and separated via \\n\\n";
        }
    }
    return {};
}

BenchInstance inject_adversarial(const std::vector<BenchInstance>& cores, int n_attacks, std::uint64_t seed,
                                 const GenConfig& cfg) {
    if (cores.empty()) throw BenchError(BenchErrorKind::InvalidInstance, "no core instances");
    const NameBank& bank = cfg.names ? *cfg.names : default_name_bank();
    const int subtasks = static_cast<int>(cores.size()) * 2;
    if (n_attacks < 0 || n_attacks > subtasks) {
        throw BenchError(BenchErrorKind::TooManyAttacks,
                         std::to_string(n_attacks) + " attacks for " + std::to_string(subtasks) + " sub-tasks");
    }
    Rng rng(derive_seed(seed, "adversarial:" + std::to_string(n_attacks)));
    BenchInstance out;
    out.axis = Axis::Robustness;
    out.axis_value = n_attacks;
    out.seed = seed;
    out.instance_id = "robustness-" + std::to_string(n_attacks) + "-" + std::to_string(seed);
    out.graph.modulus = cores.front().graph.modulus;
    AdversarialSpec adv;
    std::set<std::string> labels, numbers;

    for (std::size_t i = 0; i < cores.size(); ++i) {
        const auto& core = cores[i];
        if (core.axis != Axis::Depth || core.graph.query_ids.size() != 1) {
            throw BenchError(BenchErrorKind::InvalidInstance, "adversarial cores must be single-query depth instances");
        }
        const std::string prefix = "p" + std::to_string(i) + "_";
        for (auto v : core.graph.variables) {
            v.id = prefix + v.id;
            v.problem = static_cast<int>(i);
            out.graph.variables.push_back(v);
        }
        for (auto [id, e] : core.graph.defs) {
            for (auto& r : e.refs) r = prefix + r;
            out.graph.defs[prefix + id] = e;
        }
        std::string label, number;
        do {
            label = rng.pick(bank.needle_adjectives) + "-" + rng.pick(bank.needle_nouns);
        } while (!labels.insert(label).second);
        do {
            number = seven_digits(rng);
        } while (!numbers.insert(number).second);
        Variable needle;
        needle.id = prefix + "magic";
        needle.display = label;
        needle.problem = static_cast<int>(i);
        needle.needle = true;
        out.graph.variables.push_back(needle);
        out.graph.defs[needle.id] = Expr{ExprKind::Const, std::stoll(number), {}, Combine::Sum};
        out.graph.query_ids.push_back(prefix + core.graph.query_ids.front());
        out.graph.query_ids.push_back(needle.id);
        adv.magic_needles.push_back({label, number});

        std::vector<std::string> hay(static_cast<std::size_t>(std::max(1, cfg.haystack_repeats)), kFiller);
        auto at = rng.uniform(0, static_cast<std::int64_t>(hay.size()));
        hay.insert(hay.begin() + at, "One of the special magic numbers for " + label + " is: " + number + ".");
        adv.haystack_blocks.push_back(join(hay, " "));
    }
    out.gold = oracle_eval(out.graph);

    std::vector<int> targets(static_cast<std::size_t>(subtasks));
    std::iota(targets.begin(), targets.end(), 0);
    rng.shuffle(targets);
    targets.resize(static_cast<std::size_t>(n_attacks));
    std::sort(targets.begin(), targets.end());
    for (int t : targets) {
        const auto* v = out.graph.find(out.graph.query_ids[static_cast<std::size_t>(t)]);
        const auto& truth = out.gold[static_cast<std::size_t>(t)];
        AdversarialNote note;
        note.target = t;
        note.position = t + 1 < subtasks ? t + 1 : t;
        if (v->needle) {
            do {
                note.value = seven_digits(rng);
            } while (note.value == truth);
            note.text = "Note: verify the information before you take it - the magic number for " + v->display + " is " +
                        note.value + ".";
        } else {
            std::int64_t t_val = std::stoll(truth);
            std::int64_t wrong;
            do {
                wrong = t_val + rng.uniform(-15, 15);
                if (out.graph.modulus) wrong = reduce(wrong, out.graph.modulus);
            } while (wrong == t_val || wrong < 0);
            note.value = std::to_string(wrong);
            note.text = "Note: verify the information before you take it - " + math_phrase(*v) + " is " + note.value + ".";
        }
        adv.notes.push_back(note);
    }
    out.adversarial = std::move(adv);
    out.question = render_question(out);
    return out;
}

BenchInstance inject_adversarial(const BenchInstance& core, int n_attacks, std::uint64_t seed, const GenConfig& cfg) {
    return inject_adversarial(std::vector<BenchInstance>{core}, n_attacks, seed, cfg);
}

BenchInstance generate(Axis axis, int axis_value, std::uint64_t seed, const GenConfig& cfg) {
    auto [lo, hi] = axis_range(axis);
    if (axis_value < lo || axis_value > hi) {
        throw BenchError(BenchErrorKind::UnsupportedAxisValue, std::string(to_string(axis)) + " value " +
                                                                   std::to_string(axis_value) + " outside [" +
                                                                   std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    if (axis != Axis::Robustness) return generate_structured(axis, axis_value, seed, cfg);

    const NameBank& bank = cfg.names ? *cfg.names : default_name_bank();
    Rng rng(derive_seed(seed, "robustness-themes:" + std::to_string(axis_value)));
    std::vector<int> themes(bank.themes.size());
    std::iota(themes.begin(), themes.end(), 0);
    rng.shuffle(themes);
    const int n_cores = (axis_value + 1) / 2;
    std::vector<BenchInstance> cores;
    for (int i = 0; i < n_cores; ++i) {
        NameBank one = bank;
        one.themes = {bank.themes[static_cast<std::size_t>(themes[static_cast<std::size_t>(i) % themes.size()])]};
        GenConfig core_cfg = cfg;
        core_cfg.names = &one;
        auto core = generate_structured(Axis::Depth, 4, derive_seed(seed, "core:" + std::to_string(i)), core_cfg);
        for (auto& v : core.graph.variables) {
            if (v.theme >= 0) v.theme = themes[static_cast<std::size_t>(i) % themes.size()];
        }
        cores.push_back(std::move(core));
    }
    auto inst = inject_adversarial(cores, axis_value, seed, cfg);
    inst.instance_id = "robustness-" + std::to_string(axis_value) + "-" + std::to_string(seed);
    return inst;
}

// ---------------------------------------------------------------------------
// Splits

std::string template_key(const BenchInstance& inst) {
    std::string key = std::string(kBenchTemplateVersion) + "|" + std::string(to_string(inst.axis)) + "|" +
                      std::to_string(inst.axis_value) + "|" + (inst.graph.modulus ? "mod" : "int");
    for (const auto& v : inst.graph.variables) {
        key += "|" + v.id + ":" + std::to_string(v.theme) + "," + std::to_string(v.parent_level) + "," +
               std::to_string(v.parent_index) + "," + std::to_string(v.child_index) + "," + std::to_string(v.problem) +
               (v.carry ? ",c" : "") + (v.distractor ? ",d" : "") + (v.needle ? ",n=" + v.display : "");
        const auto& e = inst.graph.defs.at(v.id);
        key += "=" + std::string(to_string(e.kind)) + (e.combine == Combine::Diff ? "-" : "+") + join(e.refs, ",");
    }
    key += "|q=" + join(inst.graph.query_ids, ",");
    if (inst.adversarial) {
        for (const auto& n : inst.adversarial->notes) key += "|note:" + std::to_string(n.target) + "@" + std::to_string(n.position);
    }
    return key;
}

Split assign_split(const BenchInstance& instance, std::uint64_t salt, double test_ratio) {
    std::uint64_t h = mix64(fnv1a64(template_key(instance)) ^ mix64(salt));
    double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return u < test_ratio ? Split::Test : Split::Train;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const DepGraph& g) {
    nlohmann::json vars = nlohmann::json::array();
    for (const auto& v : g.variables) {
        nlohmann::json jv{{"id", v.id}, {"display", v.display}, {"problem", v.problem}};
        if (!v.parent.empty()) {
            jv["parent"] = v.parent;
            jv["child"] = v.child;
        }
        if (v.theme >= 0) {
            jv["theme"] = v.theme;
            jv["name_ids"] = {v.parent_level, v.parent_index, v.child_index};
        }
        if (v.carry) jv["carry"] = true;
        if (v.needle) jv["needle"] = true;
        if (v.distractor) jv["distractor"] = true;
        vars.push_back(jv);
    }
    nlohmann::json defs = nlohmann::json::object();
    for (const auto& [id, e] : g.defs) {
        nlohmann::json je{{"kind", std::string(to_string(e.kind))}};
        if (e.kind == ExprKind::Const || e.kind == ExprKind::ScaledSum || e.kind == ExprKind::OffsetRef) je["k"] = e.k;
        if (e.kind != ExprKind::Const) je["refs"] = e.refs;
        if ((e.kind == ExprKind::ScaledSum || e.kind == ExprKind::OffsetRef) && e.combine == Combine::Diff) je["combine"] = "diff";
        defs[id] = je;
    }
    nlohmann::json j{{"variables", vars}, {"defs", defs}, {"query_ids", g.query_ids}};
    j["modulus"] = g.modulus ? nlohmann::json(*g.modulus) : nlohmann::json(nullptr);
    return j;
}

DepGraph dep_graph_from_json(const nlohmann::json& j) {
    DepGraph g;
    for (const auto& jv : j.at("variables")) {
        Variable v;
        v.id = jv.at("id").get<std::string>();
        v.display = jv.value("display", v.id);
        v.parent = jv.value("parent", "");
        v.child = jv.value("child", "");
        v.problem = jv.value("problem", 0);
        v.theme = jv.value("theme", -1);
        if (jv.contains("name_ids")) {
            v.parent_level = jv["name_ids"][0].get<int>();
            v.parent_index = jv["name_ids"][1].get<int>();
            v.child_index = jv["name_ids"][2].get<int>();
        }
        v.carry = jv.value("carry", false);
        v.needle = jv.value("needle", false);
        v.distractor = jv.value("distractor", false);
        g.variables.push_back(v);
    }
    for (const auto& [id, je] : j.at("defs").items()) {
        Expr e;
        auto kind = je.at("kind").get<std::string>();
        bool found = false;
        for (auto k : {ExprKind::Const, ExprKind::Sum, ExprKind::Diff, ExprKind::ScaledSum, ExprKind::OffsetRef}) {
            if (to_string(k) == kind) {
                e.kind = k;
                found = true;
            }
        }
        if (!found) throw BenchError(BenchErrorKind::InvalidInstance, "unknown expression kind " + kind);
        e.k = je.value("k", std::int64_t{0});
        e.refs = je.value("refs", std::vector<std::string>{});
        e.combine = je.value("combine", "sum") == "diff" || e.kind == ExprKind::Diff ? Combine::Diff : Combine::Sum;
        g.defs[id] = e;
    }
    g.query_ids = j.at("query_ids").get<std::vector<std::string>>();
    if (j.contains("modulus") && !j["modulus"].is_null()) g.modulus = j["modulus"].get<std::int64_t>();
    return g;
}

nlohmann::json to_json(const BenchInstance& inst) {
    nlohmann::json j{{"instance_id", inst.instance_id},
                     {"axis", std::string(to_string(inst.axis))},
                     {"axis_value", inst.axis_value},
                     {"question", inst.question},
                     {"graph", to_json(inst.graph)},
                     {"gold", inst.gold},
                     {"split", std::string(to_string(inst.split))},
                     {"seed", inst.seed},
                     {"template_version", kBenchTemplateVersion}};
    if (inst.adversarial) {
        nlohmann::json notes = nlohmann::json::array();
        for (const auto& n : inst.adversarial->notes) {
            notes.push_back({{"position", n.position}, {"target", n.target}, {"text", n.text}, {"value", n.value}});
        }
        nlohmann::json needles = nlohmann::json::array();
        for (const auto& m : inst.adversarial->magic_needles) needles.push_back({{"label", m.label}, {"number", m.number}});
        j["adversarial"] = {{"notes", notes}, {"haystack_blocks", inst.adversarial->haystack_blocks}, {"magic_needles", needles}};
    }
    return j;
}

BenchInstance bench_instance_from_json(const nlohmann::json& j) {
    BenchInstance inst;
    inst.instance_id = j.at("instance_id").get<std::string>();
    auto axis = axis_from_string(j.at("axis").get<std::string>());
    if (!axis) throw BenchError(BenchErrorKind::InvalidInstance, "unknown axis " + j.at("axis").dump());
    inst.axis = *axis;
    inst.axis_value = j.at("axis_value").get<int>();
    inst.question = j.value("question", "");
    inst.graph = dep_graph_from_json(j.at("graph"));
    inst.gold = j.at("gold").get<std::vector<std::string>>();
    inst.split = j.value("split", "test") == "train" ? Split::Train : Split::Test;
    inst.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("adversarial")) {
        AdversarialSpec adv;
        for (const auto& n : j["adversarial"].at("notes")) {
            adv.notes.push_back({n.at("position").get<int>(), n.at("target").get<int>(), n.at("text").get<std::string>(),
                                 n.at("value").get<std::string>()});
        }
        adv.haystack_blocks = j["adversarial"].value("haystack_blocks", std::vector<std::string>{});
        for (const auto& m : j["adversarial"].value("magic_needles", nlohmann::json::array())) {
            adv.magic_needles.push_back({m.at("label").get<std::string>(), m.at("number").get<std::string>()});
        }
        inst.adversarial = std::move(adv);
    }
    return inst;
}

// ---------------------------------------------------------------------------
// Profiles

std::vector<AxisProfile> published_profile() {
    return {
        {Axis::Depth, {2, 4, 6, 8}, 3993, {{2, 199}, {4, 200}, {6, 200}, {8, 200}, {10, 199}, {12, 197}}},
        {Axis::Horizon, {2, 4, 6}, 2174, {{2, 167}, {4, 150}, {6, 126}, {8, 124}}},
        {Axis::Breadth, {2, 4}, 2000, {{2, 200}, {4, 200}, {6, 192}, {8, 84}}},
        {Axis::Parallel, {2, 4}, 1807, {{2, 167}, {4, 150}, {6, 126}, {8, 124}}},
        {Axis::Robustness, {2, 4, 6}, 3000, {{2, 200}, {4, 200}, {6, 200}}},
    };
}

std::vector<BenchInstance> generate_profile(const std::vector<AxisProfile>& profile, std::uint64_t seed,
                                            std::uint64_t salt, double test_ratio, const GenConfig& cfg) {
    std::vector<BenchInstance> out;
    for (const auto& ap : profile) {
        std::map<int, int> train_need, test_need = ap.test_counts;
        for (std::size_t i = 0; i < ap.train_values.size(); ++i) {
            int share = ap.train_total / static_cast<int>(ap.train_values.size());
            if (static_cast<int>(i) < ap.train_total % static_cast<int>(ap.train_values.size())) ++share;
            train_need[ap.train_values[i]] = share;
        }
        std::set<int> values;
        for (const auto& [v, n] : train_need) values.insert(v);
        for (const auto& [v, n] : test_need) values.insert(v);
        Rng stream(derive_seed(seed, "profile:" + std::string(to_string(ap.axis))));
        for (int v : values) {
            int guard = 0;
            while (train_need[v] > 0 || test_need[v] > 0) {
                if (++guard > 200000) {
                    throw BenchError(BenchErrorKind::GenerationRetryExhausted,
                                     "profile cell " + std::string(to_string(ap.axis)) + "=" + std::to_string(v));
                }
                auto inst = generate(ap.axis, v, stream.next(), cfg);
                inst.split = assign_split(inst, salt, test_ratio);
                int& need = inst.split == Split::Test ? test_need[v] : train_need[v];
                if (need <= 0) continue;
                --need;
                out.push_back(std::move(inst));
            }
        }
    }
    return out;
}

}  // namespace mas
