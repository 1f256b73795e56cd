#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mas {

inline constexpr const char* kBenchTemplateVersion = "mas-bench-v1";

enum class Axis { Depth, Horizon, Breadth, Parallel, Robustness };

std::string_view to_string(Axis axis);
std::optional<Axis> axis_from_string(std::string_view s);  // case-insensitive
const std::vector<Axis>& all_axes();
// Inclusive supported value range.
std::pair<int, int> axis_range(Axis axis);

enum class BenchErrorKind { UnsupportedAxisValue, GenerationRetryExhausted, UndefinedVariable, CycleDetected, TooManyAttacks, InvalidInstance };

std::string_view to_string(BenchErrorKind kind);

class BenchError : public std::runtime_error {
public:
    BenchError(BenchErrorKind kind, const std::string& detail);
    BenchErrorKind kind() const noexcept { return kind_; }

private:
    BenchErrorKind kind_;
};

enum class ExprKind { Const, Sum, Diff, ScaledSum, OffsetRef };
// What ScaledSum / OffsetRef apply their constant to.
enum class Combine { Sum, Diff };

std::string_view to_string(ExprKind kind);

struct Expr {
    ExprKind kind = ExprKind::Const;
    // Const: the value. ScaledSum: the multiplier. OffsetRef: the addend.
    std::int64_t k = 0;
    std::vector<std::string> refs;
    Combine combine = Combine::Sum;

    bool operator==(const Expr&) const = default;
};

struct Variable {
    std::string id;
    std::string display;  // "Parent's Child", or the needle phrase
    std::string parent;
    std::string child;
    int theme = -1;
    int parent_level = -1;
    int parent_index = -1;
    int child_index = -1;
    int problem = 0;  // sub-problem the defining sentence belongs to
    bool carry = false;   // equals the previous problem's answer
    bool needle = false;  // magic number; display holds the label
    bool distractor = false;

    bool operator==(const Variable&) const = default;
};

struct DepGraph {
    std::vector<Variable> variables;
    std::map<std::string, Expr> defs;
    std::vector<std::string> query_ids;
    // Operation results are reduced mod this when set; constants never are.
    std::optional<std::int64_t> modulus;

    const Variable* find(const std::string& id) const;
    bool operator==(const DepGraph&) const = default;
};

struct AdversarialNote {
    int position = 0;  // passage block the note is appended to
    int target = 0;    // query index the note lies about
    std::string text;
    std::string value;
    bool operator==(const AdversarialNote&) const = default;
};

struct MagicNeedle {
    std::string label;
    std::string number;
    bool operator==(const MagicNeedle&) const = default;
};

struct AdversarialSpec {
    std::vector<AdversarialNote> notes;
    std::vector<std::string> haystack_blocks;
    std::vector<MagicNeedle> magic_needles;
    bool operator==(const AdversarialSpec&) const = default;
};

enum class Split { Train, Test };
std::string_view to_string(Split s);

struct BenchInstance {
    std::string instance_id;
    Axis axis = Axis::Depth;
    int axis_value = 0;
    std::string question;
    DepGraph graph;
    std::vector<std::string> gold;
    Split split = Split::Test;
    std::uint64_t seed = 0;
    std::optional<AdversarialSpec> adversarial;

    bool operator==(const BenchInstance&) const = default;
};

struct Theme {
    std::string name;
    std::vector<std::vector<std::string>> levels;
};

struct NameBank {
    int version = 0;
    std::vector<Theme> themes;
    std::vector<std::string> needle_adjectives;
    std::vector<std::string> needle_nouns;

    static NameBank from_json(const nlohmann::json& j);
    static NameBank load(const std::string& path);
};

// The bank shipped in data/name_bank.json, compiled in.
const NameBank& default_name_bank();

struct GenConfig {
    std::optional<std::int64_t> modulus;  // mod-p arithmetic instead of capped integers
    std::int64_t value_cap = 1'000'000;
    int max_retries = 64;
    int haystack_repeats = 8;  // filler sentences per haystack block
    const NameBank* names = nullptr;  // default bank when null
};

BenchInstance generate(Axis axis, int axis_value, std::uint64_t seed, const GenConfig& cfg = {});

// Values of every variable, in evaluation order.
std::map<std::string, std::int64_t> evaluate_graph(const DepGraph& graph);
std::vector<std::string> oracle_eval(const DepGraph& graph);

// Robustness is not a property of the graph alone; use the instance overload.
int measure_axis(const DepGraph& graph, Axis axis);
int measure_axis(const BenchInstance& instance);

// Longest chain (in nodes) ending at `id`.
int chain_length(const DepGraph& graph, const std::string& id);

// Combines Depth-4 cores into one passage with needles and `n_attacks` notes.
BenchInstance inject_adversarial(const std::vector<BenchInstance>& cores, int n_attacks, std::uint64_t seed,
                                 const GenConfig& cfg = {});
BenchInstance inject_adversarial(const BenchInstance& core, int n_attacks, std::uint64_t seed, const GenConfig& cfg = {});

// Canonical string of everything structural (shape, name choices, query and
// note targets) and nothing numeric.
std::string template_key(const BenchInstance& instance);
Split assign_split(const BenchInstance& instance, std::uint64_t salt, double test_ratio = 0.2);

std::string render_question(const BenchInstance& instance);

nlohmann::json to_json(const DepGraph& g);
DepGraph dep_graph_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BenchInstance& inst);
BenchInstance bench_instance_from_json(const nlohmann::json& j);

// Per-axis cell counts for building a full benchmark.
struct AxisProfile {
    Axis axis;
    std::vector<int> train_values;
    int train_total = 0;
    std::map<int, int> test_counts;
};

// Train/test cell counts of the published benchmark.
std::vector<AxisProfile> published_profile();

// Walks seeds 0,1,2,... per axis and keeps instances whose split hash lands in
// a cell that still needs instances; train totals are spread evenly over values.
std::vector<BenchInstance> generate_profile(const std::vector<AxisProfile>& profile, std::uint64_t seed,
                                            std::uint64_t salt, double test_ratio = 0.25, const GenConfig& cfg = {});

}  // namespace mas
