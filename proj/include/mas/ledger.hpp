#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

namespace mas {

// Exact accounting of backend usage. Money is kept as integer picodollars so
// merging is associative and commutative bit-for-bit.
struct CostLedger {
    std::uint64_t llm_calls = 0;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    std::int64_t wall_time_us = 0;  // summed per-call latency
    // nullopt once any merged call had no price for its model.
    std::optional<std::int64_t> cost_picodollars = 0;

    std::uint64_t total_tokens() const { return prompt_tokens + completion_tokens; }
    std::optional<double> dollars() const;

    bool operator==(const CostLedger&) const = default;
};

CostLedger merge_ledgers(const CostLedger& a, const CostLedger& b);
inline CostLedger& operator+=(CostLedger& a, const CostLedger& b) { return a = merge_ledgers(a, b); }

struct ModelPrice {
    std::int64_t input_picodollars_per_token = 0;
    std::int64_t output_picodollars_per_token = 0;
};

// Per-model rates, configured in dollars per million tokens.
class PriceTable {
public:
    static PriceTable from_json(const nlohmann::json& j);
    static PriceTable load(const std::string& path);

    void set(const std::string& model, double input_per_million, double output_per_million);
    std::optional<ModelPrice> find(const std::string& model) const;

    // Ledger entry for one backend call.
    CostLedger price_call(const std::string& model, std::uint64_t prompt_tokens, std::uint64_t completion_tokens,
                          std::int64_t wall_time_us) const;

private:
    std::map<std::string, ModelPrice> prices_;
};

// Ledger for a call when no price table is configured at all.
CostLedger unpriced_call(std::uint64_t prompt_tokens, std::uint64_t completion_tokens, std::int64_t wall_time_us);

void to_json(nlohmann::json& j, const CostLedger& l);
void from_json(const nlohmann::json& j, CostLedger& l);

}  // namespace mas
