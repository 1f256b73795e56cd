#include "mas/ledger.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace mas {

std::optional<double> CostLedger::dollars() const {
    if (!cost_picodollars) return std::nullopt;
    return static_cast<double>(*cost_picodollars) / 1e12;
}

CostLedger merge_ledgers(const CostLedger& a, const CostLedger& b) {
    CostLedger out;
    out.llm_calls = a.llm_calls + b.llm_calls;
    out.prompt_tokens = a.prompt_tokens + b.prompt_tokens;
    out.completion_tokens = a.completion_tokens + b.completion_tokens;
    out.wall_time_us = a.wall_time_us + b.wall_time_us;
    if (a.cost_picodollars && b.cost_picodollars) {
        out.cost_picodollars = *a.cost_picodollars + *b.cost_picodollars;
    } else {
        out.cost_picodollars = std::nullopt;
    }
    return out;
}

void PriceTable::set(const std::string& model, double input_per_million, double output_per_million) {
    // $ per 1e6 tokens == 1e6 picodollars per token per dollar.
    prices_[model] = ModelPrice{std::llround(input_per_million * 1e6), std::llround(output_per_million * 1e6)};
}

std::optional<ModelPrice> PriceTable::find(const std::string& model) const {
    auto it = prices_.find(model);
    if (it == prices_.end()) return std::nullopt;
    return it->second;
}

CostLedger PriceTable::price_call(const std::string& model, std::uint64_t prompt_tokens,
                                  std::uint64_t completion_tokens, std::int64_t wall_time_us) const {
    CostLedger l = unpriced_call(prompt_tokens, completion_tokens, wall_time_us);
    if (auto p = find(model)) {
        l.cost_picodollars = static_cast<std::int64_t>(prompt_tokens) * p->input_picodollars_per_token +
                             static_cast<std::int64_t>(completion_tokens) * p->output_picodollars_per_token;
    }
    return l;
}

CostLedger unpriced_call(std::uint64_t prompt_tokens, std::uint64_t completion_tokens, std::int64_t wall_time_us) {
    CostLedger l;
    l.llm_calls = 1;
    l.prompt_tokens = prompt_tokens;
    l.completion_tokens = completion_tokens;
    l.wall_time_us = wall_time_us;
    l.cost_picodollars = std::nullopt;
    return l;
}

PriceTable PriceTable::from_json(const nlohmann::json& j) {
    PriceTable t;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& v = it.value();
        t.set(it.key(), v.at("input_per_million").get<double>(), v.at("output_per_million").get<double>());
    }
    return t;
}

PriceTable PriceTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open price table: " + path);
    return from_json(nlohmann::json::parse(in));
}

void to_json(nlohmann::json& j, const CostLedger& l) {
    j = nlohmann::json{{"llm_calls", l.llm_calls},
                       {"prompt_tokens", l.prompt_tokens},
                       {"completion_tokens", l.completion_tokens},
                       {"wall_time_us", l.wall_time_us}};
    if (l.cost_picodollars) {
        j["cost_picodollars"] = *l.cost_picodollars;
        j["dollars"] = *l.dollars();
    } else {
        j["cost_picodollars"] = nullptr;
    }
}

void from_json(const nlohmann::json& j, CostLedger& l) {
    l.llm_calls = j.at("llm_calls").get<std::uint64_t>();
    l.prompt_tokens = j.at("prompt_tokens").get<std::uint64_t>();
    l.completion_tokens = j.at("completion_tokens").get<std::uint64_t>();
    l.wall_time_us = j.value("wall_time_us", std::int64_t{0});
    const auto& c = j.at("cost_picodollars");
    if (c.is_null()) {
        l.cost_picodollars = std::nullopt;
    } else {
        l.cost_picodollars = c.get<std::int64_t>();
    }
}

}  // namespace mas
