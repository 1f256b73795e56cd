#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace mas {

std::string_view trim_view(std::string_view s);
std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
// Trims and collapses every internal whitespace run to one space.
std::string collapse_whitespace(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
// splitmix64 finalizer; spreads FNV output for ratio-based bucketing.
std::uint64_t mix64(std::uint64_t x);
std::string hex64(std::uint64_t v);

// Derives an independent seed for a named substream.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

// mt19937_64 with a portable bounded draw (std distributions differ across
// standard libraries, which would break byte-identical generation).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    // Uniform in [lo, hi], inclusive.
    std::int64_t uniform(std::int64_t lo, std::int64_t hi);
    bool chance(std::uint32_t num, std::uint32_t den) { return uniform(0, den - 1) < num; }

    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[static_cast<std::size_t>(uniform(0, static_cast<std::int64_t>(v.size()) - 1))];
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(uniform(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace mas
