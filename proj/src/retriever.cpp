#include "mas/retriever.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace mas {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Bm25Retriever::Bm25Retriever(std::vector<Document> docs, double k1, double b)
    : docs_(std::move(docs)), k1_(k1), b_(b) {
    std::size_t total = 0;
    for (const auto& d : docs_) {
        auto toks = tokenize(d.text);
        std::map<std::string, std::size_t> tf;
        for (const auto& t : toks) ++tf[t];
        for (const auto& [t, _] : tf) ++doc_freq_[t];
        lengths_.push_back(toks.size());
        total += toks.size();
        term_freqs_.push_back(std::move(tf));
    }
    avg_len_ = docs_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs_.size());
}

Bm25Retriever Bm25Retriever::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw RetrieverError("cannot open corpus: " + path);
    std::vector<Document> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            Document d;
            d.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                                    : std::to_string(docs.size());
            d.text = j.value("text", std::string{});
            if (j.contains("title")) d.text = j["title"].get<std::string>() + "\n" + d.text;
            docs.push_back(std::move(d));
        } catch (const nlohmann::json::exception& e) {
            throw RetrieverError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return Bm25Retriever(std::move(docs));
}

std::vector<SearchHit> Bm25Retriever::search(const std::string& query, std::size_t top_k) const {
    auto terms = tokenize(query);
    const double n = static_cast<double>(docs_.size());
    std::vector<double> scores(docs_.size(), 0.0);
    for (const auto& t : terms) {
        auto df_it = doc_freq_.find(t);
        if (df_it == doc_freq_.end()) continue;
        double df = static_cast<double>(df_it->second);
        double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (std::size_t i = 0; i < docs_.size(); ++i) {
            auto it = term_freqs_[i].find(t);
            if (it == term_freqs_[i].end()) continue;
            double f = static_cast<double>(it->second);
            double norm = 1.0 - b_ + b_ * static_cast<double>(lengths_[i]) / (avg_len_ > 0 ? avg_len_ : 1.0);
            scores[i] += idf * f * (k1_ + 1.0) / (f + k1_ * norm);
        }
    }
    std::vector<std::size_t> order(docs_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<SearchHit> hits;
    for (auto i : order) {
        if (hits.size() >= top_k || scores[i] <= 0.0) break;
        hits.push_back({docs_[i].id, docs_[i].text.substr(0, snippet_chars), scores[i]});
    }
    return hits;
}

}  // namespace mas
