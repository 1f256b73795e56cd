#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mas {

class RetrieverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SearchHit {
    std::string doc_id;
    std::string snippet;
    double score = 0.0;
};

class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::vector<SearchHit> search(const std::string& query, std::size_t top_k) const = 0;
};

struct Document {
    std::string id;
    std::string text;
};

// Okapi BM25 over an in-memory corpus. Equal scores keep corpus order.
class Bm25Retriever : public Retriever {
public:
    explicit Bm25Retriever(std::vector<Document> docs, double k1 = 1.2, double b = 0.75);

    // JSON lines with "id" and "text" (an optional "title" is prepended to the text).
    static Bm25Retriever load(const std::string& path);

    std::vector<SearchHit> search(const std::string& query, std::size_t top_k) const override;
    std::size_t size() const { return docs_.size(); }

    std::size_t snippet_chars = 400;

private:
    std::vector<Document> docs_;
    std::vector<std::map<std::string, std::size_t>> term_freqs_;
    std::vector<std::size_t> lengths_;
    std::map<std::string, std::size_t> doc_freq_;
    double avg_len_ = 0.0;
    double k1_;
    double b_;
};

// Lowercased alphanumeric runs.
std::vector<std::string> tokenize(const std::string& text);

}  // namespace mas
