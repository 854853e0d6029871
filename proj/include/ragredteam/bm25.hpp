#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ragredteam/corpus.hpp"

namespace ragredteam::retrieval {

struct RetrievalResult {
    std::string doc_id;
    double score = 0.0;
    int rank = 0; // 1-based

    bool operator==(const RetrievalResult&) const = default;
};

/// Okapi BM25 inverted statistics. Immutable after build; scoring is safe
/// from any number of threads.
class Bm25Index {
public:
    Bm25Index() = default;

    static Bm25Index build(const corpus::KnowledgeBase& kb, double k1 = 1.2, double b = 0.75);

    std::size_t corpus_size() const { return doc_ids_.size(); }
    double average_doc_length() const { return average_doc_length_; }
    double k1() const { return k1_; }
    double b() const { return b_; }
    std::size_t document_frequency(const std::string& term) const;
    std::size_t doc_length(const std::string& doc_id) const;
    std::size_t term_frequency(const std::string& term, const std::string& doc_id) const;

    /// Okapi BM25 with Lucene-style IDF, ln((N - df + 0.5)/(df + 0.5) + 1),
    /// which keeps every term contribution non-negative. Query terms absent
    /// from the corpus contribute 0; a term repeated in the query
    /// contributes once per occurrence. Unknown doc_id raises
    /// ValidationError.
    double score(const std::vector<std::string>& query_tokens, const std::string& doc_id) const;

    /// Top-k documents ordered by descending score, ties broken by
    /// ascending doc_id. Zero-score documents are eligible, so the result
    /// has min(k, corpus size) entries.
    std::vector<RetrievalResult> retrieve_top_k(const std::string& query, int k) const;

private:
    std::size_t position_of(const std::string& doc_id) const;
    double score_at(const std::vector<std::string>& query_tokens, std::size_t pos) const;

    double k1_ = 1.2;
    double b_ = 0.75;
    std::vector<std::string> doc_ids_;
    std::unordered_map<std::string, std::size_t> id_to_pos_;
    std::vector<std::unordered_map<std::string, std::size_t>> term_frequencies_;
    std::vector<std::size_t> doc_lengths_;
    std::unordered_map<std::string, std::size_t> document_frequency_;
    double average_doc_length_ = 0.0;
};

} // namespace ragredteam::retrieval
