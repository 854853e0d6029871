#include "ragredteam/bm25.hpp"

#include <algorithm>
#include <cmath>

#include "ragredteam/errors.hpp"
#include "ragredteam/tokenizer.hpp"

namespace ragredteam::retrieval {

Bm25Index Bm25Index::build(const corpus::KnowledgeBase& kb, double k1, double b) {
    Bm25Index index;
    index.k1_ = k1;
    index.b_ = b;
    std::size_t total_length = 0;
    for (const corpus::Document& doc : kb.documents()) {
        std::vector<std::string> tokens = tokenize(doc.text);
        std::unordered_map<std::string, std::size_t> tf;
        for (const std::string& token : tokens) ++tf[token];
        for (const auto& [term, count] : tf) ++index.document_frequency_[term];
        total_length += tokens.size();
        index.id_to_pos_.emplace(doc.id, index.doc_ids_.size());
        index.doc_ids_.push_back(doc.id);
        index.doc_lengths_.push_back(tokens.size());
        index.term_frequencies_.push_back(std::move(tf));
    }
    if (!index.doc_ids_.empty())
        index.average_doc_length_ =
            static_cast<double>(total_length) / static_cast<double>(index.doc_ids_.size());
    return index;
}

std::size_t Bm25Index::document_frequency(const std::string& term) const {
    auto it = document_frequency_.find(term);
    return it == document_frequency_.end() ? 0 : it->second;
}

std::size_t Bm25Index::position_of(const std::string& doc_id) const {
    auto it = id_to_pos_.find(doc_id);
    if (it == id_to_pos_.end())
        throw ValidationError("unknown document id \"" + doc_id + "\"");
    return it->second;
}

std::size_t Bm25Index::doc_length(const std::string& doc_id) const {
    return doc_lengths_[position_of(doc_id)];
}

std::size_t Bm25Index::term_frequency(const std::string& term, const std::string& doc_id) const {
    const auto& tf = term_frequencies_[position_of(doc_id)];
    auto it = tf.find(term);
    return it == tf.end() ? 0 : it->second;
}

double Bm25Index::score_at(const std::vector<std::string>& query_tokens, std::size_t pos) const {
    const auto& tf_map = term_frequencies_[pos];
    const double len = static_cast<double>(doc_lengths_[pos]);
    const double n = static_cast<double>(doc_ids_.size());
    double total = 0.0;
    for (const std::string& term : query_tokens) {
        auto df_it = document_frequency_.find(term);
        if (df_it == document_frequency_.end()) continue;
        auto tf_it = tf_map.find(term);
        if (tf_it == tf_map.end()) continue;
        const double df = static_cast<double>(df_it->second);
        const double tf = static_cast<double>(tf_it->second);
        const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
        const double norm = tf + k1_ * (1.0 - b_ + b_ * len / average_doc_length_);
        total += idf * tf * (k1_ + 1.0) / norm;
    }
    return total;
}

double Bm25Index::score(const std::vector<std::string>& query_tokens,
                        const std::string& doc_id) const {
    return score_at(query_tokens, position_of(doc_id));
}

std::vector<RetrievalResult> Bm25Index::retrieve_top_k(const std::string& query, int k) const {
    if (k < 1) throw ValidationError("retrieve_top_k requires k >= 1");
    std::vector<std::string> query_tokens = tokenize(query);
    std::vector<RetrievalResult> results;
    results.reserve(doc_ids_.size());
    for (std::size_t pos = 0; pos < doc_ids_.size(); ++pos)
        results.push_back({doc_ids_[pos], score_at(query_tokens, pos), 0});
    std::sort(results.begin(), results.end(), [](const RetrievalResult& a, const RetrievalResult& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (results.size() > static_cast<std::size_t>(k)) results.resize(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < results.size(); ++i) results[i].rank = static_cast<int>(i + 1);
    return results;
}

} // namespace ragredteam::retrieval
