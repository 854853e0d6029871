#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "ragredteam/bm25.hpp"
#include "ragredteam/corpus.hpp"

namespace ragredteam::retrieval {

/// Dense-embedding backend. The production implementation talks to an
/// external service standing in for Contriever; tests use stubs.
class EmbeddingClient {
public:
    virtual ~EmbeddingClient() = default;

    /// Embeddings for each input, in input order.
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& inputs) = 0;
};

struct EmbeddingConfig {
    std::string base_url;
    std::string model;
    double timeout_seconds = 60.0;
    int max_retries = 3;
    std::string api_key_env = "RAGREDTEAM_EMBED_KEY";
};

/// POST {base_url} with {"input": [...], "model": "..."}; expects
/// {"data": [{"embedding": [...]}, ...]} in input order.
class HttpEmbeddingClient : public EmbeddingClient {
public:
    explicit HttpEmbeddingClient(EmbeddingConfig config);
    std::vector<std::vector<double>> embed(const std::vector<std::string>& inputs) override;

private:
    EmbeddingConfig config_;
};

/// Deterministic local fallback: feature-hashes token counts into a fixed
/// number of dimensions. Not a real embedding model; exists so retrieval
/// pipelines can run offline.
class HashingEmbeddingClient : public EmbeddingClient {
public:
    explicit HashingEmbeddingClient(std::size_t dimensions = 64) : dimensions_(dimensions) {}
    std::vector<std::vector<double>> embed(const std::vector<std::string>& inputs) override;

private:
    std::size_t dimensions_;
};

enum class SimilarityMetric { InnerProduct, Cosine };

/// Dense retrieval over a knowledge base. Document embeddings are cached
/// by (id, text), so repeated retrieval against a mutating corpus only
/// embeds documents it has not seen.
class EmbeddingRetriever {
public:
    explicit EmbeddingRetriever(EmbeddingClient& client,
                                SimilarityMetric metric = SimilarityMetric::InnerProduct)
        : client_(client), metric_(metric) {}

    /// Top-k by descending similarity of query embedding with each document
    /// embedding; ties broken by ascending doc_id. Mismatched embedding
    /// dimensions raise ValidationError.
    std::vector<RetrievalResult> retrieve(const corpus::KnowledgeBase& kb,
                                          const std::string& query, int k);

private:
    EmbeddingClient& client_;
    SimilarityMetric metric_;
    std::unordered_map<std::string, std::vector<double>> cache_;
};

/// One-shot convenience wrapper around EmbeddingRetriever.
std::vector<RetrievalResult> embed_retrieve(EmbeddingClient& client,
                                            const corpus::KnowledgeBase& kb,
                                            const std::string& query, int k,
                                            SimilarityMetric metric = SimilarityMetric::InnerProduct);

} // namespace ragredteam::retrieval
