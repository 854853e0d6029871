#include "ragredteam/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>

#include "httplib.h"
#include "json.hpp"

#include "ragredteam/errors.hpp"
#include "ragredteam/tokenizer.hpp"

namespace ragredteam::retrieval {

using nlohmann::json;

HttpEmbeddingClient::HttpEmbeddingClient(EmbeddingConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty())
        throw ConfigError("embedding client needs a base_url");
}

namespace {

// httplib wants the origin and any path prefix separately.
std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = url.find('/', host_start);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

} // namespace

std::vector<std::vector<double>> HttpEmbeddingClient::embed(const std::vector<std::string>& inputs) {
    if (inputs.empty()) return {};
    auto [origin, path] = split_url(config_.base_url);
    httplib::Client client(origin);
    client.set_connection_timeout(static_cast<time_t>(config_.timeout_seconds), 0);
    client.set_read_timeout(static_cast<time_t>(config_.timeout_seconds), 0);

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    json body;
    body["input"] = inputs;
    body["model"] = config_.model;

    httplib::Result res;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        res = client.Post(path, headers, body.dump(), "application/json");
        if (res && res->status >= 200 && res->status < 300) break;
        if (res && res->status != 429 && res->status < 500)
            throw TransportError("embedding service returned status " +
                                 std::to_string(res->status));
        if (attempt == config_.max_retries)
            throw TransportError("embedding request failed after " +
                                 std::to_string(config_.max_retries + 1) + " attempts");
    }

    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("data") || !reply["data"].is_array())
        throw ParseError("embedding reply is not {\"data\": [...]}");
    std::vector<std::vector<double>> out;
    for (const json& item : reply["data"]) {
        if (!item.contains("embedding") || !item["embedding"].is_array())
            throw ParseError("embedding reply item lacks an \"embedding\" array");
        out.push_back(item["embedding"].get<std::vector<double>>());
    }
    if (out.size() != inputs.size())
        throw ParseError("embedding reply count does not match input count");
    return out;
}

std::vector<std::vector<double>> HashingEmbeddingClient::embed(const std::vector<std::string>& inputs) {
    std::vector<std::vector<double>> out;
    out.reserve(inputs.size());
    for (const std::string& input : inputs) {
        std::vector<double> vec(dimensions_, 0.0);
        for (const std::string& token : tokenize(input)) {
            std::size_t h = std::hash<std::string>{}(token);
            vec[h % dimensions_] += ((h >> 32) & 1) ? 1.0 : -1.0;
        }
        double norm = 0.0;
        for (double v : vec) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (double& v : vec) v /= norm;
        out.push_back(std::move(vec));
    }
    return out;
}

namespace {

double similarity(const std::vector<double>& a, const std::vector<double>& b,
                  SimilarityMetric metric) {
    if (a.size() != b.size())
        throw ValidationError("embedding dimension mismatch: " + std::to_string(a.size()) +
                              " vs " + std::to_string(b.size()));
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    if (metric == SimilarityMetric::InnerProduct) return dot;
    double na = 0.0, nb = 0.0;
    for (double v : a) na += v * v;
    for (double v : b) nb += v * v;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string cache_key(const corpus::Document& doc) {
    return doc.id + '\n' + doc.text;
}

} // namespace

std::vector<RetrievalResult> EmbeddingRetriever::retrieve(const corpus::KnowledgeBase& kb,
                                                          const std::string& query, int k) {
    if (k < 1) throw ValidationError("retrieve requires k >= 1");

    std::vector<std::string> pending_texts;
    std::vector<std::string> pending_keys;
    for (const corpus::Document& doc : kb.documents()) {
        std::string key = cache_key(doc);
        if (!cache_.count(key)) {
            pending_texts.push_back(doc.text);
            pending_keys.push_back(std::move(key));
        }
    }
    if (!pending_texts.empty()) {
        auto embeddings = client_.embed(pending_texts);
        if (embeddings.size() != pending_texts.size())
            throw ParseError("embedding client returned wrong number of vectors");
        for (std::size_t i = 0; i < pending_keys.size(); ++i)
            cache_.emplace(std::move(pending_keys[i]), std::move(embeddings[i]));
    }

    auto query_embedding = client_.embed({query});
    if (query_embedding.size() != 1)
        throw ParseError("embedding client returned wrong number of vectors for query");

    std::vector<RetrievalResult> results;
    results.reserve(kb.size());
    for (const corpus::Document& doc : kb.documents()) {
        const auto& doc_vec = cache_.at(cache_key(doc));
        results.push_back({doc.id, similarity(query_embedding[0], doc_vec, metric_), 0});
    }
    std::sort(results.begin(), results.end(), [](const RetrievalResult& a, const RetrievalResult& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (results.size() > static_cast<std::size_t>(k)) results.resize(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < results.size(); ++i) results[i].rank = static_cast<int>(i + 1);
    return results;
}

std::vector<RetrievalResult> embed_retrieve(EmbeddingClient& client, const corpus::KnowledgeBase& kb,
                                            const std::string& query, int k,
                                            SimilarityMetric metric) {
    EmbeddingRetriever retriever(client, metric);
    return retriever.retrieve(kb, query, k);
}

} // namespace ragredteam::retrieval
