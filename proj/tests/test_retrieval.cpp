#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "ragredteam/bm25.hpp"
#include "ragredteam/embedding.hpp"
#include "ragredteam/errors.hpp"
#include "ragredteam/tokenizer.hpp"

#include "support/oracles.hpp"

using namespace ragredteam;
using namespace ragredteam::retrieval;

namespace {

corpus::KnowledgeBase make_kb(const std::vector<std::pair<std::string, std::string>>& docs) {
    corpus::KnowledgeBase kb("test");
    for (const auto& [id, text] : docs) kb.add({id, text, {}});
    return kb;
}

/// Embedding stub with fixed vectors per text.
class StubEmbeddingClient : public EmbeddingClient {
public:
    std::map<std::string, std::vector<double>> vectors;
    std::vector<double> fallback{0.0};
    std::vector<std::vector<double>> embed(const std::vector<std::string>& inputs) override {
        std::vector<std::vector<double>> out;
        for (const auto& input : inputs) {
            auto it = vectors.find(input);
            out.push_back(it == vectors.end() ? fallback : it->second);
        }
        return out;
    }
};

} // namespace

TEST_CASE("tokenize: lowercase, letters and digits kept, separators dropped") {
    CHECK(tokenize("Warren Bryant, CEO.") == std::vector<std::string>{"warren", "bryant", "ceo"});
    CHECK(tokenize("") == std::vector<std::string>{});
    CHECK(tokenize("750 7th Avenue") == std::vector<std::string>{"750", "7th", "avenue"});
    CHECK(tokenize("a-b_c") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("build_index statistics match a brute-force recount") {
    auto kb = make_kb({{"d1", "kosovo declaration"}, {"d2", "weather report"}});
    Bm25Index index = Bm25Index::build(kb);
    CHECK(index.corpus_size() == 2);
    CHECK(index.document_frequency("kosovo") == 1);
    CHECK(index.average_doc_length() == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(index.doc_length("d1") == 2);
    CHECK(index.term_frequency("kosovo", "d1") == 1);
}

TEST_CASE("build_index: empty corpus") {
    corpus::KnowledgeBase kb("empty");
    Bm25Index index = Bm25Index::build(kb);
    CHECK(index.corpus_size() == 0);
    CHECK(index.retrieve_top_k("anything", 5).empty());
}

TEST_CASE("build_index: term in every document has df == N") {
    auto kb = make_kb({{"d1", "the cat"}, {"d2", "the dog"}, {"d3", "the bird"}});
    Bm25Index index = Bm25Index::build(kb);
    CHECK(index.document_frequency("the") == 3);
}

TEST_CASE("bm25_score: single-match fixture scores ln 2") {
    // N=2, df=1, tf=1, len == avglen: tf part is (k1+1)/(1+k1) = 1, so the
    // score reduces to the IDF, ln((2-1+0.5)/(1+0.5)+1) = ln 2.
    auto kb = make_kb({{"d1", "kosovo declaration"}, {"d2", "weather report"}});
    Bm25Index index = Bm25Index::build(kb);
    double score = index.score(tokenize("kosovo"), "d1");
    CHECK(score == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(std::abs(score - oracle::bm25_score_brute(
                               {{"d1", "kosovo declaration"}, {"d2", "weather report"}}, "kosovo",
                               "d1", 1.2, 0.75)) < 1e-12);
}

TEST_CASE("bm25_score: query with no corpus terms scores 0") {
    auto kb = make_kb({{"d1", "kosovo declaration"}});
    Bm25Index index = Bm25Index::build(kb);
    CHECK(index.score(tokenize("zebra unicorn"), "d1") == 0.0);
    CHECK_THROWS_AS(index.score(tokenize("kosovo"), "nope"), ValidationError);
}

TEST_CASE("bm25_score: doubled document never scores below the original") {
    std::vector<std::pair<std::string, std::string>> docs = {
        {"once", "alpha bravo charlie"},
        {"twice", "alpha bravo charlie alpha bravo charlie"},
        {"other", "delta echo foxtrot"}};
    auto kb = make_kb(docs);
    Bm25Index index = Bm25Index::build(kb);
    auto query = tokenize("alpha bravo charlie");
    CHECK(index.score(query, "twice") >= index.score(query, "once"));
    CHECK(index.score(query, "twice") ==
          doctest::Approx(oracle::bm25_score_brute(docs, "alpha bravo charlie", "twice", 1.2, 0.75))
              .epsilon(1e-12));
}

TEST_CASE("retrieve_top_k: a document's own text puts it at rank 1") {
    auto kb = make_kb({{"a", "kosovo declared independence in february"},
                       {"b", "the weather is mild"},
                       {"c", "declaration of other events"}});
    Bm25Index index = Bm25Index::build(kb);
    auto results = index.retrieve_top_k("kosovo declared independence in february", 3);
    REQUIRE(!results.empty());
    CHECK(results[0].doc_id == "a");
    CHECK(results[0].rank == 1);
}

TEST_CASE("retrieve_top_k: k larger than corpus returns everything") {
    auto kb = make_kb({{"a", "one"}, {"b", "two"}});
    auto results = Bm25Index::build(kb).retrieve_top_k("one", 10);
    CHECK(results.size() == 2);
    // zero-score document still eligible
    CHECK(results[1].doc_id == "b");
    CHECK(results[1].score == 0.0);
    CHECK(results[1].rank == 2);
}

TEST_CASE("retrieve_top_k: identical documents tie-break by ascending id") {
    auto kb = make_kb({{"zz", "same text here"}, {"aa", "same text here"}});
    auto results = Bm25Index::build(kb).retrieve_top_k("same text", 2);
    REQUIRE(results.size() == 2);
    CHECK(results[0].doc_id == "aa");
    CHECK(results[1].doc_id == "zz");
}

TEST_CASE("property: retrieve_top_k equals the brute-force oracle") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        auto docs = oracle::random_corpus(rng, 20, 10);
        std::string query = oracle::random_query(rng);
        auto kb = make_kb(docs);
        Bm25Index index = Bm25Index::build(kb);
        int k = 1 + static_cast<int>(rng() % docs.size());
        auto got = index.retrieve_top_k(query, k);
        auto want = oracle::bm25_topk_brute(docs, query, k, 1.2, 0.75);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].doc_id == want[i].id);
            CHECK(got[i].rank == want[i].rank);
            CHECK(std::abs(got[i].score - want[i].score) <= 1e-9);
        }
    }
}

TEST_CASE("property: rank-1 pull for the only covering document") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        auto docs = oracle::random_corpus(rng, 10, 8);
        // none of the corpus words appear in this query
        std::string query = "zenith quasar nimbus";
        docs.emplace_back("cover", query);
        auto kb = make_kb(docs);
        auto results = Bm25Index::build(kb).retrieve_top_k(query, 1);
        REQUIRE(results.size() == 1);
        CHECK(results[0].doc_id == "cover");
        CHECK(results[0].score > 0.0);
    }
}

TEST_CASE("determinism: identical corpus and query give identical results") {
    std::mt19937_64 rng(23);
    auto docs = oracle::random_corpus(rng, 15, 10);
    auto kb = make_kb(docs);
    std::string query = oracle::random_query(rng);
    Bm25Index index = Bm25Index::build(kb);
    auto first = index.retrieve_top_k(query, 5);
    for (int i = 0; i < 5; ++i) {
        Bm25Index rebuilt = Bm25Index::build(kb);
        CHECK(rebuilt.retrieve_top_k(query, 5) == first);
    }
}

TEST_CASE("embed_retrieve ranks by inner product") {
    auto kb = make_kb({{"d1", "first doc"}, {"d2", "second doc"}});
    StubEmbeddingClient stub;
    stub.vectors["query"] = {1.0, 0.0};
    stub.vectors["first doc"] = {1.0, 0.0};
    stub.vectors["second doc"] = {0.0, 1.0};
    auto results = embed_retrieve(stub, kb, "query", 2);
    REQUIRE(results.size() == 2);
    CHECK(results[0].doc_id == "d1");
    CHECK(results[0].score == doctest::Approx(1.0));
    CHECK(results[1].doc_id == "d2");
    CHECK(results[1].score == doctest::Approx(0.0));
}

TEST_CASE("embed_retrieve: equal vectors tie-break by doc id") {
    auto kb = make_kb({{"zz", "textA"}, {"aa", "textB"}});
    StubEmbeddingClient stub;
    stub.vectors["q"] = {1.0};
    stub.vectors["textA"] = {0.5};
    stub.vectors["textB"] = {0.5};
    auto results = embed_retrieve(stub, kb, "q", 2);
    CHECK(results[0].doc_id == "aa");
    CHECK(results[1].doc_id == "zz");
}

TEST_CASE("embed_retrieve: dimension mismatch is an error") {
    auto kb = make_kb({{"d1", "doc"}});
    StubEmbeddingClient stub;
    stub.vectors["q"] = {1.0, 0.0, 0.0};
    stub.vectors["doc"] = {1.0, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(embed_retrieve(stub, kb, "q", 1), ValidationError);
}

TEST_CASE("embedding cache only embeds unseen documents") {
    class CountingClient : public EmbeddingClient {
    public:
        std::size_t texts_embedded = 0;
        std::vector<std::vector<double>> embed(const std::vector<std::string>& inputs) override {
            texts_embedded += inputs.size();
            return std::vector<std::vector<double>>(inputs.size(), {1.0});
        }
    };
    auto kb = make_kb({{"d1", "one"}, {"d2", "two"}});
    CountingClient client;
    EmbeddingRetriever retriever(client);
    retriever.retrieve(kb, "q", 2);
    std::size_t after_first = client.texts_embedded; // 2 docs + 1 query
    CHECK(after_first == 3);
    retriever.retrieve(kb, "q2", 2); // only the query embeds again
    CHECK(client.texts_embedded == after_first + 1);
}

TEST_CASE("http embedding client speaks the documented wire format") {
    nlohmann::json seen;
    std::string auth;
    httplib::Server server;
    server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        auth = req.get_header_value("Authorization");
        nlohmann::json reply;
        reply["data"] = nlohmann::json::array();
        for (std::size_t i = 0; i < seen["input"].size(); ++i)
            reply["data"].push_back({{"embedding", {1.0 * static_cast<double>(i), 1.0}}});
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("RAGREDTEAM_EMBED_KEY", "embed-key", 1);
    EmbeddingConfig config;
    config.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/embeddings";
    config.model = "contriever-stub";
    HttpEmbeddingClient client(config);
    auto vectors = client.embed({"first", "second"});
    server.stop();
    thread.join();
    unsetenv("RAGREDTEAM_EMBED_KEY");

    REQUIRE(vectors.size() == 2);
    CHECK(vectors[1] == std::vector<double>{1.0, 1.0});
    CHECK(seen["input"] == nlohmann::json({"first", "second"}));
    CHECK(seen["model"] == "contriever-stub");
    CHECK(auth == "Bearer embed-key");
}

TEST_CASE("hashing embedder is deterministic and retrieval-compatible") {
    auto kb = make_kb({{"d1", "kosovo declared independence"}, {"d2", "sunny weather today"}});
    HashingEmbeddingClient hash(32);
    auto a = embed_retrieve(hash, kb, "kosovo independence", 2);
    auto b = embed_retrieve(hash, kb, "kosovo independence", 2);
    CHECK(a == b);
    CHECK(a[0].doc_id == "d1");
}
