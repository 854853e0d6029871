#include "doctest.h"

#include <random>

#include "ragredteam/coe.hpp"
#include "ragredteam/llm.hpp"

#include "support/oracles.hpp"

using namespace ragredteam;
using namespace ragredteam::coe;

namespace {

QuestionFeatures drug_store_features() {
    QuestionFeatures features;
    features.intent = "state location of business";
    features.nodes = {"drug stores", "CEO", "Warren Bryant"};
    features.relations = {{{"drug stores", "CEO"}, "have"}, {{"CEO", "Warren Bryant"}, "is"}};
    return features;
}

// Random (passage, features) instances for the oracle-equivalence property.
struct Generated {
    std::string passage;
    QuestionFeatures features;
};

Generated random_instance(std::mt19937_64& rng) {
    static const std::vector<std::string> words = {"orbit",  "garden", "filament", "harbor",
                                                   "tundra", "velvet", "quarry",   "ember"};
    static const std::vector<std::string> node_pool = {"drug stores",   "CEO",    "Warren Bryant",
                                                       "head office",   "wife",   "Heisman Trophy"};
    std::uniform_int_distribution<int> n_nodes(1, 5);
    std::uniform_int_distribution<int> n_relations(0, 4);
    std::uniform_int_distribution<int> n_sentences(0, 6);
    std::uniform_int_distribution<int> n_words(1, 6);
    std::uniform_int_distribution<int> coin(0, 1);

    Generated out;
    int nodes = n_nodes(rng);
    for (int i = 0; i < nodes; ++i)
        out.features.nodes.push_back(node_pool[rng() % node_pool.size()]);
    std::sort(out.features.nodes.begin(), out.features.nodes.end());
    out.features.nodes.erase(std::unique(out.features.nodes.begin(), out.features.nodes.end()),
                             out.features.nodes.end());
    out.features.intent = words[rng() % words.size()] + " " + words[rng() % words.size()];
    if (out.features.nodes.size() >= 2) {
        int relations = n_relations(rng);
        for (int i = 0; i < relations; ++i) {
            std::size_t a = rng() % out.features.nodes.size();
            std::size_t b = rng() % out.features.nodes.size();
            if (a == b) continue;
            out.features.relations.push_back(
                {{out.features.nodes[a], out.features.nodes[b]}, "linked to"});
        }
    }
    int sentences = n_sentences(rng);
    for (int s = 0; s < sentences; ++s) {
        std::string sentence;
        int count = n_words(rng);
        for (int w = 0; w < count; ++w) {
            if (w) sentence += ' ';
            sentence += words[rng() % words.size()];
        }
        // sometimes embed one or two nodes
        if (coin(rng)) sentence += " " + out.features.nodes[rng() % out.features.nodes.size()];
        if (coin(rng)) sentence += " " + out.features.nodes[rng() % out.features.nodes.size()];
        // sometimes mention intent words
        if (coin(rng)) sentence += " " + out.features.intent;
        out.passage += sentence + ". ";
    }
    return out;
}

} // namespace

TEST_CASE("split_sentences: basic splitting and edge cases") {
    CHECK(split_sentences("A is B. C is D.") == std::vector<std::string>{"A is B.", "C is D."});
    CHECK(split_sentences("") == std::vector<std::string>{});
    CHECK(split_sentences("Warren J. Bryant leads. He won.") ==
          std::vector<std::string>{"Warren J. Bryant leads.", "He won."});
    CHECK(split_sentences("J. K. Rowling wrote it.") ==
          std::vector<std::string>{"J. K. Rowling wrote it."});
    CHECK(split_sentences("No terminator at all") ==
          std::vector<std::string>{"No terminator at all"});
    CHECK(split_sentences("Really? Yes! Fine.") ==
          std::vector<std::string>{"Really?", "Yes!", "Fine."});
    CHECK(split_sentences("Version 2.5 shipped today.") ==
          std::vector<std::string>{"Version 2.5 shipped today."});
}

TEST_CASE("check_coverage: complete drug-store passage") {
    std::string passage = "Warren Bryant is the CEO that drug stores have.";
    CoverageReport report = check_coverage(passage, drug_store_features());
    CHECK(report.missing_nodes.empty());
    CHECK(report.missing_relations.empty());
    CHECK(report.pronoun_suspect_sentences.empty());
    REQUIRE(report.sentences.size() == 1);
    CHECK(report.per_sentence_node_hits[0].size() == 3);
}

TEST_CASE("check_coverage: pronoun-only passage misses everything") {
    CoverageReport report = check_coverage("It is in California.", drug_store_features());
    CHECK(report.missing_nodes.size() == 3);
    CHECK(report.pronoun_suspect_sentences == std::set<std::size_t>{0});
    CHECK(report.missing_relations.size() == 2);
}

TEST_CASE("check_coverage: intent hit ratio counts content tokens") {
    QuestionFeatures features;
    features.intent = "City address Information";
    features.nodes = {"x"};
    CoverageReport report = check_coverage("The x has a city address.", features);
    CHECK(report.intent_hit_ratio == doctest::Approx(2.0 / 3.0));

    CoverageReport full = check_coverage("The x city address information page.", features);
    CHECK(full.intent_hit_ratio == doctest::Approx(1.0));
}

TEST_CASE("check_coverage: relation needs co-occurrence within one sentence") {
    QuestionFeatures features;
    features.nodes = {"alpha", "beta"};
    features.relations = {{{"alpha", "beta"}, "linked"}};
    CHECK(check_coverage("alpha works with beta.", features).missing_relations.empty());
    CHECK(check_coverage("alpha is here. beta is there.", features).missing_relations.size() == 1);
}

TEST_CASE("deterministic_judge: complete passage says yes") {
    // Also covers the intent tokens (state, location, business) so the
    // intent threshold is met.
    std::string passage =
        "The drug stores have a CEO, Warren Bryant, whose business operates from a state "
        "location in California.";
    Verdict verdict = deterministic_judge(passage, drug_store_features());
    CHECK(verdict.complete);
    CHECK(verdict.advice.empty());
}

TEST_CASE("deterministic_judge: missing node is named in the advice") {
    QuestionFeatures features = drug_store_features();
    std::string passage =
        "The drug stores belong to Warren Bryant, whose business sits in a state location.";
    Verdict verdict = deterministic_judge(passage, features);
    CHECK_FALSE(verdict.complete);
    CHECK(verdict.advice.find("MISSING_NODE:") != std::string::npos);
    CHECK(verdict.advice.find("CEO") != std::string::npos);
    CHECK(verdict.advice.find("WEAK_RELATION:") != std::string::npos);
}

TEST_CASE("deterministic_judge: empty relations are vacuously satisfied") {
    QuestionFeatures features;
    features.intent = "news";
    features.nodes = {"alpha"};
    Verdict verdict = deterministic_judge("alpha made news.", features);
    CHECK(verdict.complete);
}

TEST_CASE("deterministic_judge: advice uses the machine-parseable prefixes") {
    QuestionFeatures features;
    features.intent = "orbital mechanics summary";
    features.nodes = {"satellite"};
    features.relations = {};
    Verdict verdict = deterministic_judge("It moves. The satellite spins.", features);
    CHECK_FALSE(verdict.complete);
    CHECK(verdict.advice.find("NODELESS_SENTENCE:") != std::string::npos);
    CHECK(verdict.advice.find("Revise or remove sentences that lack keywords") !=
          std::string::npos);
    CHECK(verdict.advice.find("INTENT_GAP:") != std::string::npos);
}

TEST_CASE("property: deterministic_judge agrees with the naive-scan oracle") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        Generated instance = random_instance(rng);
        oracle::NaiveFeatures naive;
        naive.intent = instance.features.intent;
        naive.nodes = instance.features.nodes;
        for (const auto& rel : instance.features.relations)
            naive.relations.emplace_back(rel.endpoints[0], rel.endpoints[1]);
        bool expected = oracle::naive_complete(instance.passage, naive, stopwords(), 0.5);
        Verdict got = deterministic_judge(instance.passage, instance.features);
        CHECK(got.complete == expected);
        if (got.complete) {
            CoverageReport confirm = check_coverage(instance.passage, instance.features);
            CHECK(confirm.missing_nodes.empty());
            CHECK(confirm.missing_relations.empty());
        }
    }
}

TEST_CASE("monotonicity: appending an all-node sentence never breaks completeness") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        Generated instance = random_instance(rng);
        std::string all_nodes;
        for (const auto& node : instance.features.nodes) all_nodes += node + " ";
        all_nodes += "covers " + instance.features.intent + ".";
        std::string extended = instance.passage + " " + all_nodes;

        CoverageReport before = check_coverage(instance.passage, instance.features);
        CoverageReport after = check_coverage(extended, instance.features);
        CHECK(after.missing_nodes.empty());
        CHECK(after.missing_relations.size() <= before.missing_relations.size());
        CHECK(after.intent_hit_ratio >= before.intent_hit_ratio - 1e-12);
        CHECK(after.pronoun_suspect_sentences.size() <= before.pronoun_suspect_sentences.size());
        if (deterministic_judge(instance.passage, instance.features).complete)
            CHECK(deterministic_judge(extended, instance.features).complete);
    }
}

TEST_CASE("llm_judge maps replies onto verdicts") {
    QuestionFeatures features = drug_store_features();
    prompts::PromptSet set = prompts::PromptSet::builtin();

    auto yes = llm::ScriptedChatClient::from_replies({"Yes"});
    CHECK(llm_judge(yes, set, "passage", features, "q?", "a").complete);

    auto casual = llm::ScriptedChatClient::from_replies({" yes. "});
    CHECK(llm_judge(casual, set, "passage", features, "q?", "a").complete);

    auto advice = llm::ScriptedChatClient::from_replies({"Add node CEO to sentence 2"});
    Verdict verdict = llm_judge(advice, set, "passage", features, "q?", "a");
    CHECK_FALSE(verdict.complete);
    CHECK(verdict.advice == "Add node CEO to sentence 2");
}

TEST_CASE("llm_judge renders the judge template with all slots") {
    QuestionFeatures features = drug_store_features();
    prompts::PromptSet set = prompts::PromptSet::builtin();
    auto client = llm::ScriptedChatClient::from_replies({"Yes"});
    llm::Transcript transcript;
    llm_judge(client, set, "THE_PASSAGE", features, "THE_QUESTION", "THE_ANSWER", &transcript);
    REQUIRE(transcript.size() == 1);
    const std::string& prompt = transcript[0].prompt;
    CHECK(prompt.find("THE_PASSAGE") != std::string::npos);
    CHECK(prompt.find("THE_QUESTION") != std::string::npos);
    CHECK(prompt.find("THE_ANSWER") != std::string::npos);
    CHECK(prompt.find("\"drug stores\"") != std::string::npos);
    CHECK(prompt.find("played character in") == std::string::npos);
    CHECK(prompt.find("have") != std::string::npos);
    CHECK(prompt.find("[Passage]") == std::string::npos); // placeholders all substituted
}

TEST_CASE("stopword list is exactly the documented 50 words") {
    CHECK(stopwords().size() == 50);
    CHECK(std::find(stopwords().begin(), stopwords().end(), "of") != stopwords().end());
    CHECK(std::find(stopwords().begin(), stopwords().end(), "information") == stopwords().end());
}
