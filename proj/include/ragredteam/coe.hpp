#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ragredteam/extraction.hpp"
#include "ragredteam/llm.hpp"
#include "ragredteam/prompts.hpp"

namespace ragredteam::coe {

using extraction::EvidenceRelation;
using extraction::QuestionFeatures;

/// Splits on '.', '!' or '?' followed by whitespace or end of text.
/// Single-letter initials ("J. K.") do not end a sentence. Fragments keep
/// their terminator; empty fragments are dropped.
std::vector<std::string> split_sentences(const std::string& text);

/// What a passage covers of the question features. Node hits are
/// case-insensitive raw substring matches (multiword nodes like
/// "750 7th Avenue" must appear literally); a relation is satisfied when
/// both endpoints co-occur in at least one sentence; intent coverage is the
/// fraction of the intent's non-stopword tokens found anywhere in the
/// passage.
struct CoverageReport {
    std::vector<std::string> sentences;
    std::vector<std::set<std::string>> per_sentence_node_hits;
    std::set<std::string> missing_nodes;
    std::set<std::size_t> pronoun_suspect_sentences; // zero node hits
    std::vector<EvidenceRelation> missing_relations;
    double intent_hit_ratio = 1.0;
};

CoverageReport check_coverage(const std::string& passage, const QuestionFeatures& features);

struct Verdict {
    bool complete = false;
    std::string advice; // non-empty iff !complete

    static Verdict yes() { return {true, {}}; }
    static Verdict needs_revision(std::string advice) { return {false, std::move(advice)}; }

    bool operator==(const Verdict&) const = default;
};

/// Rule-based completeness judge: Complete iff no missing nodes, no
/// sentence without a node hit, no missing relations, and intent coverage
/// at or above the threshold. Advice is numbered lines with the prefixes
/// MISSING_NODE:, NODELESS_SENTENCE:, WEAK_RELATION:, INTENT_GAP:.
/// Co-occurrence is taken as relation support; the LLM judge can demand
/// more.
Verdict deterministic_judge(const std::string& passage, const QuestionFeatures& features,
                            double intent_threshold = 0.5);

/// The paper-faithful judge: renders the judge prompt and maps a reply of
/// "Yes" (trimmed, case-insensitive, trailing periods ignored) to
/// Complete; anything else becomes revision advice verbatim.
Verdict llm_judge(llm::ChatClient& client, const prompts::PromptSet& prompts,
                  const std::string& passage, const QuestionFeatures& features,
                  const std::string& question, const std::string& answer,
                  llm::Transcript* transcript = nullptr);

/// Fixed 50-entry English function-word list used for intent coverage.
/// Versioned with the repo because changing it shifts intent_hit_ratio.
const std::vector<std::string>& stopwords();

} // namespace ragredteam::coe
