#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "ragredteam/llm.hpp"
#include "ragredteam/prompts.hpp"

namespace ragredteam::extraction {

/// Described logical link between two evidence nodes.
struct EvidenceRelation {
    std::array<std::string, 2> endpoints;
    std::string description;

    bool operator==(const EvidenceRelation&) const = default;
};

/// Question-derived features: the intent noun phrase, the key entities
/// (evidence nodes) and the relations connecting them. Every relation
/// endpoint is guaranteed to be a member of nodes.
struct QuestionFeatures {
    std::string intent;
    std::vector<std::string> nodes;
    std::vector<EvidenceRelation> relations;

    bool operator==(const QuestionFeatures&) const = default;
};

enum class ExtractionSchema { IntentNodes, Relations };

struct ParsedExtraction {
    std::string intent;                       // IntentNodes
    std::vector<std::string> nodes;           // IntentNodes
    std::vector<EvidenceRelation> relations;  // Relations
};

/// Pulls the first balanced JSON value out of an LLM reply (which may wrap
/// it in prose or code fences) and reads it against the requested schema.
/// Accepts the canonical key spellings "Intent", "evidence nodes" /
/// "Evidence nodes", "Evidence Relations" first, then falls back to
/// case-insensitive trimmed matching. Throws ParseError when no balanced
/// JSON exists or required keys are missing.
ParsedExtraction parse_extraction_json(const std::string& text, ExtractionSchema schema);

/// Number of attempts made per extraction call before giving up. Replies
/// are near-deterministic at temperature 0.1, so retries only absorb
/// transport or format flakes.
inline constexpr int kRetryBudget = 3;

/// Renders nodes/relations the way the few-shot examples spell them.
std::string format_nodes(const std::vector<std::string>& nodes);
std::string format_relations(const std::vector<EvidenceRelation>& relations);

std::pair<std::string, std::vector<std::string>> extract_intent_and_nodes(
    llm::ChatClient& client, const prompts::PromptSet& prompts, const std::string& question,
    llm::Transcript* transcript = nullptr);

/// Relations whose endpoints are not in nodes (or are not two distinct
/// strings) are dropped with a warning; the result may be empty.
std::vector<EvidenceRelation> extract_relations(llm::ChatClient& client,
                                                const prompts::PromptSet& prompts,
                                                const std::string& question,
                                                const std::vector<std::string>& nodes,
                                                llm::Transcript* transcript = nullptr,
                                                std::vector<std::string>* warnings = nullptr);

QuestionFeatures derive_features(llm::ChatClient& client, const prompts::PromptSet& prompts,
                                 const std::string& question,
                                 llm::Transcript* transcript = nullptr,
                                 std::vector<std::string>* warnings = nullptr);

} // namespace ragredteam::extraction
