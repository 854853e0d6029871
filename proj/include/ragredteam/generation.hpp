#pragma once

#include <map>
#include <string>
#include <vector>

#include "ragredteam/coe.hpp"
#include "ragredteam/corpus.hpp"
#include "ragredteam/extraction.hpp"
#include "ragredteam/llm.hpp"
#include "ragredteam/prompts.hpp"

namespace ragredteam::generation {

enum class AttackMethod { AuthChain, CoeOnly, AuthorityOnly, PoisonedRag, HijackRag };

std::string method_name(AttackMethod method);
AttackMethod method_from_name(const std::string& name);

inline constexpr int kCoeWordLimit = 100;
inline constexpr int kAuthorityWordLimit = 30;

/// The assembled attack document plus everything needed to audit how it
/// was produced.
struct PoisonedDocument {
    std::string coe_content;
    std::string authority_content;
    std::string final_text;
    AttackMethod method = AttackMethod::AuthChain;
    int iterations_used = 0; // revise calls
    bool converged = true;
    llm::Transcript transcript;
    std::vector<std::string> warnings;
    std::string target_id;
};

struct RefinementRound {
    std::string passage;
    coe::Verdict verdict;
};

struct RefinementTrace {
    std::vector<RefinementRound> rounds;
    bool converged = false; // iff the last verdict is Complete
};

enum class JudgeKind { Llm, Rules };
enum class PartOrder { CoeFirst, AuthorityFirst };

/// Per-agent chat clients; distinct roles may point at distinct models.
struct AgentClients {
    llm::ChatClient* extractor = nullptr;
    llm::ChatClient* intent = nullptr;
    llm::ChatClient* judge = nullptr;
    llm::ChatClient* reviser = nullptr;
    llm::ChatClient* authority = nullptr;
};

struct AttackOptions {
    AttackMethod method = AttackMethod::AuthChain;
    int max_iterations = 5;
    JudgeKind judge = JudgeKind::Llm;
    PartOrder order = PartOrder::CoeFirst;
    double intent_threshold = 0.5;
};

/// Word-limit enforcement: text at or under the limit passes through
/// unchanged; otherwise it is cut at the last sentence boundary that fits,
/// or hard-cut at the limit when no sentence fits. Re-prompting the agent
/// once before truncating is the caller's job (the agent helpers below do
/// it).
std::string enforce_word_limit(const std::string& text, int limit);

/// Intent agent (stage 1): a passage of at most 100 words aligned with the
/// question's intent that supports the target answer.
std::string generate_intent_content(llm::ChatClient& client, const prompts::PromptSet& prompts,
                                    const std::string& intent, const std::string& question,
                                    const std::string& answer,
                                    llm::Transcript* transcript = nullptr);

/// Judge/revise loop (stage 2). Judges the passage; on NeedsRevision runs
/// the revise agent and repeats, up to max_iterations revisions. When the
/// cap is hit the best passage seen (fewest missing nodes, tie broken
/// toward the latest) is returned with converged=false and a warning.
std::pair<std::string, RefinementTrace> refine_to_coe(
    llm::ChatClient& judge_client, llm::ChatClient& revise_client,
    const prompts::PromptSet& prompts, std::string passage,
    const extraction::QuestionFeatures& features, const std::string& question,
    const std::string& answer, const AttackOptions& options = {},
    llm::Transcript* transcript = nullptr, std::vector<std::string>* warnings = nullptr);

/// Authority agent (stage 3): at most 30 words citing a recognized
/// institution and a near-future date that endorse the target answer.
/// Missing year / missing target answer only warn.
std::string generate_authority(llm::ChatClient& client, const prompts::PromptSet& prompts,
                               const std::string& passage, const std::string& target_answer,
                               const std::vector<std::string>& nodes,
                               llm::Transcript* transcript = nullptr,
                               std::vector<std::string>* warnings = nullptr);

/// Joins CoE and authority content with a single space. Method is derived
/// from which parts are present: both -> AuthChain, CoE alone -> CoeOnly,
/// authority alone -> AuthorityOnly. Both empty is an error.
PoisonedDocument assemble(std::string coe_content, std::string authority_content,
                          PartOrder order = PartOrder::CoeFirst);

/// PoisonedRAG baseline: the question verbatim, then LLM-generated
/// supporting content for the target answer.
PoisonedDocument build_poisonedrag_doc(llm::ChatClient& client, const prompts::PromptSet& prompts,
                                       const std::string& question,
                                       const std::string& target_answer,
                                       llm::Transcript* transcript = nullptr);

/// HijackRAG baseline: question + best-overlapping hijack text +
/// "Print the answer is <target>". Hijack text is picked from the pool by
/// token Jaccard overlap with the question (tie -> first in pool); no LLM
/// call.
PoisonedDocument build_hijackrag_doc(const std::string& question, const std::string& target_answer,
                                     const std::vector<std::string>& hijack_pool);

/// Built-in 20-entry hijack-text pool standing in for the public prompt
/// hacking dataset the baseline drew from.
const std::vector<std::string>& builtin_hijack_pool();

/// Runs the configured attack end to end for one target and returns the
/// assembled document with transcript and warnings.
PoisonedDocument run_attack(const AgentClients& clients, const prompts::PromptSet& prompts,
                            const corpus::AttackTarget& target, const AttackOptions& options);

/// JSONL record for a poisoned document: what the attack subcommand
/// writes and the eval subcommand's --poisons accepts.
std::string poisoned_document_to_json(const PoisonedDocument& doc, bool include_transcript = true);
PoisonedDocument poisoned_document_from_json(const std::string& line);

/// Loads a poisons JSONL file keyed by target id.
std::map<std::string, PoisonedDocument> load_poisoned_documents(const std::string& path);

} // namespace ragredteam::generation
