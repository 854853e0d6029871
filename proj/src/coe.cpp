#include "ragredteam/coe.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <unordered_set>

#include "ragredteam/tokenizer.hpp"

namespace ragredteam::coe {

namespace {

bool is_terminator(char c) {
    return c == '.' || c == '!' || c == '?';
}

// "J." in "Warren J. Bryant" or "J. K. Rowling" is an initial, not a
// sentence end. A lone capital letter before the period is treated as an
// initial when it sits in name context: the previous word is capitalized
// (or absent), or the next word is itself a letter-period initial. "A is
// B. C is D." stays two sentences because "is" is lowercase.
bool is_single_letter_initial(const std::string& text, std::size_t dot) {
    if (text[dot] != '.') return false;
    if (dot == 0) return false;
    unsigned char letter = static_cast<unsigned char>(text[dot - 1]);
    if (!std::isupper(letter)) return false;
    if (dot >= 2 && std::isalpha(static_cast<unsigned char>(text[dot - 2]))) return false;

    // next word an initial ("J. K.")?
    std::size_t i = dot + 1;
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i + 1 < text.size() && std::isalpha(static_cast<unsigned char>(text[i])) &&
        text[i + 1] == '.')
        return true;

    // previous word capitalized ("Warren J.") or absent ("J. K." at start)?
    if (dot == 1) return true;
    std::size_t end = dot - 2; // points at the separator before the letter
    while (end > 0 && std::isspace(static_cast<unsigned char>(text[end]))) --end;
    if (std::isspace(static_cast<unsigned char>(text[end]))) return true; // only spaces before
    std::size_t begin = end;
    while (begin > 0 && !std::isspace(static_cast<unsigned char>(text[begin - 1]))) --begin;
    return std::isupper(static_cast<unsigned char>(text[begin]));
}

} // namespace

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> sentences;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (!is_terminator(text[i])) continue;
        bool at_end = i + 1 == text.size();
        bool before_space = !at_end && std::isspace(static_cast<unsigned char>(text[i + 1]));
        if (!at_end && !before_space) continue;
        if (is_single_letter_initial(text, i)) continue;
        std::string sentence = trim(std::string_view(text).substr(start, i - start + 1));
        if (!sentence.empty()) sentences.push_back(std::move(sentence));
        start = i + 1;
    }
    std::string tail = trim(std::string_view(text).substr(start));
    if (!tail.empty()) sentences.push_back(std::move(tail));
    return sentences;
}

const std::vector<std::string>& stopwords() {
    static const std::vector<std::string> words = {
        "a",    "an",    "the",  "and",  "or",   "but",  "if",   "then", "than", "that",
        "this", "these", "those", "is",  "are",  "was",  "were", "be",   "been", "being",
        "of",   "in",    "on",   "at",   "to",   "for",  "with", "by",   "from", "as",
        "it",   "its",   "he",   "she",  "they", "them", "his",  "her",  "their", "we",
        "you",  "i",     "do",   "does", "did",  "not",  "no",   "so",   "such", "there"};
    return words;
}

CoverageReport check_coverage(const std::string& passage, const QuestionFeatures& features) {
    CoverageReport report;
    report.sentences = split_sentences(passage);
    report.per_sentence_node_hits.resize(report.sentences.size());

    std::set<std::string> covered;
    for (std::size_t i = 0; i < report.sentences.size(); ++i) {
        for (const std::string& node : features.nodes) {
            if (contains_ci(report.sentences[i], node)) {
                report.per_sentence_node_hits[i].insert(node);
                covered.insert(node);
            }
        }
        if (report.per_sentence_node_hits[i].empty())
            report.pronoun_suspect_sentences.insert(i);
    }
    for (const std::string& node : features.nodes)
        if (!covered.count(node)) report.missing_nodes.insert(node);

    for (const EvidenceRelation& relation : features.relations) {
        bool satisfied = false;
        for (const std::string& sentence : report.sentences) {
            if (contains_ci(sentence, relation.endpoints[0]) &&
                contains_ci(sentence, relation.endpoints[1])) {
                satisfied = true;
                break;
            }
        }
        if (!satisfied) report.missing_relations.push_back(relation);
    }

    std::vector<std::string> intent_tokens = tokenize(features.intent);
    std::unordered_set<std::string> stop(stopwords().begin(), stopwords().end());
    std::vector<std::string> passage_tokens = tokenize(passage);
    std::unordered_set<std::string> present(passage_tokens.begin(), passage_tokens.end());
    std::size_t content = 0, hit = 0;
    for (const std::string& token : intent_tokens) {
        if (stop.count(token)) continue;
        ++content;
        if (present.count(token)) ++hit;
    }
    report.intent_hit_ratio =
        content == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(content);
    return report;
}

Verdict deterministic_judge(const std::string& passage, const QuestionFeatures& features,
                            double intent_threshold) {
    CoverageReport report = check_coverage(passage, features);
    bool complete = report.missing_nodes.empty() && report.pronoun_suspect_sentences.empty() &&
                    report.missing_relations.empty() &&
                    report.intent_hit_ratio >= intent_threshold;
    if (complete) return Verdict::yes();

    std::ostringstream advice;
    int line = 0;
    if (!report.missing_nodes.empty()) {
        advice << ++line << ". MISSING_NODE: explicitly include the missing nodes";
        for (const std::string& node : report.missing_nodes) advice << " \"" << node << "\"";
        advice << " in the passage.\n";
    }
    if (!report.pronoun_suspect_sentences.empty()) {
        advice << ++line << ". NODELESS_SENTENCE: Revise or remove sentences that lack keywords"
               << " (sentence";
        for (std::size_t idx : report.pronoun_suspect_sentences) advice << " " << (idx + 1);
        advice << "); replace pronouns with the actual nodes.\n";
    }
    if (!report.missing_relations.empty()) {
        advice << ++line << ". WEAK_RELATION: clarify";
        for (std::size_t i = 0; i < report.missing_relations.size(); ++i) {
            const EvidenceRelation& rel = report.missing_relations[i];
            advice << (i ? "; " : " ") << "the relation \"" << rel.description << "\" between \""
                   << rel.endpoints[0] << "\" and \"" << rel.endpoints[1] << "\"";
        }
        advice << " within one sentence.\n";
    }
    if (report.intent_hit_ratio < intent_threshold) {
        advice << ++line << ". INTENT_GAP: work the intent \"" << features.intent
               << "\" into the passage (coverage " << report.intent_hit_ratio << " below threshold "
               << intent_threshold << ").\n";
    }
    return Verdict::needs_revision(advice.str());
}

Verdict llm_judge(llm::ChatClient& client, const prompts::PromptSet& prompt_set,
                  const std::string& passage, const QuestionFeatures& features,
                  const std::string& question, const std::string& answer,
                  llm::Transcript* transcript) {
    std::string prompt = prompts::render(
        prompt_set.coe_judge,
        {{"[Passage]", passage},
         {"[Nodes]", extraction::format_nodes(features.nodes)},
         {"[Relations]", extraction::format_relations(features.relations)},
         {"[Intent]", features.intent},
         {"[Question]", question},
         {"[Answer]", answer}});
    llm::ChatRequest request;
    request.user = prompt;
    std::string reply = client.chat(request);
    if (transcript) transcript->push_back({"judge", prompt, reply});

    std::string normalized = trim(reply);
    while (!normalized.empty() && normalized.back() == '.') normalized.pop_back();
    if (to_lower(normalized) == "yes") return Verdict::yes();
    return Verdict::needs_revision(reply);
}

} // namespace ragredteam::coe
