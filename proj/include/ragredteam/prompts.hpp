#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ragredteam::prompts {

/// Every prompt template the pipeline uses. Placeholders are bracketed
/// markers ([Question], [Passage], ...) and rendering replaces every
/// occurrence. Defaults are compiled in; from_dir() overrides any template
/// whose file is present.
struct PromptSet {
    std::string extract_intent_nodes;
    std::string extract_relations;
    std::string intent_agent;
    std::string coe_judge;
    std::string revise_agent;
    std::string authority_agent;
    std::string prag_support;
    std::string reader;
    std::string instructrag_rationale;
    std::string instructrag_answer;
    std::string asturag_internal;
    std::string asturag_consolidate;
    std::string asturag_final;
    std::string paraphrase;
    std::string dialogue_user;
    std::string dialogue_assistant;

    static PromptSet builtin();

    /// Reads <name>.txt files (e.g. coe_judge.txt) from dir; missing files
    /// keep the builtin text.
    static PromptSet from_dir(const std::string& dir);
};

using Substitution = std::pair<std::string_view, std::string_view>;

/// Replaces every occurrence of each placeholder with its value.
std::string render(std::string_view tmpl, const std::vector<Substitution>& subs);

} // namespace ragredteam::prompts
