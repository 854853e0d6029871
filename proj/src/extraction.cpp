#include "ragredteam/extraction.hpp"

#include <algorithm>
#include <optional>

#include "json.hpp"

#include "ragredteam/errors.hpp"
#include "ragredteam/tokenizer.hpp"

namespace ragredteam::extraction {

using nlohmann::json;

namespace {

void warn(std::vector<std::string>* warnings, std::string message) {
    if (warnings) warnings->push_back(std::move(message));
}

// Locates the first balanced JSON value ('{...}' or '[...]') that actually
// parses. LLMs wrap JSON in prose or ```json fences, so plain
// json::parse(reply) is not enough.
std::optional<json> first_balanced_json(const std::string& text) {
    for (std::size_t start = 0; start < text.size(); ++start) {
        char open = text[start];
        if (open != '{' && open != '[') continue;
        char close = open == '{' ? '}' : ']';
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped)
                    escaped = false;
                else if (c == '\\')
                    escaped = true;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == open) {
                ++depth;
            } else if (c == close) {
                if (--depth == 0) {
                    json value = json::parse(text.substr(start, i - start + 1), nullptr, false);
                    if (!value.is_discarded()) return value;
                    break; // malformed; resume scanning after this start
                }
            }
        }
    }
    return std::nullopt;
}

std::string normalize_key(std::string_view key) {
    return to_lower(trim(key));
}

const json* find_key(const json& object, std::initializer_list<const char*> exact_keys) {
    for (const char* key : exact_keys)
        if (object.contains(key)) return &object.at(key);
    // Tolerant fallback: match case-insensitively after trimming.
    for (const char* key : exact_keys) {
        std::string wanted = normalize_key(key);
        for (const auto& [name, value] : object.items())
            if (normalize_key(name) == wanted) return &value;
    }
    return nullptr;
}

std::vector<std::string> read_string_array(const json& value, const char* what) {
    if (!value.is_array()) throw ParseError(std::string(what) + " is not an array");
    std::vector<std::string> out;
    for (const json& item : value) {
        if (!item.is_string()) throw ParseError(std::string(what) + " contains a non-string");
        out.push_back(item.get<std::string>());
    }
    return out;
}

std::string quote(const std::string& s) {
    return json(s).dump();
}

} // namespace

ParsedExtraction parse_extraction_json(const std::string& text, ExtractionSchema schema) {
    auto value = first_balanced_json(text);
    if (!value) throw ParseError("no balanced JSON value found in reply");

    ParsedExtraction parsed;
    if (schema == ExtractionSchema::IntentNodes) {
        if (!value->is_object()) throw ParseError("intent/nodes reply is not a JSON object");
        const json* intent = find_key(*value, {"Intent"});
        if (!intent || !intent->is_string())
            throw ParseError("intent/nodes reply lacks a string \"Intent\" key");
        const json* nodes = find_key(*value, {"evidence nodes", "Evidence nodes"});
        if (!nodes)
            throw ParseError("intent/nodes reply lacks an \"evidence nodes\" key");
        parsed.intent = intent->get<std::string>();
        parsed.nodes = read_string_array(*nodes, "\"evidence nodes\"");
        return parsed;
    }

    if (!value->is_array()) throw ParseError("relations reply is not a JSON array");
    for (const json& item : *value) {
        if (!item.is_object()) throw ParseError("relations reply contains a non-object entry");
        const json* endpoints = find_key(item, {"Evidence nodes", "evidence nodes"});
        const json* description = find_key(item, {"Evidence Relations", "evidence relations"});
        if (!endpoints || !description || !description->is_string())
            throw ParseError("relation entry lacks \"Evidence nodes\" / \"Evidence Relations\" keys");
        auto pair = read_string_array(*endpoints, "relation \"Evidence nodes\"");
        if (pair.size() != 2)
            throw ParseError("relation \"Evidence nodes\" must list exactly 2 nodes, got " +
                             std::to_string(pair.size()));
        parsed.relations.push_back({{pair[0], pair[1]}, description->get<std::string>()});
    }
    return parsed;
}

std::string format_nodes(const std::vector<std::string>& nodes) {
    std::string out = "[";
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (i) out += ", ";
        out += quote(nodes[i]);
    }
    return out + "]";
}

std::string format_relations(const std::vector<EvidenceRelation>& relations) {
    std::string out = "[";
    for (std::size_t i = 0; i < relations.size(); ++i) {
        if (i) out += ", ";
        out += "{\"Evidence nodes\":[" + quote(relations[i].endpoints[0]) + ", " +
               quote(relations[i].endpoints[1]) +
               "], \"Evidence Relations\": " + quote(relations[i].description) + "}";
    }
    return out + "]";
}

namespace {

// Runs one extraction call with the identical prompt up to kRetryBudget
// times; accept() decides whether a reply counts.
template <typename Parse>
auto call_with_retries(llm::ChatClient& client, const std::string& prompt, const char* agent,
                       llm::Transcript* transcript, Parse parse) {
    std::string last_error;
    for (int attempt = 1; attempt <= kRetryBudget; ++attempt) {
        llm::ChatRequest request;
        request.user = prompt;
        std::string reply = client.chat(request);
        if (transcript) transcript->push_back({agent, prompt, reply});
        try {
            return parse(reply);
        } catch (const ParseError& e) {
            last_error = e.what();
        }
    }
    throw ParseError(std::string(agent) + " failed after " + std::to_string(kRetryBudget) +
                     " attempts (last: " + last_error + ")");
}

} // namespace

std::pair<std::string, std::vector<std::string>> extract_intent_and_nodes(
    llm::ChatClient& client, const prompts::PromptSet& prompt_set, const std::string& question,
    llm::Transcript* transcript) {
    if (trim(question).empty())
        throw ValidationError("extraction requires a non-empty question");
    std::string prompt = prompts::render(prompt_set.extract_intent_nodes, {{"[Question]", question}});
    return call_with_retries(
        client, prompt, "extractor", transcript,
        [](const std::string& reply) -> std::pair<std::string, std::vector<std::string>> {
            ParsedExtraction parsed = parse_extraction_json(reply, ExtractionSchema::IntentNodes);
            if (parsed.nodes.empty()) throw ParseError("extraction returned an empty node list");
            return {parsed.intent, parsed.nodes};
        });
}

std::vector<EvidenceRelation> extract_relations(llm::ChatClient& client,
                                                const prompts::PromptSet& prompt_set,
                                                const std::string& question,
                                                const std::vector<std::string>& nodes,
                                                llm::Transcript* transcript,
                                                std::vector<std::string>* warnings) {
    std::string prompt = prompts::render(
        prompt_set.extract_relations,
        {{"[Question]", question}, {"[Evidence node]", format_nodes(nodes)}});

    auto raw = call_with_retries(client, prompt, "extractor", transcript,
                                 [](const std::string& reply) {
                                     return parse_extraction_json(reply, ExtractionSchema::Relations)
                                         .relations;
                                 });

    // Map endpoints back onto canonical node strings; drop anything that
    // does not resolve.
    auto canonical = [&nodes](const std::string& endpoint) -> const std::string* {
        for (const std::string& node : nodes)
            if (to_lower(trim(endpoint)) == to_lower(trim(node))) return &node;
        return nullptr;
    };

    std::vector<EvidenceRelation> relations;
    for (EvidenceRelation& rel : raw) {
        const std::string* a = canonical(rel.endpoints[0]);
        const std::string* b = canonical(rel.endpoints[1]);
        if (!a || !b) {
            warn(warnings, "dropped relation with endpoint not in nodes: \"" +
                               (a ? rel.endpoints[1] : rel.endpoints[0]) + "\"");
            continue;
        }
        if (*a == *b) {
            warn(warnings, "dropped self-relation on node \"" + *a + "\"");
            continue;
        }
        if (trim(rel.description).empty()) {
            warn(warnings, "dropped relation with empty description between \"" + *a +
                               "\" and \"" + *b + "\"");
            continue;
        }
        relations.push_back({{*a, *b}, rel.description});
    }
    return relations;
}

QuestionFeatures derive_features(llm::ChatClient& client, const prompts::PromptSet& prompt_set,
                                 const std::string& question, llm::Transcript* transcript,
                                 std::vector<std::string>* warnings) {
    if (trim(question).empty())
        throw ValidationError("derive_features requires a non-empty question");
    QuestionFeatures features;
    std::tie(features.intent, features.nodes) =
        extract_intent_and_nodes(client, prompt_set, question, transcript);
    features.relations =
        extract_relations(client, prompt_set, question, features.nodes, transcript, warnings);
    return features;
}

} // namespace ragredteam::extraction
