#include "ragredteam/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ragredteam/errors.hpp"
#include "ragredteam/tokenizer.hpp"

namespace ragredteam::config {

const std::vector<std::string> kAgentRoles = {"extractor", "intent",    "judge",
                                              "reviser",   "authority", "reader"};

namespace {

const std::vector<std::string> kLlmLeaves = {
    "base_url",   "model",       "temperature", "timeout_seconds", "max_retries",
    "parallelism", "max_tokens", "backoff_ms",  "mode",            "script"};

const std::set<std::string>& canonical_keys() {
    static const std::set<std::string> keys = [] {
        std::set<std::string> set = {
            "seed",
            "jobs",
            "templates",
            "retrieval.k",
            "retrieval.k1",
            "retrieval.b",
            "retrieval.retriever",
            "retrieval.cosine",
            "judge.kind",
            "judge.intent_threshold",
            "attack.max_iterations",
            "attack.order",
            "eval.defense",
            "eval.mode",
            "eval.multiturn_rounds",
            "embedding.mode",
            "embedding.base_url",
            "embedding.model",
            "embedding.timeout_seconds",
            "embedding.max_retries",
            "embedding.dimensions",
            "ppl.mode",
            "ppl.base_url",
        };
        for (const std::string& leaf : kLlmLeaves) {
            set.insert("llm." + leaf);
            for (const std::string& role : kAgentRoles) set.insert("llm." + role + "." + leaf);
        }
        return set;
    }();
    return keys;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), curr(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        curr[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            curr[j] = std::min({prev[j] + 1, curr[j - 1] + 1, sub});
        }
        std::swap(prev, curr);
    }
    return prev[b.size()];
}

std::string suggestion_for(const std::string& key) {
    std::string best;
    std::size_t best_distance = 3; // only suggest close misses
    for (const std::string& candidate : canonical_keys()) {
        std::size_t d = edit_distance(key, candidate);
        if (d < best_distance) {
            best_distance = d;
            best = candidate;
        }
    }
    return best;
}

std::string strip_value(std::string value) {
    value = trim(value);
    // Inline comment, unless the value is quoted.
    if (!value.empty() && value.front() == '"') {
        auto end = value.find('"', 1);
        if (end == std::string::npos)
            throw ParseError("unterminated quoted value: " + value);
        return value.substr(1, end - 1);
    }
    auto hash = value.find('#');
    if (hash != std::string::npos) value = trim(value.substr(0, hash));
    return value;
}

bool needs_quotes(const std::string& value) {
    if (value.empty()) return true;
    return value.find_first_not_of("0123456789.+-eE") != std::string::npos &&
           value != "true" && value != "false";
}

} // namespace

AppConfig AppConfig::load(const std::optional<std::string>& path) {
    AppConfig config;
    std::string file = path.value_or("ragredteam.toml");
    if (!path && !std::filesystem::exists(file)) return config;
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file \"" + file + "\"");

    std::vector<std::string> unknown;
    std::string section;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw ConfigError("bad section header at line " + std::to_string(line_no));
            section = trim(stripped.substr(1, stripped.size() - 2));
            continue;
        }
        auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value at line " + std::to_string(line_no));
        std::string key = trim(stripped.substr(0, eq));
        if (!section.empty()) key = section + "." + key;
        if (!canonical_keys().count(key)) {
            unknown.push_back(key);
            continue;
        }
        config.values_[key] = strip_value(stripped.substr(eq + 1));
        config.sources_[key] = "file";
    }
    if (!unknown.empty()) {
        std::string message = "unknown config key";
        if (unknown.size() > 1) message += "s";
        for (std::size_t i = 0; i < unknown.size(); ++i) {
            message += (i ? ", \"" : " \"") + unknown[i] + "\"";
            std::string hint = suggestion_for(unknown[i]);
            if (!hint.empty()) message += " (did you mean \"" + hint + "\"?)";
        }
        throw ConfigError(message);
    }
    return config;
}

void AppConfig::set(const std::string& key, const std::string& value, const std::string& source) {
    if (!canonical_keys().count(key)) {
        std::string message = "unknown config key \"" + key + "\"";
        std::string hint = suggestion_for(key);
        if (!hint.empty()) message += " (did you mean \"" + hint + "\"?)";
        throw ConfigError(message);
    }
    values_[key] = value;
    sources_[key] = source;
}

std::string AppConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() || it->second.empty() ? fallback : it->second;
}

int AppConfig::get_int(const std::string& key, int fallback) const {
    std::string value = get_string(key);
    if (value.empty()) return fallback;
    try {
        return std::stoi(value);
    } catch (const std::exception&) {
        throw ConfigError("config key \"" + key + "\" wants an integer, got \"" + value + "\"");
    }
}

double AppConfig::get_double(const std::string& key, double fallback) const {
    std::string value = get_string(key);
    if (value.empty()) return fallback;
    try {
        return std::stod(value);
    } catch (const std::exception&) {
        throw ConfigError("config key \"" + key + "\" wants a number, got \"" + value + "\"");
    }
}

bool AppConfig::get_bool(const std::string& key, bool fallback) const {
    std::string value = to_lower(get_string(key));
    if (value.empty()) return fallback;
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("config key \"" + key + "\" wants a boolean, got \"" + value + "\"");
}

std::uint64_t AppConfig::get_uint64(const std::string& key, std::uint64_t fallback) const {
    std::string value = get_string(key);
    if (value.empty()) return fallback;
    try {
        return std::stoull(value);
    } catch (const std::exception&) {
        throw ConfigError("config key \"" + key + "\" wants an unsigned integer, got \"" + value +
                          "\"");
    }
}

eval::RetrieverKind AppConfig::retriever() const {
    std::string name = get_string("retrieval.retriever", "bm25");
    if (name == "bm25") return eval::RetrieverKind::Bm25;
    if (name == "embedding") return eval::RetrieverKind::Embedding;
    throw ConfigError("retrieval.retriever must be bm25 or embedding, got \"" + name + "\"");
}

generation::JudgeKind AppConfig::judge_kind() const {
    std::string name = get_string("judge.kind", "llm");
    if (name == "llm") return generation::JudgeKind::Llm;
    if (name == "rules") return generation::JudgeKind::Rules;
    throw ConfigError("judge.kind must be llm or rules, got \"" + name + "\"");
}

generation::PartOrder AppConfig::part_order() const {
    std::string name = get_string("attack.order", "coe-first");
    if (name == "coe-first") return generation::PartOrder::CoeFirst;
    if (name == "authority-first") return generation::PartOrder::AuthorityFirst;
    throw ConfigError("attack.order must be coe-first or authority-first, got \"" + name + "\"");
}

eval::Defense AppConfig::defense() const {
    return eval::defense_from_name(get_string("eval.defense", "none"));
}

eval::EvalMode AppConfig::mode() const {
    return eval::mode_from_name(get_string("eval.mode", "standard"));
}

llm::ChatClientConfig AppConfig::chat_config(const std::string& role) const {
    llm::ChatClientConfig cfg;
    cfg.max_tokens = role == "judge" ? 256 : 512;

    auto leaf = [&](const std::string& name) -> std::string {
        std::string value = get_string("llm." + name);
        std::string override_value = get_string("llm." + role + "." + name);
        return override_value.empty() ? value : override_value;
    };
    auto apply = [&](const std::string& name, auto setter) {
        std::string value = leaf(name);
        if (!value.empty()) setter(value);
    };

    apply("base_url", [&](const std::string& v) { cfg.base_url = v; });
    apply("model", [&](const std::string& v) { cfg.model = v; });
    apply("temperature", [&](const std::string& v) { cfg.temperature = std::stod(v); });
    apply("timeout_seconds", [&](const std::string& v) { cfg.timeout_seconds = std::stod(v); });
    apply("max_retries", [&](const std::string& v) { cfg.max_retries = std::stoi(v); });
    apply("parallelism", [&](const std::string& v) { cfg.parallelism_limit = std::stoi(v); });
    apply("max_tokens", [&](const std::string& v) { cfg.max_tokens = std::stoi(v); });
    apply("backoff_ms", [&](const std::string& v) { cfg.backoff_base_ms = std::stoi(v); });
    apply("mode", [&](const std::string& v) { cfg.mode = v; });
    apply("script", [&](const std::string& v) { cfg.script_path = v; });

    if (jobs() > 0) cfg.parallelism_limit = jobs();
    return cfg;
}

retrieval::EmbeddingConfig AppConfig::embedding_config() const {
    retrieval::EmbeddingConfig cfg;
    cfg.base_url = get_string("embedding.base_url");
    cfg.model = get_string("embedding.model");
    cfg.timeout_seconds = get_double("embedding.timeout_seconds", 60.0);
    cfg.max_retries = get_int("embedding.max_retries", 3);
    return cfg;
}

std::string AppConfig::print() const {
    std::ostringstream out;
    out << "# ragredteam configuration: explicitly set keys only.\n"
        << "# Unset keys use built-in defaults (seed=42, retrieval.k=5,\n"
        << "# retrieval.k1=1.2, retrieval.b=0.75, llm.temperature=0.1,\n"
        << "# judge.intent_threshold=0.5, attack.max_iterations=5).\n";

    // Group by section so the output loads back unchanged.
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
    for (const auto& [key, value] : values_) {
        auto dot = key.rfind('.');
        std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
        std::string leaf = dot == std::string::npos ? key : key.substr(dot + 1);
        sections[section].emplace_back(leaf, value);
    }
    for (const auto& [section, entries] : sections) {
        if (!section.empty()) out << "\n[" << section << "]\n";
        for (const auto& [leaf, value] : entries) {
            std::string key = section.empty() ? leaf : section + "." + leaf;
            out << leaf << " = ";
            if (needs_quotes(value))
                out << '"' << value << '"';
            else
                out << value;
            out << "  # " << sources_.at(key) << "\n";
        }
    }
    return out.str();
}

} // namespace ragredteam::config
