#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ragredteam/embedding.hpp"
#include "ragredteam/eval.hpp"
#include "ragredteam/generation.hpp"
#include "ragredteam/llm.hpp"

namespace ragredteam::config {

/// Agent roles that can carry their own chat-client settings, so e.g. the
/// judge can run on a different model than the intent agent.
extern const std::vector<std::string> kAgentRoles;

/// Resolved application configuration. Values come from (in order of
/// precedence) CLI flags, the TOML-style config file, then built-in
/// defaults; each explicitly set key remembers its source for
/// --print-config. Unknown keys are rejected with a spelling suggestion.
class AppConfig {
public:
    /// Loads path when given, else ./ragredteam.toml when present, else
    /// all defaults.
    static AppConfig load(const std::optional<std::string>& path = std::nullopt);

    /// Sets a key (validated against the canonical list); source is
    /// "file" or "flag".
    void set(const std::string& key, const std::string& value, const std::string& source);
    bool is_set(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback = {}) const;
    int get_int(const std::string& key, int fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;

    std::uint64_t seed() const { return get_uint64("seed", 42); }
    int jobs() const { return get_int("jobs", 0); } // 0 = per-client default
    std::string templates_dir() const { return get_string("templates"); }
    int k() const { return get_int("retrieval.k", 5); }
    double bm25_k1() const { return get_double("retrieval.k1", 1.2); }
    double bm25_b() const { return get_double("retrieval.b", 0.75); }
    eval::RetrieverKind retriever() const;
    bool cosine() const { return get_bool("retrieval.cosine", false); }
    generation::JudgeKind judge_kind() const;
    double intent_threshold() const { return get_double("judge.intent_threshold", 0.5); }
    int max_iterations() const { return get_int("attack.max_iterations", 5); }
    generation::PartOrder part_order() const;
    eval::Defense defense() const;
    eval::EvalMode mode() const;
    int multiturn_rounds() const { return get_int("eval.multiturn_rounds", 3); }
    std::string embedding_mode() const { return get_string("embedding.mode", "hash"); }
    std::size_t hash_dimensions() const {
        return static_cast<std::size_t>(get_int("embedding.dimensions", 64));
    }
    std::string ppl_mode() const { return get_string("ppl.mode", "unigram"); }

    /// Chat-client settings for an agent role: built-in defaults overlaid
    /// with llm.* and then llm.<role>.*. Judges default to max_tokens 256,
    /// generation agents to 512.
    llm::ChatClientConfig chat_config(const std::string& role) const;

    retrieval::EmbeddingConfig embedding_config() const;

    /// Loadable TOML-style dump of every explicitly set key, annotated
    /// with its source; defaults are summarized in comments.
    std::string print() const;

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, std::string> sources_;
};

} // namespace ragredteam::config
