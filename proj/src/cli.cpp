#include "ragredteam/cli.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ragredteam/config.hpp"
#include "ragredteam/corpus.hpp"
#include "ragredteam/coe.hpp"
#include "ragredteam/embedding.hpp"
#include "ragredteam/errors.hpp"
#include "ragredteam/eval.hpp"
#include "ragredteam/extraction.hpp"
#include "ragredteam/generation.hpp"
#include "ragredteam/llm.hpp"
#include "ragredteam/prompts.hpp"

namespace ragredteam::cli {

namespace {

using config::AppConfig;

/// Builds chat clients on first use so commands that never talk to a role
/// (e.g. attack --method hrag) do not demand its credentials.
class ClientPool {
public:
    explicit ClientPool(const AppConfig& config) : config_(config) {}

    llm::ChatClient* get(const std::string& role) {
        auto it = cache_.find(role);
        if (it != cache_.end()) return it->second.get();
        auto client = llm::make_chat_client(config_.chat_config(role));
        llm::ChatClient* raw = client.get();
        cache_.emplace(role, std::move(client));
        return raw;
    }

private:
    const AppConfig& config_;
    std::map<std::string, std::unique_ptr<llm::ChatClient>> cache_;
};

generation::AgentClients agents_for(ClientPool& pool, generation::AttackMethod method,
                                    generation::JudgeKind judge) {
    generation::AgentClients agents;
    switch (method) {
        case generation::AttackMethod::HijackRag:
            break;
        case generation::AttackMethod::PoisonedRag:
            agents.intent = pool.get("intent");
            break;
        case generation::AttackMethod::AuthorityOnly:
            agents.extractor = pool.get("extractor");
            agents.intent = pool.get("intent");
            agents.authority = pool.get("authority");
            break;
        case generation::AttackMethod::CoeOnly:
        case generation::AttackMethod::AuthChain:
            agents.extractor = pool.get("extractor");
            agents.intent = pool.get("intent");
            agents.reviser = pool.get("reviser");
            if (judge == generation::JudgeKind::Llm) agents.judge = pool.get("judge");
            if (method == generation::AttackMethod::AuthChain)
                agents.authority = pool.get("authority");
            break;
    }
    return agents;
}

prompts::PromptSet prompt_set_for(const AppConfig& config) {
    std::string dir = config.templates_dir();
    return dir.empty() ? prompts::PromptSet::builtin() : prompts::PromptSet::from_dir(dir);
}

generation::AttackOptions attack_options_for(const AppConfig& config) {
    generation::AttackOptions options;
    options.max_iterations = config.max_iterations();
    options.judge = config.judge_kind();
    options.order = config.part_order();
    options.intent_threshold = config.intent_threshold();
    return options;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open \"" + path + "\" for writing");
    return out;
}

std::unique_ptr<retrieval::EmbeddingClient> make_embedder(const AppConfig& config) {
    if (config.embedding_mode() == "hash")
        return std::make_unique<retrieval::HashingEmbeddingClient>(config.hash_dimensions());
    if (config.embedding_mode() == "http")
        return std::make_unique<retrieval::HttpEmbeddingClient>(config.embedding_config());
    throw ConfigError("embedding.mode must be hash or http, got \"" + config.embedding_mode() +
                      "\"");
}

std::unique_ptr<eval::PerplexityScorer> make_scorer(const AppConfig& config,
                                                    const corpus::KnowledgeBase& clean_kb) {
    std::string mode = config.ppl_mode();
    if (mode == "none") return nullptr;
    if (mode == "unigram") return std::make_unique<eval::UnigramScorer>(clean_kb);
    if (mode == "http")
        return std::make_unique<eval::HttpPerplexityScorer>(config.get_string("ppl.base_url"));
    throw ConfigError("ppl.mode must be unigram, http or none, got \"" + mode + "\"");
}

int cmd_ingest(const AppConfig&, const std::string& in_path, const std::string& format,
               const std::string& out_path) {
    corpus::CorpusFormat fmt;
    if (format == "jsonl")
        fmt = corpus::CorpusFormat::Jsonl;
    else if (format == "tsv")
        fmt = corpus::CorpusFormat::Tsv;
    else
        throw ConfigError("ingest --format must be jsonl or tsv");
    corpus::KnowledgeBase kb = corpus::load_corpus(in_path, fmt);
    corpus::save_corpus(kb, out_path);
    std::cout << "validated " << kb.size() << " documents -> " << out_path << "\n";
    return 0;
}

int cmd_extract(const AppConfig& config, const std::string& targets_path,
                const std::string& out_path, bool strict) {
    auto targets = corpus::load_attack_targets(targets_path);
    prompts::PromptSet prompt_set = prompt_set_for(config);
    ClientPool pool(config);
    llm::ChatClient* extractor = pool.get("extractor");

    std::ofstream out = open_output(out_path);
    std::size_t failures = 0;
    for (const corpus::AttackTarget& target : targets) {
        try {
            std::vector<std::string> warnings;
            extraction::QuestionFeatures features =
                extraction::derive_features(*extractor, prompt_set, target.question, nullptr,
                                            &warnings);
            nlohmann::ordered_json record;
            record["target_id"] = target.id;
            record["intent"] = features.intent;
            record["nodes"] = features.nodes;
            record["relations"] = nlohmann::ordered_json::array();
            for (const extraction::EvidenceRelation& rel : features.relations)
                record["relations"].push_back({{"endpoints", rel.endpoints},
                                               {"description", rel.description}});
            if (!warnings.empty()) record["warnings"] = warnings;
            out << record.dump() << "\n";
        } catch (const Error& e) {
            ++failures;
            std::cerr << "extract failed for target \"" << target.id << "\": " << e.what() << "\n";
        }
    }
    std::cout << "extracted features for " << (targets.size() - failures) << "/" << targets.size()
              << " targets -> " << out_path << "\n";
    return strict && failures > 0 ? 1 : 0;
}

int cmd_attack(const AppConfig& config, const std::string& method_name,
               const std::string& targets_path, const std::string& out_path, bool no_transcript,
               bool strict) {
    generation::AttackMethod method = generation::method_from_name(method_name);
    auto targets = corpus::load_attack_targets(targets_path);
    prompts::PromptSet prompt_set = prompt_set_for(config);
    ClientPool pool(config);
    generation::AttackOptions options = attack_options_for(config);
    options.method = method;
    generation::AgentClients agents = agents_for(pool, method, options.judge);

    std::ofstream out = open_output(out_path);
    std::size_t failures = 0;
    for (const corpus::AttackTarget& target : targets) {
        try {
            generation::PoisonedDocument doc =
                generation::run_attack(agents, prompt_set, target, options);
            out << generation::poisoned_document_to_json(doc, !no_transcript) << "\n";
        } catch (const Error& e) {
            ++failures;
            std::cerr << "attack failed for target \"" << target.id << "\": " << e.what() << "\n";
        }
    }
    std::cout << "generated " << (targets.size() - failures) << "/" << targets.size()
              << " poisoned documents -> " << out_path << "\n";
    return strict && failures > 0 ? 1 : 0;
}

int cmd_inject(const AppConfig&, const std::string& corpus_path, const std::string& out_path,
               const std::string& poisons_path, const std::string& text, std::string id,
               const std::string& method, const std::string& target_id) {
    corpus::KnowledgeBase kb = corpus::load_corpus(corpus_path);
    std::size_t injected = 0;
    if (!poisons_path.empty()) {
        for (const auto& [tid, doc] : generation::load_poisoned_documents(poisons_path)) {
            corpus::Document poisoned;
            poisoned.text = doc.final_text;
            poisoned.provenance = corpus::Provenance::poisoned(generation::method_name(doc.method));
            corpus::inject(kb, std::move(poisoned), tid);
            ++injected;
        }
    } else {
        if (text.empty())
            throw ConfigError("inject needs --poisons or --text");
        corpus::Document doc;
        doc.id = std::move(id);
        doc.text = text;
        doc.provenance =
            corpus::Provenance::poisoned(method.empty() ? std::string("manual") : method);
        corpus::inject(kb, std::move(doc),
                       target_id.empty() ? std::nullopt : std::optional<std::string>(target_id));
        ++injected;
    }
    corpus::save_corpus(kb, out_path);
    std::cout << "injected " << injected << " documents; corpus now " << kb.size() << " -> "
              << out_path << "\n";
    return 0;
}

int cmd_retrieve(const AppConfig& config, const std::string& corpus_path, const std::string& query,
                 int k, bool as_json) {
    corpus::KnowledgeBase kb = corpus::load_corpus(corpus_path);
    std::vector<retrieval::RetrievalResult> results;
    if (config.retriever() == eval::RetrieverKind::Bm25) {
        retrieval::Bm25Index index =
            retrieval::Bm25Index::build(kb, config.bm25_k1(), config.bm25_b());
        results = index.retrieve_top_k(query, k);
    } else {
        auto embedder = make_embedder(config);
        results = retrieval::embed_retrieve(*embedder, kb, query, k,
                                            config.cosine() ? retrieval::SimilarityMetric::Cosine
                                                            : retrieval::SimilarityMetric::InnerProduct);
    }
    if (as_json) {
        nlohmann::ordered_json out = nlohmann::ordered_json::array();
        for (const auto& r : results)
            out.push_back({{"rank", r.rank}, {"score", r.score}, {"doc_id", r.doc_id}});
        std::cout << out.dump(2) << "\n";
    } else {
        for (const auto& r : results)
            std::cout << r.rank << "\t" << r.score << "\t" << r.doc_id << "\n";
    }
    return 0;
}

int cmd_eval(const AppConfig& config, const std::string& corpus_path,
             const std::string& targets_path, const std::string& poisons,
             const std::string& report_path, const std::string& csv_path,
             const std::optional<eval::MixConfig>& mix, bool no_transcript, bool strict) {
    corpus::KnowledgeBase kb = corpus::load_corpus(corpus_path);
    auto targets = corpus::load_attack_targets(targets_path);
    prompts::PromptSet prompt_set = prompt_set_for(config);

    std::optional<generation::AttackMethod> method;
    std::map<std::string, generation::PoisonedDocument> prebuilt;
    bool use_prebuilt = false;
    if (poisons != "clean") {
        try {
            method = generation::method_from_name(poisons);
        } catch (const ValidationError&) {
            prebuilt = generation::load_poisoned_documents(poisons);
            use_prebuilt = true;
            if (prebuilt.empty())
                throw ConfigError("poisons file \"" + poisons + "\" contains no records");
            method = prebuilt.begin()->second.method;
        }
    }

    eval::ExperimentConfig experiment;
    experiment.k = config.k();
    experiment.retriever = config.retriever();
    experiment.similarity = config.cosine() ? retrieval::SimilarityMetric::Cosine
                                            : retrieval::SimilarityMetric::InnerProduct;
    experiment.defense = config.defense();
    experiment.mode = config.mode();
    experiment.mix = mix;
    experiment.seed = config.seed();
    experiment.bm25_k1 = config.bm25_k1();
    experiment.bm25_b = config.bm25_b();
    experiment.multiturn_rounds = config.multiturn_rounds();
    experiment.keep_transcripts = !no_transcript;
    experiment.attack = attack_options_for(config);
    experiment.reader_model = config.chat_config("reader").model;

    ClientPool pool(config);
    eval::EvalClients clients;
    clients.reader = pool.get("reader");
    if (method && !use_prebuilt)
        clients.agents = agents_for(pool, *method, experiment.attack.judge);
    std::unique_ptr<retrieval::EmbeddingClient> embedder;
    if (experiment.retriever == eval::RetrieverKind::Embedding) {
        embedder = make_embedder(config);
        clients.embedder = embedder.get();
    }
    std::unique_ptr<eval::PerplexityScorer> scorer = make_scorer(config, kb);
    clients.scorer = scorer.get();

    eval::EvaluationReport report =
        eval::run_attack_experiment(kb, targets, method, experiment, clients, prompt_set,
                                    use_prebuilt ? &prebuilt : nullptr);

    std::string report_json = eval::report_to_json(report);
    if (report_path.empty()) {
        std::cout << report_json << "\n";
    } else {
        open_output(report_path) << report_json << "\n";
    }
    if (!csv_path.empty()) open_output(csv_path) << eval::report_to_csv(report);

    std::ostringstream summary;
    summary.setf(std::ios::fixed);
    summary.precision(3);
    summary << "ASR " << report.aggregates.asr << "  RSR " << report.aggregates.rsr << "  ACC "
            << report.aggregates.acc;
    if (report.aggregates.mean_ppl) summary << "  PPL " << *report.aggregates.mean_ppl;
    summary << "  (" << report.per_question.size() << " questions, " << report.failures.size()
            << " failures)";
    std::cout << summary.str() << "\n";
    return strict && !report.failures.empty() ? 1 : 0;
}

int cmd_report(const std::string& report_path) {
    std::ifstream in(report_path);
    if (!in) throw IoError("cannot open report \"" + report_path + "\"");
    nlohmann::json report = nlohmann::json::parse(in, nullptr, false);
    if (report.is_discarded()) throw ParseError("report file is not valid JSON");

    const auto& config = report.at("config");
    std::cout << "method:   " << (report["method"].is_null() ? "clean" : report["method"].get<std::string>())
              << "\nretriever: " << config["retriever"].get<std::string>() << " (k="
              << config["k"].get<int>() << ")"
              << "\ndefense:  " << config["defense"].get<std::string>()
              << "\nmode:     " << config["mode"].get<std::string>()
              << "\ncorpus:   " << report["corpus_fingerprint"].get<std::string>() << "\n";
    const auto& agg = report.at("aggregates");
    std::cout << "\naggregates over " << report["per_question"].size() << " questions ("
              << report["failures"].size() << " failures):\n";
    std::ostringstream line;
    line.setf(std::ios::fixed);
    line.precision(3);
    line << "  ASR " << agg["asr"].get<double>() << "  RSR " << agg["rsr"].get<double>()
         << "  ACC " << agg["acc"].get<double>();
    if (!agg["mean_ppl"].is_null()) line << "  mean PPL " << agg["mean_ppl"].get<double>();
    std::cout << line.str() << "\n\nper-question:\n";
    std::cout << "  target_id            poison@k  asr  acc\n";
    for (const auto& row : report["per_question"]) {
        std::ostringstream id;
        id << row["target_id"].get<std::string>();
        std::string padded = id.str();
        padded.resize(std::max<std::size_t>(padded.size(), 20), ' ');
        std::cout << "  " << padded << "  " << (row["poisoned_retrieved"].get<bool>() ? "yes" : "no ")
                  << "      " << (row["asr_hit"].get<bool>() ? "hit " : "miss") << " "
                  << (row["acc_hit"].get<bool>() ? "hit" : "miss") << "\n";
    }
    for (const auto& failure : report["failures"])
        std::cout << "  FAILED " << failure["target_id"].get<std::string>() << ": "
                  << failure["error"].get<std::string>() << "\n";
    return 0;
}

std::optional<eval::MixConfig> parse_mix(const std::string& value) {
    if (value.empty()) return std::nullopt;
    auto colon = value.find(':');
    if (colon == std::string::npos)
        throw ConfigError("--mix wants {cdp,pdp}:<proportion>, got \"" + value + "\"");
    std::string kind = value.substr(0, colon);
    eval::MixConfig mix;
    if (kind == "cdp")
        mix.kind = eval::MixKind::Cdp;
    else if (kind == "pdp")
        mix.kind = eval::MixKind::Pdp;
    else
        throw ConfigError("--mix kind must be cdp or pdp, got \"" + kind + "\"");
    try {
        mix.proportion = std::stod(value.substr(colon + 1));
    } catch (const std::exception&) {
        throw ConfigError("--mix proportion is not a number in \"" + value + "\"");
    }
    return mix;
}

int run_parsed(const std::vector<std::string>& args) {
    CLI::App app{"ragredteam: single-document knowledge-poisoning harness for RAG systems"};
    app.require_subcommand(0, 1);

    std::string config_path;
    bool print_config = false;
    bool strict = false;
    app.add_option("--config", config_path, "config file (default ./ragredteam.toml if present)");
    app.add_flag("--print-config", print_config, "print the resolved configuration and exit");
    app.add_flag("--strict", strict, "exit 1 when any per-item failure occurs");

    // Flag overrides collected as (config key, value); applied after the file loads.
    std::vector<std::pair<std::string, std::string>> overrides;
    auto bind = [&](CLI::App* cmd, const std::string& flag, const std::string& key,
                    const std::string& help) {
        cmd->add_option_function<std::string>(
               flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); },
               help)
            ->expected(1);
    };
    bind(&app, "--seed", "seed", "RNG seed (default 42)");
    bind(&app, "--jobs", "jobs", "cap on concurrent LLM requests");
    bind(&app, "--templates", "templates", "directory of prompt template overrides");

    auto* ingest = app.add_subcommand("ingest", "validate/convert a corpus to canonical JSONL");
    std::string ingest_in, ingest_out, ingest_format = "jsonl";
    ingest->add_option("--in", ingest_in, "input corpus")->required();
    ingest->add_option("--format", ingest_format, "jsonl|tsv");
    ingest->add_option("--out", ingest_out, "output JSONL")->required();

    auto* extract = app.add_subcommand("extract", "derive question features to JSONL");
    std::string extract_targets, extract_out;
    extract->add_option("--targets", extract_targets, "attack targets JSONL")->required();
    extract->add_option("--out", extract_out, "features JSONL")->required();

    auto* attack = app.add_subcommand("attack", "generate poisoned documents");
    std::string attack_method = "authchain", attack_targets, attack_out;
    bool attack_no_transcript = false;
    attack->add_option("--method", attack_method, "authchain|coe|authority|prag|hrag");
    attack->add_option("--targets", attack_targets, "attack targets JSONL")->required();
    attack->add_option("--out", attack_out, "poisoned documents JSONL")->required();
    attack->add_flag("--no-transcript", attack_no_transcript, "omit agent transcripts");
    bind(attack, "--max-iter", "attack.max_iterations", "CoE refinement cap (default 5)");
    bind(attack, "--judge", "judge.kind", "llm|rules");
    bind(attack, "--order", "attack.order", "coe-first|authority-first");

    auto* inject = app.add_subcommand("inject", "inject documents into a corpus");
    std::string inject_corpus, inject_out, inject_poisons, inject_text, inject_id, inject_method,
        inject_target;
    inject->add_option("--corpus", inject_corpus, "input corpus JSONL")->required();
    inject->add_option("--out", inject_out, "output corpus JSONL")->required();
    inject->add_option("--poisons", inject_poisons, "poisoned documents JSONL to inject");
    inject->add_option("--text", inject_text, "single document text");
    inject->add_option("--id", inject_id, "document id (omit to auto-assign)");
    inject->add_option("--method", inject_method, "attack method label for provenance");
    inject->add_option("--target-id", inject_target, "target id for auto-assigned ids");

    auto* retrieve = app.add_subcommand("retrieve", "run an ad-hoc query against a corpus");
    std::string retrieve_corpus, retrieve_query;
    int retrieve_k = 5;
    bool retrieve_json = false;
    retrieve->add_option("--corpus", retrieve_corpus, "corpus JSONL")->required();
    retrieve->add_option("--query", retrieve_query, "query text")->required();
    retrieve->add_option("--k", retrieve_k, "results to return (default 5)");
    retrieve->add_flag("--json", retrieve_json, "emit JSON instead of text");
    bind(retrieve, "--retriever", "retrieval.retriever", "bm25|embedding");
    bind(retrieve, "--bm25-k1", "retrieval.k1", "BM25 k1 (default 1.2)");
    bind(retrieve, "--bm25-b", "retrieval.b", "BM25 b (default 0.75)");
    retrieve->add_flag_callback(
        "--cosine", [&overrides] { overrides.emplace_back("retrieval.cosine", "true"); },
        "score embeddings by cosine instead of dot product");

    auto* evaluate = app.add_subcommand("eval", "run an attack experiment and report metrics");
    std::string eval_corpus, eval_targets, eval_poisons, eval_report, eval_csv, eval_mix;
    bool eval_no_transcript = false;
    evaluate->add_option("--corpus", eval_corpus, "corpus JSONL")->required();
    evaluate->add_option("--targets", eval_targets, "attack targets JSONL")->required();
    evaluate
        ->add_option("--poisons", eval_poisons,
                     "attack method to run inline (authchain|coe|authority|prag|hrag), a poisons "
                     "JSONL path, or \"clean\"")
        ->required();
    evaluate->add_option("--report", eval_report, "report JSON path (default stdout)");
    evaluate->add_option("--csv", eval_csv, "also write per-question CSV");
    evaluate->add_option("--mix", eval_mix, "mixed-context mode {cdp,pdp}:<proportion>");
    evaluate->add_flag("--no-transcript", eval_no_transcript, "omit transcripts from the report");
    bind(evaluate, "--k", "retrieval.k", "context size (default 5)");
    bind(evaluate, "--retriever", "retrieval.retriever", "bm25|embedding");
    bind(evaluate, "--defense", "eval.defense", "none|instructrag|asturag");
    bind(evaluate, "--mode", "eval.mode", "standard|paraphrase|multiturn");
    bind(evaluate, "--seed", "seed", "RNG seed (default 42)");
    bind(evaluate, "--judge", "judge.kind", "llm|rules");
    bind(evaluate, "--max-iter", "attack.max_iterations", "CoE refinement cap (default 5)");
    bind(evaluate, "--order", "attack.order", "coe-first|authority-first");
    bind(evaluate, "--rounds", "eval.multiturn_rounds", "dialogue rounds for multiturn (default 3)");
    evaluate->add_flag_callback(
        "--cosine", [&overrides] { overrides.emplace_back("retrieval.cosine", "true"); },
        "score embeddings by cosine instead of dot product");

    auto* report = app.add_subcommand("report", "summarize a report JSON as a text table");
    std::string report_in;
    report->add_option("--report", report_in, "report JSON")->required();

    // CLI11 wants argc/argv-style or a reversed vector.
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    AppConfig config = AppConfig::load(
        config_path.empty() ? std::nullopt : std::optional<std::string>(config_path));
    for (const auto& [key, value] : overrides) config.set(key, value, "flag");

    if (print_config) {
        std::cout << config.print();
        if (app.get_subcommands().empty()) return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return 2;
    }

    if (*ingest) return cmd_ingest(config, ingest_in, ingest_format, ingest_out);
    if (*extract) return cmd_extract(config, extract_targets, extract_out, strict);
    if (*attack)
        return cmd_attack(config, attack_method, attack_targets, attack_out, attack_no_transcript,
                          strict);
    if (*inject)
        return cmd_inject(config, inject_corpus, inject_out, inject_poisons, inject_text,
                          inject_id, inject_method, inject_target);
    if (*retrieve) return cmd_retrieve(config, retrieve_corpus, retrieve_query, retrieve_k,
                                       retrieve_json);
    if (*evaluate)
        return cmd_eval(config, eval_corpus, eval_targets, eval_poisons, eval_report, eval_csv,
                        parse_mix(eval_mix), eval_no_transcript, strict);
    if (*report) return cmd_report(report_in);
    std::cerr << app.help();
    return 2;
}

} // namespace

int run(const std::vector<std::string>& args) {
    try {
        return run_parsed(args);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

} // namespace ragredteam::cli
