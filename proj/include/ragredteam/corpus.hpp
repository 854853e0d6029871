#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ragredteam::corpus {

/// Where a document came from. Poisoned carries the attack method that
/// produced it; the synthetic kinds mark counter-documents fabricated for
/// mixed-context experiments.
struct Provenance {
    enum class Kind { Clean, Poisoned, SyntheticCorrect, SyntheticPoisoned };

    Kind kind = Kind::Clean;
    std::string attack_method; // set only for Kind::Poisoned

    static Provenance clean() { return {}; }
    static Provenance poisoned(std::string method) {
        return {Kind::Poisoned, std::move(method)};
    }
    static Provenance synthetic_correct() { return {Kind::SyntheticCorrect, {}}; }
    static Provenance synthetic_poisoned() { return {Kind::SyntheticPoisoned, {}}; }

    bool is_poisoned() const {
        return kind == Kind::Poisoned || kind == Kind::SyntheticPoisoned;
    }
    /// Serialized form: "clean", "poisoned:<method>", "synthetic_correct",
    /// "synthetic_poisoned".
    std::string to_string() const;
    static Provenance from_string(const std::string& s);

    bool operator==(const Provenance&) const = default;
};

struct Document {
    std::string id;
    std::string text;
    Provenance provenance;

    bool operator==(const Document&) const = default;
};

/// Ordered, id-unique document collection. Insertion order is stable so
/// runs are reproducible. Single-writer: mutation is not safe concurrently
/// with reads; finish all injections before sharing a corpus across
/// workers.
class KnowledgeBase {
public:
    KnowledgeBase() = default;
    explicit KnowledgeBase(std::string name) : name_(std::move(name)) {}

    const std::string& name() const { return name_; }
    void set_name(std::string name) { name_ = std::move(name); }

    std::size_t size() const { return documents_.size(); }
    bool empty() const { return documents_.empty(); }
    const std::vector<Document>& documents() const { return documents_; }
    const Document& at(std::size_t pos) const { return documents_.at(pos); }

    bool contains(const std::string& id) const;
    const Document* find(const std::string& id) const;

    /// Appends a document. Throws ValidationError on duplicate id or
    /// empty (after trimming) text.
    void add(Document doc);

    /// Removes a document by id (used to keep attack experiments isolated:
    /// inject, measure, remove). Returns false if absent.
    bool remove(const std::string& id);

    bool operator==(const KnowledgeBase& other) const {
        return name_ == other.name_ && documents_ == other.documents_;
    }

private:
    std::string name_;
    std::vector<Document> documents_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// One attack instance: the question, its real answer, and the wrong
/// answer the attacker wants the reader to emit.
struct AttackTarget {
    std::string id;
    std::string question;
    std::string correct_answer;
    std::string target_answer;

    bool operator==(const AttackTarget&) const = default;
};

enum class CorpusFormat { Jsonl, Tsv };

/// Loads a knowledge base. JSONL records: {"id", "text", optional
/// "provenance"}; TSV lines: id<TAB>text[<TAB>provenance]. Malformed
/// records and duplicate ids raise ParseError naming the line / id.
/// The knowledge base name is the file stem.
KnowledgeBase load_corpus(const std::string& path, CorpusFormat format = CorpusFormat::Jsonl);

/// Writes JSONL, one document per line; load_corpus(save_corpus(kb))
/// reproduces the documents exactly. The provenance field is omitted for
/// clean documents so saved clean corpora stay interchangeable with
/// third-party dumps.
void save_corpus(const KnowledgeBase& kb, const std::string& path);

/// Loads attack targets from JSONL records {"id", "question",
/// "correct_answer", "target_answer"}. Records violating the invariants
/// (empty question, target equal to correct answer after trimming and
/// case folding) are rejected with a ParseError naming the line.
std::vector<AttackTarget> load_attack_targets(const std::string& path);

void save_attack_targets(const std::vector<AttackTarget>& targets, const std::string& path);

/// Auto-assigned id for an injected poisoned document.
std::string poison_doc_id(const std::string& attack_method, const std::string& target_id);

/// Inserts doc into kb and returns its final id. An empty doc.id requests
/// auto-assignment, which needs the target id to build
/// "poison-<method>-<target id>". Colliding ids raise ValidationError.
std::string inject(KnowledgeBase& kb, Document doc,
                   const std::optional<std::string>& auto_id_target = std::nullopt);

/// FNV-1a hash over ids, texts and provenance, as a hex string. Reports
/// embed this so a result can be tied to the exact corpus it ran against.
std::string fingerprint(const KnowledgeBase& kb);

} // namespace ragredteam::corpus
