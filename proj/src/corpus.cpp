#include "ragredteam/corpus.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "ragredteam/errors.hpp"
#include "ragredteam/tokenizer.hpp"

namespace ragredteam::corpus {

using nlohmann::json;

std::string Provenance::to_string() const {
    switch (kind) {
        case Kind::Clean: return "clean";
        case Kind::Poisoned: return "poisoned:" + attack_method;
        case Kind::SyntheticCorrect: return "synthetic_correct";
        case Kind::SyntheticPoisoned: return "synthetic_poisoned";
    }
    return "clean";
}

Provenance Provenance::from_string(const std::string& s) {
    if (s == "clean") return clean();
    if (s == "synthetic_correct") return synthetic_correct();
    if (s == "synthetic_poisoned") return synthetic_poisoned();
    if (s.rfind("poisoned:", 0) == 0) return poisoned(s.substr(9));
    throw ParseError("unknown provenance value \"" + s + "\"");
}

bool KnowledgeBase::contains(const std::string& id) const {
    return index_.count(id) != 0;
}

const Document* KnowledgeBase::find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &documents_[it->second];
}

void KnowledgeBase::add(Document doc) {
    if (doc.id.empty()) throw ValidationError("document id must not be empty");
    if (trim(doc.text).empty())
        throw ValidationError("document \"" + doc.id + "\" has empty text");
    if (contains(doc.id))
        throw ValidationError("duplicate document id \"" + doc.id + "\"");
    index_.emplace(doc.id, documents_.size());
    documents_.push_back(std::move(doc));
}

bool KnowledgeBase::remove(const std::string& id) {
    auto it = index_.find(id);
    if (it == index_.end()) return false;
    std::size_t pos = it->second;
    documents_.erase(documents_.begin() + static_cast<std::ptrdiff_t>(pos));
    index_.erase(it);
    for (auto& [other, p] : index_) {
        if (p > pos) --p;
    }
    return true;
}

namespace {

std::string file_stem(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

json parse_record(const std::string& line, std::size_t line_no) {
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object())
        throw ParseError("malformed JSONL record at line " + std::to_string(line_no));
    return record;
}

std::string require_string(const json& record, const char* key, std::size_t line_no) {
    if (!record.contains(key) || !record[key].is_string())
        throw ParseError("record at line " + std::to_string(line_no) +
                         " is missing string field \"" + key + "\"");
    return record[key].get<std::string>();
}

} // namespace

KnowledgeBase load_corpus(const std::string& path, CorpusFormat format) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file \"" + path + "\"");

    KnowledgeBase kb(file_stem(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        Document doc;
        if (format == CorpusFormat::Jsonl) {
            json record = parse_record(line, line_no);
            doc.id = require_string(record, "id", line_no);
            doc.text = require_string(record, "text", line_no);
            if (record.contains("provenance")) {
                try {
                    doc.provenance = Provenance::from_string(record["provenance"].get<std::string>());
                } catch (const ParseError& e) {
                    throw ParseError(std::string(e.what()) + " at line " + std::to_string(line_no));
                }
            }
        } else {
            std::vector<std::string> cols;
            std::stringstream ss(line);
            std::string col;
            while (std::getline(ss, col, '\t')) cols.push_back(col);
            if (cols.size() < 2)
                throw ParseError("TSV record at line " + std::to_string(line_no) +
                                 " needs at least id<TAB>text");
            doc.id = cols[0];
            doc.text = cols[1];
            if (cols.size() > 2) doc.provenance = Provenance::from_string(cols[2]);
        }
        if (kb.contains(doc.id))
            throw ParseError("duplicate document id \"" + doc.id + "\" at line " +
                             std::to_string(line_no));
        if (trim(doc.text).empty())
            throw ParseError("empty document text at line " + std::to_string(line_no));
        kb.add(std::move(doc));
    }
    return kb;
}

void save_corpus(const KnowledgeBase& kb, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open \"" + path + "\" for writing");
    for (const Document& doc : kb.documents()) {
        json record;
        record["id"] = doc.id;
        record["text"] = doc.text;
        if (doc.provenance.kind != Provenance::Kind::Clean)
            record["provenance"] = doc.provenance.to_string();
        out << record.dump() << '\n';
    }
    if (!out) throw IoError("failed writing corpus to \"" + path + "\"");
}

std::vector<AttackTarget> load_attack_targets(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open attack-target file \"" + path + "\"");

    std::vector<AttackTarget> targets;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json record = parse_record(line, line_no);
        AttackTarget target;
        target.id = require_string(record, "id", line_no);
        target.question = require_string(record, "question", line_no);
        target.correct_answer = require_string(record, "correct_answer", line_no);
        target.target_answer = require_string(record, "target_answer", line_no);
        if (trim(target.question).empty())
            throw ParseError("empty question at line " + std::to_string(line_no));
        if (to_lower(trim(target.target_answer)) == to_lower(trim(target.correct_answer)))
            throw ParseError("target answer equals correct answer for record \"" + target.id +
                             "\" at line " + std::to_string(line_no));
        targets.push_back(std::move(target));
    }
    return targets;
}

void save_attack_targets(const std::vector<AttackTarget>& targets, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open \"" + path + "\" for writing");
    for (const AttackTarget& t : targets) {
        json record;
        record["id"] = t.id;
        record["question"] = t.question;
        record["correct_answer"] = t.correct_answer;
        record["target_answer"] = t.target_answer;
        out << record.dump() << '\n';
    }
}

std::string poison_doc_id(const std::string& attack_method, const std::string& target_id) {
    return "poison-" + attack_method + "-" + target_id;
}

std::string inject(KnowledgeBase& kb, Document doc,
                   const std::optional<std::string>& auto_id_target) {
    if (doc.id.empty()) {
        if (!auto_id_target)
            throw ValidationError("inject: empty doc id and no target id for auto-assignment");
        std::string method = doc.provenance.kind == Provenance::Kind::Poisoned
                                 ? doc.provenance.attack_method
                                 : doc.provenance.to_string();
        doc.id = poison_doc_id(method, *auto_id_target);
    }
    std::string id = doc.id;
    kb.add(std::move(doc));
    return id;
}

std::string fingerprint(const KnowledgeBase& kb) {
    std::uint64_t hash = 1469598103934665603ULL; // FNV offset basis
    auto mix = [&hash](std::string_view s) {
        for (unsigned char c : s) {
            hash ^= c;
            hash *= 1099511628211ULL;
        }
        hash ^= 0xff;
        hash *= 1099511628211ULL;
    };
    for (const Document& doc : kb.documents()) {
        mix(doc.id);
        mix(doc.text);
        mix(doc.provenance.to_string());
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

} // namespace ragredteam::corpus
