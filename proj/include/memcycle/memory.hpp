#pragma once

// Memory bank data model: structured fact entries, atomic edits,
// cosine top-k search, bounded views, JSONL persistence.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "memcycle/embedding.hpp"
#include "memcycle/errors.hpp"

namespace memcycle {

enum class EntrySource { construction, repair };

inline const char* to_string(EntrySource s) {
    return s == EntrySource::construction ? "construction" : "repair";
}

inline EntrySource entry_source_from_string(const std::string& s) {
    if (s == "construction") return EntrySource::construction;
    if (s == "repair") return EntrySource::repair;
    throw SchemaViolation("unknown entry source: " + s);
}

struct MemoryEntry {
    std::string id;
    std::string text;
    std::string timestamp;  // stored verbatim, never parsed
    std::string session_id;
    std::string speaker;
    EntrySource source = EntrySource::construction;
    std::vector<double> embedding;  // unit-norm, or empty before embedding

    bool operator==(const MemoryEntry&) const = default;
};

enum class EditKind { ADD, UPDATE, DELETE, NONE };

inline const char* to_string(EditKind k) {
    switch (k) {
        case EditKind::ADD: return "ADD";
        case EditKind::UPDATE: return "UPDATE";
        case EditKind::DELETE: return "DELETE";
        case EditKind::NONE: return "NONE";
    }
    return "NONE";
}

// One atomic memory edit. Field presence must match the kind: target_id
// only for UPDATE/DELETE, new_text only for ADD/UPDATE, metadata only
// for ADD.
struct EditAction {
    EditKind kind = EditKind::NONE;
    std::string target_id;
    std::string new_text;
    std::string timestamp;
    std::string session_id;
    std::string speaker;
    EntrySource source = EntrySource::construction;

    static EditAction add(std::string text, std::string timestamp,
                          std::string session_id, std::string speaker,
                          EntrySource source = EntrySource::construction) {
        EditAction a;
        a.kind = EditKind::ADD;
        a.new_text = std::move(text);
        a.timestamp = std::move(timestamp);
        a.session_id = std::move(session_id);
        a.speaker = std::move(speaker);
        a.source = source;
        return a;
    }
    static EditAction update(std::string target_id, std::string text) {
        EditAction a;
        a.kind = EditKind::UPDATE;
        a.target_id = std::move(target_id);
        a.new_text = std::move(text);
        return a;
    }
    static EditAction remove(std::string target_id) {
        EditAction a;
        a.kind = EditKind::DELETE;
        a.target_id = std::move(target_id);
        return a;
    }
    static EditAction none() { return EditAction{}; }

    void validate() const {
        switch (kind) {
            case EditKind::ADD:
                if (new_text.empty()) throw MalformedAction("ADD requires text");
                if (!target_id.empty())
                    throw MalformedAction("ADD must not carry a target id");
                break;
            case EditKind::UPDATE:
                if (target_id.empty())
                    throw MalformedAction("UPDATE requires a target id");
                if (new_text.empty())
                    throw MalformedAction("UPDATE requires text");
                break;
            case EditKind::DELETE:
                if (target_id.empty())
                    throw MalformedAction("DELETE requires a target id");
                if (!new_text.empty())
                    throw MalformedAction("DELETE must not carry text");
                break;
            case EditKind::NONE:
                if (!target_id.empty() || !new_text.empty())
                    throw MalformedAction("NONE must not carry fields");
                break;
        }
    }
};

struct SearchHit {
    const MemoryEntry* entry;
    double score;
};

enum class ViewPolicy { recent, semantic, hybrid };

inline const char* to_string(ViewPolicy p) {
    switch (p) {
        case ViewPolicy::recent: return "recent";
        case ViewPolicy::semantic: return "semantic";
        case ViewPolicy::hybrid: return "hybrid";
    }
    return "recent";
}

inline ViewPolicy view_policy_from_string(const std::string& s) {
    if (s == "recent") return ViewPolicy::recent;
    if (s == "semantic") return ViewPolicy::semantic;
    if (s == "hybrid") return ViewPolicy::hybrid;
    throw ConfigError("unknown view policy: " + s);
}

// Size-limited slice of one bank snapshot, used as prompt context.
struct BoundedView {
    std::vector<MemoryEntry> entries;
    ViewPolicy policy = ViewPolicy::recent;
    std::size_t limit = 0;
};

class MemoryBank {
public:
    MemoryBank() = default;
    explicit MemoryBank(std::size_t dimension) : dimension_(dimension) {}

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    std::size_t dimension() const { return dimension_; }
    std::uint64_t counter() const { return counter_; }

    const std::vector<MemoryEntry>& entries() const { return entries_; }

    bool contains(const std::string& id) const {
        return index_.count(id) != 0;
    }

    const MemoryEntry& get(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw UnknownTarget(id);
        return entries_[it->second];
    }

    // Applies one atomic edit. Returns the id of the touched entry, or
    // nullopt for NONE. ADD mints a fresh id from the counter; ids are
    // never reused after DELETE.
    std::optional<std::string> apply_edit(const EditAction& action) {
        action.validate();
        switch (action.kind) {
            case EditKind::NONE:
                return std::nullopt;
            case EditKind::ADD: {
                MemoryEntry e;
                e.id = next_id();
                e.text = action.new_text;
                e.timestamp = action.timestamp;
                e.session_id = action.session_id;
                e.speaker = action.speaker;
                e.source = action.source;
                index_[e.id] = entries_.size();
                entries_.push_back(std::move(e));
                return entries_.back().id;
            }
            case EditKind::UPDATE: {
                auto it = index_.find(action.target_id);
                if (it == index_.end()) throw UnknownTarget(action.target_id);
                // Text changes; id, timestamp and the rest stay. The
                // caller re-embeds and writes the vector back.
                entries_[it->second].text = action.new_text;
                return action.target_id;
            }
            case EditKind::DELETE: {
                auto it = index_.find(action.target_id);
                if (it == index_.end()) throw UnknownTarget(action.target_id);
                std::size_t pos = it->second;
                entries_.erase(entries_.begin() +
                               static_cast<std::ptrdiff_t>(pos));
                index_.erase(it);
                for (auto& [id, p] : index_) {
                    if (p > pos) --p;
                }
                return action.target_id;
            }
        }
        return std::nullopt;
    }

    // Writes an embedding back onto an entry, pinning the bank dimension
    // on first use.
    void set_embedding(const std::string& id, std::vector<double> embedding) {
        auto it = index_.find(id);
        if (it == index_.end()) throw UnknownTarget(id);
        if (dimension_ == 0) {
            dimension_ = embedding.size();
        } else if (embedding.size() != dimension_) {
            throw DimensionMismatch(
                "embedding of length " + std::to_string(embedding.size()) +
                " written to a bank of dimension " + std::to_string(dimension_));
        }
        entries_[it->second].embedding = std::move(embedding);
    }

    // Top-k by cosine similarity, score descending, ties broken by
    // ascending entry id. Entries without an embedding score 0.
    std::vector<SearchHit> search_top_k(const std::vector<double>& query,
                                        std::size_t k) const {
        if (dimension_ != 0 && query.size() != dimension_) {
            throw DimensionMismatch(
                "query of length " + std::to_string(query.size()) +
                " against a bank of dimension " + std::to_string(dimension_));
        }
        std::vector<SearchHit> hits;
        hits.reserve(entries_.size());
        for (const auto& e : entries_) {
            double score = e.embedding.empty()
                               ? 0.0
                               : cosine_similarity(e.embedding, query);
            hits.push_back({&e, score});
        }
        std::sort(hits.begin(), hits.end(),
                  [](const SearchHit& a, const SearchHit& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.entry->id < b.entry->id;
                  });
        if (hits.size() > k) hits.resize(k);
        return hits;
    }

    // recent: suffix in insertion order. semantic: top-limit around the
    // anchor. hybrid: ceil(limit/2) recent then floor(limit/2) semantic,
    // deduplicated by id, recent first.
    BoundedView bounded_view(const std::optional<std::vector<double>>& anchor,
                             ViewPolicy policy, std::size_t limit) const {
        if (limit == 0) throw Error("bounded view limit must be positive");
        BoundedView view;
        view.policy = policy;
        view.limit = limit;
        switch (policy) {
            case ViewPolicy::recent: {
                std::size_t n = std::min(limit, entries_.size());
                view.entries.assign(entries_.end() -
                                        static_cast<std::ptrdiff_t>(n),
                                    entries_.end());
                break;
            }
            case ViewPolicy::semantic: {
                if (!anchor) throw MissingAnchor("semantic view needs an anchor");
                for (const auto& hit : search_top_k(*anchor, limit)) {
                    view.entries.push_back(*hit.entry);
                }
                break;
            }
            case ViewPolicy::hybrid: {
                if (!anchor) throw MissingAnchor("hybrid view needs an anchor");
                std::size_t recent_quota = (limit + 1) / 2;
                std::size_t semantic_quota = limit / 2;
                std::size_t n = std::min(recent_quota, entries_.size());
                view.entries.assign(entries_.end() -
                                        static_cast<std::ptrdiff_t>(n),
                                    entries_.end());
                for (const auto& hit : search_top_k(*anchor, semantic_quota)) {
                    bool seen = std::any_of(
                        view.entries.begin(), view.entries.end(),
                        [&](const MemoryEntry& e) {
                            return e.id == hit.entry->id;
                        });
                    if (!seen) view.entries.push_back(*hit.entry);
                }
                break;
            }
        }
        return view;
    }

    bool operator==(const MemoryBank& other) const {
        return dimension_ == other.dimension_ && counter_ == other.counter_ &&
               entries_ == other.entries_;
    }

    // --- persistence (JSON Lines, see save_bank/load_bank below) ---

    void serialize(std::ostream& out) const {
        out << "{\"format\":\"memcycle-bank\",\"version\":1,\"dimension\":"
            << dimension_ << ",\"counter\":" << counter_ << "}\n";
        for (const auto& e : entries_) {
            out << "{\"id\":" << nlohmann::json(e.id).dump()
                << ",\"text\":" << nlohmann::json(e.text).dump()
                << ",\"timestamp\":" << nlohmann::json(e.timestamp).dump()
                << ",\"session_id\":" << nlohmann::json(e.session_id).dump()
                << ",\"speaker\":" << nlohmann::json(e.speaker).dump()
                << ",\"source\":\"" << to_string(e.source)
                << "\",\"embedding\":[";
            for (std::size_t i = 0; i < e.embedding.size(); ++i) {
                if (i) out << ',';
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.17g", e.embedding[i]);
                out << buf;
            }
            out << "]}\n";
        }
    }

    std::string serialize() const {
        std::ostringstream out;
        serialize(out);
        return out.str();
    }

    static MemoryBank deserialize(std::istream& in) {
        MemoryBank bank;
        std::string line;
        std::size_t line_no = 0;
        bool have_header = false;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object()) {
                throw SchemaViolation("bank line " + std::to_string(line_no) +
                                      ": not a JSON object");
            }
            if (!have_header) {
                if (j.value("format", "") != "memcycle-bank") {
                    throw SchemaViolation(
                        "bank line 1: missing memcycle-bank header");
                }
                bank.dimension_ =
                    j.value("dimension", static_cast<std::size_t>(0));
                bank.counter_ = j.value("counter", std::uint64_t{0});
                have_header = true;
                continue;
            }
            MemoryEntry e;
            for (const char* key :
                 {"id", "text", "timestamp", "session_id", "speaker", "source",
                  "embedding"}) {
                if (!j.contains(key)) {
                    throw SchemaViolation("bank line " +
                                          std::to_string(line_no) +
                                          ": missing \"" + key + "\"");
                }
            }
            e.id = j.at("id").get<std::string>();
            e.text = j.at("text").get<std::string>();
            e.timestamp = j.at("timestamp").get<std::string>();
            e.session_id = j.at("session_id").get<std::string>();
            e.speaker = j.at("speaker").get<std::string>();
            e.source = entry_source_from_string(j.at("source").get<std::string>());
            e.embedding = j.at("embedding").get<std::vector<double>>();
            if (e.id.empty() || e.text.empty()) {
                throw SchemaViolation("bank line " + std::to_string(line_no) +
                                      ": empty id or text");
            }
            if (bank.dimension_ != 0 && !e.embedding.empty() &&
                e.embedding.size() != bank.dimension_) {
                throw SchemaViolation("bank line " + std::to_string(line_no) +
                                      ": embedding length " +
                                      std::to_string(e.embedding.size()) +
                                      " != bank dimension " +
                                      std::to_string(bank.dimension_));
            }
            if (!e.embedding.empty()) {
                double n = l2_norm(e.embedding);
                if (std::fabs(n - 1.0) > 1e-6 && n != 0.0) {
                    throw SchemaViolation("bank line " +
                                          std::to_string(line_no) +
                                          ": embedding is not unit norm");
                }
            }
            if (bank.index_.count(e.id)) {
                throw SchemaViolation("bank line " + std::to_string(line_no) +
                                      ": duplicate id " + e.id);
            }
            bank.index_[e.id] = bank.entries_.size();
            bank.entries_.push_back(std::move(e));
        }
        if (!have_header) {
            throw SchemaViolation("bank file has no header line");
        }
        return bank;
    }

private:
    std::string next_id() {
        char buf[24];
        std::snprintf(buf, sizeof(buf), "m%06llu",
                      static_cast<unsigned long long>(counter_));
        ++counter_;
        return buf;
    }

    std::vector<MemoryEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t dimension_ = 0;  // 0 = not pinned yet
    std::uint64_t counter_ = 0;
};

inline void save_bank(const MemoryBank& bank, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot open for write: " + path);
    bank.serialize(out);
    if (!out) throw IoFailure("write failed: " + path);
}

inline MemoryBank load_bank(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open for read: " + path);
    return MemoryBank::deserialize(in);
}

}  // namespace memcycle
