#pragma once

// Conversation dataset ingestion: one conversation, ordered sessions of
// dialogue turns, and a QA set over four categories.

#include <array>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memcycle/errors.hpp"
#include "memcycle/evolution.hpp"
#include "memcycle/log.hpp"

namespace memcycle {

enum class QaCategory { single_hop, multi_hop, temporal, open_domain };

inline const char* to_string(QaCategory c) {
    switch (c) {
        case QaCategory::single_hop: return "single_hop";
        case QaCategory::multi_hop: return "multi_hop";
        case QaCategory::temporal: return "temporal";
        case QaCategory::open_domain: return "open_domain";
    }
    return "single_hop";
}

inline constexpr std::array<QaCategory, 4> kAllCategories = {
    QaCategory::multi_hop, QaCategory::temporal, QaCategory::open_domain,
    QaCategory::single_hop};

struct QaItem {
    std::string question;
    std::string gold_answer;
    QaCategory category = QaCategory::single_hop;
};

struct ConversationDataset {
    std::string conversation_id;
    std::vector<SessionRecord> sessions;
    std::vector<QaItem> qa;
    std::size_t adversarial_dropped = 0;
};

namespace detail {

inline const nlohmann::json& require_key(const nlohmann::json& obj,
                                         const std::string& key,
                                         const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw SchemaViolation("dataset: missing \"" + key + "\" at " + where);
    }
    return obj.at(key);
}

inline std::string require_string(const nlohmann::json& obj,
                                  const std::string& key,
                                  const std::string& where) {
    const auto& v = require_key(obj, key, where);
    if (!v.is_string()) {
        throw SchemaViolation("dataset: \"" + key + "\" at " + where +
                              " is not a string");
    }
    return v.get<std::string>();
}

}  // namespace detail

inline ConversationDataset parse_dataset(const nlohmann::json& j) {
    ConversationDataset dataset;
    dataset.conversation_id =
        detail::require_string(j, "conversation_id", "$");
    const auto& sessions = detail::require_key(j, "sessions", "$");
    if (!sessions.is_array()) {
        throw SchemaViolation("dataset: \"sessions\" is not an array");
    }
    std::set<std::string> seen_sessions;
    for (std::size_t si = 0; si < sessions.size(); ++si) {
        std::string where = "$.sessions[" + std::to_string(si) + "]";
        const auto& sj = sessions[si];
        SessionRecord session;
        session.session_id = detail::require_string(sj, "session_id", where);
        session.timestamp = detail::require_string(sj, "timestamp", where);
        if (!seen_sessions.insert(session.session_id).second) {
            throw SchemaViolation("dataset: duplicate session_id \"" +
                                  session.session_id + "\" at " + where);
        }
        const auto& turns = detail::require_key(sj, "turns", where);
        if (!turns.is_array() || turns.empty()) {
            throw SchemaViolation("dataset: \"turns\" at " + where +
                                  " must be a nonempty array");
        }
        for (std::size_t ti = 0; ti < turns.size(); ++ti) {
            std::string turn_where = where + ".turns[" + std::to_string(ti) +
                                     "]";
            const auto& tj = turns[ti];
            DialogueChunk chunk;
            chunk.session_id = session.session_id;
            chunk.timestamp = session.timestamp;
            chunk.turn_id = detail::require_string(tj, "turn_id", turn_where);
            chunk.speaker = detail::require_string(tj, "speaker", turn_where);
            chunk.text = detail::require_string(tj, "text", turn_where);
            if (chunk.text.empty()) {
                throw SchemaViolation("dataset: empty turn text at " +
                                      turn_where);
            }
            session.turns.push_back(std::move(chunk));
        }
        dataset.sessions.push_back(std::move(session));
    }

    const auto& qa = detail::require_key(j, "qa", "$");
    if (!qa.is_array()) {
        throw SchemaViolation("dataset: \"qa\" is not an array");
    }
    for (std::size_t qi = 0; qi < qa.size(); ++qi) {
        std::string where = "$.qa[" + std::to_string(qi) + "]";
        const auto& qj = qa[qi];
        std::string category = detail::require_string(qj, "category", where);
        if (category == "adversarial") {
            ++dataset.adversarial_dropped;
            continue;
        }
        QaItem item;
        item.question = detail::require_string(qj, "question", where);
        item.gold_answer = detail::require_string(qj, "answer", where);
        if (category == "single_hop") {
            item.category = QaCategory::single_hop;
        } else if (category == "multi_hop") {
            item.category = QaCategory::multi_hop;
        } else if (category == "temporal") {
            item.category = QaCategory::temporal;
        } else if (category == "open_domain") {
            item.category = QaCategory::open_domain;
        } else {
            throw SchemaViolation("dataset: unknown category \"" + category +
                                  "\" at " + where);
        }
        dataset.qa.push_back(std::move(item));
    }
    if (dataset.adversarial_dropped > 0) {
        log_warning("dropped " + std::to_string(dataset.adversarial_dropped) +
                    " adversarial QA item(s)");
    }
    return dataset;
}

inline ConversationDataset ingest_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open dataset: " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        throw SchemaViolation("dataset: " + path + " is not valid JSON");
    }
    return parse_dataset(j);
}

}  // namespace memcycle
