#pragma once

// Forward-path construction: per-chunk fact guidance steering the
// memory manager's edit decisions, then atomic application + embedding.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memcycle/log.hpp"
#include "memcycle/memory.hpp"
#include "memcycle/prompts.hpp"
#include "memcycle/provider.hpp"
#include "memcycle/structured.hpp"
#include "memcycle/text.hpp"

namespace memcycle {

// One dialogue turn. Sessions are ordered groups of chunks.
struct DialogueChunk {
    std::string session_id;
    std::string turn_id;
    std::string speaker;
    std::string text;
    std::string timestamp;
};

struct ConstructionGuidance {
    std::vector<std::string> facts;  // "[Speaker] fact" lines, possibly empty
    std::string raw;                 // verbatim model response
};

struct ConstructionConfig {
    ViewPolicy view_policy = ViewPolicy::hybrid;
    std::size_t view_limit = 10;
    bool single_action = false;
    bool ablate_guidance = false;  // /C: skip guidance entirely
};

inline std::string format_memory_view(const BoundedView& view) {
    if (view.entries.empty()) return "(memory is empty)";
    std::string out;
    for (const auto& e : view.entries) {
        out += e.id;
        out += " | ";
        out += e.timestamp;
        out += " | ";
        out += e.text;
        out += '\n';
    }
    return out;
}

inline std::string format_previous_queries(
    const std::vector<std::string>& queries) {
    if (queries.empty()) return "(none)";
    std::string out;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        out += std::to_string(i) + ". " + queries[i] + "\n";
    }
    return out;
}

// Parses "- [Speaker] fact" bullets. A response with the FACTS: marker
// but no bullets is a legitimate empty guidance; a response with
// neither marker nor bullets degrades to empty with a warning.
inline ConstructionGuidance parse_guidance_response(
    const std::string& response) {
    ConstructionGuidance guidance;
    guidance.raw = response;
    std::string lowered = text::to_lower_ascii(response);
    bool has_marker = lowered.find("facts:") != std::string::npos;
    std::size_t scan_from =
        has_marker ? lowered.find("facts:") + 6 : std::size_t{0};
    std::size_t pos = scan_from;
    while (pos < response.size()) {
        std::size_t eol = response.find('\n', pos);
        if (eol == std::string::npos) eol = response.size();
        std::string line = text::trim(response.substr(pos, eol - pos));
        pos = eol + 1;
        if (!text::starts_with(line, "-")) continue;
        std::string fact = text::trim(line.substr(1));
        if (!fact.empty()) guidance.facts.push_back(fact);
    }
    if (!has_marker && guidance.facts.empty()) {
        log_warning("guidance response had no FACTS section; continuing "
                    "without guidance");
    }
    return guidance;
}

inline ConstructionGuidance construction_guidance(const DialogueChunk& chunk,
                                                  const BoundedView& view,
                                                  Provider& provider) {
    std::string prompt = render_prompt(
        AgentRole::meta_construction,
        {{"session_id", chunk.session_id},
         {"timestamp", chunk.timestamp},
         {"speaker", chunk.speaker},
         {"utterance", chunk.text},
         {"memory_view", format_memory_view(view)}});
    std::string response =
        provider.complete({AgentRole::meta_construction, prompt});
    return parse_guidance_response(response);
}

// One manager call deciding a list of atomic edits for this chunk.
// Invalid elements are dropped with a warning; an empty or unusable
// response falls back to [NONE].
inline std::vector<EditAction> decide_edit(const DialogueChunk& chunk,
                                           const BoundedView& view,
                                           const ConstructionGuidance& guidance,
                                           Provider& provider) {
    std::string guidance_text = "(none)";
    if (!guidance.facts.empty()) {
        guidance_text.clear();
        for (const auto& fact : guidance.facts) {
            guidance_text += "- " + fact + "\n";
        }
    }
    std::string prompt = render_prompt(
        AgentRole::memory_manager,
        {{"session_id", chunk.session_id},
         {"timestamp", chunk.timestamp},
         {"speaker", chunk.speaker},
         {"utterance", chunk.text},
         {"memory_view", format_memory_view(view)},
         {"guidance", guidance_text}});
    std::string response =
        provider.complete({AgentRole::memory_manager, prompt});

    std::vector<EditAction> actions;
    nlohmann::json parsed;
    try {
        parsed = parse_structured(response,
                                  {PayloadKind::json_array, {}, {}});
    } catch (const UnparseableResponse&) {
        log_warning("memory manager response unparseable; applying NONE");
        return {EditAction::none()};
    }

    for (const auto& element : parsed) {
        if (!element.is_object() || !element.contains("op")) {
            log_warning("dropping manager action without an op");
            continue;
        }
        std::string op = json_string_or(element, "op");
        for (auto& c : op) c = static_cast<char>(std::toupper(c));
        std::string target = json_string_or(element, "target_id");
        std::string new_text = text::trim(json_string_or(element, "text"));
        EditAction action;
        if (op == "ADD") {
            action = EditAction::add(new_text, chunk.timestamp,
                                     chunk.session_id, chunk.speaker);
            action.target_id = target;  // validate() rejects a stray target
        } else if (op == "UPDATE") {
            action = EditAction::update(target, new_text);
        } else if (op == "DELETE") {
            action = EditAction::remove(target);
            action.new_text = new_text;
        } else if (op == "NONE") {
            action = EditAction::none();
            action.target_id = target;
            action.new_text = new_text;
        } else {
            log_warning("dropping manager action with unknown op: " + op);
            continue;
        }
        try {
            action.validate();
        } catch (const MalformedAction& e) {
            log_warning(std::string("dropping malformed manager action: ") +
                        e.what());
            continue;
        }
        actions.push_back(std::move(action));
    }
    if (actions.empty()) actions.push_back(EditAction::none());
    return actions;
}

// Full per-chunk construction step: bounded view, guidance (unless
// ablated), manager decision, apply + embed. The bank is the single
// mutable state; chunks must arrive in stream order.
inline void construct_chunk(MemoryBank& bank, const DialogueChunk& chunk,
                            const ConstructionConfig& config,
                            Provider& provider,
                            std::ostream* chunk_log = nullptr) {
    std::optional<std::vector<double>> anchor;
    if (config.view_policy != ViewPolicy::recent) {
        anchor = provider.embed(chunk.text);
    }
    BoundedView view =
        bank.bounded_view(anchor, config.view_policy, config.view_limit);

    ConstructionGuidance guidance;
    if (!config.ablate_guidance) {
        guidance = construction_guidance(chunk, view, provider);
    }

    std::vector<EditAction> actions =
        decide_edit(chunk, view, guidance, provider);
    if (config.single_action && actions.size() > 1) {
        actions.resize(1);
    }

    nlohmann::ordered_json applied = nlohmann::ordered_json::array();
    for (const auto& action : actions) {
        std::optional<std::string> touched;
        try {
            touched = bank.apply_edit(action);
        } catch (const UnknownTarget& e) {
            log_warning(std::string("manager action targets a missing "
                                    "entry; skipped: ") +
                        e.what());
            continue;
        }
        if (touched &&
            (action.kind == EditKind::ADD || action.kind == EditKind::UPDATE)) {
            bank.set_embedding(*touched,
                               provider.embed(bank.get(*touched).text));
        }
        applied.push_back({{"op", to_string(action.kind)},
                           {"id", touched ? *touched : ""}});
    }

    if (chunk_log) {
        nlohmann::ordered_json record;
        record["session_id"] = chunk.session_id;
        record["turn_id"] = chunk.turn_id;
        record["guidance_facts"] = guidance.facts.size();
        record["actions"] = std::move(applied);
        (*chunk_log) << record.dump() << '\n';
    }
}

}  // namespace memcycle
