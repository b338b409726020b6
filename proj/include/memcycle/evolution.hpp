#pragma once

// Backward path: after each session, synthesize probe QA pairs, verify
// the provisional bank, convert failures into repair proposals, and
// consolidate them back into memory before the session commits.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memcycle/construction.hpp"
#include "memcycle/log.hpp"
#include "memcycle/memory.hpp"
#include "memcycle/prompts.hpp"
#include "memcycle/provider.hpp"
#include "memcycle/structured.hpp"
#include "memcycle/text.hpp"

namespace memcycle {

// One session as seen by the pipeline: an ordered group of chunks with
// a session-level timestamp.
struct SessionRecord {
    std::string session_id;
    std::string timestamp;
    std::vector<DialogueChunk> turns;
};

enum class ProbeType { single_hop, multi_session, temporal };

inline const char* to_string(ProbeType t) {
    switch (t) {
        case ProbeType::single_hop: return "single_hop";
        case ProbeType::multi_session: return "multi_session";
        case ProbeType::temporal: return "temporal";
    }
    return "single_hop";
}

struct ProbeQA {
    std::string question;
    std::string gold_answer;
    ProbeType probe_type = ProbeType::single_hop;
    std::string session_id;
};

enum class ProbeVerdict { correct, failed };

struct ProbeResult {
    ProbeQA probe;
    std::string predicted;
    std::vector<std::pair<std::string, std::string>> evidence;  // (id, text)
    ProbeVerdict verdict = ProbeVerdict::correct;
};

enum class RepairOp { ADD_FACT, NOOP };

struct RepairProposal {
    RepairOp op = RepairOp::NOOP;
    std::string fact;  // nonempty iff ADD_FACT
    std::string target_speaker;
    std::string evidence_span;
    double confidence = 0.0;
    std::string reason;
};

enum class ConsolidationAction { SKIP, MERGE, INSERT };

inline const char* to_string(ConsolidationAction a) {
    switch (a) {
        case ConsolidationAction::SKIP: return "SKIP";
        case ConsolidationAction::MERGE: return "MERGE";
        case ConsolidationAction::INSERT: return "INSERT";
    }
    return "INSERT";
}

struct ConsolidationDecision {
    ConsolidationAction action = ConsolidationAction::INSERT;
    std::string merge_target_id;  // required iff MERGE
    std::string merged_fact;      // required iff MERGE
    std::string reason;
};

struct EvolutionConfig {
    std::size_t probe_count = 5;       // J
    std::size_t k = 30;                // verification retrieval budget
    double similarity_threshold = 0.55;  // theta
    std::size_t history_view_limit = 10;
    bool ablate_evolution = false;  // /E: commit the provisional bank as-is
};

namespace detail {

inline bool parse_probe_type(const std::string& raw, ProbeType& out) {
    std::string v = text::normalize(raw);
    std::replace(v.begin(), v.end(), '-', '_');
    std::replace(v.begin(), v.end(), ' ', '_');
    if (v == "single_hop" || v == "singlehop") {
        out = ProbeType::single_hop;
        return true;
    }
    if (v == "multi_session" || v == "multi_hop" || v == "multisession" ||
        v == "multihop") {
        out = ProbeType::multi_session;
        return true;
    }
    if (v == "temporal") {
        out = ProbeType::temporal;
        return true;
    }
    return false;
}

inline std::string format_session_text(const SessionRecord& session) {
    std::string out;
    for (const auto& turn : session.turns) {
        out += "[" + turn.speaker + "] " + turn.text + "\n";
    }
    return out;
}

inline std::string one_shot_answer(const std::string& question,
                                   const std::vector<SearchHit>& hits,
                                   Provider& provider) {
    std::string evidence_text = "(no memories retrieved)";
    if (!hits.empty()) {
        evidence_text.clear();
        for (const auto& hit : hits) {
            evidence_text += "- [" + hit.entry->speaker + " | " +
                             hit.entry->timestamp + "] " + hit.entry->text +
                             "\n";
        }
    }
    std::string prompt =
        render_prompt(AgentRole::answerer, {{"question", question},
                                            {"evidence", evidence_text}});
    return text::trim(provider.complete({AgentRole::answerer, prompt}));
}

}  // namespace detail

// One generator call requesting exactly J probes. Fewer valid probes
// than requested is accepted with a warning; an unusable response means
// the session commits without evolution.
inline std::vector<ProbeQA> generate_probes(const SessionRecord& session,
                                            const BoundedView& prior_view,
                                            std::size_t probe_count,
                                            Provider& provider) {
    if (session.turns.empty()) throw Error("cannot probe an empty session");
    std::size_t single_hop_quota = (probe_count + 1) / 2;
    std::string prompt = render_prompt(
        AgentRole::probe_generator,
        {{"probe_count", std::to_string(probe_count)},
         {"session_id", session.session_id},
         {"timestamp", session.timestamp},
         {"session_text", detail::format_session_text(session)},
         {"history_view", format_memory_view(prior_view)},
         {"single_hop_quota", std::to_string(single_hop_quota)}});
    std::string response =
        provider.complete({AgentRole::probe_generator, prompt});

    nlohmann::json parsed;
    try {
        parsed = parse_structured(response, {PayloadKind::json_array, {}, {}});
    } catch (const UnparseableResponse&) {
        log_warning("probe generator response unparseable; session commits "
                    "without evolution");
        return {};
    }

    std::vector<ProbeQA> probes;
    for (const auto& element : parsed) {
        std::string question = text::trim(json_string_or(element, "question"));
        std::string answer = text::trim(json_string_or(element, "answer"));
        std::string type_raw = json_string_or(element, "type");
        ProbeType type;
        if (question.empty() || answer.empty() ||
            !detail::parse_probe_type(type_raw, type)) {
            log_warning("dropping malformed probe element");
            continue;
        }
        probes.push_back({question, answer, type, session.session_id});
        if (probes.size() == probe_count) break;
    }
    if (probes.size() < probe_count) {
        log_warning("probe generator produced " +
                    std::to_string(probes.size()) + " valid probes of " +
                    std::to_string(probe_count) + " requested");
    }
    return probes;
}

// One-shot verification: top-k search, answer, judge. A judge response
// we cannot parse counts as correct so judge noise never triggers a
// repair.
inline ProbeResult verify_probe(const MemoryBank& bank, const ProbeQA& probe,
                                std::size_t k, Provider& provider) {
    ProbeResult result;
    result.probe = probe;
    std::vector<SearchHit> hits =
        bank.search_top_k(provider.embed(probe.question), k);
    for (const auto& hit : hits) {
        result.evidence.emplace_back(hit.entry->id, hit.entry->text);
    }
    result.predicted = detail::one_shot_answer(probe.question, hits, provider);

    std::string prompt = render_prompt(
        AgentRole::judge, {{"question", probe.question},
                           {"gold_answer", probe.gold_answer},
                           {"generated_answer", result.predicted}});
    std::string response = provider.complete({AgentRole::judge, prompt});
    result.verdict = ProbeVerdict::correct;
    try {
        nlohmann::json parsed =
            parse_structured(response, {PayloadKind::json_object, {"label"}, {}});
        std::string label = text::normalize(json_string_or(parsed, "label"));
        if (label == "wrong") result.verdict = ProbeVerdict::failed;
    } catch (const Error&) {
        // conservative: noise is not a failure signal
    }
    return result;
}

// Converts one failed probe into a repair proposal; NOOP is a valid
// outcome (unanswerable gold, or the answers were equivalent after all).
inline RepairProposal propose_repair(const ProbeResult& result,
                                     Provider& provider) {
    if (result.verdict != ProbeVerdict::failed) {
        throw Error("propose_repair requires a failed probe");
    }
    std::string evidence_text = "(none)";
    if (!result.evidence.empty()) {
        evidence_text.clear();
        for (const auto& [id, entry_text] : result.evidence) {
            evidence_text += "- " + entry_text + "\n";
        }
    }
    std::string prompt = render_prompt(
        AgentRole::repairer, {{"question", result.probe.question},
                              {"gold_answer", result.probe.gold_answer},
                              {"model_answer", result.predicted},
                              {"evidence", evidence_text}});
    std::string response = provider.complete({AgentRole::repairer, prompt});

    RepairProposal proposal;
    try {
        nlohmann::json parsed =
            parse_structured(response, {PayloadKind::json_object, {"op"}, {}});
        std::string op = text::normalize(json_string_or(parsed, "op"));
        std::string fact = text::trim(json_string_or(parsed, "fact"));
        if (op == "add_fact" && !fact.empty()) {
            proposal.op = RepairOp::ADD_FACT;
            proposal.fact = fact;
        } else if (op == "noop" || (op == "add_fact" && fact.empty())) {
            proposal.op = RepairOp::NOOP;
        } else {
            throw UnparseableResponse(response);
        }
        proposal.target_speaker = json_string_or(parsed, "target_speaker");
        proposal.evidence_span = json_string_or(parsed, "evidence_span");
        proposal.confidence =
            std::clamp(json_number_or(parsed, "confidence", 0.0), 0.0, 1.0);
        proposal.reason = json_string_or(parsed, "reason");
    } catch (const Error&) {
        proposal = RepairProposal{};
        proposal.op = RepairOp::NOOP;
        proposal.reason = "parse-fallback";
    }
    return proposal;
}

// SKIP / MERGE / INSERT for one candidate fact against the current
// bank. No neighbor above the threshold means INSERT without a model
// call; parse failure also means INSERT because a repair must not be
// silently dropped.
inline ConsolidationDecision consolidate_fact(const MemoryBank& bank,
                                              const RepairProposal& proposal,
                                              double similarity_threshold,
                                              Provider& provider) {
    if (proposal.op != RepairOp::ADD_FACT) {
        throw Error("consolidate_fact requires an ADD_FACT proposal");
    }
    std::vector<double> fact_embedding = provider.embed(proposal.fact);
    std::vector<SearchHit> neighbors;
    if (!bank.empty()) {
        for (const auto& hit : bank.search_top_k(fact_embedding, 5)) {
            if (hit.score >= similarity_threshold) neighbors.push_back(hit);
        }
    }

    ConsolidationDecision decision;
    if (neighbors.empty()) {
        decision.action = ConsolidationAction::INSERT;
        decision.reason = "no similar entries";
        return decision;
    }

    std::string neighbor_text;
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        char score_buf[16];
        std::snprintf(score_buf, sizeof(score_buf), "%.4f",
                      neighbors[i].score);
        neighbor_text += std::to_string(i) + " | " + score_buf + " | " +
                         neighbors[i].entry->text + "\n";
    }
    std::string prompt = render_prompt(
        AgentRole::consolidator,
        {{"fact", proposal.fact}, {"neighbors", neighbor_text}});
    std::string response = provider.complete({AgentRole::consolidator, prompt});

    try {
        nlohmann::json parsed = parse_structured(
            response, {PayloadKind::json_object, {"action"}, {}});
        std::string action = text::normalize(json_string_or(parsed, "action"));
        decision.reason = json_string_or(parsed, "reason");
        if (action == "skip") {
            decision.action = ConsolidationAction::SKIP;
        } else if (action == "insert") {
            decision.action = ConsolidationAction::INSERT;
        } else if (action == "merge") {
            double index_raw = json_number_or(parsed, "merge_target_index", -1);
            std::string merged_fact =
                text::trim(json_string_or(parsed, "merged_fact"));
            auto index = static_cast<long long>(index_raw);
            if (index < 0 ||
                index >= static_cast<long long>(neighbors.size()) ||
                merged_fact.empty()) {
                log_warning("MERGE with invalid target or empty merged fact; "
                            "downgrading to INSERT");
                decision.action = ConsolidationAction::INSERT;
            } else {
                decision.action = ConsolidationAction::MERGE;
                decision.merge_target_id =
                    neighbors[static_cast<std::size_t>(index)].entry->id;
                decision.merged_fact = merged_fact;
            }
        } else {
            throw UnparseableResponse(response);
        }
    } catch (const Error&) {
        decision = ConsolidationDecision{};
        decision.action = ConsolidationAction::INSERT;
        decision.reason = "parse-fallback";
    }
    return decision;
}

// The full backward pass for one session. Repairs are consolidated
// sequentially against the evolving bank, in probe order, so earlier
// repairs are visible when later ones are checked for redundancy.
// Returns the per-session evolution trace.
inline nlohmann::ordered_json evolve_session(MemoryBank& bank,
                                             const SessionRecord& session,
                                             const EvolutionConfig& config,
                                             Provider& provider) {
    nlohmann::ordered_json trace;
    trace["session_id"] = session.session_id;
    trace["bank_size_before"] = bank.size();
    if (config.ablate_evolution) {
        trace["ablated"] = true;
        trace["bank_size_after"] = bank.size();
        return trace;
    }

    // Historical context: recent entries from earlier sessions only.
    BoundedView prior_view;
    prior_view.policy = ViewPolicy::recent;
    prior_view.limit = config.history_view_limit;
    for (const auto& entry : bank.entries()) {
        if (entry.session_id != session.session_id) {
            prior_view.entries.push_back(entry);
        }
    }
    if (prior_view.entries.size() > config.history_view_limit) {
        prior_view.entries.erase(
            prior_view.entries.begin(),
            prior_view.entries.end() -
                static_cast<std::ptrdiff_t>(config.history_view_limit));
    }

    std::vector<ProbeQA> probes =
        generate_probes(session, prior_view, config.probe_count, provider);
    nlohmann::ordered_json probes_json = nlohmann::ordered_json::array();
    for (const auto& p : probes) {
        probes_json.push_back({{"question", p.question},
                               {"answer", p.gold_answer},
                               {"type", to_string(p.probe_type)}});
    }
    trace["probes"] = std::move(probes_json);

    std::vector<ProbeResult> results;
    results.reserve(probes.size());
    nlohmann::ordered_json results_json = nlohmann::ordered_json::array();
    for (const auto& probe : probes) {
        ProbeResult result = verify_probe(bank, probe, config.k, provider);
        nlohmann::ordered_json evidence_ids = nlohmann::ordered_json::array();
        for (const auto& [id, entry_text] : result.evidence) {
            (void)entry_text;
            evidence_ids.push_back(id);
        }
        results_json.push_back(
            {{"question", probe.question},
             {"predicted", result.predicted},
             {"verdict",
              result.verdict == ProbeVerdict::correct ? "correct" : "failed"},
             {"evidence_ids", std::move(evidence_ids)}});
        results.push_back(std::move(result));
    }
    trace["results"] = std::move(results_json);

    nlohmann::ordered_json repairs_json = nlohmann::ordered_json::array();
    std::vector<RepairProposal> proposals;
    for (const auto& result : results) {
        if (result.verdict != ProbeVerdict::failed) continue;
        RepairProposal proposal = propose_repair(result, provider);
        repairs_json.push_back(
            {{"op", proposal.op == RepairOp::ADD_FACT ? "ADD_FACT" : "NOOP"},
             {"fact", proposal.fact},
             {"target_speaker", proposal.target_speaker},
             {"confidence", proposal.confidence},
             {"reason", proposal.reason}});
        proposals.push_back(std::move(proposal));
    }
    trace["proposals"] = std::move(repairs_json);

    nlohmann::ordered_json decisions_json = nlohmann::ordered_json::array();
    for (const auto& proposal : proposals) {
        if (proposal.op != RepairOp::ADD_FACT) continue;
        ConsolidationDecision decision = consolidate_fact(
            bank, proposal, config.similarity_threshold, provider);
        switch (decision.action) {
            case ConsolidationAction::SKIP:
                break;
            case ConsolidationAction::MERGE: {
                bank.apply_edit(EditAction::update(decision.merge_target_id,
                                                   decision.merged_fact));
                bank.set_embedding(decision.merge_target_id,
                                   provider.embed(decision.merged_fact));
                break;
            }
            case ConsolidationAction::INSERT: {
                EditAction add = EditAction::add(
                    proposal.fact, session.timestamp, session.session_id,
                    proposal.target_speaker, EntrySource::repair);
                auto id = bank.apply_edit(add);
                bank.set_embedding(*id, provider.embed(proposal.fact));
                break;
            }
        }
        decisions_json.push_back({{"action", to_string(decision.action)},
                                  {"merge_target_id", decision.merge_target_id},
                                  {"merged_fact", decision.merged_fact},
                                  {"reason", decision.reason}});
    }
    trace["decisions"] = std::move(decisions_json);
    trace["bank_size_after"] = bank.size();
    return trace;
}

}  // namespace memcycle
