#pragma once

// Forward-path answering: answerability diagnosis, targeted query
// rewriting, the budget-bounded refine loop, and answer generation.
// The bank is read-only for the whole call.

#include <algorithm>
#include <map>
#include <set>
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

enum class Answerability { ANSWERABLE, NOT_ANSWERABLE };

enum class MissingSpeaker { speaker_a, speaker_b, both, unknown, none };

inline const char* to_string(MissingSpeaker m) {
    switch (m) {
        case MissingSpeaker::speaker_a: return "speaker_a";
        case MissingSpeaker::speaker_b: return "speaker_b";
        case MissingSpeaker::both: return "both";
        case MissingSpeaker::unknown: return "unknown";
        case MissingSpeaker::none: return "none";
    }
    return "none";
}

struct AnswerabilityVerdict {
    Answerability decision = Answerability::ANSWERABLE;
    std::string reason;
    std::vector<std::string> key_gaps;  // empty whenever ANSWERABLE
    MissingSpeaker missing_speaker = MissingSpeaker::none;
    std::string missing_speaker_raw;  // verbatim tag, kept for the rewriter
    std::string time_need;            // empty = none
    std::string retrieval_guidance;
};

struct EvidenceItem {
    std::string entry_id;
    std::string text;
    double score = 0.0;
    std::string speaker;
    std::string timestamp;
};

// Per-question loop state. queries[0] is the question itself; evidence
// is an insertion-ordered set deduplicated by entry id.
struct RetrievalState {
    std::string question;
    std::vector<std::string> queries;
    std::vector<EvidenceItem> evidence;
    std::size_t step = 0;
    std::vector<AnswerabilityVerdict> verdicts;
};

struct RetrievalConfig {
    std::size_t k = 30;
    std::size_t budget = 3;  // H
    bool ablate_refinement = false;  // /R: one-shot retrieval
};

namespace detail {

inline void merge_evidence(RetrievalState& state,
                           const std::vector<SearchHit>& hits) {
    for (const auto& hit : hits) {
        auto existing = std::find_if(
            state.evidence.begin(), state.evidence.end(),
            [&](const EvidenceItem& e) { return e.entry_id == hit.entry->id; });
        if (existing != state.evidence.end()) {
            existing->score = std::max(existing->score, hit.score);
        } else {
            state.evidence.push_back({hit.entry->id, hit.entry->text,
                                      hit.score, hit.entry->speaker,
                                      hit.entry->timestamp});
        }
    }
}

inline std::string format_evidence_by_speaker(
    const std::vector<EvidenceItem>& evidence) {
    if (evidence.empty()) return "(no memories retrieved)";
    std::vector<std::string> speakers;
    for (const auto& e : evidence) {
        if (std::find(speakers.begin(), speakers.end(), e.speaker) ==
            speakers.end()) {
            speakers.push_back(e.speaker);
        }
    }
    std::string out;
    for (const auto& speaker : speakers) {
        out += "Speaker: " + (speaker.empty() ? "(unknown)" : speaker) + "\n";
        for (const auto& e : evidence) {
            if (e.speaker != speaker) continue;
            out += "- " + e.entry_id + " | " + e.timestamp + " | " + e.text +
                   "\n";
        }
    }
    return out;
}

inline std::vector<std::string> parse_gap_bullets(const std::string& content) {
    std::vector<std::string> gaps;
    if (text::normalize(content) == "none") return gaps;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        std::size_t eol = content.find('\n', pos);
        if (eol == std::string::npos) eol = content.size();
        std::string line = text::trim(content.substr(pos, eol - pos));
        pos = eol + 1;
        if (line.empty()) continue;
        // strip one "- ", "* ", or "1." / "1)" ranking marker
        std::size_t b = 0;
        if (line[0] == '-' || line[0] == '*') {
            b = 1;
        } else {
            std::size_t d = 0;
            while (d < line.size() && line[d] >= '0' && line[d] <= '9') ++d;
            if (d > 0 && d < line.size() &&
                (line[d] == '.' || line[d] == ')')) {
                b = d + 1;
            }
        }
        std::string gap = text::trim(line.substr(b));
        if (!gap.empty()) gaps.push_back(gap);
    }
    return gaps;
}

inline MissingSpeaker parse_missing_speaker(const std::string& raw) {
    std::string v = text::normalize(raw);
    if (v.empty() || v == "none" || v == "n/a") return MissingSpeaker::none;
    if (v == "both") return MissingSpeaker::both;
    if (v.find("1") != std::string::npos || v == "speaker a" ||
        v == "speaker_a" || v == "speaker-a")
        return MissingSpeaker::speaker_a;
    if (v.find("2") != std::string::npos || v == "speaker b" ||
        v == "speaker_b" || v == "speaker-b")
        return MissingSpeaker::speaker_b;
    return MissingSpeaker::unknown;
}

inline bool gaps_equal_ci(const std::vector<std::string>& a,
                          const std::vector<std::string>& b) {
    std::set<std::string> sa, sb;
    for (const auto& g : a) sa.insert(text::normalize(g));
    for (const auto& g : b) sb.insert(text::normalize(g));
    return sa == sb;
}

}  // namespace detail

// Diagnoses whether the accumulated evidence suffices. Parse failures
// bias toward ANSWERABLE so a noisy model can stall retrieval but never
// wedge it; the anti-stall rule is enforced in code, not trusted to the
// prompt.
inline AnswerabilityVerdict check_answerability(const RetrievalState& state,
                                                Provider& provider) {
    std::string prompt = render_prompt(
        AgentRole::meta_answerability,
        {{"question", state.question},
         {"evidence_by_speaker", detail::format_evidence_by_speaker(
                                     state.evidence)},
         {"previous_queries", format_previous_queries(state.queries)}});
    std::string response =
        provider.complete({AgentRole::meta_answerability, prompt});

    AnswerabilityVerdict verdict;
    try {
        nlohmann::json tags = parse_structured(
            response, {PayloadKind::tagged,
                       {"decision"},
                       {"reason", "key-gaps", "missing-speaker", "time-need",
                        "retrieval-guidance"}});
        std::string decision =
            text::normalize(tags.at("decision").get<std::string>());
        if (decision.find("not") != std::string::npos) {
            verdict.decision = Answerability::NOT_ANSWERABLE;
        } else if (decision.find("answerable") != std::string::npos) {
            verdict.decision = Answerability::ANSWERABLE;
        } else {
            throw UnparseableResponse(response);
        }
        verdict.reason = json_string_or(tags, "reason");
        verdict.key_gaps =
            detail::parse_gap_bullets(json_string_or(tags, "key-gaps"));
        verdict.missing_speaker_raw = json_string_or(tags, "missing-speaker");
        verdict.missing_speaker =
            detail::parse_missing_speaker(verdict.missing_speaker_raw);
        std::string time_need = json_string_or(tags, "time-need");
        verdict.time_need =
            text::normalize(time_need) == "none" ? "" : time_need;
        verdict.retrieval_guidance = json_string_or(tags, "retrieval-guidance");
    } catch (const Error&) {
        verdict = AnswerabilityVerdict{};
        verdict.decision = Answerability::ANSWERABLE;
        verdict.reason = "parse-fallback";
        return verdict;
    }

    // Anti-stall: the same gap set repeating after >=3 refinement steps
    // forces ANSWERABLE at best-supported granularity.
    if (verdict.decision == Answerability::NOT_ANSWERABLE && state.step >= 3 &&
        !state.verdicts.empty() &&
        detail::gaps_equal_ci(verdict.key_gaps,
                              state.verdicts.back().key_gaps)) {
        verdict.decision = Answerability::ANSWERABLE;
        verdict.reason = "anti-stall: repeated gaps";
        verdict.key_gaps.clear();
    }
    if (verdict.decision == Answerability::ANSWERABLE) {
        verdict.key_gaps.clear();
    }
    return verdict;
}

// One new retrieval query targeting the diagnosed top gap. Repeats of a
// previous query (after normalization) get the top gap appended so the
// query set stays novel.
inline std::string rewrite_query(const RetrievalState& state,
                                 const AnswerabilityVerdict& verdict,
                                 Provider& provider) {
    if (verdict.decision != Answerability::NOT_ANSWERABLE) {
        throw Error("rewrite_query requires a NOT_ANSWERABLE verdict");
    }
    std::string top_gap = verdict.key_gaps.empty() ? "" : verdict.key_gaps[0];
    std::string novelty_suffix =
        !top_gap.empty()
            ? top_gap
            : (!verdict.retrieval_guidance.empty() ? verdict.retrieval_guidance
                                                   : "more specific details");

    std::string prompt = render_prompt(
        AgentRole::query_rewriter,
        {{"question", state.question},
         {"top_gap", top_gap.empty() ? "(unspecified)" : top_gap},
         {"missing_speaker", verdict.missing_speaker_raw.empty()
                                 ? "none"
                                 : verdict.missing_speaker_raw},
         {"time_need",
          verdict.time_need.empty() ? "NONE" : verdict.time_need},
         {"retrieval_guidance", verdict.retrieval_guidance.empty()
                                    ? "(none)"
                                    : verdict.retrieval_guidance},
         {"previous_queries", format_previous_queries(state.queries)}});
    std::string response =
        provider.complete({AgentRole::query_rewriter, prompt});

    std::string candidate;
    try {
        nlohmann::json parsed = parse_structured(
            response, {PayloadKind::json_object, {"rewritten_query"}, {}});
        candidate = text::trim(json_string_or(parsed, "rewritten_query"));
    } catch (const Error&) {
        candidate.clear();
    }
    if (candidate.empty()) {
        candidate = state.question + " " + novelty_suffix;
    }

    auto repeats_previous = [&](const std::string& q) {
        std::string n = text::normalize(q);
        return std::any_of(state.queries.begin(), state.queries.end(),
                           [&](const std::string& u) {
                               return text::normalize(u) == n;
                           });
    };
    if (repeats_previous(candidate)) {
        candidate += " " + novelty_suffix;
    }
    return candidate;
}

// The Refine-and-Probe loop. Evidence only grows; total searches are
// bounded by budget+1 and rewrites by budget. With refinement ablated
// this is plain one-shot retrieval with no diagnosis calls.
inline RetrievalState refine_and_probe(const MemoryBank& bank,
                                       const std::string& question,
                                       const RetrievalConfig& config,
                                       Provider& provider) {
    RetrievalState state;
    state.question = question;
    state.queries.push_back(question);
    detail::merge_evidence(state,
                           bank.search_top_k(provider.embed(question),
                                             config.k));
    if (config.ablate_refinement) {
        return state;
    }
    while (true) {
        AnswerabilityVerdict verdict = check_answerability(state, provider);
        state.verdicts.push_back(verdict);
        if (verdict.decision == Answerability::ANSWERABLE) break;
        if (state.step >= config.budget) break;
        std::string next_query = rewrite_query(state, verdict, provider);
        state.queries.push_back(next_query);
        detail::merge_evidence(
            state, bank.search_top_k(provider.embed(next_query), config.k));
        state.step += 1;
    }
    return state;
}

// Final answer over the accumulated evidence, capped to the retrieval
// budget k by score so unions across steps cannot blow up the prompt.
inline std::string generate_answer(const std::string& question,
                                   const RetrievalState& state,
                                   std::size_t evidence_cap,
                                   Provider& provider) {
    std::vector<EvidenceItem> ranked = state.evidence;
    std::sort(ranked.begin(), ranked.end(),
              [](const EvidenceItem& a, const EvidenceItem& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return a.entry_id < b.entry_id;
              });
    if (ranked.size() > evidence_cap) ranked.resize(evidence_cap);

    std::string evidence_text = "(no memories retrieved)";
    if (!ranked.empty()) {
        evidence_text.clear();
        for (const auto& e : ranked) {
            evidence_text +=
                "- [" + e.speaker + " | " + e.timestamp + "] " + e.text + "\n";
        }
    }
    std::string prompt =
        render_prompt(AgentRole::answerer, {{"question", question},
                                            {"evidence", evidence_text}});
    std::string response = provider.complete({AgentRole::answerer, prompt});
    return text::trim(response);
}

// Per-question trace consumed by the eval harness and the replay suite.
inline nlohmann::ordered_json retrieval_trace(const RetrievalState& state,
                                              const std::string& answer) {
    nlohmann::ordered_json trace;
    trace["question"] = state.question;
    trace["queries"] = state.queries;
    nlohmann::ordered_json verdicts = nlohmann::ordered_json::array();
    for (const auto& v : state.verdicts) {
        verdicts.push_back(
            {{"decision", v.decision == Answerability::ANSWERABLE
                              ? "ANSWERABLE"
                              : "NOT_ANSWERABLE"},
             {"reason", v.reason},
             {"key_gaps", v.key_gaps},
             {"missing_speaker", to_string(v.missing_speaker)},
             {"time_need", v.time_need},
             {"retrieval_guidance", v.retrieval_guidance}});
    }
    trace["verdicts"] = std::move(verdicts);
    nlohmann::ordered_json evidence = nlohmann::ordered_json::array();
    for (const auto& e : state.evidence) {
        evidence.push_back({{"id", e.entry_id}, {"score", e.score}});
    }
    trace["evidence"] = std::move(evidence);
    trace["steps"] = state.step;
    trace["answer"] = answer;
    return trace;
}

}  // namespace memcycle
