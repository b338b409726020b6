#pragma once

// Prompt templates for every agent role plus the {placeholder}
// renderer. Placeholders are bare identifiers in braces; literal JSON
// braces in the templates never match the placeholder pattern because
// they are followed by a quote.

#include <map>
#include <set>
#include <string>

#include "memcycle/errors.hpp"
#include "memcycle/provider.hpp"

namespace memcycle {

namespace prompts {

inline constexpr const char* kMetaConstruction = R"(You are a quality-control checker for a memory construction system. Given one conversation utterance, list every distinct factual statement it contains. Each fact must be an atomic, self-contained statement that could answer a WHO/WHAT/WHEN/WHERE/HOW MANY question.

Utterance (session {session_id}, {timestamp}):
[{speaker}] {utterance}

Current memory view:
{memory_view}

Rules:
- Extract EVERY fact - do not skip anything. Err on the side of over-extraction.
- Use the speaker's exact words for names, objects, dates, places, and quantities.
- One fact per line. Do NOT merge multiple facts into one line.
- Prefix each fact with the correct speaker name.
- Do NOT interpret emotions, themes, values, or symbolism.
- Do NOT paraphrase - preserve the original phrasing.

Output format:
FACTS:
- [Speaker] fact 1
- [Speaker] fact 2
- ...
)";

inline constexpr const char* kMemoryManager = R"(You are the Memory Manager for a conversational memory bank. Decide how to update memory for the new utterance, using the guidance and the current memory view.

New utterance (session {session_id}, {timestamp}):
[{speaker}] {utterance}

Current memory view (id | timestamp | text):
{memory_view}

Guidance:
{guidance}

Choose zero or more atomic edits:
- ADD a new fact entry when the utterance introduces information not yet in memory.
- UPDATE an existing entry (by id) when the utterance corrects or completes that exact entry.
- DELETE an existing entry (by id) only when it is plainly wrong or superseded.
- NONE when nothing is worth storing.

Keep entries atomic and self-contained. Filter greetings and filler. Never merge unrelated facts into one entry.

Output format (JSON array only):
[{"op": "ADD", "text": "..."}, {"op": "UPDATE", "target_id": "...", "text": "..."}, {"op": "DELETE", "target_id": "..."}]
Return [{"op": "NONE"}] if there is nothing to store.
)";

inline constexpr const char* kMetaAnswerability = R"(You are a Meta-Thinker agent for answerability checking in a memory-augmented QA system.

Question: {question}

Retrieved memories grouped by speaker (memory_id, timestamp, snippet):
{evidence_by_speaker}

Previous queries:
{previous_queries}

Goal: Minimize false NOT_ANSWERABLE while staying evidence-grounded.

Blocking-gap test: Return NOT_ANSWERABLE only if a missing fact or unresolved contradiction would CHANGE the final short answer. If a best-supported answer is already stable, return ANSWERABLE.

Granularity policy:
- Time questions: require exact day/date only if the question explicitly asks for it; otherwise accept the best unambiguous granularity.
- Who/what/which: one clearly supported entity is enough unless the question explicitly requests exhaustive output.
- Contradictions: only contradictions that change the final answer are blocking.

Anti-stall: If >=3 previous queries were attempted and the same non-blocking gap repeats, prefer ANSWERABLE at best-supported granularity.

Output format:
<decision>ANSWERABLE|NOT ANSWERABLE</decision>
<reason>1-3 sentences about the asked slot only.</reason>
<key-gaps>Ranked bullets if NOT-ANSWERABLE; NONE otherwise.</key-gaps>
<missing-speaker>speaker-1 | speaker-2 | both | unknown</missing-speaker>
<time-need>Required granularity and missing anchor, or NONE.</time-need>
<retrieval-guidance>Goal, suggested queries, keywords, constraints, avoid terms.</retrieval-guidance>
)";

inline constexpr const char* kQueryRewriter = R"(You are an expert Query Rewriter for conversation memory retrieval.

Question: {question}

Meta-Thinker diagnosis:
- Top gap: {top_gap}
- Missing speaker: {missing_speaker}
- Time need: {time_need}
- Retrieval guidance: {retrieval_guidance}

Previous queries:
{previous_queries}

Task: Generate EXACTLY ONE new retrieval query that targets the top gap and is maximally likely to retrieve new evidence.

Hard rules:
- Do NOT repeat any previous query verbatim or near-verbatim.
- MUST target the top gap only (do not broaden to multiple gaps).
- MUST include all constraints (entity + time/version) exactly as provided.
- If time need is provided, include both the relative phrase (e.g., "last year") and the computed absolute time (e.g., "2021").
- MUST avoid exhausted terms.
- Prefer disambiguation queries if contradiction exists.
- If missing speaker is specified, phrase the query to target that speaker's perspective.

Output format (JSON):
{"rewritten_query": "...", "strategy": "...", "target_speaker": "..."}
)";

inline constexpr const char* kAnswerer = R"(You are a question answering assistant working over retrieved conversation memories.

Question: {question}

Retrieved memories:
{evidence}

Answer the question using only the memories above. Be concise and specific: name the exact entities, dates, or details the question asks for. If the memories do not contain the answer, reply "Not mentioned in the conversation."

Answer:
)";

inline constexpr const char* kProbeGenerator = R"(You are a probe generator verifying a conversational memory bank. Write {probe_count} question-answer pairs grounded in the session below and, where useful, its historical context.

Session {session_id} ({timestamp}):
{session_text}

Historical context:
{history_view}

Cover three probe types:
- single_hop: factual recall of an explicit statement from this session.
- multi_session: connects this session with the historical context.
- temporal: dates, times, relative time expressions, or event order.

Aim for roughly {single_hop_quota} single_hop probes and split the rest between multi_session and temporal. Questions must be answerable from the conversation; answers must be short and factual.

Output format (JSON array only):
[{"question": "...", "answer": "...", "type": "single_hop|multi_session|temporal"}]
)";

inline constexpr const char* kJudge = R"(Task: Label an answer to a question as CORRECT or WRONG.

Inputs:
- Question: {question}
- Gold answer: {gold_answer}
- Generated answer: {generated_answer}

Instructions:
- The gold answer is usually concise. The generated answer might be longer, but be generous - as long as it touches on the same topic, count it as CORRECT.
- For time-related questions, be generous with format differences (e.g., "May 7th" vs "7 May").
- Provide a short explanation, then finish with CORRECT or WRONG.
- Return the label in JSON: {"label": "CORRECT"} or {"label": "WRONG"}.
)";

inline constexpr const char* kRepairer = R"(You are a memory-repair assistant for a two-speaker conversation memory system.

Inputs:
- Question: {question}
- Gold Answer: {gold_answer}
- Model Answer: {model_answer}
- Retrieved evidence snippets (from current memory; may be irrelevant if the info is missing):
{evidence}

Task: Decide whether to add one fact to memory so the system can answer correctly next time.

Decision rules (priority order):
- If Gold Answer is unanswerable, output NOOP.
- If Gold Answer is answerable and Model Answer is wrong or incomplete, output ADD_FACT. The fact should capture the key information from the Gold Answer.
- If Gold Answer and Model Answer are essentially equivalent, output NOOP.

Quality rules:
- Fact must be concrete, specific, and retrieval-friendly (include names, dates, details).
- Preserve relative date expressions verbatim; do NOT convert to absolute dates.
- Assign target_speaker based on who the fact is about.

Output format (JSON):
{"op": "ADD_FACT | NOOP", "target_speaker": "...", "fact": "...", "evidence_span": "...", "confidence": 0.0, "reason": "..."}
)";

inline constexpr const char* kConsolidator = R"(You are a memory deduplication assistant.

New proposed fact:
{fact}

Existing semantically similar memory entries (index | similarity | text):
{neighbors}

Decision:
- SKIP: An existing entry already fully covers the new fact.
- MERGE: The new fact describes the same event/attribute as an existing entry and adds a missing detail. Combine into one entry.
- INSERT: The new fact is about a different topic, event, or time period.

Critical rule: Different dates or different occurrences of the same activity = INSERT, never MERGE. Only merge when both texts refer to the exact same single event at the same time.

Output format (JSON):
{"action": "SKIP | MERGE | INSERT", "merge_target_index": -1, "merged_fact": "", "reason": "..."}
)";

}  // namespace prompts

inline const char* prompt_template(AgentRole role) {
    switch (role) {
        case AgentRole::meta_construction: return prompts::kMetaConstruction;
        case AgentRole::memory_manager: return prompts::kMemoryManager;
        case AgentRole::meta_answerability: return prompts::kMetaAnswerability;
        case AgentRole::query_rewriter: return prompts::kQueryRewriter;
        case AgentRole::answerer: return prompts::kAnswerer;
        case AgentRole::probe_generator: return prompts::kProbeGenerator;
        case AgentRole::judge: return prompts::kJudge;
        case AgentRole::repairer: return prompts::kRepairer;
        case AgentRole::consolidator: return prompts::kConsolidator;
    }
    throw Error("no template for role");
}

namespace detail {

inline bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool is_ident_char(char c) {
    return is_ident_start(c) || (c >= '0' && c <= '9');
}

inline std::set<std::string> template_placeholders(const std::string& tpl) {
    std::set<std::string> names;
    for (std::size_t i = 0; i < tpl.size(); ++i) {
        if (tpl[i] != '{') continue;
        std::size_t j = i + 1;
        if (j >= tpl.size() || !is_ident_start(tpl[j])) continue;
        while (j < tpl.size() && is_ident_char(tpl[j])) ++j;
        if (j < tpl.size() && tpl[j] == '}') {
            names.insert(tpl.substr(i + 1, j - i - 1));
            i = j;
        }
    }
    return names;
}

}  // namespace detail

// Substitutes every {placeholder} in the role's template. Every
// placeholder needs a slot and every slot must be a placeholder;
// silently dropping either would hide prompt bugs.
inline std::string render_prompt(
    AgentRole role, const std::map<std::string, std::string>& slots) {
    std::string tpl = prompt_template(role);
    std::set<std::string> placeholders = detail::template_placeholders(tpl);
    for (const auto& [name, value] : slots) {
        (void)value;
        if (!placeholders.count(name)) throw UnknownSlot(name);
    }
    for (const auto& name : placeholders) {
        if (!slots.count(name)) throw MissingSlot(name);
    }
    std::string out;
    out.reserve(tpl.size());
    for (std::size_t i = 0; i < tpl.size(); ++i) {
        if (tpl[i] == '{' && i + 1 < tpl.size() &&
            detail::is_ident_start(tpl[i + 1])) {
            std::size_t j = i + 1;
            while (j < tpl.size() && detail::is_ident_char(tpl[j])) ++j;
            if (j < tpl.size() && tpl[j] == '}') {
                out += slots.at(tpl.substr(i + 1, j - i - 1));
                i = j;
                continue;
            }
        }
        out.push_back(tpl[i]);
    }
    return out;
}

}  // namespace memcycle
