#pragma once

// Benchmark orchestration: full construct -> evolve -> answer runs over
// a conversation dataset, per-question scoring, and report emission.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <semaphore>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memcycle/config.hpp"
#include "memcycle/construction.hpp"
#include "memcycle/dataset.hpp"
#include "memcycle/evolution.hpp"
#include "memcycle/log.hpp"
#include "memcycle/memory.hpp"
#include "memcycle/metrics.hpp"
#include "memcycle/provider.hpp"
#include "memcycle/retrieval.hpp"

namespace memcycle {

enum class JudgeLabel { CORRECT, WRONG };

inline const char* to_string(JudgeLabel label) {
    return label == JudgeLabel::CORRECT ? "CORRECT" : "WRONG";
}

// Semantic correctness via the judge model. Parse failures count as
// WRONG: the benchmark metric must never be inflated by judge noise.
// (The self-evolution verifier takes the opposite fallback for the
// mirrored reason.)
inline JudgeLabel judge_answer(const std::string& question,
                               const std::string& gold,
                               const std::string& predicted,
                               Provider& provider) {
    std::string prompt = render_prompt(
        AgentRole::judge, {{"question", question},
                           {"gold_answer", gold},
                           {"generated_answer", predicted}});
    std::string response = provider.complete({AgentRole::judge, prompt});
    try {
        nlohmann::json parsed =
            parse_structured(response, {PayloadKind::json_object, {"label"}, {}});
        std::string label = text::normalize(json_string_or(parsed, "label"));
        if (label == "correct") return JudgeLabel::CORRECT;
        if (label == "wrong") return JudgeLabel::WRONG;
    } catch (const Error&) {
    }
    return JudgeLabel::WRONG;
}

struct QuestionRecord {
    std::string question;
    QaCategory category = QaCategory::single_hop;
    std::string gold;
    std::string predicted;
    double f1 = 0.0;
    double b1 = 0.0;
    JudgeLabel judge_label = JudgeLabel::WRONG;
    std::string trace_ref;
    std::string error;  // nonempty when the provider failed mid-question
};

struct Aggregate {
    std::size_t count = 0;
    double f1_pct = 0.0;
    double b1_pct = 0.0;
    double acc_pct = 0.0;
};

struct RunReport {
    nlohmann::ordered_json config_snapshot;
    std::vector<QuestionRecord> questions;
    std::map<std::string, std::size_t> provider_calls;
    std::size_t adversarial_dropped = 0;
    bool partial = false;
};

inline Aggregate aggregate_over(const std::vector<QuestionRecord>& records) {
    Aggregate agg;
    double f1_sum = 0.0;
    double b1_sum = 0.0;
    double acc_sum = 0.0;
    for (const auto& r : records) {
        ++agg.count;
        f1_sum += r.f1;
        b1_sum += r.b1;
        acc_sum += r.judge_label == JudgeLabel::CORRECT ? 1.0 : 0.0;
    }
    if (agg.count > 0) {
        double n = static_cast<double>(agg.count);
        agg.f1_pct = 100.0 * f1_sum / n;
        agg.b1_pct = 100.0 * b1_sum / n;
        agg.acc_pct = 100.0 * acc_sum / n;
    }
    return agg;
}

inline std::map<std::string, Aggregate> report_aggregates(
    const RunReport& report) {
    std::map<std::string, Aggregate> out;
    out["overall"] = aggregate_over(report.questions);
    for (QaCategory category : kAllCategories) {
        std::vector<QuestionRecord> subset;
        for (const auto& r : report.questions) {
            if (r.category == category) subset.push_back(r);
        }
        if (!subset.empty()) out[to_string(category)] = aggregate_over(subset);
    }
    return out;
}

namespace detail {

inline std::string safe_filename(const std::string& raw) {
    std::string out;
    for (char c : raw) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                  (c >= '0' && c <= '9') || c == '-' || c == '_';
        out.push_back(ok ? c : '_');
    }
    return out;
}

}  // namespace detail

// Runs the full pipeline: construction + evolution per session in
// stream order, then answers and scores every QA over the frozen bank.
// In cassette mode answering is sequential so queue order reproduces;
// live mode answers questions concurrently under the parallelism bound.
inline RunReport run_experiment(const ConversationDataset& dataset,
                                const RunConfig& config, Provider& provider,
                                MemoryBank* bank_out = nullptr) {
    ConstructionConfig construction_config;
    construction_config.view_policy = config.view_policy;
    construction_config.view_limit = config.view_limit;
    construction_config.single_action = config.single_action;
    construction_config.ablate_guidance = config.ablated('C');

    EvolutionConfig evolution_config;
    evolution_config.probe_count = config.probe_count;
    evolution_config.k = config.k;
    evolution_config.similarity_threshold = config.theta;
    evolution_config.history_view_limit = config.view_limit;
    evolution_config.ablate_evolution = config.ablated('E');

    RetrievalConfig retrieval_config;
    retrieval_config.k = config.k;
    retrieval_config.budget = config.refinement_budget;
    retrieval_config.ablate_refinement = config.ablated('R');

    std::filesystem::path traces_dir;
    std::optional<std::ofstream> construction_log;
    if (!config.traces_dir.empty()) {
        traces_dir = config.traces_dir;
        std::filesystem::create_directories(traces_dir);
        construction_log.emplace(traces_dir / "construction.jsonl",
                                 std::ios::binary);
    }

    MemoryBank bank;
    for (const auto& session : dataset.sessions) {
        for (const auto& turn : session.turns) {
            construct_chunk(bank, turn, construction_config, provider,
                            construction_log ? &*construction_log : nullptr);
        }
        nlohmann::ordered_json evolution_trace =
            evolve_session(bank, session, evolution_config, provider);
        if (!traces_dir.empty()) {
            write_json_file(traces_dir /
                                ("session_" +
                                 detail::safe_filename(session.session_id) +
                                 ".json"),
                            evolution_trace);
        }
    }
    if (bank_out) *bank_out = bank;

    RunReport report;
    report.config_snapshot = config.snapshot();
    report.adversarial_dropped = dataset.adversarial_dropped;
    report.questions.resize(dataset.qa.size());

    auto answer_one = [&](std::size_t index) {
        const QaItem& item = dataset.qa[index];
        QuestionRecord record;
        record.question = item.question;
        record.category = item.category;
        record.gold = item.gold_answer;
        char ref[32];
        std::snprintf(ref, sizeof(ref), "qa_%04zu.json", index);
        record.trace_ref = ref;
        try {
            RetrievalState state = refine_and_probe(
                bank, item.question, retrieval_config, provider);
            record.predicted =
                generate_answer(item.question, state, config.k, provider);
            record.f1 = token_f1(record.predicted, item.gold_answer);
            record.b1 = bleu1(record.predicted, item.gold_answer);
            record.judge_label = judge_answer(item.question, item.gold_answer,
                                              record.predicted, provider);
            if (!traces_dir.empty()) {
                write_json_file(traces_dir / record.trace_ref,
                                retrieval_trace(state, record.predicted));
            }
        } catch (const Error& e) {
            record.error = e.what();
            record.judge_label = JudgeLabel::WRONG;
            log_warning("question " + std::to_string(index) +
                        " failed: " + record.error);
        }
        report.questions[index] = std::move(record);
    };

    bool concurrent = config.provider_mode == ProviderMode::live &&
                      config.parallelism > 1 && dataset.qa.size() > 1;
    if (concurrent) {
        std::counting_semaphore<64> slots(
            std::min(config.parallelism, 64));
        std::vector<std::future<void>> pending;
        pending.reserve(dataset.qa.size());
        for (std::size_t i = 0; i < dataset.qa.size(); ++i) {
            pending.push_back(std::async(std::launch::async, [&, i] {
                slots.acquire();
                answer_one(i);
                slots.release();
            }));
        }
        for (auto& f : pending) f.get();
    } else {
        for (std::size_t i = 0; i < dataset.qa.size(); ++i) answer_one(i);
    }

    for (const auto& r : report.questions) {
        if (!r.error.empty()) report.partial = true;
    }
    for (AgentRole role : kAllRoles) {
        std::size_t calls = provider.completion_calls(role);
        if (calls > 0) report.provider_calls[to_string(role)] = calls;
    }
    report.provider_calls["embedding"] = provider.embed_calls();
    return report;
}

inline nlohmann::ordered_json report_to_json(const RunReport& report) {
    nlohmann::ordered_json j;
    j["format"] = "memcycle-report";
    j["version"] = 1;
    j["config"] = report.config_snapshot;
    j["partial"] = report.partial;
    j["adversarial_dropped"] = report.adversarial_dropped;
    nlohmann::ordered_json calls = nlohmann::ordered_json::object();
    for (const auto& [role, count] : report.provider_calls) {
        calls[role] = count;
    }
    j["provider_calls"] = std::move(calls);
    nlohmann::ordered_json questions = nlohmann::ordered_json::array();
    for (const auto& r : report.questions) {
        nlohmann::ordered_json q;
        q["question"] = r.question;
        q["category"] = to_string(r.category);
        q["gold"] = r.gold;
        q["predicted"] = r.predicted;
        q["f1"] = r.f1;
        q["bleu1"] = r.b1;
        q["judge"] = to_string(r.judge_label);
        q["trace"] = r.trace_ref;
        if (!r.error.empty()) q["error"] = r.error;
        questions.push_back(std::move(q));
    }
    j["questions"] = std::move(questions);
    nlohmann::ordered_json aggregates = nlohmann::ordered_json::object();
    for (const auto& [name, agg] : report_aggregates(report)) {
        aggregates[name] = {{"count", agg.count},
                            {"f1", agg.f1_pct},
                            {"b1", agg.b1_pct},
                            {"acc", agg.acc_pct}};
    }
    j["aggregates"] = std::move(aggregates);
    return j;
}

namespace detail {

inline std::string pct_cell(const nlohmann::ordered_json& aggregates,
                            const std::string& category,
                            const std::string& metric) {
    if (!aggregates.contains(category)) return "—";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f",
                  aggregates.at(category).at(metric).get<double>());
    return buf;
}

}  // namespace detail

// Markdown table with the category columns; absent categories render
// as an em dash, not zero.
inline std::string report_to_markdown(const nlohmann::ordered_json& report) {
    const auto& aggregates = report.at("aggregates");
    static const std::array<std::pair<const char*, const char*>, 5> columns = {
        {{"Multi-Hop", "multi_hop"},
         {"Temporal", "temporal"},
         {"Open-Domain", "open_domain"},
         {"Single-Hop", "single_hop"},
         {"Overall", "overall"}}};
    std::ostringstream out;
    out << "# memcycle run report\n\n";
    out << "Questions scored: "
        << report.at("aggregates").at("overall").at("count").get<std::size_t>()
        << "\n\n";
    out << "| Metric |";
    for (const auto& [label, key] : columns) {
        (void)key;
        out << ' ' << label << " |";
    }
    out << "\n|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) out << "---|";
    out << "\n";
    static const std::array<std::pair<const char*, const char*>, 3> rows = {
        {{"F1", "f1"}, {"B1", "b1"}, {"ACC", "acc"}}};
    for (const auto& [row_label, metric] : rows) {
        out << "| " << row_label << " |";
        for (const auto& [label, key] : columns) {
            (void)label;
            out << ' ' << detail::pct_cell(aggregates, key, metric) << " |";
        }
        out << "\n";
    }
    return out.str();
}

inline void emit_report(const RunReport& report,
                        const std::filesystem::path& out_path) {
    nlohmann::ordered_json j = report_to_json(report);
    write_json_file(out_path, j);
    std::filesystem::path md_path = out_path;
    md_path.replace_extension(".md");
    std::ofstream md(md_path, std::ios::binary);
    if (!md) throw IoFailure("cannot open for write: " + md_path.string());
    md << report_to_markdown(j);
}

}  // namespace memcycle
