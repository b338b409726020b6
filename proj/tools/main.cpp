// memcycle command-line entry point. Subcommands cover the pipeline:
// construct / answer / evolve / evaluate / replay / render.

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "memcycle/config.hpp"
#include "memcycle/construction.hpp"
#include "memcycle/dataset.hpp"
#include "memcycle/evolution.hpp"
#include "memcycle/harness.hpp"
#include "memcycle/live_provider.hpp"
#include "memcycle/memory.hpp"
#include "memcycle/provider.hpp"
#include "memcycle/render.hpp"
#include "memcycle/retrieval.hpp"

namespace {

using memcycle::RunConfig;

struct CliOptions {
    std::string config_file;
    std::optional<std::string> dataset;
    std::optional<std::string> bank;
    std::optional<std::string> provider;
    std::optional<std::string> cassette;
    std::optional<std::string> report_out;
    std::optional<std::string> traces_dir;
    std::optional<std::string> ablate;
    std::optional<std::size_t> k;
    std::optional<std::size_t> budget;
    std::optional<std::size_t> probes;
    std::optional<std::size_t> dimension;
    std::optional<double> theta;
    std::optional<std::uint64_t> seed;
};

void add_common_options(CLI::App* cmd, CliOptions& opts) {
    cmd->add_option("--config", opts.config_file, "config file (flat TOML)");
    cmd->add_option("--dataset", opts.dataset, "conversation dataset JSON");
    cmd->add_option("--bank", opts.bank, "memory bank JSONL path");
    cmd->add_option("--provider", opts.provider,
                    "provider mode: cassette | live");
    cmd->add_option("--cassette", opts.cassette, "cassette JSON path");
    cmd->add_option("--report-out", opts.report_out, "report output path");
    cmd->add_option("--traces-dir", opts.traces_dir, "trace output directory");
    cmd->add_option("--ablate", opts.ablate,
                    "ablations, e.g. C,R,E (guidance / refinement / evolution)");
    cmd->add_option("--k", opts.k, "retrieval budget (top-k entries)");
    cmd->add_option("--H", opts.budget, "iterative refinement budget");
    cmd->add_option("--J", opts.probes, "probe QA pairs per session");
    cmd->add_option("--theta", opts.theta,
                    "consolidation similarity threshold in (0,1)");
    cmd->add_option("--dimension", opts.dimension, "embedding dimension");
    cmd->add_option("--seed", opts.seed, "run seed recorded in reports");
}

RunConfig build_config(const CliOptions& opts) {
    RunConfig config;
    if (!opts.config_file.empty()) {
        memcycle::apply_config_file(config, opts.config_file);
    }
    if (opts.dataset) config.dataset_path = *opts.dataset;
    if (opts.bank) config.bank_path = *opts.bank;
    if (opts.cassette) config.cassette_path = *opts.cassette;
    if (opts.report_out) config.report_path = *opts.report_out;
    if (opts.traces_dir) config.traces_dir = *opts.traces_dir;
    if (opts.provider) {
        if (*opts.provider == "cassette") {
            config.provider_mode = memcycle::ProviderMode::cassette;
        } else if (*opts.provider == "live") {
            config.provider_mode = memcycle::ProviderMode::live;
        } else {
            throw memcycle::ConfigError("--provider must be cassette or live");
        }
    }
    if (opts.ablate) config.ablations = memcycle::parse_ablations(*opts.ablate);
    if (opts.k) config.k = *opts.k;
    if (opts.budget) config.refinement_budget = *opts.budget;
    if (opts.probes) config.probe_count = *opts.probes;
    if (opts.theta) config.theta = *opts.theta;
    if (opts.dimension) config.dimension = *opts.dimension;
    if (opts.seed) config.seed = *opts.seed;
    if (config.k == 0) throw memcycle::ConfigError("k must be positive");
    if (config.probe_count == 0)
        throw memcycle::ConfigError("J must be positive");
    return config;
}

std::unique_ptr<memcycle::Provider> make_provider(RunConfig& config) {
    if (config.provider_mode == memcycle::ProviderMode::cassette) {
        if (config.cassette_path.empty()) {
            throw memcycle::ConfigError(
                "cassette mode needs --cassette (or provider.cassette)");
        }
        auto cassette = std::make_unique<memcycle::CassetteProvider>(
            memcycle::CassetteProvider::load(config.cassette_path));
        if (cassette->dimension() != 0) {
            config.dimension = cassette->dimension();
        }
        return cassette;
    }
    const char* key = std::getenv("MEMCYCLE_API_KEY");
    return std::make_unique<memcycle::LiveProvider>(config,
                                                    key ? key : "");
}

std::string require(const std::string& value, const char* what) {
    if (value.empty()) {
        throw memcycle::ConfigError(std::string("missing required ") + what);
    }
    return value;
}

void cmd_construct(const CliOptions& opts, bool with_evolve) {
    RunConfig config = build_config(opts);
    auto provider = make_provider(config);
    auto dataset =
        memcycle::ingest_dataset(require(config.dataset_path, "--dataset"));
    std::string bank_path = require(config.bank_path, "--bank");

    memcycle::ConstructionConfig cc;
    cc.view_policy = config.view_policy;
    cc.view_limit = config.view_limit;
    cc.single_action = config.single_action;
    cc.ablate_guidance = config.ablated('C');
    memcycle::EvolutionConfig ec;
    ec.probe_count = config.probe_count;
    ec.k = config.k;
    ec.similarity_threshold = config.theta;
    ec.history_view_limit = config.view_limit;
    ec.ablate_evolution = config.ablated('E');

    std::optional<std::ofstream> chunk_log;
    if (!config.traces_dir.empty()) {
        std::filesystem::create_directories(config.traces_dir);
        chunk_log.emplace(
            std::filesystem::path(config.traces_dir) / "construction.jsonl",
            std::ios::binary);
    }

    memcycle::MemoryBank bank;
    for (const auto& session : dataset.sessions) {
        for (const auto& turn : session.turns) {
            memcycle::construct_chunk(bank, turn, cc, *provider,
                                      chunk_log ? &*chunk_log : nullptr);
        }
        if (with_evolve) {
            auto trace = memcycle::evolve_session(bank, session, ec, *provider);
            if (!config.traces_dir.empty()) {
                memcycle::write_json_file(
                    std::filesystem::path(config.traces_dir) /
                        ("session_" + session.session_id + ".json"),
                    trace);
            }
        }
    }
    memcycle::save_bank(bank, bank_path);
    std::printf("bank written: %s (%zu entries)\n", bank_path.c_str(),
                bank.size());
}

void cmd_answer(const CliOptions& opts) {
    RunConfig config = build_config(opts);
    auto provider = make_provider(config);
    auto dataset =
        memcycle::ingest_dataset(require(config.dataset_path, "--dataset"));
    memcycle::MemoryBank bank =
        memcycle::load_bank(require(config.bank_path, "--bank"));

    memcycle::RetrievalConfig rc;
    rc.k = config.k;
    rc.budget = config.refinement_budget;
    rc.ablate_refinement = config.ablated('R');

    nlohmann::ordered_json answers = nlohmann::ordered_json::array();
    std::size_t index = 0;
    for (const auto& item : dataset.qa) {
        auto state =
            memcycle::refine_and_probe(bank, item.question, rc, *provider);
        std::string answer = memcycle::generate_answer(item.question, state,
                                                       config.k, *provider);
        char ref[32];
        std::snprintf(ref, sizeof(ref), "qa_%04zu.json", index);
        if (!config.traces_dir.empty()) {
            memcycle::write_json_file(
                std::filesystem::path(config.traces_dir) / ref,
                memcycle::retrieval_trace(state, answer));
        }
        answers.push_back({{"question", item.question},
                           {"predicted", answer},
                           {"trace", ref}});
        ++index;
    }
    if (!config.report_path.empty()) {
        memcycle::write_json_file(config.report_path, answers);
        std::printf("answers written: %s\n", config.report_path.c_str());
    } else {
        std::printf("%s\n", answers.dump(2).c_str());
    }
}

void cmd_evolve(const CliOptions& opts, const std::string& session_id,
                const std::string& bank_out) {
    RunConfig config = build_config(opts);
    auto provider = make_provider(config);
    auto dataset =
        memcycle::ingest_dataset(require(config.dataset_path, "--dataset"));
    memcycle::MemoryBank bank =
        memcycle::load_bank(require(config.bank_path, "--bank"));

    const memcycle::SessionRecord* session = nullptr;
    for (const auto& s : dataset.sessions) {
        if (s.session_id == session_id) {
            session = &s;
            break;
        }
    }
    if (!session) {
        throw memcycle::ConfigError("session not found in dataset: " +
                                    session_id);
    }
    memcycle::EvolutionConfig ec;
    ec.probe_count = config.probe_count;
    ec.k = config.k;
    ec.similarity_threshold = config.theta;
    ec.history_view_limit = config.view_limit;
    ec.ablate_evolution = config.ablated('E');
    auto trace = memcycle::evolve_session(bank, *session, ec, *provider);
    if (!config.traces_dir.empty()) {
        memcycle::write_json_file(
            std::filesystem::path(config.traces_dir) /
                ("session_" + session_id + ".json"),
            trace);
    }
    std::string out = bank_out.empty() ? config.bank_path : bank_out;
    memcycle::save_bank(bank, out);
    std::printf("bank written: %s (%zu entries)\n", out.c_str(), bank.size());
}

void cmd_evaluate(const CliOptions& opts) {
    RunConfig config = build_config(opts);
    auto provider = make_provider(config);
    auto dataset =
        memcycle::ingest_dataset(require(config.dataset_path, "--dataset"));
    memcycle::MemoryBank bank;
    auto report =
        memcycle::run_experiment(dataset, config, *provider, &bank);
    std::string report_path = require(config.report_path, "--report-out");
    memcycle::emit_report(report, report_path);
    if (!config.bank_path.empty()) {
        memcycle::save_bank(bank, config.bank_path);
    }
    std::printf("report written: %s%s\n", report_path.c_str(),
                report.partial ? " (PARTIAL: some questions failed)" : "");
}

void cmd_replay(const CliOptions& opts, const std::string& golden_path) {
    RunConfig config = build_config(opts);
    auto provider = make_provider(config);
    auto dataset =
        memcycle::ingest_dataset(require(config.dataset_path, "--dataset"));

    auto scratch = std::filesystem::temp_directory_path() /
                   ("memcycle-replay-" + std::to_string(::getpid()));
    std::filesystem::create_directories(scratch);
    config.traces_dir = (scratch / "traces").string();
    auto report = memcycle::run_experiment(dataset, config, *provider);
    std::filesystem::path replay_report = scratch / "report.json";
    memcycle::emit_report(report, replay_report);

    std::string golden = memcycle::read_file(golden_path);
    std::string replayed = memcycle::read_file(replay_report);
    std::filesystem::remove_all(scratch);
    if (golden != replayed) {
        std::size_t at = 0;
        std::size_t limit = std::min(golden.size(), replayed.size());
        while (at < limit && golden[at] == replayed[at]) ++at;
        throw memcycle::Error(
            "replay mismatch: report diverges from golden at byte " +
            std::to_string(at) + " (golden " + std::to_string(golden.size()) +
            " bytes, replayed " + std::to_string(replayed.size()) + " bytes)");
    }
    std::printf("replay OK: report matches %s byte-for-byte\n",
                golden_path.c_str());
}

void cmd_render(const std::string& report_path, const std::string& out_base) {
    nlohmann::ordered_json report = nlohmann::ordered_json::parse(
        memcycle::read_file(report_path), nullptr, false);
    if (report.is_discarded() || !report.contains("aggregates")) {
        throw memcycle::SchemaViolation("not a memcycle report: " +
                                        report_path);
    }
    std::filesystem::path base(out_base);
    std::filesystem::path md_path = base;
    md_path.replace_extension(".md");
    std::filesystem::path svg_path = base;
    svg_path.replace_extension(".svg");
    {
        std::ofstream md(md_path, std::ios::binary);
        if (!md) {
            throw memcycle::IoFailure("cannot open for write: " +
                                      md_path.string());
        }
        md << memcycle::report_to_markdown(report);
    }
    {
        std::ofstream svg(svg_path, std::ios::binary);
        if (!svg) {
            throw memcycle::IoFailure("cannot open for write: " +
                                      svg_path.string());
        }
        svg << memcycle::report_to_svg(report);
    }
    std::printf("rendered: %s, %s\n", md_path.string().c_str(),
                svg_path.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"memcycle: memory-cycle orchestration engine"};
    app.require_subcommand(1);

    CliOptions opts;
    std::function<void()> action;

    auto* construct = app.add_subcommand(
        "construct", "build a memory bank from a conversation dataset");
    add_common_options(construct, opts);
    bool with_evolve = false;
    construct->add_flag("--evolve", with_evolve,
                        "run per-session self-evolution after construction");
    construct->callback([&] { action = [&] { cmd_construct(opts, with_evolve); }; });

    auto* answer = app.add_subcommand(
        "answer", "answer dataset questions over an existing bank");
    add_common_options(answer, opts);
    answer->callback([&] { action = [&] { cmd_answer(opts); }; });

    auto* evolve = app.add_subcommand(
        "evolve", "run self-evolution for one session over an existing bank");
    add_common_options(evolve, opts);
    std::string session_id;
    std::string bank_out;
    evolve->add_option("--session", session_id, "session id to evolve")
        ->required();
    evolve->add_option("--bank-out", bank_out,
                       "output bank path (default: overwrite --bank)");
    evolve->callback(
        [&] { action = [&] { cmd_evolve(opts, session_id, bank_out); }; });

    auto* evaluate = app.add_subcommand(
        "evaluate", "full run: construct, evolve, answer, score, report");
    add_common_options(evaluate, opts);
    evaluate->callback([&] { action = [&] { cmd_evaluate(opts); }; });

    auto* replay = app.add_subcommand(
        "replay",
        "re-run a committed cassette and verify the golden report "
        "byte-for-byte");
    add_common_options(replay, opts);
    std::string golden_path;
    replay->add_option("--golden", golden_path, "golden report JSON path")
        ->required();
    replay->callback(
        [&] { action = [&] { cmd_replay(opts, golden_path); }; });

    auto* render = app.add_subcommand(
        "render", "render a report JSON to markdown and an SVG chart");
    std::string report_in;
    std::string render_out;
    render->add_option("--report", report_in, "report JSON path")->required();
    render->add_option("--out", render_out, "output base path")->required();
    render->callback(
        [&] { action = [&] { cmd_render(report_in, render_out); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        action();
    } catch (const memcycle::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 2;
    }
    return 0;
}
