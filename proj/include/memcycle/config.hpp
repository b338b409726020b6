#pragma once

// Run configuration with three layers: built-in defaults, a flat
// TOML-style config file, and command-line flag overrides (applied by
// the CLI). Everything that affects results lives here; the only
// environment input is the API credential.

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "memcycle/errors.hpp"
#include "memcycle/memory.hpp"
#include "memcycle/provider.hpp"
#include "memcycle/text.hpp"

namespace memcycle {

enum class ProviderMode { cassette, live };

struct RunConfig {
    // benchmark protocol defaults
    std::size_t k = 30;
    std::size_t refinement_budget = 3;  // H
    std::size_t probe_count = 5;        // J
    double theta = 0.55;
    std::size_t dimension = 16;
    std::uint64_t seed = 0;
    ViewPolicy view_policy = ViewPolicy::hybrid;
    std::size_t view_limit = 10;
    bool single_action = false;
    std::set<char> ablations;  // subset of {'C','R','E'}

    // provider
    ProviderMode provider_mode = ProviderMode::cassette;
    std::string base_url = "https://api.openai.com/v1";
    std::string cassette_path;
    std::string default_model = "gpt-4o-mini";
    std::map<std::string, std::string> role_models;  // role name -> model
    std::string embedding_model = "text-embedding-3-small";
    int max_tokens = 512;
    double temperature = 0.0;
    int parallelism = 4;

    // paths
    std::string dataset_path;
    std::string bank_path;
    std::string traces_dir;
    std::string report_path;

    bool ablated(char which) const { return ablations.count(which) != 0; }

    std::string model_for(AgentRole role) const {
        auto it = role_models.find(to_string(role));
        return it == role_models.end() ? default_model : it->second;
    }

    // Snapshot of every result-affecting field, recorded in reports.
    nlohmann::ordered_json snapshot() const {
        nlohmann::ordered_json j;
        j["k"] = k;
        j["H"] = refinement_budget;
        j["J"] = probe_count;
        j["theta"] = theta;
        j["dimension"] = dimension;
        j["seed"] = seed;
        j["view_policy"] = to_string(view_policy);
        j["view_limit"] = view_limit;
        j["single_action"] = single_action;
        std::string ablation_str;
        for (char c : ablations) ablation_str.push_back(c);
        j["ablations"] = ablation_str;
        j["provider_mode"] =
            provider_mode == ProviderMode::cassette ? "cassette" : "live";
        return j;
    }
};

inline std::set<char> parse_ablations(const std::string& spec) {
    std::set<char> out;
    for (char c : spec) {
        if (c == ',' || c == ' ' || c == '/') continue;
        char u = static_cast<char>(std::toupper(c));
        if (u != 'C' && u != 'R' && u != 'E') {
            throw ConfigError(std::string("unknown ablation flag: ") + c);
        }
        out.insert(u);
    }
    return out;
}

namespace detail {

struct ConfigValue {
    std::string raw;
    int line = 0;
};

// Minimal flat TOML subset: [section] headers, key = value lines,
// # comments, quoted strings, numbers, booleans.
inline std::map<std::string, ConfigValue> parse_config_file(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open config: " + path);
    std::map<std::string, ConfigValue> values;
    std::string section;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string trimmed = text::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        if (trimmed.front() == '[') {
            if (trimmed.back() != ']') {
                throw ConfigError(path + ":" + std::to_string(line_no) +
                                  ": malformed section header");
            }
            section = text::trim(trimmed.substr(1, trimmed.size() - 2));
            continue;
        }
        std::size_t eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected key = value");
        }
        std::string key = text::trim(trimmed.substr(0, eq));
        std::string value = text::trim(trimmed.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        std::string full_key = section.empty() ? key : section + "." + key;
        values[full_key] = {value, line_no};
    }
    return values;
}

inline std::size_t to_size(const std::string& raw, const std::string& key) {
    try {
        long long v = std::stoll(raw);
        if (v < 0) throw ConfigError("config key " + key + " must be >= 0");
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + " is not an integer: " + raw);
    }
}

inline double to_double(const std::string& raw, const std::string& key) {
    try {
        return std::stod(raw);
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + " is not a number: " + raw);
    }
}

inline bool to_bool(const std::string& raw, const std::string& key) {
    if (raw == "true") return true;
    if (raw == "false") return false;
    throw ConfigError("config key " + key + " is not a boolean: " + raw);
}

}  // namespace detail

// File layer: every key is optional; anything unset keeps its default.
// Unknown keys are errors so typos cannot silently change a run.
inline void apply_config_file(RunConfig& config, const std::string& path) {
    auto values = detail::parse_config_file(path);
    for (const auto& [key, value] : values) {
        const std::string& raw = value.raw;
        if (key == "k") {
            config.k = detail::to_size(raw, key);
        } else if (key == "h") {
            config.refinement_budget = detail::to_size(raw, key);
        } else if (key == "j") {
            config.probe_count = detail::to_size(raw, key);
        } else if (key == "theta") {
            config.theta = detail::to_double(raw, key);
        } else if (key == "dimension") {
            config.dimension = detail::to_size(raw, key);
        } else if (key == "seed") {
            config.seed = static_cast<std::uint64_t>(
                detail::to_size(raw, key));
        } else if (key == "view_policy") {
            config.view_policy = view_policy_from_string(raw);
        } else if (key == "view_limit") {
            config.view_limit = detail::to_size(raw, key);
        } else if (key == "single_action") {
            config.single_action = detail::to_bool(raw, key);
        } else if (key == "ablations") {
            config.ablations = parse_ablations(raw);
        } else if (key == "provider.mode") {
            if (raw == "cassette") {
                config.provider_mode = ProviderMode::cassette;
            } else if (raw == "live") {
                config.provider_mode = ProviderMode::live;
            } else {
                throw ConfigError("provider.mode must be cassette or live");
            }
        } else if (key == "provider.base_url") {
            config.base_url = raw;
        } else if (key == "provider.cassette") {
            config.cassette_path = raw;
        } else if (key == "provider.model") {
            config.default_model = raw;
        } else if (text::starts_with(key, "provider.model_")) {
            std::string role = key.substr(std::string("provider.model_").size());
            agent_role_from_string(role);  // validates
            config.role_models[role] = raw;
        } else if (key == "provider.embedding_model") {
            config.embedding_model = raw;
        } else if (key == "provider.max_tokens") {
            config.max_tokens = static_cast<int>(detail::to_size(raw, key));
        } else if (key == "provider.temperature") {
            config.temperature = detail::to_double(raw, key);
        } else if (key == "provider.parallelism") {
            config.parallelism = static_cast<int>(detail::to_size(raw, key));
        } else if (key == "paths.dataset") {
            config.dataset_path = raw;
        } else if (key == "paths.bank") {
            config.bank_path = raw;
        } else if (key == "paths.traces") {
            config.traces_dir = raw;
        } else if (key == "paths.report") {
            config.report_path = raw;
        } else {
            throw ConfigError(path + ":" + std::to_string(value.line) +
                              ": unknown config key \"" + key + "\"");
        }
    }
    if (config.theta <= 0.0 || config.theta >= 1.0) {
        throw ConfigError("theta must be in (0, 1)");
    }
}

}  // namespace memcycle
