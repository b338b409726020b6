#pragma once

// Model access behind one interface: chat completion + embedding.
// CassetteProvider replays recorded responses for deterministic
// offline runs; the live HTTP adapter lives in live_provider.hpp.

#include <array>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memcycle/embedding.hpp"
#include "memcycle/errors.hpp"

namespace memcycle {

enum class AgentRole {
    meta_construction,
    memory_manager,
    meta_answerability,
    query_rewriter,
    answerer,
    probe_generator,
    judge,
    repairer,
    consolidator,
};

inline constexpr std::array<AgentRole, 9> kAllRoles = {
    AgentRole::meta_construction, AgentRole::memory_manager,
    AgentRole::meta_answerability, AgentRole::query_rewriter,
    AgentRole::answerer,           AgentRole::probe_generator,
    AgentRole::judge,              AgentRole::repairer,
    AgentRole::consolidator,
};

inline const char* to_string(AgentRole role) {
    switch (role) {
        case AgentRole::meta_construction: return "meta_construction";
        case AgentRole::memory_manager: return "memory_manager";
        case AgentRole::meta_answerability: return "meta_answerability";
        case AgentRole::query_rewriter: return "query_rewriter";
        case AgentRole::answerer: return "answerer";
        case AgentRole::probe_generator: return "probe_generator";
        case AgentRole::judge: return "judge";
        case AgentRole::repairer: return "repairer";
        case AgentRole::consolidator: return "consolidator";
    }
    return "unknown";
}

inline AgentRole agent_role_from_string(const std::string& s) {
    for (AgentRole r : kAllRoles) {
        if (s == to_string(r)) return r;
    }
    throw ConfigError("unknown agent role: " + s);
}

struct CompletionRequest {
    AgentRole role;
    std::string prompt;
    double temperature = 0.0;
    int max_tokens = 512;
};

// Every completion and embedding goes through here. The base class
// keeps per-role call counts so tests and reports can audit consumption.
class Provider {
public:
    virtual ~Provider() = default;

    std::string complete(const CompletionRequest& request) {
        if (request.prompt.empty()) throw Error("empty completion prompt");
        {
            std::lock_guard<std::mutex> lock(count_mutex_);
            ++completion_counts_[static_cast<std::size_t>(request.role)];
        }
        return complete_impl(request);
    }

    std::vector<double> embed(const std::string& txt) {
        if (txt.empty()) throw Error("cannot embed empty text");
        {
            std::lock_guard<std::mutex> lock(count_mutex_);
            ++embed_count_;
        }
        return embed_impl(txt);
    }

    std::size_t completion_calls(AgentRole role) const {
        std::lock_guard<std::mutex> lock(count_mutex_);
        return completion_counts_[static_cast<std::size_t>(role)];
    }

    std::size_t embed_calls() const {
        std::lock_guard<std::mutex> lock(count_mutex_);
        return embed_count_;
    }

    virtual std::size_t dimension() const = 0;

protected:
    virtual std::string complete_impl(const CompletionRequest& request) = 0;
    virtual std::vector<double> embed_impl(const std::string& txt) = 0;

private:
    mutable std::mutex count_mutex_;
    std::array<std::size_t, 9> completion_counts_{};
    std::size_t embed_count_ = 0;
};

enum class EmbeddingMode { hashed, recorded };

// Position-keyed replay: each role has a FIFO queue of recorded
// responses, consumed strictly in order. Divergence from the recorded
// run shows up as queue exhaustion, never as a silent default.
class CassetteProvider : public Provider {
public:
    explicit CassetteProvider(std::size_t dimension,
                              EmbeddingMode mode = EmbeddingMode::hashed)
        : dimension_(dimension), mode_(mode) {}

    static CassetteProvider load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoFailure("cannot open cassette: " + path);
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object() ||
            j.value("format", "") != "memcycle-cassette") {
            throw SchemaViolation("not a memcycle-cassette file: " + path);
        }
        std::string mode_str = j.value("embedding_mode", "hashed");
        EmbeddingMode mode = mode_str == "recorded" ? EmbeddingMode::recorded
                                                    : EmbeddingMode::hashed;
        CassetteProvider cassette(
            j.value("dimension", static_cast<std::size_t>(0)), mode);
        if (j.contains("completions")) {
            for (const auto& [role_name, queue] :
                 j.at("completions").items()) {
                AgentRole role = agent_role_from_string(role_name);
                for (const auto& resp : queue) {
                    cassette.push(role, resp.get<std::string>());
                }
            }
        }
        if (j.contains("embeddings")) {
            for (const auto& [digest, vec] : j.at("embeddings").items()) {
                cassette.record_embedding(digest,
                                          vec.get<std::vector<double>>());
            }
        }
        return cassette;
    }

    void save(const std::string& path) const {
        nlohmann::ordered_json j;
        j["format"] = "memcycle-cassette";
        j["version"] = 1;
        j["embedding_mode"] =
            mode_ == EmbeddingMode::hashed ? "hashed" : "recorded";
        j["dimension"] = dimension_;
        nlohmann::ordered_json completions = nlohmann::ordered_json::object();
        for (AgentRole role : kAllRoles) {
            const auto& q = queues_[static_cast<std::size_t>(role)];
            if (q.empty()) continue;
            completions[to_string(role)] =
                std::vector<std::string>(q.begin(), q.end());
        }
        j["completions"] = std::move(completions);
        nlohmann::ordered_json embeddings = nlohmann::ordered_json::object();
        for (const auto& [digest, vec] : recorded_embeddings_) {
            embeddings[digest] = vec;
        }
        j["embeddings"] = std::move(embeddings);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoFailure("cannot open for write: " + path);
        out << j.dump(2) << '\n';
    }

    void push(AgentRole role, std::string response) {
        queues_[static_cast<std::size_t>(role)].push_back(std::move(response));
    }

    void record_embedding(const std::string& digest_hex,
                          std::vector<double> vec) {
        recorded_embeddings_[digest_hex] = std::move(vec);
    }

    std::size_t remaining(AgentRole role) const {
        return queues_[static_cast<std::size_t>(role)].size();
    }

    std::size_t dimension() const override { return dimension_; }

protected:
    std::string complete_impl(const CompletionRequest& request) override {
        std::lock_guard<std::mutex> lock(mutex_);
        auto& queue = queues_[static_cast<std::size_t>(request.role)];
        auto& consumed = consumed_[static_cast<std::size_t>(request.role)];
        if (queue.empty()) {
            throw CassetteExhausted(to_string(request.role), consumed);
        }
        std::string response = std::move(queue.front());
        queue.pop_front();
        ++consumed;
        return response;
    }

    std::vector<double> embed_impl(const std::string& txt) override {
        if (mode_ == EmbeddingMode::hashed) {
            return hashed_embedding(txt, dimension_);
        }
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = recorded_embeddings_.find(text_digest_hex(txt));
        if (it == recorded_embeddings_.end()) {
            throw CassetteExhausted("embedding:" + text_digest_hex(txt), 0);
        }
        return it->second;
    }

private:
    std::size_t dimension_;
    EmbeddingMode mode_;
    std::mutex mutex_;
    std::array<std::deque<std::string>, 9> queues_;
    std::array<std::size_t, 9> consumed_{};
    std::map<std::string, std::vector<double>> recorded_embeddings_;
};

}  // namespace memcycle
