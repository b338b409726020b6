#pragma once

// Live HTTP adapter for chat-completions-style JSON APIs. One concrete
// adapter; other vendors are configuration (base URL + model names),
// not code forks. Safe for concurrent calls under a parallelism bound.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "memcycle/config.hpp"
#include "memcycle/embedding.hpp"
#include "memcycle/errors.hpp"
#include "memcycle/provider.hpp"

namespace memcycle {

class LiveProvider : public Provider {
public:
    LiveProvider(const RunConfig& config, std::string api_key)
        : config_(config),
          api_key_(std::move(api_key)),
          slots_(std::min(std::max(config.parallelism, 1), 64)) {
        if (api_key_.empty()) {
            throw ProviderUnavailable(
                "live provider needs an API key (MEMCYCLE_API_KEY)");
        }
        split_base_url(config_.base_url, host_, path_prefix_);
    }

    std::size_t dimension() const override { return config_.dimension; }

protected:
    std::string complete_impl(const CompletionRequest& request) override {
        nlohmann::json body;
        body["model"] = config_.model_for(request.role);
        body["messages"] = nlohmann::json::array(
            {{{"role", "user"}, {"content", request.prompt}}});
        body["temperature"] = request.temperature;
        body["max_tokens"] = request.max_tokens;
        nlohmann::json response =
            post_with_retries("/chat/completions", body);
        try {
            return response.at("choices").at(0).at("message").at("content")
                .get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw ProviderUnavailable("completion response missing content: " +
                                      response.dump());
        }
    }

    std::vector<double> embed_impl(const std::string& txt) override {
        nlohmann::json body;
        body["model"] = config_.embedding_model;
        body["input"] = txt;
        nlohmann::json response = post_with_retries("/embeddings", body);
        std::vector<double> vec;
        try {
            vec = response.at("data").at(0).at("embedding")
                .get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
            throw ProviderUnavailable("embedding response missing vector: " +
                                      response.dump());
        }
        double n = l2_norm(vec);
        if (n > 0.0) {
            for (auto& x : vec) x /= n;
        }
        return vec;
    }

private:
    static void split_base_url(const std::string& base_url, std::string& host,
                               std::string& prefix) {
        std::size_t scheme_end = base_url.find("://");
        std::size_t path_start =
            scheme_end == std::string::npos
                ? base_url.find('/')
                : base_url.find('/', scheme_end + 3);
        if (path_start == std::string::npos) {
            host = base_url;
            prefix.clear();
        } else {
            host = base_url.substr(0, path_start);
            prefix = base_url.substr(path_start);
            while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
        }
    }

    nlohmann::json post_with_retries(const std::string& endpoint,
                                     const nlohmann::json& body) {
        static constexpr int kMaxAttempts = 3;
        static constexpr int kBackoffSeconds[] = {1, 2, 4};
        std::string payload = body.dump();
        std::string last_failure;
        slots_.acquire();
        struct Release {
            std::counting_semaphore<64>& s;
            ~Release() { s.release(); }
        } release{slots_};
        for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(
                    std::chrono::seconds(kBackoffSeconds[attempt - 1]));
            }
            httplib::Client client(host_);
            client.set_connection_timeout(30);
            client.set_read_timeout(120);
            client.set_bearer_token_auth(api_key_);
            auto result = client.Post(path_prefix_ + endpoint, payload,
                                      "application/json");
            if (!result) {
                last_failure = "transport error: " +
                               httplib::to_string(result.error());
                continue;  // transport faults are retryable
            }
            if (result->status >= 500) {
                last_failure =
                    "server error " + std::to_string(result->status);
                continue;
            }
            if (result->status != 200) {
                // 4xx-class failures are not retryable at this layer
                throw ProviderUnavailable(
                    "request rejected with status " +
                    std::to_string(result->status) + ": " + result->body);
            }
            nlohmann::json parsed =
                nlohmann::json::parse(result->body, nullptr, false);
            if (parsed.is_discarded()) {
                throw ProviderUnavailable("response is not JSON: " +
                                          result->body);
            }
            return parsed;
        }
        throw ProviderUnavailable("gave up after " +
                                  std::to_string(kMaxAttempts) +
                                  " attempts; last failure: " + last_failure);
    }

    RunConfig config_;
    std::string api_key_;
    std::string host_;
    std::string path_prefix_;
    std::counting_semaphore<64> slots_;
};

}  // namespace memcycle
