#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentwatch/agents.hpp"

namespace agentwatch {

struct LlmConfig {
    /// Full chat-completions URL, e.g. https://host/v1/chat/completions.
    std::string endpoint;
    std::string model;
    /// Name of the environment variable holding the API key (may be empty).
    std::string api_key_env = "OPENAI_API_KEY";
    double temperature = 0.0;
    int top_k = 10;
    int retry_budget = 2;
    double timeout_seconds = 60.0;
    int max_in_flight = 4;
    int max_tokens = 512;
    int retry_backoff_ms = 500;

    bool operator==(const LlmConfig&) const = default;
};

void to_json(nlohmann::json& j, const LlmConfig& config);
void from_json(const nlohmann::json& j, LlmConfig& config);

struct TokenLogprobs {
    std::string token;
    double logprob = 0.0;
    std::vector<std::pair<std::string, double>> top;  // (token, log-probability)
};

struct Completion {
    std::string text;
    std::vector<TokenLogprobs> tokens;
    std::string request_id;
};

/// Parses a chat-completions response body. Throws api_error.
Completion parse_completion(std::string_view body);

/// Thread-safe; share one instance between all backends of a run.
class ChatClient {
public:
    explicit ChatClient(LlmConfig config);

    /// Retries transport failures, 429 and 5xx up to the retry budget, then
    /// throws api_error.
    Completion complete(const std::string& system_prompt, const std::string& user_prompt,
                        std::optional<double> temperature = std::nullopt);

    const LlmConfig& config() const { return config_; }

private:
    nlohmann::json request_body(const std::string& system_prompt, const std::string& user_prompt,
                                 double temperature) const;

    LlmConfig config_;
    std::string scheme_host_port_;
    std::string path_;
    std::counting_semaphore<1024> in_flight_;
    std::atomic<std::uint64_t> counter_{0};
};

/// Replaces {KEY} for every KEY in `values`; other braces stay as they are.
std::string fill_template(std::string_view text, const std::map<std::string, std::string>& values);

/// Embedded prompt asset by file stem. Throws invalid_argument when unknown.
std::string_view prompt_asset(std::string_view name);

struct Prompts {
    std::string system;
    std::string user;
};

Prompts render_prompts(const AgentObservation& obs);

/// Strips code fences, keeps the outermost {...} and maps bare True/False to
/// JSON booleans. std::nullopt when nothing parses.
std::optional<nlohmann::json> lenient_json(std::string_view generation);

/// Maps a generation to an action for the observing role; Malformed when it
/// cannot.
Action parse_action(std::string_view generation, const AgentObservation& obs);

/// Renormalized top-k vectors at the monitored numerals: suspect ids in the
/// "character" field and in-range ids in "thoughts" for whodunit, every
/// numeral for commons. Tokens are aligned to characters by cumulative length.
std::vector<std::vector<double>> extract_positions(std::string_view generation,
                                                   const std::vector<TokenLogprobs>& tokens,
                                                   EnvKind env, int n_suspects);

class LlmBackend : public AgentBackend {
public:
    LlmBackend(std::shared_ptr<ChatClient> client,
               std::optional<double> resample_temperature = std::nullopt);

    AgentDecision decide(const AgentObservation& obs) override;
    AgentDecision resample(const AgentObservation& obs) override;

private:
    AgentDecision run(const AgentObservation& obs, std::optional<double> temperature);

    std::shared_ptr<ChatClient> client_;
    std::optional<double> resample_temperature_;
};

} // namespace agentwatch
