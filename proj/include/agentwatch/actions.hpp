#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace agentwatch {

enum class AsymPrime { request_specific, request_broad, accuse, respond, respond_broad };

/// Accuser / Intel action in the asymmetric game.
///   request_specific: target, property, value
///   request_broad:    nothing
///   accuse:           target
///   respond:          answer (the question comes from the pending request)
///   respond_broad:    property, value, broad_list
struct AsymAction {
    AsymPrime prime = AsymPrime::request_broad;
    std::optional<int> target;
    std::optional<std::string> property;
    std::optional<std::string> value;
    std::optional<bool> answer;
    std::vector<int> broad_list;

    bool operator==(const AsymAction&) const = default;
};

struct Fact {
    std::string property;
    std::string value;

    bool operator==(const Fact&) const = default;
};

enum class SymPrime { share, accuse, skip };

struct SymAction {
    SymPrime prime = SymPrime::skip;
    std::optional<int> fact_index;  // 0-based into the player's own facts
    std::optional<int> target;
    // What the player actually wrote when it differs from its own fact list.
    // The environment renders it as-is; truthfulness is not checked.
    std::optional<Fact> stated;

    bool operator==(const SymAction&) const = default;
};

enum class CommonsPrime { harvest, discuss };

struct CommonsAction {
    CommonsPrime prime = CommonsPrime::harvest;
    double amount = 0.0;
    std::string text;

    bool operator==(const CommonsAction&) const = default;
};

/// A generation that could not be turned into an action.
struct Malformed {
    std::string reason;

    bool operator==(const Malformed&) const = default;
};

using Action = std::variant<Malformed, AsymAction, SymAction, CommonsAction>;

/// What a backend produced for one turn: the action, the raw text and the
/// probability vectors at the positions that matter for the monitor.
struct AgentDecision {
    Action action;
    std::string generation;
    std::vector<std::vector<double>> positions;

    bool operator==(const AgentDecision&) const = default;
};

std::string_view to_string(AsymPrime prime);
std::string_view to_string(SymPrime prime);
std::string_view to_string(CommonsPrime prime);

void to_json(nlohmann::json& j, const Action& action);
void from_json(const nlohmann::json& j, Action& action);
void to_json(nlohmann::json& j, const AgentDecision& decision);
void from_json(const nlohmann::json& j, AgentDecision& decision);

} // namespace agentwatch
