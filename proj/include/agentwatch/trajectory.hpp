#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentwatch/actions.hpp"
#include "agentwatch/uncertainty.hpp"

namespace agentwatch {

enum class Outcome { success, wrong_accusation, timeout };

std::string_view to_string(Outcome outcome);
Outcome outcome_from_string(std::string_view text);

enum class InterventionKind { none, full_reset, round_reset, resample };

std::string_view to_string(InterventionKind kind);
InterventionKind intervention_kind_from_string(std::string_view text);

struct TurnRecord {
    int turn_index = 1;        // per-game counter, restarts after a full reset
    int cumulative_index = 1;  // never restarts
    int agent_id = 0;
    std::string role;
    AgentDecision decision;
    std::optional<FeatureVector> features;
    bool trigger_fired = false;
    std::optional<InterventionKind> intervention;

    bool operator==(const TurnRecord&) const = default;
};

struct CommonsResult {
    std::vector<double> stocks;  // stock left after each round's harvest
    double total_harvest = 0.0;
    int survival_time = 0;
    bool survived = false;
    double efficiency = 0.0;

    bool operator==(const CommonsResult&) const = default;
};

/// One played game. Whodunit games carry `outcome`; commons games carry
/// `commons`. An aborted game is flagged `invalid` and left out of metrics.
struct Trajectory {
    std::string game_id;
    int repetition = 0;
    std::vector<TurnRecord> turns;
    std::optional<Outcome> outcome;
    std::optional<int> accused_id;
    std::optional<CommonsResult> commons;
    bool invalid = false;
    std::string error;

    int length() const { return turns.empty() ? 0 : turns.back().cumulative_index; }
    bool accused() const { return accused_id.has_value(); }
    bool succeeded() const;
    bool intervened() const;

    bool operator==(const Trajectory&) const = default;
};

/// Each TurnRecord becomes one "turn" line, followed by one "outcome" line.
std::vector<nlohmann::json> to_jsonl_lines(const Trajectory& trajectory);
std::string to_jsonl(const Trajectory& trajectory);

/// Regroups JSONL lines (as produced above, possibly many games) into trajectories.
std::vector<Trajectory> parse_jsonl(std::string_view text);

void to_json(nlohmann::json& j, const TurnRecord& record);
void from_json(const nlohmann::json& j, TurnRecord& record);

} // namespace agentwatch
