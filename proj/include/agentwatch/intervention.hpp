#pragma once

#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "agentwatch/agents.hpp"
#include "agentwatch/commons.hpp"
#include "agentwatch/trajectory.hpp"
#include "agentwatch/whodunit.hpp"

namespace agentwatch {

struct InterventionPolicy {
    InterventionKind kind = InterventionKind::none;
    int cap = 1;
    /// Temperature override for resample; backend default when absent.
    std::optional<double> resample_temperature;

    /// Throws invalid_config.
    void validate() const;
    /// Throws invalid_config when `kind` makes no sense for `env`.
    void validate_for(EnvKind env) const;
    bool operator==(const InterventionPolicy&) const = default;
};

void to_json(nlohmann::json& j, const InterventionPolicy& policy);
void from_json(const nlohmann::json& j, InterventionPolicy& policy);

class TriggerBudget {
public:
    explicit TriggerBudget(int cap = 0) : cap_(cap) {}
    int cap() const { return cap_; }
    int used(const std::string& role) const;
    bool available(const std::string& role) const { return used(role) < cap_; }
    void consume(const std::string& role) { ++used_[role]; }
    const std::map<std::string, int>& usage() const { return used_; }

private:
    int cap_;
    std::map<std::string, int> used_;
};

/// True iff probability < tau and the role is under its cap; a true result
/// consumes one unit of the role's budget.
bool evaluate_trigger(double probability, double tau, TriggerBudget& budget, const std::string& role);

/// Empties the channel, restores the initial knowledge and restarts the turn
/// counter. Throws invalid_intervention once an accusation happened.
void apply_full_reset(WhodunitState& state);

/// Drops the messages after the last harvest checkpoint. The harvest log and
/// every message at or before the checkpoint stay untouched.
void apply_round_reset(CommonsState& state);

} // namespace agentwatch
