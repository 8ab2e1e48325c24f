#pragma once

#include <memory>
#include <vector>

#include "agentwatch/agents.hpp"

namespace agentwatch {

/// The accuser's reading of the channel.
struct AccuserView {
    std::vector<std::string> belief;        // culprit value per attribute
    std::vector<int> candidates;            // ascending suspect ids
    std::vector<std::vector<bool>> known;   // [id - 1][attribute]
};

/// Belief comes from the culprit facts, overridden by the value in this
/// agent's own latest request-specific on the same property.
AccuserView analyze_accuser(const AgentObservation& obs);

AsymAction accuser_policy(const AgentObservation& obs);
AsymAction intel_policy(const AgentObservation& obs);
SymAction player_policy(const AgentObservation& obs);

/// Suspects consistent with every share message in the channel plus `extra`.
std::vector<int> consistent_suspects(const AgentObservation& obs, std::span<const Fact> extra = {});

/// Numeral positions of a scripted generation are one-hot over this many
/// candidates.
inline constexpr std::size_t kScriptedVocabulary = 10;

/// Wraps an action into a decision with a JSON-like generation and one
/// one-hot position per id / amount numeral.
AgentDecision scripted_decision(const AgentObservation& obs, Action action);

class ScriptedWhodunitAgent : public AgentBackend {
public:
    AgentDecision decide(const AgentObservation& obs) override;
};

enum class HarvestStyle { sustainable, greedy };

/// sustainable takes stock / (2 n_agents), greedy takes stock / n_agents.
class ScriptedHarvester : public AgentBackend {
public:
    explicit ScriptedHarvester(HarvestStyle style) : style_(style) {}
    AgentDecision decide(const AgentObservation& obs) override;
    double planned_amount(double stock, int n_agents) const;

private:
    HarvestStyle style_;
};

} // namespace agentwatch
