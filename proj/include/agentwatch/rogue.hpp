#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentwatch/agents.hpp"
#include "agentwatch/rng.hpp"

namespace agentwatch {

enum class RogueBehavior { hallucinate_fact, repeat_query, wrong_accusation, drop_known_fact };
std::string_view to_string(RogueBehavior behavior);
RogueBehavior rogue_behavior_from_string(std::string_view text);

struct EntropyBand {
    double lo = 0.0;
    double hi = 0.0;
    bool operator==(const EntropyBand&) const = default;
};

struct RogueProfile {
    double epsilon = 0.0;
    std::vector<std::pair<RogueBehavior, double>> behaviors{{RogueBehavior::hallucinate_fact, 1.0}};
    EntropyBand clean{0.0, 0.2};
    EntropyBand corrupt{0.8, 2.302585092994046};  // ln 10
    std::size_t candidates = 10;

    /// Throws invalid_config.
    void validate() const;
    bool operator==(const RogueProfile&) const = default;
};

void to_json(nlohmann::json& j, const RogueProfile& profile);
void from_json(const nlohmann::json& j, RogueProfile& profile);

/// Distribution over k outcomes with entropy exactly `target` (to ~1e-12),
/// from the family (1 - t) * one-hot + t * uniform. Requires 0 <= target <= ln k.
std::vector<double> distribution_with_entropy(double target, std::size_t k);

/// Wraps a base policy. Each turn is corrupted with probability epsilon by a
/// behavior drawn from the profile weights; positions carry entropies drawn
/// from the corrupt band on corrupted turns and the clean band otherwise.
class SyntheticRogue : public AgentBackend {
public:
    /// `truth` may be null outside whodunit.
    SyntheticRogue(RogueProfile profile, std::unique_ptr<AgentBackend> base, GameSpecPtr truth,
                   std::uint64_t seed);

    AgentDecision decide(const AgentObservation& obs) override;

    bool last_corrupted() const { return last_corrupted_; }
    std::size_t corrupted_turns() const { return corrupted_; }
    std::size_t turns() const { return turns_; }

private:
    Action corrupt(RogueBehavior behavior, const AgentObservation& obs);
    Action hallucinate(const AgentObservation& obs);

    RogueProfile profile_;
    std::unique_ptr<AgentBackend> base_;
    GameSpecPtr truth_;
    Rng rng_;
    bool last_corrupted_ = false;
    std::size_t corrupted_ = 0;
    std::size_t turns_ = 0;
};

} // namespace agentwatch
