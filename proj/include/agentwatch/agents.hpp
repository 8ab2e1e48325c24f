#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agentwatch/actions.hpp"
#include "agentwatch/channel.hpp"
#include "agentwatch/commons.hpp"
#include "agentwatch/game.hpp"
#include "agentwatch/whodunit.hpp"

namespace agentwatch {

enum class EnvKind { whodunit, commons };
std::string_view to_string(EnvKind kind);
EnvKind env_kind_from_string(std::string_view text);

enum class CommonsPhase { harvest, discuss };

struct CommonsView {
    CommonsPhase phase = CommonsPhase::harvest;
    int round = 1;
    int max_rounds = 12;
    double stock = 0.0;
    double R0 = 0.0;
    double gamma = 0.0;
};

/// Everything an agent may look at on its turn. The channel holds exactly the
/// messages every agent can see.
struct AgentObservation {
    EnvKind env = EnvKind::whodunit;
    int agent_id = 0;
    std::string name;
    Role role = Role::player;
    std::vector<std::string> agent_names;

    // whodunit
    Variant variant = Variant::asymmetric;
    AttributeSchema schema;
    int n_suspects = 0;
    KnowledgeSet knowledge;

    CommunicationChannel channel;
    int turn_index = 1;
    int turn_limit = 0;

    std::optional<CommonsView> commons;
};

AgentObservation observe(const WhodunitState& state, int agent);
AgentObservation observe(const CommonsState& state, int agent, CommonsPhase phase);

/// One instance per agent per game.
class AgentBackend {
public:
    virtual ~AgentBackend() = default;

    /// Throws backend_failure on unrecoverable errors.
    virtual AgentDecision decide(const AgentObservation& obs) = 0;

    /// Re-invocation at the same state after a resample trigger.
    virtual AgentDecision resample(const AgentObservation& obs) { return decide(obs); }
};

} // namespace agentwatch
