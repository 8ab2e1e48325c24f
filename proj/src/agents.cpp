#include "agentwatch/agents.hpp"

#include "agentwatch/error.hpp"

namespace agentwatch {

std::string_view to_string(EnvKind kind) {
    return kind == EnvKind::whodunit ? "whodunit" : "commons";
}

EnvKind env_kind_from_string(std::string_view text) {
    if (text == "whodunit") return EnvKind::whodunit;
    if (text == "commons") return EnvKind::commons;
    throw Error(ErrorCode::parse_error, "unknown environment '" + std::string(text) + "'");
}

AgentObservation observe(const WhodunitState& state, int agent) {
    AgentObservation obs;
    obs.env = EnvKind::whodunit;
    obs.agent_id = agent;
    obs.name = state.agent_names.at(static_cast<std::size_t>(agent));
    obs.role = state.role_of(agent);
    obs.agent_names = state.agent_names;
    obs.variant = state.spec->variant;
    obs.schema = state.spec->schema;
    obs.n_suspects = state.spec->n_suspects();
    obs.knowledge = state.knowledge.at(agent);
    obs.channel = state.channel;
    obs.turn_index = state.turn_index;
    obs.turn_limit = state.spec->turn_limit;
    return obs;
}

AgentObservation observe(const CommonsState& state, int agent, CommonsPhase phase) {
    AgentObservation obs;
    obs.env = EnvKind::commons;
    obs.agent_id = agent;
    obs.name = state.agent_names.at(static_cast<std::size_t>(agent));
    obs.role = Role::player;
    obs.agent_names = state.agent_names;
    obs.channel = state.channel;
    obs.turn_index = state.round;
    obs.turn_limit = state.config.m;
    obs.commons = CommonsView{phase, state.round, state.config.m, state.stock, state.config.R0,
                              state.config.gamma};
    return obs;
}

} // namespace agentwatch
