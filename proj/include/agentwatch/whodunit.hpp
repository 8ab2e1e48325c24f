#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agentwatch/actions.hpp"
#include "agentwatch/channel.hpp"
#include "agentwatch/game.hpp"
#include "agentwatch/trajectory.hpp"

namespace agentwatch {

enum class Role { accuser, intel, player };

std::string_view to_string(Role role);

struct KnowledgeSet {
    Role role = Role::player;
    std::vector<Fact> culprit_facts;
    std::vector<SuspectProfile> suspect_table;  // empty for the accuser

    bool operator==(const KnowledgeSet&) const = default;
};

KnowledgeSet accuser_knowledge(const GameSpec& spec);
KnowledgeSet intel_knowledge(const GameSpec& spec);

/// Deals disjoint true culprit facts to symmetric players, keyed by agent id
/// (0-based). Throws infeasible_request when n_agents * facts_per_agent
/// exceeds the number of attributes.
std::map<int, KnowledgeSet> deal_symmetric_facts(const GameSpec& spec, int n_agents,
                                                 int facts_per_agent, std::uint64_t seed);

/// Ids (ascending) of the suspects whose `property` is `value`.
/// Throws unknown_property / unknown_value.
std::vector<int> match_suspects(const GameSpec& spec, std::string_view property,
                                std::string_view value);

// Bit-exact message templates.
std::string render_request_specific(std::string_view name, std::string_view property, int target,
                                    std::string_view value);
std::string render_request_broad(std::string_view name);
std::string render_respond(std::string_view name, int target, bool answer, std::string_view value);
std::string render_respond_broad(std::string_view name, std::span<const int> ids,
                                 std::string_view property, std::string_view value);
std::string render_share(std::string_view name, const Fact& fact);
std::string render_accuse(int target);
std::string render_skip(std::string_view name);
std::string render_fact(const Fact& fact);

inline constexpr int kDefaultSymmetricAgents = 4;
inline constexpr int kDefaultFactsPerAgent = 3;

struct WhodunitState {
    GameSpecPtr spec;
    CommunicationChannel channel;
    std::map<int, KnowledgeSet> knowledge;
    std::map<int, KnowledgeSet> initial_knowledge;
    std::vector<std::string> agent_names;
    int next_agent = 0;
    int turn_index = 1;
    std::optional<Outcome> terminal;
    std::optional<int> accused;

    int n_agents() const { return static_cast<int>(agent_names.size()); }
    Role role_of(int agent) const { return knowledge.at(agent).role; }
    bool done() const { return terminal.has_value(); }
};

/// Accuser is agent 0, Intel is agent 1.
WhodunitState new_asymmetric_game(GameSpecPtr spec);
WhodunitState new_symmetric_game(GameSpecPtr spec, int n_agents = kDefaultSymmetricAgents,
                                 int facts_per_agent = kDefaultFactsPerAgent,
                                 std::uint64_t deal_seed = 0);

/// Renders the acting agent's decision to a message, appends it and advances
/// the turn. Throws illegal_action (state untouched) for a malformed or
/// role-forbidden action.
void step(WhodunitState& state, const AgentDecision& decision);

/// Consumes the acting agent's turn without a message.
void skip_turn(WhodunitState& state);

/// Most recent request-specific still waiting for an answer, if the last
/// message in the channel is one.
const Message* pending_request(const CommunicationChannel& channel);

struct WhodunitMetrics {
    double success_rate = 0.0;            // percent
    std::optional<double> precision;      // percent; absent without accusations
    double avg_length = 0.0;
    int games = 0;
};

/// Invalid trajectories are skipped. Throws invalid_argument on empty input.
WhodunitMetrics whodunit_metrics(std::span<const Trajectory> trajectories);

} // namespace agentwatch
