#include "agentwatch/whodunit.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "agentwatch/error.hpp"
#include "agentwatch/rng.hpp"

namespace agentwatch {

std::string_view to_string(Role role) {
    switch (role) {
    case Role::accuser: return "accuser";
    case Role::intel: return "intel";
    case Role::player: return "player";
    }
    return "?";
}

KnowledgeSet accuser_knowledge(const GameSpec& spec) {
    KnowledgeSet k;
    k.role = Role::accuser;
    const auto& culprit = spec.culprit();
    for (std::size_t a = 0; a < spec.schema.size(); ++a)
        k.culprit_facts.push_back({spec.schema.at(a).name, culprit.value(spec.schema, a)});
    return k;
}

KnowledgeSet intel_knowledge(const GameSpec& spec) {
    KnowledgeSet k;
    k.role = Role::intel;
    k.suspect_table = spec.suspects;
    return k;
}

std::map<int, KnowledgeSet> deal_symmetric_facts(const GameSpec& spec, int n_agents,
                                                 int facts_per_agent, std::uint64_t seed) {
    if (n_agents < 1 || facts_per_agent < 1)
        throw Error(ErrorCode::invalid_argument, "need at least one agent and one fact each");
    const auto needed = static_cast<std::size_t>(n_agents) * static_cast<std::size_t>(facts_per_agent);
    if (needed > spec.schema.size())
        throw Error(ErrorCode::infeasible_request,
                    fmt::format("{} agents x {} facts exceed {} attributes", n_agents,
                                facts_per_agent, spec.schema.size()));

    std::vector<std::size_t> order(spec.schema.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(seed, "deal_symmetric_facts"));
    rng.shuffle(order);

    const auto& culprit = spec.culprit();
    std::map<int, KnowledgeSet> dealt;
    std::size_t next = 0;
    for (int agent = 0; agent < n_agents; ++agent) {
        KnowledgeSet k;
        k.role = Role::player;
        k.suspect_table = spec.suspects;
        for (int f = 0; f < facts_per_agent; ++f, ++next) {
            const auto a = order[next];
            k.culprit_facts.push_back({spec.schema.at(a).name, culprit.value(spec.schema, a)});
        }
        dealt.emplace(agent, std::move(k));
    }
    return dealt;
}

std::vector<int> match_suspects(const GameSpec& spec, std::string_view property,
                                std::string_view value) {
    const auto a = spec.schema.require_index(property);
    const auto v = spec.schema.value_index(property, value);
    std::vector<int> ids;
    for (const auto& s : spec.suspects)
        if (s.values[a] == v) ids.push_back(s.id);
    return ids;
}

std::string render_request_specific(std::string_view name, std::string_view property, int target,
                                    std::string_view value) {
    return fmt::format("Agent {} has requested information: is property {} of character {} {}?",
                       name, property, target, value);
}

std::string render_request_broad(std::string_view name) {
    return fmt::format("Agent {} has asked for general information (a broad message)", name);
}

std::string render_respond(std::string_view name, int target, bool answer, std::string_view value) {
    return fmt::format("Agent {} has responded that character {} {} {}", name, target,
                       answer ? "is" : "is not", value);
}

std::string render_respond_broad(std::string_view name, std::span<const int> ids,
                                 std::string_view property, std::string_view value) {
    return fmt::format(
        "Agent {} has decided to return a broad message: For characters [{}], the property {} is {}",
        name, fmt::join(ids, ", "), property, value);
}

std::string render_fact(const Fact& fact) { return fmt::format("{} is {}", fact.property, fact.value); }

std::string render_share(std::string_view name, const Fact& fact) {
    return fmt::format("Player {} has decided to share a fact about the Winner: {}.", name,
                       render_fact(fact));
}

std::string render_accuse(int target) { return fmt::format("The winner is {}.", target); }

std::string render_skip(std::string_view name) {
    return fmt::format("Player {} has decided to skip their turn.", name);
}

namespace {

const std::vector<std::string>& default_names() {
    static const std::vector<std::string> names = {"Alex", "Beth",   "Casey", "Dana",
                                                   "Eli",  "Frankie", "Gray", "Harper"};
    return names;
}

[[noreturn]] void illegal(const std::string& why) { throw Error(ErrorCode::illegal_action, why); }

void check_target(const GameSpec& spec, const std::optional<int>& target) {
    if (!target) illegal("missing target character");
    if (*target < 1 || *target > spec.n_suspects())
        illegal(fmt::format("character {} does not exist", *target));
}

void check_property_value(const GameSpec& spec, const std::optional<std::string>& property,
                          const std::optional<std::string>& value) {
    if (!property || !value) illegal("missing property or value");
    try {
        spec.schema.value_index(*property, *value);
    } catch (const Error& e) {
        illegal(e.what());
    }
}

Message asym_message(const WhodunitState& state, int agent, const AsymAction& a) {
    const auto& spec = *state.spec;
    const auto& name = state.agent_names[static_cast<std::size_t>(agent)];
    const Role role = state.role_of(agent);
    Message m;
    m.author = agent;
    switch (a.prime) {
    case AsymPrime::request_specific:
        if (role != Role::accuser) illegal("only the accuser can request information");
        check_target(spec, a.target);
        check_property_value(spec, a.property, a.value);
        m.kind = MessageKind::request_specific;
        m.text = render_request_specific(name, *a.property, *a.target, *a.value);
        m.payload.target = a.target;
        m.payload.property = a.property;
        m.payload.value = a.value;
        break;
    case AsymPrime::request_broad:
        if (role != Role::accuser) illegal("only the accuser can request information");
        m.kind = MessageKind::request_broad;
        m.text = render_request_broad(name);
        break;
    case AsymPrime::accuse:
        if (role != Role::accuser) illegal("only the accuser can accuse");
        check_target(spec, a.target);
        m.kind = MessageKind::accuse;
        m.text = render_accuse(*a.target);
        m.payload.target = a.target;
        break;
    case AsymPrime::respond: {
        if (role != Role::intel) illegal("only intel can respond");
        if (!a.answer) illegal("respond needs a yes/no answer");
        const Message* request = pending_request(state.channel);
        if (!request) illegal("no pending request to respond to");
        m.kind = MessageKind::respond;
        m.payload.target = request->payload.target;
        m.payload.property = request->payload.property;
        m.payload.value = request->payload.value;
        m.payload.answer = a.answer;
        m.text = render_respond(name, *m.payload.target, *a.answer, *m.payload.value);
        break;
    }
    case AsymPrime::respond_broad:
        if (role != Role::intel) illegal("only intel can send a broad message");
        check_property_value(spec, a.property, a.value);
        for (const int id : a.broad_list)
            if (id < 1 || id > spec.n_suspects()) illegal(fmt::format("character {} does not exist", id));
        m.kind = MessageKind::respond_broad;
        m.payload.property = a.property;
        m.payload.value = a.value;
        m.payload.ids = a.broad_list;
        m.text = render_respond_broad(name, a.broad_list, *a.property, *a.value);
        break;
    }
    return m;
}

Message sym_message(const WhodunitState& state, int agent, const SymAction& a) {
    const auto& spec = *state.spec;
    const auto& name = state.agent_names[static_cast<std::size_t>(agent)];
    Message m;
    m.author = agent;
    switch (a.prime) {
    case SymPrime::share: {
        Fact fact;
        if (a.stated) {
            fact = *a.stated;
        } else {
            const auto& facts = state.knowledge.at(agent).culprit_facts;
            if (!a.fact_index || *a.fact_index < 0 ||
                *a.fact_index >= static_cast<int>(facts.size()))
                illegal("fact index out of range");
            fact = facts[static_cast<std::size_t>(*a.fact_index)];
        }
        check_property_value(spec, fact.property, fact.value);
        m.kind = MessageKind::share;
        m.text = render_share(name, fact);
        m.payload.property = fact.property;
        m.payload.value = fact.value;
        break;
    }
    case SymPrime::accuse:
        check_target(spec, a.target);
        m.kind = MessageKind::accuse;
        m.text = render_accuse(*a.target);
        m.payload.target = a.target;
        break;
    case SymPrime::skip:
        m.kind = MessageKind::skip;
        m.text = render_skip(name);
        break;
    }
    return m;
}

void advance(WhodunitState& state) {
    state.next_agent = (state.next_agent + 1) % state.n_agents();
    ++state.turn_index;
    if (!state.terminal && state.turn_index > state.spec->turn_limit) state.terminal = Outcome::timeout;
}

} // namespace

WhodunitState new_asymmetric_game(GameSpecPtr spec) {
    if (!spec) throw Error(ErrorCode::invalid_argument, "null game spec");
    spec->validate();
    WhodunitState state;
    state.knowledge.emplace(0, accuser_knowledge(*spec));
    state.knowledge.emplace(1, intel_knowledge(*spec));
    state.initial_knowledge = state.knowledge;
    state.agent_names = {"Beth", "Alex"};
    state.spec = std::move(spec);
    return state;
}

WhodunitState new_symmetric_game(GameSpecPtr spec, int n_agents, int facts_per_agent,
                                 std::uint64_t deal_seed) {
    if (!spec) throw Error(ErrorCode::invalid_argument, "null game spec");
    spec->validate();
    WhodunitState state;
    state.knowledge = deal_symmetric_facts(*spec, n_agents, facts_per_agent, deal_seed);
    state.initial_knowledge = state.knowledge;
    for (int i = 0; i < n_agents; ++i) {
        const auto& names = default_names();
        state.agent_names.push_back(static_cast<std::size_t>(i) < names.size()
                                        ? names[static_cast<std::size_t>(i)]
                                        : fmt::format("Player{}", i + 1));
    }
    state.spec = std::move(spec);
    return state;
}

const Message* pending_request(const CommunicationChannel& channel) {
    if (channel.empty()) return nullptr;
    const auto& last = channel.messages().back();
    if (last.kind == MessageKind::request_specific || last.kind == MessageKind::request_broad)
        return &last;
    return nullptr;
}

void step(WhodunitState& state, const AgentDecision& decision) {
    if (state.done()) illegal("game already finished");
    const int agent = state.next_agent;
    const auto& spec = *state.spec;

    Message message = std::visit(
        [&](const auto& a) -> Message {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, AsymAction>) {
                if (spec.variant != Variant::asymmetric) illegal("asymmetric action in symmetric game");
                return asym_message(state, agent, a);
            } else if constexpr (std::is_same_v<T, SymAction>) {
                if (spec.variant != Variant::symmetric) illegal("symmetric action in asymmetric game");
                return sym_message(state, agent, a);
            } else if constexpr (std::is_same_v<T, Malformed>) {
                illegal(fmt::format("malformed generation: {}", a.reason));
            } else {
                illegal("commons action in a whodunit game");
            }
        },
        decision.action);

    const bool accusation = message.kind == MessageKind::accuse;
    const int target = message.payload.target.value_or(0);
    state.channel.append(std::move(message), accusation);
    if (accusation) {
        state.accused = target;
        state.terminal = target == spec.culprit_id ? Outcome::success : Outcome::wrong_accusation;
    }
    advance(state);
}

void skip_turn(WhodunitState& state) {
    if (state.done()) illegal("game already finished");
    advance(state);
}

WhodunitMetrics whodunit_metrics(std::span<const Trajectory> trajectories) {
    WhodunitMetrics m;
    int successes = 0;
    int accused = 0;
    double length = 0.0;
    for (const auto& t : trajectories) {
        if (t.invalid) continue;
        ++m.games;
        if (t.outcome == Outcome::success) ++successes;
        if (t.accused_id) ++accused;
        length += t.length();
    }
    if (m.games == 0) throw Error(ErrorCode::invalid_argument, "no valid games to score");
    m.success_rate = 100.0 * successes / m.games;
    if (accused > 0) m.precision = 100.0 * successes / accused;
    m.avg_length = length / m.games;
    return m;
}

} // namespace agentwatch
