#include <doctest.h>

#include "agentwatch/error.hpp"
#include "agentwatch/intervention.hpp"
#include "agentwatch/scripted.hpp"

using namespace agentwatch;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::parse_error;
}

} // namespace

TEST_CASE("evaluate_trigger examples") {
    TriggerBudget fresh(1);
    CHECK(evaluate_trigger(0.3, 0.5, fresh, "accuser"));
    CHECK(fresh.used("accuser") == 1);
    CHECK_FALSE(evaluate_trigger(0.3, 0.5, fresh, "accuser"));  // at cap
    CHECK(fresh.used("accuser") == 1);
    CHECK(evaluate_trigger(0.3, 0.5, fresh, "intel"));  // caps are per role

    TriggerBudget b(2);
    CHECK_FALSE(evaluate_trigger(0.5, 0.5, b, "accuser"));  // strict
    CHECK(b.used("accuser") == 0);
    CHECK(evaluate_trigger(0.0, 0.01, b, "accuser"));
    CHECK(evaluate_trigger(0.0, 0.01, b, "accuser"));
    CHECK_FALSE(evaluate_trigger(0.0, 0.01, b, "accuser"));

    TriggerBudget zero(0);
    CHECK_FALSE(evaluate_trigger(0.0, 1.0, zero, "accuser"));
}

TEST_CASE("full reset") {
    const auto spec = std::make_shared<const GameSpec>(generate_game(Variant::asymmetric, 10, 31, 2));
    auto state = new_asymmetric_game(spec);
    for (int i = 0; i < 11; ++i) {
        AgentDecision d;
        if (state.next_agent == 0) {
            d.action = AsymAction{};  // request-broad
        } else {
            d.action = intel_policy(observe(state, 1));
        }
        step(state, d);
    }
    CHECK(state.turn_index == 12);
    CHECK(state.channel.size() == 11);
    apply_full_reset(state);
    CHECK(state.channel.empty());
    CHECK(state.turn_index == 1);
    CHECK(state.next_agent == 0);
    CHECK(state.knowledge == state.initial_knowledge);

    AsymAction accuse;
    accuse.prime = AsymPrime::accuse;
    accuse.target = 1;
    step(state, AgentDecision{accuse, "", {}});
    CHECK(code_of([&] { apply_full_reset(state); }) == ErrorCode::invalid_intervention);
}

TEST_CASE("round reset removes the discussion and keeps the harvest") {
    CommonsConfig c;
    auto state = new_commons_game(c);
    for (int round = 1; round <= 5; ++round) {
        std::map<int, double> req;
        for (int a = 0; a < c.n_agents; ++a) req[a] = state.stock / 8.0;
        harvest_phase(state, req);
        for (int a = 0; a < c.n_agents; ++a) add_discussion(state, a, render_discussion(state.agent_names[a], 1.0));
        if (round < 5) regrow(state);
    }
    const auto log = state.harvest_log;
    const auto frozen = std::vector<Message>(state.channel.messages().begin(),
                                             state.channel.messages().begin() +
                                                 static_cast<std::ptrdiff_t>(state.channel.last_checkpoint()));
    CHECK(state.channel.reversible_count() == 4);
    apply_round_reset(state);
    CHECK(state.channel.reversible_count() == 0);
    CHECK(state.harvest_log == log);
    CHECK(std::count_if(log.begin(), log.end(), [](const HarvestEntry& e) { return e.round == 5; }) == 4);
    CHECK(std::equal(frozen.begin(), frozen.end(), state.channel.messages().begin()));
    CHECK(state.channel.messages().back().kind == MessageKind::system);
}

TEST_CASE("policy validation and JSON") {
    InterventionPolicy p;
    CHECK(p.kind == InterventionKind::none);
    p.cap = -1;
    CHECK(code_of([&] { p.validate(); }) == ErrorCode::invalid_config);
    p.cap = 2;
    p.kind = InterventionKind::round_reset;
    CHECK(code_of([&] { p.validate_for(EnvKind::whodunit); }) == ErrorCode::invalid_config);
    CHECK_NOTHROW(p.validate_for(EnvKind::commons));
    p.kind = InterventionKind::full_reset;
    CHECK(code_of([&] { p.validate_for(EnvKind::commons); }) == ErrorCode::invalid_config);
    p.kind = InterventionKind::resample;
    p.resample_temperature = 0.7;
    CHECK_NOTHROW(p.validate_for(EnvKind::whodunit));
    CHECK_NOTHROW(p.validate_for(EnvKind::commons));
    const nlohmann::json j = p;
    CHECK(j.at("kind") == "resample");
    CHECK(j.get<InterventionPolicy>() == p);
    CHECK(nlohmann::json::parse(R"({"kind": "full-reset", "cap": 2})").get<InterventionPolicy>().cap == 2);
}
