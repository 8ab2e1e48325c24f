#include "agentwatch/intervention.hpp"

#include <fmt/format.h>

#include "agentwatch/error.hpp"

namespace agentwatch {

void InterventionPolicy::validate() const {
    if (cap < 0) throw Error(ErrorCode::invalid_config, "intervention cap must be >= 0");
    if (resample_temperature && !(*resample_temperature >= 0.0))
        throw Error(ErrorCode::invalid_config, "resample temperature must be >= 0");
}

void InterventionPolicy::validate_for(EnvKind env) const {
    validate();
    if (env == EnvKind::whodunit && kind == InterventionKind::round_reset)
        throw Error(ErrorCode::invalid_config, "round-reset applies to commons games only");
    if (env == EnvKind::commons && kind == InterventionKind::full_reset)
        throw Error(ErrorCode::invalid_config, "full-reset would undo commons harvests");
}

void to_json(nlohmann::json& j, const InterventionPolicy& p) {
    j = {{"kind", std::string(to_string(p.kind))}, {"cap", p.cap}};
    if (p.resample_temperature) j["resample_temperature"] = *p.resample_temperature;
}

void from_json(const nlohmann::json& j, InterventionPolicy& p) {
    p.kind = intervention_kind_from_string(j.value("kind", std::string("none")));
    p.cap = j.value("cap", 1);
    p.resample_temperature.reset();
    if (j.contains("resample_temperature") && !j["resample_temperature"].is_null())
        p.resample_temperature = j["resample_temperature"].get<double>();
    p.validate();
}

int TriggerBudget::used(const std::string& role) const {
    const auto it = used_.find(role);
    return it == used_.end() ? 0 : it->second;
}

bool evaluate_trigger(double probability, double tau, TriggerBudget& budget, const std::string& role) {
    if (!(probability < tau) || !budget.available(role)) return false;
    budget.consume(role);
    return true;
}

void apply_full_reset(WhodunitState& state) {
    if (state.accused || !state.channel.checkpoints().empty())
        throw Error(ErrorCode::invalid_intervention, "full-reset after an accusation");
    if (state.done()) throw Error(ErrorCode::invalid_intervention, "full-reset of a finished game");
    state.channel = CommunicationChannel{};
    state.knowledge = state.initial_knowledge;
    state.turn_index = 1;
    state.next_agent = 0;
}

void apply_round_reset(CommonsState& state) { rollback_round(state); }

} // namespace agentwatch
