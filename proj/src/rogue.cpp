#include "agentwatch/rogue.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "agentwatch/error.hpp"
#include "agentwatch/scripted.hpp"
#include "agentwatch/uncertainty.hpp"

namespace agentwatch {

std::string_view to_string(RogueBehavior b) {
    switch (b) {
    case RogueBehavior::hallucinate_fact: return "hallucinate-fact";
    case RogueBehavior::repeat_query: return "repeat-query";
    case RogueBehavior::wrong_accusation: return "wrong-accusation";
    case RogueBehavior::drop_known_fact: return "drop-known-fact";
    }
    return "?";
}

RogueBehavior rogue_behavior_from_string(std::string_view text) {
    for (auto b : {RogueBehavior::hallucinate_fact, RogueBehavior::repeat_query,
                   RogueBehavior::wrong_accusation, RogueBehavior::drop_known_fact})
        if (to_string(b) == text) return b;
    throw Error(ErrorCode::parse_error, fmt::format("unknown rogue behavior '{}'", text));
}

void RogueProfile::validate() const {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw Error(ErrorCode::invalid_config, "epsilon must lie in [0, 1]");
    if (behaviors.empty()) throw Error(ErrorCode::invalid_config, "no rogue behaviors");
    double total = 0.0;
    for (const auto& [b, w] : behaviors) {
        if (!(w >= 0.0)) throw Error(ErrorCode::invalid_config, "negative behavior weight");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw Error(ErrorCode::invalid_config, "behavior weights must sum to 1");
    if (candidates < 2) throw Error(ErrorCode::invalid_config, "need at least 2 candidates");
    const double top = std::log(static_cast<double>(candidates));
    for (const auto& band : {clean, corrupt})
        if (!(band.lo >= 0.0 && band.lo <= band.hi && band.hi <= top + 1e-12))
            throw Error(ErrorCode::invalid_config, "entropy band outside [0, ln candidates]");
    if (!(clean.hi < corrupt.lo))
        throw Error(ErrorCode::invalid_config, "clean band must lie below the corrupt band");
}

void to_json(nlohmann::json& j, const RogueProfile& p) {
    nlohmann::json behaviors = nlohmann::json::object();
    for (const auto& [b, w] : p.behaviors) behaviors[std::string(to_string(b))] = w;
    j = {{"epsilon", p.epsilon},
         {"behaviors", behaviors},
         {"clean_band", {p.clean.lo, p.clean.hi}},
         {"corrupt_band", {p.corrupt.lo, p.corrupt.hi}},
         {"candidates", p.candidates}};
}

void from_json(const nlohmann::json& j, RogueProfile& p) {
    RogueProfile d;
    p.epsilon = j.value("epsilon", d.epsilon);
    if (j.contains("behaviors")) {
        p.behaviors.clear();
        for (const auto& [name, w] : j.at("behaviors").items())
            p.behaviors.emplace_back(rogue_behavior_from_string(name), w.get<double>());
        // JSON objects do not keep key order
        std::sort(p.behaviors.begin(), p.behaviors.end());
    } else {
        p.behaviors = d.behaviors;
    }
    const auto band = [&](const char* key, EntropyBand fallback) {
        if (!j.contains(key)) return fallback;
        const auto& b = j.at(key);
        return EntropyBand{b.at(0).get<double>(), b.at(1).get<double>()};
    };
    p.clean = band("clean_band", d.clean);
    p.corrupt = band("corrupt_band", d.corrupt);
    p.candidates = j.value("candidates", d.candidates);
    p.validate();
}

std::vector<double> distribution_with_entropy(double target, std::size_t k) {
    if (k < 2) throw Error(ErrorCode::invalid_argument, "need at least 2 outcomes");
    const double top = std::log(static_cast<double>(k));
    if (!(target >= 0.0 && target <= top + 1e-12))
        throw Error(ErrorCode::invalid_argument, fmt::format("entropy {} outside [0, ln {}]", target, k));
    const auto family = [k](double t) {
        std::vector<double> p(k, t / static_cast<double>(k));
        p[0] = 1.0 - t * static_cast<double>(k - 1) / static_cast<double>(k);
        return p;
    };
    if (target <= 0.0) return family(0.0);
    if (target >= top) return family(1.0);
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200 && hi - lo > 1e-16; ++i) {
        const double mid = 0.5 * (lo + hi);
        (entropy(family(mid)) < target ? lo : hi) = mid;
    }
    return family(0.5 * (lo + hi));
}

SyntheticRogue::SyntheticRogue(RogueProfile profile, std::unique_ptr<AgentBackend> base,
                               GameSpecPtr truth, std::uint64_t seed)
    : profile_(std::move(profile)), base_(std::move(base)), truth_(std::move(truth)), rng_(seed) {
    profile_.validate();
    if (!base_) throw Error(ErrorCode::invalid_argument, "rogue needs a base policy");
}

Action SyntheticRogue::hallucinate(const AgentObservation& obs) {
    if (obs.env == EnvKind::commons) {
        const auto& view = *obs.commons;
        CommonsAction act;
        if (view.phase == CommonsPhase::harvest) {
            act.prime = CommonsPrime::harvest;
            act.amount = view.stock / 2.0;
        } else {
            act.prime = CommonsPrime::discuss;
            act.amount = 0.0;
            act.text = render_discussion(obs.name, 0.0);
        }
        return act;
    }
    if (!truth_) throw Error(ErrorCode::invalid_argument, "whodunit rogue without ground truth");
    const auto& schema = truth_->schema;
    const auto& culprit = truth_->culprit();
    const auto a = static_cast<std::size_t>(rng_.below(schema.size()));
    const auto& values = schema.at(a).values;
    auto wrong = static_cast<std::size_t>(rng_.below(values.size() - 1));
    if (wrong >= culprit.values[a]) ++wrong;

    switch (obs.role) {
    case Role::accuser: {
        AsymAction act;
        act.prime = AsymPrime::request_specific;
        act.target = truth_->culprit_id;
        act.property = schema.at(a).name;
        act.value = values[wrong];
        return act;
    }
    case Role::intel: {
        AsymAction act = intel_policy(obs);
        if (act.prime == AsymPrime::respond) {
            act.answer = !act.answer.value_or(false);
        } else {
            auto& list = act.broad_list;
            const auto it = std::find(list.begin(), list.end(), truth_->culprit_id);
            if (it != list.end()) list.erase(it);
            else list.insert(std::upper_bound(list.begin(), list.end(), truth_->culprit_id),
                             truth_->culprit_id);
        }
        return act;
    }
    case Role::player: {
        SymAction act;
        act.prime = SymPrime::share;
        act.stated = Fact{schema.at(a).name, values[wrong]};
        return act;
    }
    }
    throw Error(ErrorCode::invalid_argument, "unknown role");
}

Action SyntheticRogue::corrupt(RogueBehavior behavior, const AgentObservation& obs) {
    const bool whodunit = obs.env == EnvKind::whodunit;
    switch (behavior) {
    case RogueBehavior::hallucinate_fact: return hallucinate(obs);
    case RogueBehavior::repeat_query: {
        if (whodunit && obs.role == Role::accuser) {
            const auto& msgs = obs.channel.messages();
            for (auto it = msgs.rbegin(); it != msgs.rend(); ++it) {
                if (it->author != obs.agent_id) continue;
                AsymAction act;
                if (it->kind == MessageKind::request_specific) {
                    act.prime = AsymPrime::request_specific;
                    act.target = it->payload.target;
                    act.property = it->payload.property;
                    act.value = it->payload.value;
                    return act;
                }
                if (it->kind == MessageKind::request_broad) return act;
            }
        }
        return hallucinate(obs);
    }
    case RogueBehavior::wrong_accusation: {
        if (!whodunit || obs.role == Role::intel) return hallucinate(obs);
        const int n = truth_->n_suspects();
        auto pick = static_cast<int>(rng_.below(static_cast<std::uint64_t>(n - 1))) + 1;
        if (pick >= truth_->culprit_id) ++pick;
        if (obs.role == Role::accuser) {
            AsymAction act;
            act.prime = AsymPrime::accuse;
            act.target = pick;
            return act;
        }
        SymAction act;
        act.prime = SymPrime::accuse;
        act.target = pick;
        return act;
    }
    case RogueBehavior::drop_known_fact: {
        if (obs.channel.empty()) return base_->decide(obs).action;
        const auto drop = rng_.below(obs.channel.size());
        AgentObservation partial = obs;
        partial.channel = CommunicationChannel{};
        for (std::size_t i = 0; i < obs.channel.size(); ++i)
            if (i != drop) partial.channel.append(obs.channel.messages()[i]);
        return base_->decide(partial).action;
    }
    }
    return hallucinate(obs);
}

AgentDecision SyntheticRogue::decide(const AgentObservation& obs) {
    ++turns_;
    last_corrupted_ = rng_.bernoulli(profile_.epsilon);
    Action action;
    if (last_corrupted_) {
        ++corrupted_;
        double u = rng_.uniform();
        RogueBehavior behavior = profile_.behaviors.back().first;
        for (const auto& [b, w] : profile_.behaviors) {
            if (u < w) {
                behavior = b;
                break;
            }
            u -= w;
        }
        action = corrupt(behavior, obs);
    } else {
        action = base_->decide(obs).action;
    }
    AgentDecision d = scripted_decision(obs, std::move(action));
    const auto& band = last_corrupted_ ? profile_.corrupt : profile_.clean;
    for (auto& p : d.positions)
        p = distribution_with_entropy(rng_.uniform(band.lo, band.hi), profile_.candidates);
    return d;
}

} // namespace agentwatch
