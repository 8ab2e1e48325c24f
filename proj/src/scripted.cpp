#include "agentwatch/scripted.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "agentwatch/error.hpp"

namespace agentwatch {

namespace {

std::vector<double> one_hot(std::size_t index) {
    std::vector<double> p(kScriptedVocabulary, 0.0);
    p[index % kScriptedVocabulary] = 1.0;
    return p;
}

const SuspectProfile* find_suspect(const std::vector<SuspectProfile>& table, int id) {
    for (const auto& s : table)
        if (s.id == id) return &s;
    return nullptr;
}

bool has_value(const AttributeSchema& schema, const SuspectProfile& s, std::size_t a,
               std::string_view value) {
    return s.value(schema, a) == value;
}

} // namespace

AccuserView analyze_accuser(const AgentObservation& obs) {
    const auto& schema = obs.schema;
    const int n = obs.n_suspects;
    AccuserView view;
    view.belief.assign(schema.size(), std::string{});
    for (const auto& f : obs.knowledge.culprit_facts)
        if (auto a = schema.index_of(f.property)) view.belief[*a] = f.value;
    for (const auto& m : obs.channel.messages())
        if (m.author == obs.agent_id && m.kind == MessageKind::request_specific && m.payload.property &&
            m.payload.value)
            if (auto a = schema.index_of(*m.payload.property)) view.belief[*a] = *m.payload.value;

    std::vector<bool> alive(static_cast<std::size_t>(n), true);
    view.known.assign(static_cast<std::size_t>(n), std::vector<bool>(schema.size(), false));

    for (const auto& m : obs.channel.messages()) {
        if (!m.payload.property || !m.payload.value) continue;
        const auto a = schema.index_of(*m.payload.property);
        if (!a) continue;
        const bool believed = view.belief[*a] == *m.payload.value;
        if (m.kind == MessageKind::respond_broad) {
            const bool two_valued = schema.at(*a).values.size() == 2;
            for (int id = 1; id <= n; ++id) {
                const auto i = static_cast<std::size_t>(id - 1);
                const bool inside =
                    std::find(m.payload.ids.begin(), m.payload.ids.end(), id) != m.payload.ids.end();
                if (inside != believed) alive[i] = false;
                if (inside || two_valued) view.known[i][*a] = true;
            }
        } else if (m.kind == MessageKind::respond && m.payload.target && m.payload.answer) {
            const int id = *m.payload.target;
            if (id < 1 || id > n) continue;
            const auto i = static_cast<std::size_t>(id - 1);
            view.known[i][*a] = true;
            if (*m.payload.answer != believed) alive[i] = false;
        }
    }
    for (int id = 1; id <= n; ++id)
        if (alive[static_cast<std::size_t>(id - 1)]) view.candidates.push_back(id);
    return view;
}

AsymAction accuser_policy(const AgentObservation& obs) {
    const auto view = analyze_accuser(obs);
    AsymAction act;
    const auto known_count = [&](int id) {
        const auto& k = view.known[static_cast<std::size_t>(id - 1)];
        return static_cast<std::size_t>(std::count(k.begin(), k.end(), true));
    };

    if (view.candidates.size() == 1) {
        act.prime = AsymPrime::accuse;
        act.target = view.candidates.front();
        return act;
    }
    for (const int id : view.candidates) {
        if (known_count(id) == obs.schema.size()) {
            act.prime = AsymPrime::accuse;
            act.target = id;
            return act;
        }
    }
    if (view.candidates.size() != 2) {
        act.prime = AsymPrime::request_broad;
        return act;
    }
    int target = view.candidates.front();
    for (const int id : view.candidates)
        if (known_count(id) < known_count(target)) target = id;
    const auto& k = view.known[static_cast<std::size_t>(target - 1)];
    const auto a = static_cast<std::size_t>(std::find(k.begin(), k.end(), false) - k.begin());
    act.prime = AsymPrime::request_specific;
    act.target = target;
    act.property = obs.schema.at(a).name;
    act.value = view.belief[a];
    return act;
}

AsymAction intel_policy(const AgentObservation& obs) {
    const auto& schema = obs.schema;
    const auto& table = obs.knowledge.suspect_table;
    AsymAction act;

    const Message* request = pending_request(obs.channel);
    if (request && request->kind == MessageKind::request_specific) {
        const auto* s = find_suspect(table, request->payload.target.value_or(0));
        const auto a = schema.index_of(request->payload.property.value_or(""));
        act.prime = AsymPrime::respond;
        act.answer = s && a && has_value(schema, *s, *a, request->payload.value.value_or(""));
        return act;
    }

    std::vector<std::vector<int>> cells(1);
    for (const auto& s : table) cells[0].push_back(s.id);
    std::set<std::pair<std::size_t, std::size_t>> used;
    for (const auto& m : obs.channel.messages()) {
        if (m.kind != MessageKind::respond_broad || !m.payload.property || !m.payload.value) continue;
        const auto a = schema.index_of(*m.payload.property);
        if (!a) continue;
        const auto& vals = schema.at(*a).values;
        const auto v = std::find(vals.begin(), vals.end(), *m.payload.value) - vals.begin();
        used.emplace(*a, static_cast<std::size_t>(v));
        std::vector<std::vector<int>> refined;
        for (const auto& cell : cells) {
            std::vector<int> in, out;
            for (const int id : cell) {
                const bool inside =
                    std::find(m.payload.ids.begin(), m.payload.ids.end(), id) != m.payload.ids.end();
                (inside ? in : out).push_back(id);
            }
            if (!in.empty()) refined.push_back(std::move(in));
            if (!out.empty()) refined.push_back(std::move(out));
        }
        cells = std::move(refined);
    }

    std::size_t best_a = 0, best_v = 0;
    long best_score = -1;
    for (std::size_t a = 0; a < schema.size(); ++a) {
        for (std::size_t v = 0; v < schema.at(a).values.size(); ++v) {
            if (used.count({a, v})) continue;
            long score = 0;
            for (const auto& cell : cells) {
                long inside = 0;
                for (const int id : cell) {
                    const auto* s = find_suspect(table, id);
                    if (s && s->values[a] == v) ++inside;
                }
                const long outside = static_cast<long>(cell.size()) - inside;
                score += inside * inside + outside * outside;
            }
            if (best_score < 0 || score < best_score) {
                best_score = score;
                best_a = a;
                best_v = v;
            }
        }
    }
    act.prime = AsymPrime::respond_broad;
    act.property = schema.at(best_a).name;
    act.value = schema.at(best_a).values[best_v];
    for (const auto& s : table)
        if (s.values[best_a] == best_v) act.broad_list.push_back(s.id);
    std::sort(act.broad_list.begin(), act.broad_list.end());
    return act;
}

std::vector<int> consistent_suspects(const AgentObservation& obs, std::span<const Fact> extra) {
    const auto& schema = obs.schema;
    std::vector<Fact> facts(extra.begin(), extra.end());
    for (const auto& m : obs.channel.messages())
        if (m.kind == MessageKind::share && m.payload.property && m.payload.value)
            facts.push_back({*m.payload.property, *m.payload.value});
    std::vector<int> ids;
    for (const auto& s : obs.knowledge.suspect_table) {
        bool ok = true;
        for (const auto& f : facts) {
            const auto a = schema.index_of(f.property);
            if (!a || !has_value(schema, s, *a, f.value)) {
                ok = false;
                break;
            }
        }
        if (ok) ids.push_back(s.id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

SymAction player_policy(const AgentObservation& obs) {
    const auto& own = obs.knowledge.culprit_facts;
    SymAction act;
    const auto mine = consistent_suspects(obs, own);
    if (mine.size() == 1) {
        act.prime = SymPrime::accuse;
        act.target = mine.front();
        return act;
    }
    const auto public_set = consistent_suspects(obs);
    for (std::size_t i = 0; i < own.size(); ++i) {
        bool shared = false;
        for (const auto& m : obs.channel.messages())
            if (m.kind == MessageKind::share && m.payload.property == own[i].property &&
                m.payload.value == own[i].value)
                shared = true;
        if (shared) continue;
        const Fact one[] = {own[i]};
        if (consistent_suspects(obs, one).size() < public_set.size()) {
            act.prime = SymPrime::share;
            act.fact_index = static_cast<int>(i);
            return act;
        }
    }
    act.prime = SymPrime::skip;
    return act;
}

AgentDecision scripted_decision(const AgentObservation& obs, Action action) {
    AgentDecision d;
    nlohmann::ordered_json g;
    std::vector<int> numerals;
    std::visit(
        [&](const auto& a) {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, AsymAction>) {
                g["thoughts"] = "Following the elimination plan.";
                g["action"] = std::string(to_string(a.prime));
                if (a.target) {
                    g["character"] = *a.target;
                    numerals.push_back(*a.target);
                }
                if (a.property) g["property"] = *a.property;
                if (a.value) g["value"] = *a.value;
                if (a.answer) g["answer"] = *a.answer;
                if (a.prime == AsymPrime::respond_broad) {
                    g["characters"] = a.broad_list;
                    numerals.insert(numerals.end(), a.broad_list.begin(), a.broad_list.end());
                }
            } else if constexpr (std::is_same_v<T, SymAction>) {
                g["thoughts"] = "Comparing the shared facts with my own.";
                g["action"] = std::string(to_string(a.prime));
                if (a.target) {
                    g["character"] = *a.target;
                    numerals.push_back(*a.target);
                }
                if (a.prime == SymPrime::share) {
                    const Fact f = a.stated ? *a.stated
                                            : obs.knowledge.culprit_facts.at(
                                                  static_cast<std::size_t>(a.fact_index.value_or(0)));
                    g["fact"] = render_fact(f);
                }
            } else if constexpr (std::is_same_v<T, CommonsAction>) {
                g["thoughts"] = "Keeping the lake healthy.";
                g["action"] = std::string(to_string(a.prime));
                g["amount"] = a.amount;
                if (!a.text.empty()) g["message"] = a.text;
                numerals.push_back(static_cast<int>(a.amount));
            } else {
                g["error"] = a.reason;
            }
        },
        action);
    d.generation = g.dump();
    for (const int n : numerals) d.positions.push_back(one_hot(static_cast<std::size_t>(n < 0 ? 0 : n)));
    d.action = std::move(action);
    return d;
}

AgentDecision ScriptedWhodunitAgent::decide(const AgentObservation& obs) {
    if (obs.env != EnvKind::whodunit)
        throw Error(ErrorCode::invalid_argument, "whodunit agent in a commons game");
    switch (obs.role) {
    case Role::accuser: return scripted_decision(obs, accuser_policy(obs));
    case Role::intel: return scripted_decision(obs, intel_policy(obs));
    case Role::player: return scripted_decision(obs, player_policy(obs));
    }
    throw Error(ErrorCode::invalid_argument, "unknown role");
}

double ScriptedHarvester::planned_amount(double stock, int n_agents) const {
    const double share = stock / n_agents;
    return style_ == HarvestStyle::sustainable ? share / 2.0 : share;
}

AgentDecision ScriptedHarvester::decide(const AgentObservation& obs) {
    if (!obs.commons) throw Error(ErrorCode::invalid_argument, "harvester outside a commons game");
    const auto& view = *obs.commons;
    const int n = static_cast<int>(obs.agent_names.size());
    CommonsAction act;
    if (view.phase == CommonsPhase::harvest) {
        act.prime = CommonsPrime::harvest;
        act.amount = planned_amount(view.stock, n);
    } else {
        act.prime = CommonsPrime::discuss;
        act.amount = planned_amount(regrow_stock(view.stock, view.R0), n);
        act.text = render_discussion(obs.name, act.amount);
    }
    return scripted_decision(obs, act);
}

} // namespace agentwatch
