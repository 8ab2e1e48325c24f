#include "agentwatch/trajectory.hpp"

#include <map>
#include <sstream>

#include <fmt/format.h>

#include "agentwatch/error.hpp"

namespace agentwatch {

std::string_view to_string(Outcome outcome) {
    switch (outcome) {
    case Outcome::success: return "success";
    case Outcome::wrong_accusation: return "wrong-accusation";
    case Outcome::timeout: return "timeout";
    }
    return "?";
}

Outcome outcome_from_string(std::string_view text) {
    if (text == "success") return Outcome::success;
    if (text == "wrong-accusation") return Outcome::wrong_accusation;
    if (text == "timeout") return Outcome::timeout;
    throw Error(ErrorCode::parse_error, fmt::format("unknown outcome '{}'", text));
}

std::string_view to_string(InterventionKind kind) {
    switch (kind) {
    case InterventionKind::none: return "none";
    case InterventionKind::full_reset: return "full-reset";
    case InterventionKind::round_reset: return "round-reset";
    case InterventionKind::resample: return "resample";
    }
    return "?";
}

InterventionKind intervention_kind_from_string(std::string_view text) {
    if (text == "none") return InterventionKind::none;
    if (text == "full-reset") return InterventionKind::full_reset;
    if (text == "round-reset") return InterventionKind::round_reset;
    if (text == "resample") return InterventionKind::resample;
    throw Error(ErrorCode::parse_error, fmt::format("unknown intervention kind '{}'", text));
}

bool Trajectory::succeeded() const {
    if (outcome) return *outcome == Outcome::success;
    if (commons) return commons->survived;
    return false;
}

bool Trajectory::intervened() const {
    for (const auto& turn : turns)
        if (turn.intervention && *turn.intervention != InterventionKind::none) return true;
    return false;
}

void to_json(nlohmann::json& j, const TurnRecord& r) {
    j = {{"turn", r.turn_index},
         {"cumulative", r.cumulative_index},
         {"agent", r.agent_id},
         {"role", r.role},
         {"decision", r.decision},
         {"features", r.features ? nlohmann::json(*r.features) : nlohmann::json(nullptr)},
         {"trigger", r.trigger_fired}};
    if (r.intervention) j["intervention"] = to_string(*r.intervention);
}

void from_json(const nlohmann::json& j, TurnRecord& r) {
    r.turn_index = j.at("turn").get<int>();
    r.cumulative_index = j.at("cumulative").get<int>();
    r.agent_id = j.at("agent").get<int>();
    r.role = j.at("role").get<std::string>();
    r.decision = j.at("decision").get<AgentDecision>();
    if (j.contains("features") && !j["features"].is_null())
        r.features = j["features"].get<FeatureVector>();
    else
        r.features.reset();
    r.trigger_fired = j.value("trigger", false);
    if (j.contains("intervention"))
        r.intervention = intervention_kind_from_string(j["intervention"].get<std::string>());
}

std::vector<nlohmann::json> to_jsonl_lines(const Trajectory& t) {
    std::vector<nlohmann::json> lines;
    lines.reserve(t.turns.size() + 1);
    for (const auto& turn : t.turns) {
        nlohmann::json line = turn;
        line["type"] = "turn";
        line["game"] = t.game_id;
        line["rep"] = t.repetition;
        lines.push_back(std::move(line));
    }
    nlohmann::json end = {{"type", "outcome"},
                          {"game", t.game_id},
                          {"rep", t.repetition},
                          {"length", t.length()},
                          {"invalid", t.invalid}};
    if (t.outcome) end["outcome"] = to_string(*t.outcome);
    if (t.accused_id) end["accused"] = *t.accused_id;
    if (t.commons) {
        end["stocks"] = t.commons->stocks;
        end["total_harvest"] = t.commons->total_harvest;
        end["survival_time"] = t.commons->survival_time;
        end["survived"] = t.commons->survived;
        end["efficiency"] = t.commons->efficiency;
    }
    if (!t.error.empty()) end["error"] = t.error;
    lines.push_back(std::move(end));
    return lines;
}

std::string to_jsonl(const Trajectory& trajectory) {
    std::string out;
    for (const auto& line : to_jsonl_lines(trajectory)) {
        out += line.dump();
        out += '\n';
    }
    return out;
}

std::vector<Trajectory> parse_jsonl(std::string_view text) {
    std::vector<Trajectory> done;
    std::map<std::pair<std::string, int>, Trajectory> open;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::parse_error, fmt::format("line {}: {}", line_no, e.what()));
        }
        const auto key = std::make_pair(j.at("game").get<std::string>(), j.value("rep", 0));
        auto& t = open[key];
        t.game_id = key.first;
        t.repetition = key.second;
        const auto type = j.at("type").get<std::string>();
        if (type == "turn") {
            t.turns.push_back(j.get<TurnRecord>());
        } else if (type == "outcome") {
            t.invalid = j.value("invalid", false);
            if (j.contains("outcome")) t.outcome = outcome_from_string(j["outcome"].get<std::string>());
            if (j.contains("accused")) t.accused_id = j["accused"].get<int>();
            if (j.contains("survival_time")) {
                CommonsResult c;
                c.stocks = j.value("stocks", std::vector<double>{});
                c.total_harvest = j.value("total_harvest", 0.0);
                c.survival_time = j["survival_time"].get<int>();
                c.survived = j.value("survived", false);
                c.efficiency = j.value("efficiency", 0.0);
                t.commons = std::move(c);
            }
            t.error = j.value("error", std::string{});
            done.push_back(std::move(t));
            open.erase(key);
        } else {
            throw Error(ErrorCode::parse_error, fmt::format("line {}: unknown type '{}'", line_no, type));
        }
    }
    if (!open.empty())
        throw Error(ErrorCode::parse_error,
                    fmt::format("{} game(s) without an outcome line", open.size()));
    return done;
}

} // namespace agentwatch
