#include "agentwatch/actions.hpp"

#include <fmt/format.h>

#include "agentwatch/error.hpp"

namespace agentwatch {

std::string_view to_string(AsymPrime prime) {
    switch (prime) {
    case AsymPrime::request_specific: return "request-specific";
    case AsymPrime::request_broad: return "request-broad";
    case AsymPrime::accuse: return "accuse";
    case AsymPrime::respond: return "respond";
    case AsymPrime::respond_broad: return "respond-broad";
    }
    return "?";
}

std::string_view to_string(SymPrime prime) {
    switch (prime) {
    case SymPrime::share: return "share";
    case SymPrime::accuse: return "accuse";
    case SymPrime::skip: return "skip";
    }
    return "?";
}

std::string_view to_string(CommonsPrime prime) {
    return prime == CommonsPrime::harvest ? "harvest" : "discuss";
}

namespace {

template <class E, std::size_t N>
E parse_enum(std::string_view text, const E (&options)[N]) {
    for (const E option : options)
        if (to_string(option) == text) return option;
    throw Error(ErrorCode::parse_error, fmt::format("unknown action prime '{}'", text));
}

} // namespace

void to_json(nlohmann::json& j, const Action& action) {
    std::visit(
        [&j](const auto& a) {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, Malformed>) {
                j = {{"type", "malformed"}, {"reason", a.reason}};
            } else if constexpr (std::is_same_v<T, AsymAction>) {
                j = {{"type", "asym"}, {"prime", to_string(a.prime)}};
                if (a.target) j["target"] = *a.target;
                if (a.property) j["property"] = *a.property;
                if (a.value) j["value"] = *a.value;
                if (a.answer) j["answer"] = *a.answer;
                if (!a.broad_list.empty()) j["broad_list"] = a.broad_list;
            } else if constexpr (std::is_same_v<T, SymAction>) {
                j = {{"type", "sym"}, {"prime", to_string(a.prime)}};
                if (a.fact_index) j["fact_index"] = *a.fact_index;
                if (a.target) j["target"] = *a.target;
                if (a.stated) j["stated"] = {{"property", a.stated->property}, {"value", a.stated->value}};
            } else {
                j = {{"type", "commons"}, {"prime", to_string(a.prime)}, {"amount", a.amount}};
                if (!a.text.empty()) j["text"] = a.text;
            }
        },
        action);
}

void from_json(const nlohmann::json& j, Action& action) {
    const auto type = j.at("type").get<std::string>();
    if (type == "malformed") {
        action = Malformed{j.value("reason", std::string{})};
    } else if (type == "asym") {
        static constexpr AsymPrime options[] = {AsymPrime::request_specific, AsymPrime::request_broad,
                                                AsymPrime::accuse, AsymPrime::respond,
                                                AsymPrime::respond_broad};
        AsymAction a;
        a.prime = parse_enum(j.at("prime").get<std::string>(), options);
        if (j.contains("target")) a.target = j["target"].get<int>();
        if (j.contains("property")) a.property = j["property"].get<std::string>();
        if (j.contains("value")) a.value = j["value"].get<std::string>();
        if (j.contains("answer")) a.answer = j["answer"].get<bool>();
        if (j.contains("broad_list")) a.broad_list = j["broad_list"].get<std::vector<int>>();
        action = std::move(a);
    } else if (type == "sym") {
        static constexpr SymPrime options[] = {SymPrime::share, SymPrime::accuse, SymPrime::skip};
        SymAction a;
        a.prime = parse_enum(j.at("prime").get<std::string>(), options);
        if (j.contains("fact_index")) a.fact_index = j["fact_index"].get<int>();
        if (j.contains("target")) a.target = j["target"].get<int>();
        if (j.contains("stated"))
            a.stated = Fact{j["stated"].at("property").get<std::string>(),
                            j["stated"].at("value").get<std::string>()};
        action = std::move(a);
    } else if (type == "commons") {
        static constexpr CommonsPrime options[] = {CommonsPrime::harvest, CommonsPrime::discuss};
        CommonsAction a;
        a.prime = parse_enum(j.at("prime").get<std::string>(), options);
        a.amount = j.value("amount", 0.0);
        a.text = j.value("text", std::string{});
        action = std::move(a);
    } else {
        throw Error(ErrorCode::parse_error, fmt::format("unknown action type '{}'", type));
    }
}

void to_json(nlohmann::json& j, const AgentDecision& decision) {
    j = {{"action", decision.action},
         {"generation", decision.generation},
         {"positions", decision.positions}};
}

void from_json(const nlohmann::json& j, AgentDecision& decision) {
    decision.action = j.at("action").get<Action>();
    decision.generation = j.value("generation", std::string{});
    decision.positions = j.value("positions", std::vector<std::vector<double>>{});
}

} // namespace agentwatch
