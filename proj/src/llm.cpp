#include "agentwatch/llm.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <httplib.h>

#include "agentwatch/error.hpp"

namespace agentwatch {

void to_json(nlohmann::json& j, const LlmConfig& c) {
    j = {{"endpoint", c.endpoint},
         {"model", c.model},
         {"api_key_env", c.api_key_env},
         {"temperature", c.temperature},
         {"top_k", c.top_k},
         {"retry_budget", c.retry_budget},
         {"timeout_seconds", c.timeout_seconds},
         {"max_in_flight", c.max_in_flight},
         {"max_tokens", c.max_tokens},
         {"retry_backoff_ms", c.retry_backoff_ms}};
}

void from_json(const nlohmann::json& j, LlmConfig& c) {
    LlmConfig d;
    for (const char* key : {"endpoint", "model"})
        if (!j.contains(key) || !j[key].is_string())
            throw Error(ErrorCode::invalid_config, fmt::format("llm config needs a string \"{}\"", key));
    c.endpoint = j["endpoint"].get<std::string>();
    c.model = j["model"].get<std::string>();
    c.api_key_env = j.value("api_key_env", d.api_key_env);
    c.temperature = j.value("temperature", d.temperature);
    c.top_k = j.value("top_k", d.top_k);
    c.retry_budget = j.value("retry_budget", d.retry_budget);
    c.timeout_seconds = j.value("timeout_seconds", d.timeout_seconds);
    c.max_in_flight = j.value("max_in_flight", d.max_in_flight);
    c.max_tokens = j.value("max_tokens", d.max_tokens);
    c.retry_backoff_ms = j.value("retry_backoff_ms", d.retry_backoff_ms);
    if (c.top_k < 1 || c.top_k > 20) throw Error(ErrorCode::invalid_config, "top_k must lie in [1, 20]");
    if (c.retry_budget < 0) throw Error(ErrorCode::invalid_config, "retry_budget must be >= 0");
    if (c.max_in_flight < 1 || c.max_in_flight > 1024)
        throw Error(ErrorCode::invalid_config, "max_in_flight must lie in [1, 1024]");
}

Completion parse_completion(std::string_view body) {
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::api_error, "response is not JSON");
    try {
        const auto& choice = j.at("choices").at(0);
        Completion c;
        const auto& content = choice.at("message").at("content");
        c.text = content.is_null() ? std::string{} : content.get<std::string>();
        if (choice.contains("logprobs") && !choice["logprobs"].is_null() &&
            choice["logprobs"].contains("content") && !choice["logprobs"]["content"].is_null()) {
            for (const auto& t : choice["logprobs"]["content"]) {
                TokenLogprobs tok;
                tok.token = t.at("token").get<std::string>();
                tok.logprob = t.value("logprob", 0.0);
                if (t.contains("top_logprobs"))
                    for (const auto& alt : t["top_logprobs"])
                        tok.top.emplace_back(alt.at("token").get<std::string>(),
                                             alt.at("logprob").get<double>());
                c.tokens.push_back(std::move(tok));
            }
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::api_error, fmt::format("unexpected response shape: {}", e.what()));
    }
}

ChatClient::ChatClient(LlmConfig config)
    : config_(std::move(config)), in_flight_(std::max(1, std::min(config_.max_in_flight, 1024))) {
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.endpoint, m, url))
        throw Error(ErrorCode::invalid_config, fmt::format("bad endpoint '{}'", config_.endpoint));
    scheme_host_port_ = m[1].str();
    path_ = m[2].matched ? m[2].str() : "/";
}

nlohmann::json ChatClient::request_body(const std::string& system_prompt,
                                        const std::string& user_prompt, double temperature) const {
    return {{"model", config_.model},
            {"messages",
             {{{"role", "system"}, {"content", system_prompt}},
              {{"role", "user"}, {"content", user_prompt}}}},
            {"temperature", temperature},
            {"max_tokens", config_.max_tokens},
            {"logprobs", true},
            {"top_logprobs", config_.top_k}};
}

Completion ChatClient::complete(const std::string& system_prompt, const std::string& user_prompt,
                                std::optional<double> temperature) {
    const auto body = request_body(system_prompt, user_prompt, temperature.value_or(config_.temperature)).dump();
    const auto request_id = fmt::format("agentwatch-{}", counter_.fetch_add(1));

    httplib::Headers headers{{"X-Request-Id", request_id}};
    if (!config_.api_key_env.empty())
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
            headers.emplace("Authorization", fmt::format("Bearer {}", key));

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retry_budget; ++attempt) {
        if (attempt > 0 && config_.retry_backoff_ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(config_.retry_backoff_ms * attempt));

        in_flight_.acquire();
        httplib::Result res{nullptr, httplib::Error::Unknown};
        {
            httplib::Client cli(scheme_host_port_);
            const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
            cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
            cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
            cli.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
            res = cli.Post(path_, headers, body, "application/json");
        }
        in_flight_.release();

        if (!res) {
            last_error = fmt::format("transport error: {}", httplib::to_string(res.error()));
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = fmt::format("HTTP {}", res->status);
            continue;
        }
        if (res->status != 200)
            throw Error(ErrorCode::api_error,
                        fmt::format("request {}: HTTP {}: {}", request_id, res->status, res->body));
        if (res->has_header("X-Request-Id") && res->get_header_value("X-Request-Id") != request_id)
            throw Error(ErrorCode::api_error,
                        fmt::format("response for {} arrived on request {}", res->get_header_value("X-Request-Id"),
                                    request_id));
        auto completion = parse_completion(res->body);
        completion.request_id = request_id;
        return completion;
    }
    throw Error(ErrorCode::api_error, fmt::format("request {} failed after {} attempts: {}", request_id,
                                                  config_.retry_budget + 1, last_error));
}

std::string fill_template(std::string_view text, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '{') {
            const auto close = text.find('}', i + 1);
            if (close != std::string_view::npos) {
                const auto key = std::string(text.substr(i + 1, close - i - 1));
                if (const auto it = values.find(key); it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += text[i++];
    }
    return out;
}

namespace {

std::string attribute_list(const AttributeSchema& schema) {
    std::vector<std::string> parts;
    for (const auto& a : schema.attributes())
        parts.push_back(fmt::format("{} ({})", a.name, fmt::join(a.values, ", ")));
    return fmt::format("{}", fmt::join(parts, "; "));
}

std::string suspect_information(const AgentObservation& obs) {
    std::string out;
    for (const auto& s : obs.knowledge.suspect_table)
        out += fmt::format("Character {}: {}\n", s.id, describe_profile(obs.schema, s));
    return out;
}

std::string channel_text(const CommunicationChannel& channel) {
    return channel.empty() ? std::string("(no messages yet)") : channel.render();
}

std::string format_number(double v) {
    if (v == std::floor(v) && std::abs(v) < 1e15) return fmt::format("{}", static_cast<long long>(v));
    return fmt::format("{:.2f}", v);
}

} // namespace

Prompts render_prompts(const AgentObservation& obs) {
    std::map<std::string, std::string> v{
        {"NAME", obs.name},
        {"AGENT_COUNT", std::to_string(obs.agent_names.size())},
        {"AGENT_NAMES", fmt::format("{}", fmt::join(obs.agent_names, ", "))},
        {"TURN_COUNT", std::to_string(obs.turn_index)},
        {"MAX_TURN_COUNT", std::to_string(obs.turn_limit)},
        {"COMMUNICATION_CHANNEL", channel_text(obs.channel)},
        {"COMM_CHANNEL", channel_text(obs.channel)},
    };
    Prompts p;
    if (obs.env == EnvKind::commons) {
        const auto& c = obs.commons.value();
        v["CAPACITY"] = format_number(c.R0);
        v["GAMMA"] = format_number(c.gamma);
        v["STOCK"] = format_number(c.stock);
        v["PHASE_INSTRUCTION"] =
            c.phase == CommonsPhase::harvest
                ? "How many tons do you catch this month?"
                : "Fishing for this month is over. Discuss your plans for next month with the others.";
        p.system = fill_template(prompt_asset("commons_system"), v);
        p.user = fill_template(prompt_asset("commons_user"), v);
        return p;
    }

    v["SUSPECT_NUM"] = std::to_string(obs.n_suspects);
    v["CHARACTER_ATTRIBUTES"] = attribute_list(obs.schema);
    v["SUSPECT_INFORMATION"] = suspect_information(obs);
    for (std::size_t i = 0; i < obs.agent_names.size(); ++i)
        if (static_cast<int>(i) != obs.agent_id) {
            v["PARTNER_NAME"] = obs.agent_names[i];
            break;
        }
    std::string facts, description;
    for (std::size_t i = 0; i < obs.knowledge.culprit_facts.size(); ++i) {
        facts += fmt::format("{}. {}\n", i + 1, render_fact(obs.knowledge.culprit_facts[i]));
        description += fmt::format("- {}\n", render_fact(obs.knowledge.culprit_facts[i]));
    }
    v["FACTS"] = facts;
    v["WINNER_DESCRIPTION"] = description;

    switch (obs.role) {
    case Role::accuser:
        p.system = fill_template(prompt_asset("accuser_system"), v);
        p.user = fill_template(prompt_asset("asymmetric_user"), v);
        break;
    case Role::intel:
        p.system = fill_template(prompt_asset("intel_system"), v);
        p.user = fill_template(prompt_asset("asymmetric_user"), v);
        break;
    case Role::player:
        p.system = fill_template(prompt_asset("symmetric_system"), v);
        p.user = fill_template(prompt_asset("symmetric_user"), v);
        break;
    }
    return p;
}

std::optional<nlohmann::json> lenient_json(std::string_view generation) {
    std::string text;
    for (std::size_t pos = 0; pos <= generation.size();) {
        auto end = generation.find('\n', pos);
        if (end == std::string_view::npos) end = generation.size();
        const auto line = generation.substr(pos, end - pos);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string_view::npos || line.substr(first, 3) != "```") {
            text += line;
            text += '\n';
        }
        pos = end + 1;
    }
    const auto open = text.find('{');
    const auto close = text.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
    text = text.substr(open, close - open + 1);

    std::string fixed;
    bool in_string = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (in_string) {
            fixed += ch;
            if (ch == '\\' && i + 1 < text.size()) fixed += text[++i];
            else if (ch == '"') in_string = false;
            continue;
        }
        if (ch == '"') {
            in_string = true;
            fixed += ch;
            continue;
        }
        const auto word_at = [&](std::string_view w) {
            if (text.compare(i, w.size(), w) != 0) return false;
            const auto after = i + w.size();
            return after >= text.size() || !std::isalnum(static_cast<unsigned char>(text[after]));
        };
        if (word_at("True")) {
            fixed += "true";
            i += 3;
        } else if (word_at("False")) {
            fixed += "false";
            i += 4;
        } else if (word_at("None")) {
            fixed += "null";
            i += 3;
        } else {
            fixed += ch;
        }
    }
    auto j = nlohmann::json::parse(fixed, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    return j;
}

namespace {

std::optional<long long> as_integer(const nlohmann::json& j) {
    if (j.is_number_integer()) return j.get<long long>();
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (v == std::floor(v)) return static_cast<long long>(v);
        return std::nullopt;
    }
    if (j.is_string()) {
        static const std::regex digits(R"(-?\d+)");
        std::smatch m;
        const auto s = j.get<std::string>();
        if (std::regex_search(s, m, digits)) return std::stoll(m.str());
    }
    return std::nullopt;
}

std::optional<double> as_number(const nlohmann::json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        static const std::regex number(R"(-?\d+(\.\d+)?)");
        std::smatch m;
        const auto s = j.get<std::string>();
        if (std::regex_search(s, m, number)) return std::stod(m.str());
    }
    return std::nullopt;
}

std::optional<bool> as_bool(const nlohmann::json& j) {
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_string()) {
        auto s = j.get<std::string>();
        for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (s == "true" || s == "yes") return true;
        if (s == "false" || s == "no") return false;
    }
    return std::nullopt;
}

std::vector<int> as_id_list(const nlohmann::json& j) {
    std::vector<int> ids;
    if (j.is_array()) {
        for (const auto& e : j)
            if (auto v = as_integer(e)) ids.push_back(static_cast<int>(*v));
    } else if (j.is_number()) {
        if (auto v = as_integer(j)) ids.push_back(static_cast<int>(*v));
    } else if (j.is_string()) {
        static const std::regex digits(R"(\d+)");
        const auto s = j.get<std::string>();
        for (auto it = std::sregex_iterator(s.begin(), s.end(), digits); it != std::sregex_iterator(); ++it)
            ids.push_back(std::stoi(it->str()));
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

std::optional<std::string> as_text(const nlohmann::json& obj, const char* key) {
    if (!obj.contains(key) || !obj[key].is_string()) return std::nullopt;
    return obj[key].get<std::string>();
}

} // namespace

Action parse_action(std::string_view generation, const AgentObservation& obs) {
    const auto parsed = lenient_json(generation);
    if (!parsed) return Malformed{"no JSON object in the generation"};
    const auto& j = *parsed;

    if (obs.env == EnvKind::commons) {
        const auto& view = obs.commons.value();
        CommonsAction act;
        const auto amount = j.contains("amount") ? as_number(j["amount"]) : std::nullopt;
        if (view.phase == CommonsPhase::harvest) {
            if (!amount) return Malformed{"missing \"amount\""};
            act.prime = CommonsPrime::harvest;
            act.amount = *amount;
        } else {
            const auto message = as_text(j, "message");
            if (!message) return Malformed{"missing \"message\""};
            act.prime = CommonsPrime::discuss;
            act.amount = amount.value_or(0.0);
            act.text = fmt::format("{}: {}", obs.name, *message);
        }
        return act;
    }

    if (!j.contains("action")) return Malformed{"missing \"action\""};
    const auto code = as_integer(j["action"]);
    if (!code) return Malformed{"\"action\" is not a number"};
    const auto character = j.contains("character") ? as_integer(j["character"]) : std::nullopt;

    switch (obs.role) {
    case Role::accuser: {
        AsymAction act;
        if (*code == 1) {
            const auto property = as_text(j, "property");
            const auto value = as_text(j, "value");
            if (!character || !property || !value) return Malformed{"request needs character, property and value"};
            act.prime = AsymPrime::request_specific;
            act.target = static_cast<int>(*character);
            act.property = *property;
            act.value = *value;
        } else if (*code == 2) {
            act.prime = AsymPrime::request_broad;
        } else if (*code == 3) {
            if (!character) return Malformed{"award needs a character"};
            act.prime = AsymPrime::accuse;
            act.target = static_cast<int>(*character);
        } else {
            return Malformed{fmt::format("unknown action {}", *code)};
        }
        return act;
    }
    case Role::intel: {
        AsymAction act;
        if (*code == 1) {
            const auto answer = j.contains("value") ? as_bool(j["value"]) : std::nullopt;
            if (!answer) return Malformed{"answer needs a True/False value"};
            act.prime = AsymPrime::respond;
            act.answer = *answer;
        } else if (*code == 2) {
            const auto pv = as_text(j, "value");
            const auto dash = pv ? pv->find('-') : std::string::npos;
            if (dash == std::string::npos) return Malformed{"broad message needs property-value"};
            act.prime = AsymPrime::respond_broad;
            act.property = pv->substr(0, dash);
            act.value = pv->substr(dash + 1);
            if (j.contains("character")) act.broad_list = as_id_list(j["character"]);
        } else {
            return Malformed{fmt::format("unknown action {}", *code)};
        }
        return act;
    }
    case Role::player: {
        SymAction act;
        if (*code == 1) {
            const auto fact = j.contains("fact") ? as_integer(j["fact"]) : std::nullopt;
            if (!fact) return Malformed{"share needs a fact number"};
            act.prime = SymPrime::share;
            act.fact_index = static_cast<int>(*fact) - 1;
        } else if (*code == 2) {
            if (!character) return Malformed{"award needs a character"};
            act.prime = SymPrime::accuse;
            act.target = static_cast<int>(*character);
        } else if (*code == 3) {
            act.prime = SymPrime::skip;
        } else {
            return Malformed{fmt::format("unknown action {}", *code)};
        }
        return act;
    }
    }
    return Malformed{"unknown role"};
}

namespace {

struct Span {
    std::size_t begin;
    std::size_t end;
};

// End of the JSON value starting at `pos` (exclusive).
std::size_t value_end(std::string_view text, std::size_t pos) {
    if (pos >= text.size()) return text.size();
    const char open = text[pos];
    if (open == '"') {
        for (std::size_t i = pos + 1; i < text.size(); ++i) {
            if (text[i] == '\\') ++i;
            else if (text[i] == '"') return i + 1;
        }
        return text.size();
    }
    if (open == '[') {
        const auto close = text.find(']', pos);
        return close == std::string_view::npos ? text.size() : close + 1;
    }
    const auto stop = text.find_first_of(",}\n", pos);
    return stop == std::string_view::npos ? text.size() : stop;
}

void field_numerals(std::string_view text, const std::string& key, bool bounded, int n_suspects,
                    std::vector<Span>& spans) {
    const std::regex field("\"" + key + R"("\s*:\s*)");
    const std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), field); it != std::sregex_iterator(); ++it) {
        const auto start = static_cast<std::size_t>(it->position() + it->length());
        const auto end = value_end(text, start);
        std::size_t i = start;
        while (i < end) {
            if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < end && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
            bool keep = true;
            if (bounded) {
                const auto value = j - i > 6 ? -1LL : std::stoll(std::string(text.substr(i, j - i)));
                keep = value >= 1 && value <= n_suspects;
            }
            if (keep) spans.push_back({i, j});
            i = j;
        }
    }
}

} // namespace

std::vector<std::vector<double>> extract_positions(std::string_view generation,
                                                   const std::vector<TokenLogprobs>& tokens,
                                                   EnvKind env, int n_suspects) {
    std::vector<Span> spans;
    if (env == EnvKind::whodunit) {
        field_numerals(generation, "character", false, n_suspects, spans);
        field_numerals(generation, "thoughts", true, n_suspects, spans);
    } else {
        static const std::regex number(R"(\d+(\.\d+)?)");
        const std::string s(generation);
        for (auto it = std::sregex_iterator(s.begin(), s.end(), number); it != std::sregex_iterator(); ++it)
            spans.push_back({static_cast<std::size_t>(it->position()),
                             static_cast<std::size_t>(it->position() + it->length())});
    }

    std::set<std::size_t> selected;
    std::size_t offset = 0;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const auto begin = offset;
        const auto end = offset + tokens[t].token.size();
        offset = end;
        for (const auto& sp : spans)
            if (begin < sp.end && sp.begin < end && end > begin) selected.insert(t);
    }

    std::vector<std::vector<double>> positions;
    for (const auto t : selected) {
        const auto& tok = tokens[t];
        std::vector<double> p;
        if (tok.top.empty()) {
            p.push_back(1.0);
        } else {
            double total = 0.0;
            for (const auto& [text, lp] : tok.top) {
                const double mass = std::exp(lp);
                p.push_back(mass);
                total += mass;
            }
            if (!(total > 0.0) || !std::isfinite(total)) continue;
            for (auto& x : p) x /= total;
        }
        positions.push_back(std::move(p));
    }
    return positions;
}

LlmBackend::LlmBackend(std::shared_ptr<ChatClient> client, std::optional<double> resample_temperature)
    : client_(std::move(client)), resample_temperature_(resample_temperature) {
    if (!client_) throw Error(ErrorCode::invalid_argument, "null chat client");
}

AgentDecision LlmBackend::run(const AgentObservation& obs, std::optional<double> temperature) {
    const auto prompts = render_prompts(obs);
    auto completion = client_->complete(prompts.system, prompts.user, temperature);
    auto action = parse_action(completion.text, obs);
    if (std::holds_alternative<Malformed>(action)) {
        const auto user = prompts.user + "\n\n" + std::string(prompt_asset("format_reminder"));
        completion = client_->complete(prompts.system, user, temperature);
        action = parse_action(completion.text, obs);
    }
    AgentDecision d;
    d.action = std::move(action);
    d.positions = extract_positions(completion.text, completion.tokens, obs.env, obs.n_suspects);
    d.generation = std::move(completion.text);
    return d;
}

AgentDecision LlmBackend::decide(const AgentObservation& obs) { return run(obs, std::nullopt); }

AgentDecision LlmBackend::resample(const AgentObservation& obs) {
    return run(obs, resample_temperature_);
}

} // namespace agentwatch
