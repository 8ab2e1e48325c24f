#include <atomic>
#include <cmath>
#include <deque>
#include <mutex>
#include <thread>

#include <doctest.h>
#include <fmt/format.h>
#include <httplib.h>

#include "agentwatch/error.hpp"
#include "agentwatch/llm.hpp"
#include "agentwatch/uncertainty.hpp"

using namespace agentwatch;

namespace {

struct Reply {
    int status = 200;
    std::string content;
    // one entry per token: (token, top list)
    std::vector<std::pair<std::string, std::vector<std::pair<std::string, double>>>> tokens;
};

nlohmann::json completion_body(const Reply& r) {
    nlohmann::json content = nlohmann::json::array();
    for (const auto& [tok, top] : r.tokens) {
        nlohmann::json entry{{"token", tok}, {"logprob", top.empty() ? 0.0 : top.front().second}};
        entry["top_logprobs"] = nlohmann::json::array();
        for (const auto& [t, lp] : top) entry["top_logprobs"].push_back({{"token", t}, {"logprob", lp}});
        content.push_back(entry);
    }
    return {{"choices", {{{"message", {{"role", "assistant"}, {"content", r.content}}},
                          {"logprobs", {{"content", content}}}}}}};
}

/// Chat-completions stub serving a queue of replies; 200 with `fallback`
/// once the queue is empty.
class StubServer {
public:
    StubServer() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            const int now = ++active_;
            int seen = max_active_.load();
            while (now > seen && !max_active_.compare_exchange_weak(seen, now)) {}
            Reply r;
            {
                std::lock_guard lock(mu_);
                requests_.push_back(nlohmann::json::parse(req.body));
                headers_.push_back(req.headers);
                if (!queue_.empty()) {
                    r = queue_.front();
                    queue_.pop_front();
                } else {
                    r = fallback_;
                }
            }
            if (delay_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
            res.status = r.status;
            if (req.has_header("X-Request-Id")) res.set_header("X-Request-Id", req.get_header_value("X-Request-Id"));
            res.set_content(r.status == 200 ? completion_body(r).dump() : std::string("{\"error\":\"stub\"}"),
                            "application/json");
            --active_;
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }

    void push(Reply r) {
        std::lock_guard lock(mu_);
        queue_.push_back(std::move(r));
    }
    void set_fallback(Reply r) {
        std::lock_guard lock(mu_);
        fallback_ = std::move(r);
    }
    std::size_t request_count() {
        std::lock_guard lock(mu_);
        return requests_.size();
    }
    nlohmann::json request(std::size_t i) {
        std::lock_guard lock(mu_);
        return requests_.at(i);
    }
    httplib::Headers headers(std::size_t i) {
        std::lock_guard lock(mu_);
        return headers_.at(i);
    }

    LlmConfig config() const {
        LlmConfig c;
        c.endpoint = fmt::format("http://127.0.0.1:{}/v1/chat/completions", port_);
        c.model = "stub-model";
        c.api_key_env = "";
        c.retry_backoff_ms = 0;
        c.timeout_seconds = 5.0;
        return c;
    }

    int delay_ms_ = 0;
    std::atomic<int> max_active_{0};

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::mutex mu_;
    std::deque<Reply> queue_;
    Reply fallback_;
    std::vector<nlohmann::json> requests_;
    std::vector<httplib::Headers> headers_;
    std::atomic<int> active_{0};
};

Reply text_reply(std::string content) {
    Reply r;
    r.content = content;
    r.tokens.push_back({content, {}});
    return r;
}

std::vector<std::pair<std::string, double>> top_of(const std::vector<double>& masses) {
    std::vector<std::pair<std::string, double>> top;
    for (std::size_t i = 0; i < masses.size(); ++i) top.emplace_back(std::to_string(i + 1), std::log(masses[i]));
    return top;
}

std::vector<TokenLogprobs> tokenize(const std::vector<std::string>& pieces,
                                    const std::map<std::size_t, std::vector<double>>& tops = {}) {
    std::vector<TokenLogprobs> out;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        TokenLogprobs t;
        t.token = pieces[i];
        if (auto it = tops.find(i); it != tops.end()) t.top = top_of(it->second);
        else t.top = {{pieces[i], 0.0}};
        out.push_back(t);
    }
    return out;
}

AgentObservation accuser_obs() {
    auto spec = std::make_shared<const GameSpec>(generate_game(Variant::asymmetric, 5, 31, 7));
    return observe(new_asymmetric_game(spec), 0);
}

} // namespace

TEST_CASE("llm config json round trip and validation") {
    LlmConfig c;
    c.endpoint = "https://example.invalid/v1/chat/completions";
    c.model = "m";
    c.top_k = 5;
    c.retry_budget = 3;
    const nlohmann::json j = c;
    CHECK(j.get<LlmConfig>() == c);

    auto bad = j;
    bad["top_k"] = 0;
    CHECK_THROWS_AS(bad.get<LlmConfig>(), Error);
    bad = j;
    bad.erase("model");
    CHECK_THROWS_AS(bad.get<LlmConfig>(), Error);
}

TEST_CASE("parse_completion reads content and logprobs") {
    Reply r;
    r.content = "{\"action\": 2}";
    r.tokens = {{"{\"action\": ", {{"{\"action\": ", -0.1}}}, {"2", {{"2", -0.2}, {"3", -1.8}}}, {"}", {}}};
    const auto c = parse_completion(completion_body(r).dump());
    CHECK(c.text == r.content);
    REQUIRE(c.tokens.size() == 3);
    CHECK(c.tokens[1].token == "2");
    REQUIRE(c.tokens[1].top.size() == 2);
    CHECK(c.tokens[1].top[1].second == doctest::Approx(-1.8));
    CHECK_THROWS_AS(parse_completion("not json"), Error);
    CHECK_THROWS_AS(parse_completion("{\"choices\": []}"), Error);
}

TEST_CASE("fill_template leaves unknown braces alone") {
    CHECK(fill_template("{A} and {B} {A}", {{"A", "x"}}) == "x and {B} x");
    CHECK(fill_template("{\"action\": 1}", {{"A", "x"}}) == "{\"action\": 1}");
}

TEST_CASE("rendered prompts carry the observation") {
    const auto obs = accuser_obs();
    const auto p = render_prompts(obs);
    CHECK(p.user.find("out of 31") != std::string::npos);
    for (const char* key : {"{NAME}", "{TURN_COUNT}", "{MAX_TURN_COUNT}", "{COMMUNICATION_CHANNEL}", "{AGENT_NAMES}"}) {
        CHECK(p.system.find(key) == std::string::npos);
        CHECK(p.user.find(key) == std::string::npos);
    }
    CHECK_THROWS_AS(prompt_asset("no_such_prompt"), Error);
    CHECK_FALSE(prompt_asset("format_reminder").empty());
}

TEST_CASE("lenient_json tolerates fences and python literals") {
    const auto a = lenient_json("```json\n{\"action\": 1, \"value\": True}\n```");
    REQUIRE(a);
    CHECK((*a)["value"] == true);
    const auto b = lenient_json("I think {\"action\": 3, \"character\": 4} is right");
    REQUIRE(b);
    CHECK((*b)["character"] == 4);
    CHECK_FALSE(lenient_json("no braces here"));
}

TEST_CASE("accuser generations parse into actions") {
    const auto obs = accuser_obs();
    const auto req = parse_action(
        "{\"action\": 1, \"character\": 3, \"property\": \"hat\", \"value\": \"black\", \"thoughts\": \"x\"}", obs);
    REQUIRE(std::holds_alternative<AsymAction>(req));
    const auto& a = std::get<AsymAction>(req);
    CHECK(a.prime == AsymPrime::request_specific);
    CHECK(a.target == 3);
    CHECK(a.property == "hat");
    CHECK(a.value == "black");

    const auto accuse = parse_action("{\"action\": 3, \"character\": \"2\"}", obs);
    REQUIRE(std::holds_alternative<AsymAction>(accuse));
    CHECK(std::get<AsymAction>(accuse).prime == AsymPrime::accuse);
    CHECK(std::get<AsymAction>(accuse).target == 2);

    CHECK(std::holds_alternative<Malformed>(parse_action("{\"character\": 3}", obs)));
    CHECK(std::holds_alternative<Malformed>(parse_action("{\"action\": 9}", obs)));
    CHECK(std::holds_alternative<Malformed>(parse_action("sure thing", obs)));
}

TEST_CASE("numeral positions in the character field") {
    const std::string gen = "{\"action\": 3, \"character\": 3}";
    const auto tokens = tokenize({"{\"action\": ", "3", ", \"character\": ", "3", "}"},
                                 {{3, {0.7, 0.2, 0.1}}});
    const auto pos = extract_positions(gen, tokens, EnvKind::whodunit, 5);
    REQUIRE(pos.size() == 1);  // the action code is not a monitored numeral
    REQUIRE(pos[0].size() == 3);
    CHECK(pos[0][0] == doctest::Approx(0.7));

    const auto none = extract_positions("{\"action\": 2}", tokenize({"{\"action\": ", "2", "}"}),
                                        EnvKind::whodunit, 5);
    CHECK(none.empty());
}

TEST_CASE("thoughts numerals are bounded by the suspect count") {
    const std::string gen = "{\"action\": 2, \"thoughts\": \"suspects 2 and 17 remain\"}";
    const auto tokens = tokenize({"{\"action\": 2, \"thoughts\": \"suspects ", "2", " and ", "17", " remain\"}"});
    const auto pos = extract_positions(gen, tokens, EnvKind::whodunit, 10);
    CHECK(pos.size() == 1);
}

TEST_CASE("truncated top-k mass renormalizes") {
    std::vector<double> masses(10, 0.08);  // total 0.8
    const std::string gen = "{\"character\": 4}";
    const auto tokens = tokenize({"{\"character\": ", "4", "}"}, {{1, masses}});
    const auto pos = extract_positions(gen, tokens, EnvKind::whodunit, 10);
    REQUIRE(pos.size() == 1);
    double sum = 0.0;
    for (double p : pos[0]) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pos[0][0] == doctest::Approx(0.1));
    CHECK(entropy(pos[0]) <= std::log(10.0) + 1e-12);
}

TEST_CASE("commons positions cover every numeral") {
    const std::string gen = "{\"amount\": 12.5, \"message\": \"take 10\"}";
    const auto tokens = tokenize({"{\"amount\": ", "12", ".5", ", \"message\": \"take ", "10", "\"}"});
    CHECK(extract_positions(gen, tokens, EnvKind::commons, 0).size() == 3);
}

TEST_CASE("chat client sends the configured request") {
    StubServer stub;
    stub.push(text_reply("{\"action\": 2}"));
    auto cfg = stub.config();
    cfg.top_k = 7;
    ChatClient client(cfg);
    const auto c = client.complete("sys", "usr");
    CHECK(c.text == "{\"action\": 2}");
    REQUIRE(stub.request_count() == 1);
    const auto body = stub.request(0);
    CHECK(body["model"] == "stub-model");
    CHECK(body["logprobs"] == true);
    CHECK(body["top_logprobs"] == 7);
    CHECK(body["temperature"] == 0.0);
    CHECK(body["messages"][0]["content"] == "sys");
    CHECK(body["messages"][1]["content"] == "usr");
    CHECK(stub.headers(0).count("X-Request-Id") == 1);
}

TEST_CASE("chat client retries server errors within the budget") {
    StubServer stub;
    auto cfg = stub.config();
    cfg.retry_budget = 2;

    SUBCASE("recovers after transient failures") {
        stub.push(Reply{500, "", {}});
        stub.push(Reply{429, "", {}});
        stub.push(text_reply("{\"action\": 2}"));
        ChatClient client(cfg);
        CHECK(client.complete("s", "u").text == "{\"action\": 2}");
        CHECK(stub.request_count() == 3);
    }
    SUBCASE("gives up after budget + 1 attempts") {
        stub.set_fallback(Reply{500, "", {}});
        ChatClient client(cfg);
        try {
            client.complete("s", "u");
            FAIL("expected api_error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::api_error);
        }
        CHECK(stub.request_count() == 3);
    }
    SUBCASE("client errors are not retried") {
        stub.set_fallback(Reply{400, "", {}});
        ChatClient client(cfg);
        CHECK_THROWS_AS(client.complete("s", "u"), Error);
        CHECK(stub.request_count() == 1);
    }
}

TEST_CASE("unreachable endpoint raises api_error") {
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    LlmConfig cfg;
    cfg.endpoint = fmt::format("http://127.0.0.1:{}/v1/chat/completions", port);
    cfg.model = "m";
    cfg.api_key_env = "";
    cfg.retry_backoff_ms = 0;
    cfg.retry_budget = 1;
    cfg.timeout_seconds = 1.0;
    ChatClient client(cfg);
    try {
        client.complete("s", "u");
        FAIL("expected api_error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::api_error);
    }
}

TEST_CASE("in-flight requests stay under the limit") {
    StubServer stub;
    stub.delay_ms_ = 30;
    stub.set_fallback(text_reply("{\"action\": 2}"));
    auto cfg = stub.config();
    cfg.max_in_flight = 2;
    auto client = std::make_shared<ChatClient>(cfg);
    std::vector<std::thread> threads;
    for (int i = 0; i < 6; ++i) threads.emplace_back([&] { client->complete("s", "u"); });
    for (auto& t : threads) t.join();
    CHECK(stub.request_count() == 6);
    CHECK(stub.max_active_.load() <= 2);
}

TEST_CASE("backend retries a malformed generation with the format reminder") {
    StubServer stub;
    stub.push(text_reply("I would like to ask about the hat."));
    Reply good;
    good.content = "{\"action\": 3, \"character\": 2}";
    good.tokens = {{"{\"action\": 3, \"character\": ", {}}, {"2", top_of({0.6, 0.4})}, {"}", {}}};
    stub.push(good);
    LlmBackend backend(std::make_shared<ChatClient>(stub.config()));
    const auto d = backend.decide(accuser_obs());
    REQUIRE(std::holds_alternative<AsymAction>(d.action));
    CHECK(std::get<AsymAction>(d.action).prime == AsymPrime::accuse);
    CHECK(d.generation == good.content);
    REQUIRE(d.positions.size() == 1);
    CHECK(d.positions[0][0] == doctest::Approx(0.6));
    REQUIRE(stub.request_count() == 2);
    const std::string second_user = stub.request(1)["messages"][1]["content"];
    CHECK(second_user.find(std::string(prompt_asset("format_reminder"))) != std::string::npos);
}

TEST_CASE("backend reports malformed when the retry also fails") {
    StubServer stub;
    stub.set_fallback(text_reply("{\"character\": 2}"));
    LlmBackend backend(std::make_shared<ChatClient>(stub.config()));
    const auto d = backend.decide(accuser_obs());
    CHECK(std::holds_alternative<Malformed>(d.action));
    CHECK(stub.request_count() == 2);
}

TEST_CASE("resample uses the configured temperature") {
    StubServer stub;
    stub.set_fallback(text_reply("{\"action\": 2}"));
    LlmBackend backend(std::make_shared<ChatClient>(stub.config()), 0.7);
    backend.resample(accuser_obs());
    CHECK(stub.request(0)["temperature"] == doctest::Approx(0.7));
}
