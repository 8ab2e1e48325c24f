#include <algorithm>
#include <cmath>
#include <set>

#include <doctest.h>

#include "agentwatch/commons.hpp"
#include "agentwatch/error.hpp"

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

CommonsConfig config(double R0 = 100.0, int n = 2, std::uint64_t seed = 0) {
    CommonsConfig c;
    c.R0 = R0;
    c.n_agents = n;
    c.seed = seed;
    return c;
}

} // namespace

TEST_CASE("config defaults and JSON") {
    const CommonsConfig c;
    CHECK(c.gamma == 5.0);
    CHECK(c.m == 12);
    CHECK(c.optimum() == 600.0);
    nlohmann::json j = config(150.0, 3, 9);
    CHECK(j.get<CommonsConfig>() == config(150.0, 3, 9));
    CHECK(j.contains("R0"));
    CHECK(j.contains("gamma"));
    CHECK(code_of([] { nlohmann::json{{"m", 0}}.get<CommonsConfig>(); }) == ErrorCode::invalid_config);
}

TEST_CASE("harvest_phase examples") {
    auto s = new_commons_game(config());
    harvest_phase(s, {{0, 10.0}, {1, 10.0}});
    CHECK(s.stock == 80.0);
    CHECK(s.harvest_log.size() == 2);
    CHECK(s.channel.checkpoints().size() == 1);
    CHECK(s.channel.checkpoints().back() == s.channel.size());
    CHECK(s.post_harvest_stocks == std::vector<double>{80.0});

    auto zero = new_commons_game(config());
    harvest_phase(zero, {{0, 0.0}, {1, 0.0}});
    CHECK(zero.stock == 100.0);
}

TEST_CASE("oversubscription clips the later agent and conserves the total") {
    // both orders: the first takes 8, the second gets the remaining 2
    std::set<int> first_agents;
    for (std::uint64_t seed = 0; seed < 64; ++seed) {
        auto s = new_commons_game(config(10.0, 2, seed));
        harvest_phase(s, {{0, 8.0}, {1, 8.0}});
        CHECK(s.total_harvest() == 10.0);
        CHECK(s.stock == 0.0);
        REQUIRE(s.harvest_log.size() == 2);
        CHECK(s.harvest_log[0].amount == 8.0);
        CHECK(s.harvest_log[1].amount == 2.0);
        first_agents.insert(s.harvest_log[0].agent);
        CHECK(s.harvest_log[0].agent == harvest_order(s.config, 1, {0, 1})[0]);
    }
    CHECK(first_agents.size() == 2);
}

TEST_CASE("harvest totals do not depend on the processing order") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const double stock = 20.0 + static_cast<double>(seed % 50);
        std::map<int, double> requests{{0, 3.0 + seed % 7}, {1, 11.0}, {2, 0.5 * (seed % 13)}, {3, 9.0}};
        double asked = 0.0;
        for (const auto& [a, r] : requests) asked += r;
        auto s = new_commons_game(config(stock, 4, seed));
        harvest_phase(s, requests);
        CHECK(s.total_harvest() == doctest::Approx(std::min(asked, stock)).epsilon(1e-12));
        CHECK(s.stock >= 0.0);
    }
}

TEST_CASE("harvest preconditions") {
    auto s = new_commons_game(config());
    const auto before = s.stock;
    CHECK(code_of([&] { harvest_phase(s, {{0, -1.0}}); }) == ErrorCode::negative_request);
    CHECK(code_of([&] { harvest_phase(s, {{0, std::nan("")}}); }) == ErrorCode::negative_request);
    CHECK(s.stock == before);
    CHECK(s.harvest_log.empty());
    CHECK(code_of([&] { harvest_phase(s, {{5, 1.0}}); }) == ErrorCode::invalid_argument);
    CHECK(code_of([&] { regrow(s); }) == ErrorCode::invalid_argument);
    harvest_phase(s, {{0, 1.0}});
    CHECK(code_of([&] { harvest_phase(s, {{0, 1.0}}); }) == ErrorCode::invalid_argument);
}

TEST_CASE("regrow examples") {
    CHECK(regrow_stock(30.0, 100.0) == 60.0);
    CHECK(regrow_stock(60.0, 100.0) == 100.0);
    CHECK(regrow_stock(0.0, 100.0) == 0.0);

    auto s = new_commons_game(config());
    harvest_phase(s, {{0, 35.0}, {1, 35.0}});
    regrow(s);
    CHECK(s.stock == 60.0);
    CHECK(s.round == 2);
    harvest_phase(s, {{0, 0.0}, {1, 0.0}});
    regrow(s);
    CHECK(s.stock == 100.0);
}

TEST_CASE("efficiency examples") {
    const CommonsConfig c;  // R0 100, m 12: c = 600
    CHECK(commons_efficiency(600.0, c) == 1.0);
    CHECK(commons_efficiency(0.0, c) == 0.0);
    CHECK(commons_efficiency(300.0, c) == 0.5);
    CHECK(commons_efficiency(900.0, c) == 1.0);
    double last = -1.0;
    for (double h = 0.0; h <= 700.0; h += 7.0) {
        const double e = commons_efficiency(h, c);
        CHECK(e >= last);
        CHECK(e >= 0.0);
        CHECK(e <= 1.0);
        last = e;
    }
}

TEST_CASE("survival metrics") {
    const CommonsConfig c;
    const std::vector<double> all_high(12, 50.0);
    auto r = commons_metrics(all_high, 600.0, c);
    CHECK(r.survival_time == 12);
    CHECK(r.survived);
    const std::vector<double> collapse{50.0, 20.0, 4.0};
    r = commons_metrics(collapse, 200.0, c);
    CHECK(r.survival_time == 2);
    CHECK_FALSE(r.survived);
    // exactly gamma does not count as above it
    r = commons_metrics(std::vector<double>{5.0}, 0.0, c);
    CHECK(r.survival_time == 0);
}

TEST_CASE("sustainable play over twelve rounds") {
    auto s = new_commons_game(config(100.0, 4));
    while (!s.done()) {
        std::map<int, double> req;
        for (int a = 0; a < 4; ++a) req[a] = s.stock / 8.0;
        harvest_phase(s, req);
        if (s.collapsed) break;
        if (s.round < s.config.m) add_discussion(s, 0, render_discussion("Alex", 12.5));
        regrow(s);
        CHECK(s.stock <= s.config.R0);
    }
    CHECK(s.round == 13);
    const auto r = commons_metrics(s.post_harvest_stocks, s.total_harvest(), s.config);
    CHECK(r.survived);
    CHECK(r.total_harvest == doctest::Approx(600.0));
    CHECK(r.efficiency == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rollback_round keeps harvests") {
    auto s = new_commons_game(config());
    harvest_phase(s, {{0, 10.0}, {1, 10.0}});
    add_discussion(s, 0, render_discussion("Alex", 5));
    add_discussion(s, 1, render_discussion("Beth", 5));
    const auto log = s.harvest_log;
    const auto frozen = s.channel.last_checkpoint();
    rollback_round(s);
    CHECK(s.channel.size() == frozen);
    CHECK(s.harvest_log == log);
    CHECK(render_discussion("Alex", 5) == "Alex: I will harvest 5 fish next round.");
}
