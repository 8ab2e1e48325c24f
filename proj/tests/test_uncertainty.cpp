#include <cmath>
#include <numeric>
#include <vector>

#include <doctest.h>

#include "agentwatch/error.hpp"
#include "agentwatch/rng.hpp"
#include "agentwatch/uncertainty.hpp"

using namespace agentwatch;

namespace {

// closed forms for a two-point distribution {p, q}
double two_point_varentropy(double p) {
    const double q = 1.0 - p;
    const double d = std::log(p / q);
    return p * q * d * d;
}
double two_point_kurtosis(double p) {
    const double q = 1.0 - p;
    return (1.0 - 3.0 * p * q) / (p * q);
}

std::vector<double> random_distribution(Rng& rng, std::size_t k) {
    std::vector<double> p(k);
    for (auto& x : p) x = -std::log(1.0 - rng.uniform());
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& x : p) x /= s;
    return p;
}

AgentDecision with_positions(std::vector<std::vector<double>> positions) {
    AgentDecision d;
    d.action = Malformed{"test"};
    d.positions = std::move(positions);
    return d;
}

} // namespace

TEST_CASE("entropy examples") {
    CHECK(entropy(std::vector<double>{0.0, 1.0, 0.0}) == 0.0);
    CHECK(entropy(std::vector<double>{0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    // 0.5 ln 2 + 2 * 0.25 ln 4
    CHECK(entropy(std::vector<double>{0.5, 0.25, 0.25}) == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-14));
    CHECK(entropy(std::vector<double>{0.5, 0.25, 0.25}) == doctest::Approx(1.0397).epsilon(1e-4));
}

TEST_CASE("varentropy examples") {
    CHECK(varentropy(std::vector<double>(7, 1.0 / 7)) == doctest::Approx(0.0).epsilon(1e-15));
    // surprisals ln2, 2ln2, 2ln2 around 1.5 ln2: every deviation is 0.5 ln 2
    const double l2 = std::log(2.0);
    CHECK(varentropy(std::vector<double>{0.5, 0.25, 0.25}) == doctest::Approx(0.25 * l2 * l2).epsilon(1e-13));
    CHECK(varentropy(std::vector<double>{0.5, 0.25, 0.25}) == doctest::Approx(0.1201).epsilon(1e-4));
    CHECK(varentropy(std::vector<double>{0.9, 0.1}) == doctest::Approx(two_point_varentropy(0.9)).epsilon(1e-13));
    CHECK(varentropy(std::vector<double>{0.9, 0.1}) == doctest::Approx(0.4345).epsilon(1e-4));
}

TEST_CASE("kurtosis examples") {
    CHECK(kurtosis(std::vector<double>{0.5, 0.25, 0.25}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(kurtosis(std::vector<double>{0.9, 0.1}) == doctest::Approx(two_point_kurtosis(0.9)).epsilon(1e-12));
    CHECK(kurtosis(std::vector<double>{0.9, 0.1}) == doctest::Approx(8.1111).epsilon(1e-4));
    try {
        kurtosis(std::vector<double>{0.25, 0.25, 0.25, 0.25});
        FAIL("expected degenerate_distribution");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::degenerate_distribution);
    }
    CHECK(position_stats(std::vector<double>{1.0, 0.0}, 3.5).kurtosis == 3.5);
}

TEST_CASE("invalid distributions are rejected") {
    const auto code_of = [](std::vector<double> p) {
        try {
            entropy(p);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::parse_error;
    };
    CHECK(code_of({0.5, 0.6}) == ErrorCode::invalid_distribution);
    CHECK(code_of({1.2, -0.2}) == ErrorCode::invalid_distribution);
    CHECK(code_of({}) == ErrorCode::invalid_distribution);
    CHECK(code_of({std::nan(""), 1.0}) == ErrorCode::invalid_distribution);
    CHECK_NOTHROW(entropy(std::vector<double>{0.5, 0.5 + 5e-10}));
}

TEST_CASE("statistic properties on random distributions") {
    Rng rng(42);
    for (int trial = 0; trial < 500; ++trial) {
        const auto k = 2 + rng.below(40);
        auto p = random_distribution(rng, k);
        const double h = entropy(p);
        CHECK(h >= 0.0);
        CHECK(h <= std::log(static_cast<double>(k)) + 1e-12);
        double m2 = 0.0;
        for (const double x : p) m2 += x * std::log(x) * std::log(x);
        CHECK(varentropy(p) == doctest::Approx(m2 - h * h).epsilon(1e-9).scale(1.0));
        auto q = p;
        rng.shuffle(q);
        CHECK(kurtosis(q) == doctest::Approx(kurtosis(p)).epsilon(1e-10));
    }
    for (double p = 0.01; p < 0.995; p += 0.01)
        if (std::abs(p - 0.5) > 1e-9) CHECK(kurtosis(std::vector<double>{p, 1.0 - p}) >= 1.0 - 1e-12);
}

TEST_CASE("extract_features") {
    CHECK_FALSE(extract_features(with_positions({}), 3).has_value());

    const std::vector<double> a{0.5, 0.25, 0.25}, b{0.9, 0.1};
    const auto single = extract_features(with_positions({a}), 4);
    REQUIRE(single);
    CHECK(single->max_entropy == entropy(a));
    CHECK(single->max_varentropy == varentropy(a));
    CHECK(single->max_kurtosis == kurtosis(a));
    CHECK(single->turn_index == 4);

    const auto both = extract_features(with_positions({a, b}), 5);
    REQUIRE(both);
    CHECK(both->max_entropy == entropy(a));
    CHECK(both->max_varentropy == varentropy(b));
    CHECK(both->max_kurtosis == kurtosis(b));

    // adding a position never lowers a maximum
    const auto more = extract_features(with_positions({a, b, {0.3, 0.7}}), 5);
    CHECK(more->max_entropy >= both->max_entropy);
    CHECK(more->max_varentropy >= both->max_varentropy);
    CHECK(more->max_kurtosis >= both->max_kurtosis);

    // a degenerate position contributes the fallback
    const auto degenerate = extract_features(with_positions({{0.5, 0.5}}), 1, 2.0);
    CHECK(degenerate->max_kurtosis == 2.0);

    nlohmann::json j = *both;
    CHECK(j.get<FeatureVector>() == *both);
}
