#include "agentwatch/uncertainty.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "agentwatch/error.hpp"

namespace agentwatch {

namespace {

void check_distribution(std::span<const double> p) {
    if (p.empty()) throw Error(ErrorCode::invalid_distribution, "empty probability vector");
    double sum = 0.0;
    for (const double x : p) {
        if (!(x >= 0.0) || !std::isfinite(x))
            throw Error(ErrorCode::invalid_distribution, fmt::format("bad probability {}", x));
        sum += x;
    }
    if (std::abs(sum - 1.0) > kDistributionTolerance)
        throw Error(ErrorCode::invalid_distribution,
                    fmt::format("probabilities sum to {:.12g}", sum));
}

double entropy_unchecked(std::span<const double> p) {
    double h = 0.0;
    for (const double x : p)
        if (x > 0.0) h -= x * std::log(x);
    return h;
}

// second and fourth central moments of the surprisal
std::pair<double, double> surprisal_moments(std::span<const double> p, double h) {
    double m2 = 0.0;
    double m4 = 0.0;
    for (const double x : p) {
        if (x <= 0.0) continue;
        const double d = -std::log(x) - h;
        const double d2 = d * d;
        m2 += x * d2;
        m4 += x * d2 * d2;
    }
    return {m2, m4};
}

} // namespace

double entropy(std::span<const double> p) {
    check_distribution(p);
    return entropy_unchecked(p);
}

double varentropy(std::span<const double> p) {
    check_distribution(p);
    return surprisal_moments(p, entropy_unchecked(p)).first;
}

double kurtosis(std::span<const double> p) {
    check_distribution(p);
    const auto [m2, m4] = surprisal_moments(p, entropy_unchecked(p));
    if (m2 <= kDegenerateVarentropy)
        throw Error(ErrorCode::degenerate_distribution, "varentropy is zero");
    return m4 / (m2 * m2);
}

PositionStats position_stats(std::span<const double> p, double kurtosis_fallback) {
    check_distribution(p);
    PositionStats stats;
    stats.entropy = entropy_unchecked(p);
    const auto [m2, m4] = surprisal_moments(p, stats.entropy);
    stats.varentropy = m2;
    stats.kurtosis = m2 <= kDegenerateVarentropy ? kurtosis_fallback : m4 / (m2 * m2);
    return stats;
}

std::optional<FeatureVector> extract_features(const AgentDecision& decision, int turn_index,
                                              double kurtosis_fallback) {
    if (decision.positions.empty()) return std::nullopt;
    FeatureVector f;
    f.turn_index = turn_index;
    bool first = true;
    for (const auto& position : decision.positions) {
        const auto stats = position_stats(position, kurtosis_fallback);
        if (first) {
            f.max_entropy = stats.entropy;
            f.max_varentropy = stats.varentropy;
            f.max_kurtosis = stats.kurtosis;
            first = false;
        } else {
            f.max_entropy = std::max(f.max_entropy, stats.entropy);
            f.max_varentropy = std::max(f.max_varentropy, stats.varentropy);
            f.max_kurtosis = std::max(f.max_kurtosis, stats.kurtosis);
        }
    }
    return f;
}

void to_json(nlohmann::json& j, const FeatureVector& f) {
    j = {{"entropy", f.max_entropy},
         {"varentropy", f.max_varentropy},
         {"kurtosis", f.max_kurtosis},
         {"turn", f.turn_index}};
}

void from_json(const nlohmann::json& j, FeatureVector& f) {
    f.max_entropy = j.at("entropy").get<double>();
    f.max_varentropy = j.at("varentropy").get<double>();
    f.max_kurtosis = j.at("kurtosis").get<double>();
    f.turn_index = j.at("turn").get<int>();
}

} // namespace agentwatch
