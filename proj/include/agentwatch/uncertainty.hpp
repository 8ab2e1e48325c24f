#pragma once

#include <optional>
#include <span>

#include <nlohmann/json.hpp>

#include "agentwatch/actions.hpp"

namespace agentwatch {

/// Tolerance on sum(p) = 1 accepted by the statistics below.
inline constexpr double kDistributionTolerance = 1e-9;
/// Varentropy at or below this is treated as zero for the kurtosis ratio.
inline constexpr double kDegenerateVarentropy = 1e-12;

// All statistics are in nats and treat 0 * ln 0 as 0. Inputs must be valid
// distributions (entries >= 0, sum within kDistributionTolerance of 1);
// invalid_distribution is thrown otherwise.

/// -sum p ln p
double entropy(std::span<const double> p);
/// Variance of the surprisal -ln p under p. Non-negative.
double varentropy(std::span<const double> p);
/// Fourth central moment of the surprisal over varentropy squared.
/// Throws degenerate_distribution when varentropy is zero (one-hot, uniform).
double kurtosis(std::span<const double> p);

struct PositionStats {
    double entropy = 0.0;
    double varentropy = 0.0;
    double kurtosis = 0.0;
};

/// All three at once; a degenerate position gets `kurtosis_fallback`.
PositionStats position_stats(std::span<const double> p, double kurtosis_fallback = 0.0);

struct FeatureVector {
    double max_entropy = 0.0;
    double max_varentropy = 0.0;
    double max_kurtosis = 0.0;
    int turn_index = 0;

    bool operator==(const FeatureVector&) const = default;
};

/// Component-wise maxima over the decision's annotated positions, plus the
/// turn index. std::nullopt for a decision without positions (no signal).
std::optional<FeatureVector> extract_features(const AgentDecision& decision, int turn_index,
                                              double kurtosis_fallback = 0.0);

void to_json(nlohmann::json& j, const FeatureVector& f);
void from_json(const nlohmann::json& j, FeatureVector& f);

} // namespace agentwatch
