#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "agentwatch/rng.hpp"
#include "agentwatch/trajectory.hpp"
#include "agentwatch/uncertainty.hpp"

namespace agentwatch {

// Feature mask bits. The turn index is always an input.
inline constexpr unsigned kMaskEntropy = 1u;
inline constexpr unsigned kMaskVarentropy = 2u;
inline constexpr unsigned kMaskKurtosis = 4u;
inline constexpr unsigned kMaskAll = 7u;
inline constexpr int kMaxDegree = 5;
inline constexpr double kDefaultAlpha = 1.0;

std::vector<std::string> mask_names(unsigned mask);
unsigned mask_from_names(const std::vector<std::string>& names);

struct TrainingRow {
    FeatureVector features;
    std::string game_id;
    std::string role;
    bool label = false;
};

struct TrainingCorpus {
    std::vector<TrainingRow> rows;
};

/// Per-game view used for gain: every monitored turn of one role plus the
/// game's outcome. Games without monitored turns still count in the total.
struct LabeledGame {
    std::string game_id;
    bool success = false;
    std::vector<FeatureVector> turns;
};

/// Rows of `role` from intervention-free, valid trajectories.
TrainingCorpus corpus_from_trajectories(std::span<const Trajectory> trajectories,
                                        const std::string& role);
std::vector<LabeledGame> games_from_trajectories(std::span<const Trajectory> trajectories,
                                                 const std::string& role);
/// Groups rows by game id (first-appearance order).
std::vector<LabeledGame> games_from_corpus(const TrainingCorpus& corpus);

/// Exponent vectors of every monomial of total degree <= degree over n inputs,
/// ordered by total degree, then lexicographically by the sorted index tuple.
/// The first entry is the intercept.
std::vector<std::vector<int>> monomials(int n_inputs, int degree);
std::size_t monomial_count(int n_inputs, int degree);

/// Solves min |Xw - y|^2 + alpha |w[1:]|^2 (column 0 is the unpenalized
/// intercept). Throws singular_system when alpha == 0 and X is rank-deficient.
Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha);

struct Bounds {
    double min = 0.0;
    double max = 0.0;
    bool operator==(const Bounds&) const = default;
};

struct MonitorModel {
    std::string role;
    unsigned feature_mask = kMaskEntropy;
    int degree = 1;
    double alpha = kDefaultAlpha;
    std::vector<Bounds> normalization;  // selected stats in mask order, then turn
    std::vector<double> weights;        // monomials() order
    double tau = 0.0;
    double validation_gain = 0.0;

    std::size_t input_count() const;
    /// Raw inputs in model order (selected stats, then turn index).
    std::vector<double> inputs(const FeatureVector& f) const;
    /// Inputs mapped linearly so train min -> -1 and train max -> +1; a
    /// constant training column maps to 0. No clamping.
    std::vector<double> normalize(const FeatureVector& f) const;
    double raw_output(const FeatureVector& f) const;
    /// Clamped to [0, 1].
    double predict(const FeatureVector& f) const;

    bool operator==(const MonitorModel&) const = default;
};

void to_json(nlohmann::json& j, const MonitorModel& model);
void from_json(const nlohmann::json& j, MonitorModel& model);

/// Row of polynomial features for normalized inputs.
std::vector<double> expand(std::span<const double> normalized, int degree);

/// Throws insufficient_data on an empty corpus, invalid_argument on a bad
/// degree or mask.
MonitorModel fit_monitor(const TrainingCorpus& train, unsigned mask, int degree,
                         double alpha = kDefaultAlpha, const std::string& role = {});

struct GainCount {
    int true_triggers = 0;
    int false_triggers = 0;
    int games = 0;
    int net() const { return true_triggers - false_triggers; }
    double gain() const { return games == 0 ? 0.0 : 100.0 * net() / games; }
};

/// A game triggers when any of its turns has predict < tau.
GainCount count_triggers(const MonitorModel& model, double tau, std::span<const LabeledGame> games);
double validation_gain(const MonitorModel& model, double tau, std::span<const LabeledGame> games);

/// tau grid {0.00, 0.01, ..., 1.00}.
std::vector<double> tau_grid();

struct GridCell {
    int degree = 1;
    unsigned mask = kMaskEntropy;
    double tau = 0.0;
    int net = 0;
    double gain = 0.0;
};

struct GridResult {
    MonitorModel best;
    MonitorModel second_best;
    MonitorModel worst;
    /// One entry per (degree, mask) with its best tau, best first.
    std::vector<GridCell> ranking;
};

/// Exhaustive search over degree 1..5, the 7 non-empty masks and the tau grid.
/// Ties go to lower degree, then fewer features, then lower mask, then lower tau.
GridResult grid_search(const TrainingCorpus& train, std::span<const LabeledGame> validation,
                       double alpha = kDefaultAlpha, const std::string& role = {});

/// Fires on a monitored turn independently with probability p.
class RandomMonitor {
public:
    RandomMonitor(double p, std::uint64_t seed);
    bool fires();
    double p() const { return p_; }

private:
    double p_;
    Rng rng_;
};

struct RandomCalibration {
    double p = 0.0;
    double expected_gain = 0.0;
};

/// Picks p on the 0.01 grid maximizing expected validation gain, where a game
/// with n monitored turns triggers with probability 1 - (1 - p)^n. Ties go to
/// lower p.
RandomCalibration calibrate_random_monitor(std::span<const LabeledGame> validation);

} // namespace agentwatch
