#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentwatch/agents.hpp"
#include "agentwatch/commons.hpp"
#include "agentwatch/intervention.hpp"
#include "agentwatch/llm.hpp"
#include "agentwatch/monitor.hpp"
#include "agentwatch/rogue.hpp"
#include "agentwatch/scripted.hpp"
#include "agentwatch/trajectory.hpp"

namespace agentwatch {

inline constexpr const char* kVersion = "0.1.0";

struct WhodunitParams {
    Variant variant = Variant::asymmetric;
    int n_suspects = 6;
    int turn_limit = 31;
    int n_agents = kDefaultSymmetricAgents;         // symmetric only
    int facts_per_agent = kDefaultFactsPerAgent;    // symmetric only
};

struct CommonsParams {
    double gamma = 5.0;
    int m = 12;
    int n_agents = 4;
};

/// How one role (or one agent) is played.
///   {"type": "scripted", "style": "sustainable"}
///   {"type": "rogue", "profile": {...}, "style": "sustainable"}
///   {"type": "llm", "llm": {...}}
struct BackendSpec {
    std::string type = "scripted";
    HarvestStyle style = HarvestStyle::sustainable;
    std::optional<RogueProfile> rogue;
    std::optional<LlmConfig> llm;
};

struct MonitorSpec {
    enum class Source { none, model, random };
    Source source = Source::none;
    std::map<std::string, MonitorModel> models;  // by role
    double p = 0.0;                              // random
    std::vector<std::string> roles;              // random; empty means every role
};

struct ExperimentConfig {
    EnvKind env = EnvKind::whodunit;
    WhodunitParams whodunit;
    CommonsParams commons;
    /// Keys: "agent-<id>", a role name ("accuser", "intel", "player") or
    /// "default", looked up in that order.
    std::map<std::string, BackendSpec> agents;
    MonitorSpec monitor;
    InterventionPolicy intervention;
    int repetitions = 1;
    std::uint64_t seed = 0;
    int parallelism = 1;
    double kurtosis_fallback = 0.0;
    std::string split = "test";
    std::string output_dir;
    std::string label;

    /// Throws invalid_config.
    void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& config);
/// Monitor models may be inline objects or file paths (resolved against
/// `base_dir` when relative).
ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct SplitSizes {
    int train = 210;
    int validation = 90;
    int test = 180;
};

struct SplitManifest {
    EnvKind env = EnvKind::whodunit;
    std::uint64_t seed = 0;
    std::vector<GameSpec> train, validation, test;   // whodunit
    std::vector<double> r0_train, r0_validation, r0_test;  // commons

    std::size_t size(const std::string& split) const;
};

void to_json(nlohmann::json& j, const SplitManifest& manifest);
void from_json(const nlohmann::json& j, SplitManifest& manifest);

/// Distinct (profiles, culprit) specs, partitioned in generation order.
/// Throws infeasible_request when the distinct specs run out.
SplitManifest gen_whodunit_dataset(const SplitSizes& sizes, std::uint64_t seed,
                                   const WhodunitParams& params = {});

inline constexpr int kCommonsTrainDefault = 13;
inline constexpr int kCommonsValidationDefault = 7;

/// train/validation shuffled from {105 + 5k | k in [0, 19]}; test is
/// {100, 210, 215, ..., 300}.
SplitManifest gen_commons_dataset(std::uint64_t seed, int n_train = kCommonsTrainDefault,
                                  int n_validation = kCommonsValidationDefault);
std::vector<double> commons_test_r0();

/// Identity of a spec for disjointness: suspect values in id order plus the culprit.
std::string spec_key(const GameSpec& spec);

using ClientMap = std::map<std::string, std::shared_ptr<ChatClient>>;

struct GameResult {
    Trajectory trajectory;
    int checkpoint_violations = 0;
};

std::uint64_t game_seed(std::uint64_t base, int repetition, std::size_t game_index);

GameResult play_whodunit(const ExperimentConfig& config, GameSpecPtr spec, const std::string& game_id,
                         int repetition, std::uint64_t run_seed, const ClientMap& clients = {});
GameResult play_commons(const ExperimentConfig& config, double R0, const std::string& game_id,
                        int repetition, std::uint64_t run_seed, const ClientMap& clients = {});

struct RunResult {
    std::vector<Trajectory> trajectories;  // repetition-major, then manifest order
    nlohmann::json report;
};

/// Plays every game of `config.split` `repetitions` times. Writes
/// trajectories.jsonl and report.json when config.output_dir is set.
RunResult run_experiment(const ExperimentConfig& config, const SplitManifest& manifest);

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    int n = 0;
};
MeanSe mean_se(const std::vector<double>& values);

/// Two-sided Student-t interval for the mean.
std::pair<double, double> t_interval(const std::vector<double>& values, double level = 0.95);

/// Largest number of triggers any role drew in a single game.
int max_triggers_per_role(const Trajectory& trajectory);

nlohmann::json build_report(const ExperimentConfig& config, const std::vector<Trajectory>& trajectories,
                            int checkpoint_violations);

/// Fits the grid on intervention-free training runs and selects on the
/// validation runs. Throws insufficient_data when a label class is missing
/// from the training rows.
GridResult train_monitor(const std::vector<Trajectory>& train, const std::vector<Trajectory>& validation,
                         const std::string& role, double alpha = kDefaultAlpha);

struct SummaryTable {
    std::string text;
    std::string csv;
};

/// One row per report. Throws invalid_argument on mixed environments.
SummaryTable summarize(const std::vector<nlohmann::json>& reports, const std::vector<std::string>& labels);

} // namespace agentwatch
