#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentwatch/channel.hpp"
#include "agentwatch/trajectory.hpp"

namespace agentwatch {

struct CommonsConfig {
    double R0 = 100.0;
    double gamma = 5.0;
    int m = 12;
    int n_agents = 4;
    std::uint64_t seed = 0;

    /// Throws invalid_config.
    void validate() const;
    /// Sustainable optimum c = m * R0 / 2.
    double optimum() const { return m * R0 / 2.0; }

    bool operator==(const CommonsConfig&) const = default;
};

void to_json(nlohmann::json& j, const CommonsConfig& config);
void from_json(const nlohmann::json& j, CommonsConfig& config);

struct HarvestEntry {
    int round = 0;
    int agent = 0;
    double amount = 0.0;

    bool operator==(const HarvestEntry&) const = default;
};

struct CommonsState {
    CommonsConfig config;
    int round = 1;
    double stock = 0.0;
    std::vector<HarvestEntry> harvest_log;
    std::vector<double> post_harvest_stocks;
    CommunicationChannel channel;
    std::vector<std::string> agent_names;
    bool harvested = false;  // harvest phase of the current round done
    bool collapsed = false;

    bool done() const { return collapsed || round > config.m; }
    double total_harvest() const;
};

CommonsState new_commons_game(const CommonsConfig& config);

/// Processes requests in a seeded random agent order, clipping each to the
/// remaining stock, then appends an irreversible summary message. Throws
/// negative_request (state untouched) for a negative or non-finite amount and
/// invalid_argument when the phase is not allowed.
void harvest_phase(CommonsState& state, const std::map<int, double>& requests);

/// Order in which `agents` harvest in `round`.
std::vector<int> harvest_order(const CommonsConfig& config, int round, std::vector<int> agents);

void add_discussion(CommonsState& state, int agent, const std::string& text);

/// stock <- min(2 stock, R0) and round advances. Throws invalid_argument
/// before the round's harvest.
void regrow(CommonsState& state);

/// Drops the messages after the last harvest checkpoint.
void rollback_round(CommonsState& state);

double regrow_stock(double stock, double R0);

CommonsResult commons_metrics(std::span<const double> post_harvest_stocks, double total_harvest,
                              const CommonsConfig& config);
double commons_efficiency(double total_harvest, const CommonsConfig& config);

std::string render_discussion(std::string_view name, double amount);

struct CommonsMetrics {
    double mean_survival_time = 0.0;
    double survival_rate = 0.0;     // percent
    double mean_efficiency = 0.0;
    int games = 0;
};

CommonsMetrics commons_summary(std::span<const Trajectory> trajectories);

} // namespace agentwatch
