#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "agentwatch/error.hpp"
#include "agentwatch/harness.hpp"

namespace aw = agentwatch;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw aw::Error(aw::ErrorCode::invalid_argument, fmt::format("cannot open {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw aw::Error(aw::ErrorCode::parse_error, fmt::format("{}: {}", path.string(), e.what()));
    }
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw aw::Error(aw::ErrorCode::invalid_argument, fmt::format("cannot write {}", path.string()));
}

std::vector<aw::Trajectory> read_trajectories(const std::vector<std::string>& paths) {
    std::vector<aw::Trajectory> all;
    for (const auto& p : paths) {
        auto ts = aw::parse_jsonl(read_file(p));
        all.insert(all.end(), std::make_move_iterator(ts.begin()), std::make_move_iterator(ts.end()));
    }
    return all;
}

aw::SplitSizes parse_sizes(const std::string& text) {
    std::vector<int> v;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) v.push_back(std::stoi(item));
    if (v.size() != 3) throw aw::Error(aw::ErrorCode::invalid_argument, "--sizes takes train,validation,test");
    return {v[0], v[1], v[2]};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Uncertainty monitors and interventions for multi-agent games"};
    app.set_version_flag("--version", std::string(aw::kVersion));
    app.require_subcommand(1);

    // gen-dataset
    auto* gen = app.add_subcommand("gen-dataset", "Generate train/validation/test splits");
    std::string gen_env = "whodunit", sizes_text = "210,90,180", variant = "asymmetric", gen_out;
    std::uint64_t gen_seed = 0;
    aw::WhodunitParams wparams;
    int commons_train = aw::kCommonsTrainDefault, commons_val = aw::kCommonsValidationDefault;
    gen->add_option("--env", gen_env, "whodunit or commons")->check(CLI::IsMember({"whodunit", "commons"}));
    gen->add_option("--sizes", sizes_text, "whodunit split sizes train,validation,test");
    gen->add_option("--seed", gen_seed, "base seed");
    gen->add_option("--variant", variant, "asymmetric or symmetric")->check(CLI::IsMember({"asymmetric", "symmetric"}));
    gen->add_option("--suspects", wparams.n_suspects, "suspects per game");
    gen->add_option("--turn-limit", wparams.turn_limit, "turn limit per game");
    gen->add_option("--commons-train", commons_train, "commons training R0 count");
    gen->add_option("--commons-validation", commons_val, "commons validation R0 count");
    gen->add_option("--out", gen_out, "manifest path")->required();

    // run
    auto* run = app.add_subcommand("run", "Run an experiment over one split");
    std::string config_path, manifest_path, split, run_out;
    std::optional<std::uint64_t> run_seed;
    std::optional<int> parallelism, repetitions;
    run->add_option("--config", config_path, "experiment config JSON")->required();
    run->add_option("--manifest", manifest_path, "split manifest JSON")->required();
    run->add_option("--split", split, "train, validation or test");
    run->add_option("--seed", run_seed, "override the base seed");
    run->add_option("--parallelism", parallelism, "worker threads");
    run->add_option("--repetitions", repetitions, "repetitions per game");
    run->add_option("--out", run_out, "output directory");

    // train-monitor
    auto* train = app.add_subcommand("train-monitor", "Fit and select a per-role monitor");
    std::vector<std::string> train_logs, val_logs;
    std::string role, model_out, ablation_prefix, random_out;
    double alpha = aw::kDefaultAlpha;
    train->add_option("--train", train_logs, "training trajectory JSONL files")->required();
    train->add_option("--validation", val_logs, "validation trajectory JSONL files")->required();
    train->add_option("--role", role, "role to monitor")->required();
    train->add_option("--alpha", alpha, "ridge penalty");
    train->add_option("--out", model_out, "model path")->required();
    train->add_option("--export-ablation", ablation_prefix, "also write <prefix>second_best.json and <prefix>worst.json");
    train->add_option("--random-calibration", random_out, "write the calibrated random-monitor p");

    // summarize
    auto* sum = app.add_subcommand("summarize", "Tabulate run reports");
    std::vector<std::string> report_paths, labels;
    std::string csv_out;
    sum->add_option("reports", report_paths, "report.json files")->required();
    sum->add_option("--label", labels, "row labels, in report order");
    sum->add_option("--csv", csv_out, "CSV output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            aw::SplitManifest manifest;
            if (gen_env == "whodunit") {
                wparams.variant = aw::variant_from_string(variant);
                manifest = aw::gen_whodunit_dataset(parse_sizes(sizes_text), gen_seed, wparams);
            } else {
                manifest = aw::gen_commons_dataset(gen_seed, commons_train, commons_val);
            }
            write_file(gen_out, nlohmann::json(manifest).dump(1) + "\n");
            fmt::print("wrote {} ({} train, {} validation, {} test)\n", gen_out, manifest.size("train"),
                       manifest.size("validation"), manifest.size("test"));
        } else if (*run) {
            auto j = read_json(config_path);
            if (!split.empty()) j["split"] = split;
            if (run_seed) j["seed"] = *run_seed;
            if (parallelism) j["parallelism"] = *parallelism;
            if (repetitions) j["repetitions"] = *repetitions;
            if (!run_out.empty()) j["output_dir"] = run_out;
            const auto config = aw::experiment_config_from_json(j, fs::path(config_path).parent_path());
            const auto manifest = read_json(manifest_path).get<aw::SplitManifest>();
            const auto result = aw::run_experiment(config, manifest);
            fmt::print("{}\n", result.report.at("metrics").dump(2));
            if (config.output_dir.empty()) fmt::print("(no --out given; trajectories not written)\n");
            const auto bad = std::find_if(result.trajectories.begin(), result.trajectories.end(),
                                          [](const aw::Trajectory& t) { return t.invalid; });
            if (bad != result.trajectories.end())
                fmt::print(stderr, "{} of {} games invalid; first: {}: {}\n",
                           result.report.at("invalid_games").get<int>(), result.trajectories.size(), bad->game_id,
                           bad->error);
        } else if (*train) {
            const auto train_ts = read_trajectories(train_logs);
            const auto val_ts = read_trajectories(val_logs);
            const auto grid = aw::train_monitor(train_ts, val_ts, role, alpha);
            write_file(model_out, nlohmann::json(grid.best).dump(2) + "\n");
            fmt::print("selected degree {} features {} tau {:.2f} validation gain {:.2f}\n", grid.best.degree,
                       nlohmann::json(aw::mask_names(grid.best.feature_mask)).dump(), grid.best.tau,
                       grid.best.validation_gain);
            if (!ablation_prefix.empty()) {
                write_file(ablation_prefix + "second_best.json", nlohmann::json(grid.second_best).dump(2) + "\n");
                write_file(ablation_prefix + "worst.json", nlohmann::json(grid.worst).dump(2) + "\n");
            }
            if (!random_out.empty()) {
                const auto games = aw::games_from_trajectories(val_ts, role);
                const auto cal = aw::calibrate_random_monitor(games);
                write_file(random_out, nlohmann::json{{"role", role}, {"p", cal.p}, {"expected_gain", cal.expected_gain}}
                                               .dump(2) + "\n");
            }
        } else if (*sum) {
            std::vector<nlohmann::json> reports;
            for (const auto& p : report_paths) reports.push_back(read_json(p));
            const auto table = aw::summarize(reports, labels);
            fmt::print("{}", table.text);
            if (!csv_out.empty()) write_file(csv_out, table.csv);
        }
    } catch (const aw::Error& e) {
        fmt::print(stderr, "error [{}]: {}\n", aw::to_string(e.code()), e.what());
        return 1;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
