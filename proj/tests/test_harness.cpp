#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include <doctest.h>
#include <fmt/format.h>

#include "agentwatch/error.hpp"
#include "agentwatch/harness.hpp"

using namespace agentwatch;
namespace fs = std::filesystem;

namespace {

ExperimentConfig rogue_config(double epsilon, std::uint64_t seed = 5) {
    ExperimentConfig c;
    c.env = EnvKind::whodunit;
    c.whodunit.n_suspects = 6;
    c.agents["default"] = BackendSpec{};
    BackendSpec rogue;
    rogue.type = "rogue";
    rogue.rogue = RogueProfile{};
    rogue.rogue->epsilon = epsilon;
    c.agents["accuser"] = rogue;
    c.seed = seed;
    return c;
}

/// Degree-1 model on the turn index only: predict = (t - 1) / 30.
MonitorModel turn_model(const std::string& role, double tau) {
    MonitorModel m;
    m.role = role;
    m.feature_mask = kMaskEntropy;
    m.degree = 1;
    m.normalization = {{0.0, std::log(10.0)}, {1.0, 31.0}};
    m.weights = {0.5, 0.0, 0.5};
    m.tau = tau;
    return m;
}

std::string jsonl_of(const std::vector<Trajectory>& ts) {
    std::string out;
    for (const auto& t : ts) out += to_jsonl(t);
    return out;
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / fmt::format("agentwatch-test-{}-{}", name, ::getpid());
    fs::remove_all(dir);
    return dir;
}

const SplitManifest& small_manifest() {
    static const SplitManifest m = gen_whodunit_dataset({20, 10, 30}, 3);
    return m;
}

} // namespace

TEST_CASE("shipped configs load and round trip") {
    const fs::path dir = fs::path(AGENTWATCH_SOURCE_DIR) / "configs";
    for (const char* name : {"whodunit_scripted.json", "whodunit_rogue.json", "whodunit_rogue_reset.json"}) {
        CAPTURE(name);
        const auto c = load_experiment_config(dir / name);
        const nlohmann::json j = c;
        const auto back = experiment_config_from_json(j);
        CHECK(nlohmann::json(back) == j);
    }
    const auto reset = load_experiment_config(dir / "whodunit_rogue_reset.json");
    CHECK(reset.intervention.kind == InterventionKind::full_reset);
    CHECK(reset.monitor.models.count("accuser") == 1);
}

TEST_CASE("invalid configs are rejected") {
    CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json{{"env", "chess"}}), Error);
    CHECK_THROWS_AS(experiment_config_from_json(nlohmann::json{{"repetitions", "two"}}), Error);
    auto c = rogue_config(0.1);
    c.intervention.kind = InterventionKind::round_reset;
    CHECK_THROWS_AS(c.validate(), Error);
    c = rogue_config(0.1);
    c.env = EnvKind::commons;
    c.intervention.kind = InterventionKind::full_reset;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("whodunit dataset splits are distinct, disjoint and reproducible") {
    const auto a = gen_whodunit_dataset({210, 90, 180}, 17);
    CHECK(a.train.size() == 210);
    CHECK(a.validation.size() == 90);
    CHECK(a.test.size() == 180);
    std::set<std::string> keys;
    for (const auto* split : {&a.train, &a.validation, &a.test})
        for (const auto& s : *split) keys.insert(spec_key(s));
    CHECK(keys.size() == 480);

    const auto b = gen_whodunit_dataset({210, 90, 180}, 17);
    CHECK(nlohmann::json(a) == nlohmann::json(b));
    const auto c = gen_whodunit_dataset({210, 90, 180}, 18);
    CHECK(nlohmann::json(a) != nlohmann::json(c));

    const nlohmann::json j = a;
    CHECK(nlohmann::json(j.get<SplitManifest>()) == j);
}

TEST_CASE("commons dataset draws from the pool and keeps the fixed test set") {
    const auto m = gen_commons_dataset(9);
    std::vector<double> expected_test{100.0};
    for (int r = 210; r <= 300; r += 5) expected_test.push_back(r);
    CHECK(m.r0_test == expected_test);
    CHECK(commons_test_r0() == expected_test);
    CHECK(m.r0_train.size() == kCommonsTrainDefault);
    CHECK(m.r0_validation.size() == kCommonsValidationDefault);
    std::multiset<double> pool(m.r0_train.begin(), m.r0_train.end());
    pool.insert(m.r0_validation.begin(), m.r0_validation.end());
    std::multiset<double> expected;
    for (int k = 0; k < 20; ++k) expected.insert(105.0 + 5.0 * k);
    CHECK(pool == expected);
    CHECK(gen_commons_dataset(9).r0_train == m.r0_train);
    CHECK_THROWS_AS(gen_commons_dataset(9, 15, 6), Error);
}

TEST_CASE("runs are reproducible for a fixed seed") {
    auto c = rogue_config(0.3);
    c.monitor.source = MonitorSpec::Source::random;
    c.monitor.p = 0.2;
    c.intervention.kind = InterventionKind::full_reset;
    const auto a = run_experiment(c, small_manifest());
    c.parallelism = 3;
    const auto b = run_experiment(c, small_manifest());
    CHECK(jsonl_of(a.trajectories) == jsonl_of(b.trajectories));
    CHECK(a.report["metrics"] == b.report["metrics"]);
    c.seed = 6;
    const auto d = run_experiment(c, small_manifest());
    CHECK(jsonl_of(a.trajectories) != jsonl_of(d.trajectories));
}

TEST_CASE("kind none leaves trajectories untouched by the monitor") {
    auto off = rogue_config(0.3);
    auto on = off;
    on.monitor.source = MonitorSpec::Source::model;
    on.monitor.models["accuser"] = turn_model("accuser", 1.0);
    const auto a = run_experiment(off, small_manifest());
    const auto b = run_experiment(on, small_manifest());
    CHECK(jsonl_of(a.trajectories) == jsonl_of(b.trajectories));
    for (const auto& t : b.trajectories)
        for (const auto& r : t.turns) CHECK_FALSE(r.trigger_fired);
}

TEST_CASE("triggers follow the model and respect the cap") {
    const double tau = 0.3;
    auto c = rogue_config(0.0);
    c.monitor.source = MonitorSpec::Source::model;
    c.monitor.models["accuser"] = turn_model("accuser", tau);

    SUBCASE("resample") {
        c.intervention.kind = InterventionKind::resample;
        c.intervention.cap = 1;
        const auto run = run_experiment(c, small_manifest());
        int fired_games = 0;
        for (const auto& t : run.trajectories) {
            REQUIRE_FALSE(t.invalid);
            // the first accuser record the model scores below tau
            std::optional<std::size_t> expected;
            for (std::size_t i = 0; i < t.turns.size() && !expected; ++i) {
                const auto& r = t.turns[i];
                if (r.role == "accuser" && r.features && c.monitor.models["accuser"].predict(*r.features) < tau)
                    expected = i;
            }
            std::vector<std::size_t> fired;
            for (std::size_t i = 0; i < t.turns.size(); ++i)
                if (t.turns[i].trigger_fired) fired.push_back(i);
            if (!expected) {
                CHECK(fired.empty());
                continue;
            }
            ++fired_games;
            REQUIRE(fired.size() == 1);
            CHECK(fired[0] == *expected);
            REQUIRE(fired[0] + 1 < t.turns.size());
            const auto& again = t.turns[fired[0] + 1];
            CHECK(again.turn_index == t.turns[fired[0]].turn_index);
            CHECK(again.agent_id == t.turns[fired[0]].agent_id);
            for (std::size_t i = 0; i < t.turns.size(); ++i)
                CHECK(t.turns[i].cumulative_index == static_cast<int>(i) + 1);
            CHECK(t.length() == static_cast<int>(t.turns.size()));
        }
        CHECK(fired_games > 0);
        CHECK(run.report["invariants"]["cap_violations"] == 0);
    }

    SUBCASE("full reset restarts the turn counter") {
        c.intervention.kind = InterventionKind::full_reset;
        c.intervention.cap = 2;
        const auto run = run_experiment(c, small_manifest());
        int resets = 0;
        for (const auto& t : run.trajectories) {
            CHECK(max_triggers_per_role(t) <= 2);
            for (std::size_t i = 0; i + 1 < t.turns.size(); ++i)
                if (t.turns[i].trigger_fired) {
                    ++resets;
                    CHECK(t.turns[i + 1].turn_index == 1);
                    CHECK(t.turns[i + 1].cumulative_index == t.turns[i].cumulative_index + 1);
                }
        }
        CHECK(resets > 0);
        CHECK(run.report["invariants"]["checkpoint_violations"] == 0);
        CHECK(run.report["invariants"]["max_triggers_per_role_per_game"].get<int>() <= 2);
    }
}

TEST_CASE("commons round reset keeps harvest checkpoints") {
    ExperimentConfig c;
    c.env = EnvKind::commons;
    c.split = "test";
    c.monitor.source = MonitorSpec::Source::random;
    c.monitor.p = 0.5;
    c.intervention.kind = InterventionKind::round_reset;
    c.intervention.cap = 3;
    c.seed = 2;
    const auto m = gen_commons_dataset(1);
    const auto run = run_experiment(c, m);
    CHECK(run.trajectories.size() == commons_test_r0().size());
    CHECK(run.report["invalid_games"] == 0);
    CHECK(run.report["invariants"]["checkpoint_violations"] == 0);
    CHECK(run.report["invariants"]["cap_violations"] == 0);
    int triggers = 0;
    for (const auto& t : run.trajectories)
        for (const auto& r : t.turns) triggers += r.trigger_fired;
    CHECK(triggers > 0);
    // the sustainable default still keeps every lake alive
    CHECK(run.report["metrics"]["survival_rate"]["mean"] == doctest::Approx(100.0));
    CHECK(run.report.contains("efficiency_ci95"));
}

TEST_CASE("repetitions feed the standard error") {
    auto c = rogue_config(0.3);
    c.repetitions = 4;
    const auto run = run_experiment(c, small_manifest());
    CHECK(run.trajectories.size() == 4 * small_manifest().test.size());
    std::vector<double> rates;
    for (const auto& r : run.report["runs"]) rates.push_back(r["success_rate"].get<double>());
    REQUIRE(rates.size() == 4);
    const auto s = mean_se(rates);
    const auto& metric = run.report["metrics"]["success_rate"];
    CHECK(metric["n"] == 4);
    CHECK(metric["mean"].get<double>() == doctest::Approx(s.mean));
    CHECK(metric["se"].get<double>() == doctest::Approx(s.se));
}

TEST_CASE("mismatched manifests are rejected") {
    auto c = rogue_config(0.0);
    CHECK_THROWS_AS(run_experiment(c, gen_commons_dataset(1)), Error);
    auto sym = small_manifest();
    for (auto& s : sym.test) s.variant = Variant::symmetric;
    CHECK_THROWS_AS(run_experiment(c, sym), Error);
}

TEST_CASE("run writes jsonl and report files") {
    auto c = rogue_config(0.3);
    const auto dir = scratch_dir("run");
    c.output_dir = dir.string();
    const auto run = run_experiment(c, small_manifest());
    std::ifstream in(dir / "trajectories.jsonl");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto parsed = parse_jsonl(ss.str());
    CHECK(parsed == run.trajectories);
    std::ifstream rep(dir / "report.json");
    CHECK(nlohmann::json::parse(rep)["metrics"] == run.report["metrics"]);
    fs::remove_all(dir);
}

TEST_CASE("mean, standard error and t interval") {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0, 5.0};
    const auto s = mean_se(v);
    CHECK(s.mean == doctest::Approx(3.0));
    CHECK(s.se == doctest::Approx(std::sqrt(2.5 / 5.0)));
    // t quantile for 4 degrees of freedom at 97.5%
    const auto [lo, hi] = t_interval(v);
    CHECK(hi - 3.0 == doctest::Approx(2.7764451051977987 * s.se));
    CHECK(3.0 - lo == doctest::Approx(2.7764451051977987 * s.se));
    CHECK(mean_se({}).n == 0);
    CHECK(mean_se({2.0}).se == 0.0);
}

TEST_CASE("train_monitor needs both outcomes") {
    auto c = rogue_config(1.0);  // every accuser turn corrupted
    c.split = "train";
    const auto train = run_experiment(c, small_manifest()).trajectories;
    for (const auto& t : train) CHECK_FALSE(t.succeeded());
    try {
        train_monitor(train, train, "accuser");
        FAIL("expected insufficient_data");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::insufficient_data);
    }
}

TEST_CASE("train_monitor finds a positive-gain monitor on rogue runs") {
    auto c = rogue_config(0.3);
    c.whodunit.n_suspects = 10;
    const auto m = gen_whodunit_dataset({60, 40, 0}, 4, c.whodunit);
    c.split = "train";
    const auto train = run_experiment(c, m).trajectories;
    c.split = "validation";
    const auto validation = run_experiment(c, m).trajectories;
    const auto grid = train_monitor(train, validation, "accuser");
    CHECK(grid.best.validation_gain > 0.0);
    CHECK(grid.best.role == "accuser");
    CHECK(grid.ranking.size() == 35);
}

TEST_CASE("summaries") {
    auto c = rogue_config(0.3);
    c.repetitions = 2;
    c.label = "rogue";
    const auto a = run_experiment(c, small_manifest()).report;
    const auto table = summarize({a}, {});
    CHECK(table.csv.rfind("label,success_rate,success_rate_se,precision,precision_se,avg_length,avg_length_se,games,invalid\n", 0) == 0);
    CHECK(table.csv.find("\nrogue,") != std::string::npos);
    CHECK(table.text.find("rogue") != std::string::npos);
    CHECK(summarize({a, a}, {"x", "y"}).csv.find("\ny,") != std::string::npos);

    ExperimentConfig cc;
    cc.env = EnvKind::commons;
    const auto b = run_experiment(cc, gen_commons_dataset(1)).report;
    CHECK(summarize({b}, {"lake"}).csv.find("efficiency_ci95_lo") != std::string::npos);
    CHECK_THROWS_AS(summarize({a, b}, {}), Error);
    CHECK_THROWS_AS(summarize({}, {}), Error);
}
