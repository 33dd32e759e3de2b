#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "scmo/harness.hpp"

using namespace scmo;

namespace {

RunConfig tiny(Experiment e = Experiment::E2Death) {
    auto c = RunConfig::defaults(e);
    c.scenario.steps = 3;
    c.smc.particles = 10;
    c.runs = 2;
    c.threads = 1;
    c.seed = 9;
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST(Rmse, Examples) {
    const std::vector<std::vector<Meas2>> truth{{Meas2(0, 0), Meas2(1, 1)}, {Meas2(0, 0), Meas2(1, 1)}};
    EXPECT_EQ(compute_rmse(truth, truth), (std::vector<double>{0.0, 0.0}));
    const std::vector<std::vector<Meas2>> off{{Meas2(1, 0), Meas2(1, 2)}, {Meas2(0, -1), Meas2(1, 0)}};
    EXPECT_EQ(compute_rmse(off, truth), (std::vector<double>{1.0, 1.0}));
    const std::vector<std::vector<Meas2>> a{{Meas2(3, 4)}, {Meas2(0, 3)}}, z{{Meas2(0, 0)}, {Meas2(0, 0)}};
    EXPECT_NEAR(compute_rmse(a, z)[0], std::sqrt(17.0), 1e-15);
    EXPECT_NEAR(compute_rmse(std::vector<std::vector<Meas2>>{{Meas2(2.5, 2.5)}},
                             std::vector<std::vector<Meas2>>{{Meas2(0, 0)}})[0],
                3.5355339059327378, 1e-15);
    EXPECT_THROW((void)compute_rmse(a, truth), DimensionError);
    EXPECT_THROW((void)compute_rmse(a, std::vector<std::vector<Meas2>>{{Meas2(0, 0)}}), DimensionError);
    EXPECT_TRUE(compute_rmse({}, {}).empty());
}

TEST(Config, ParsesKeysAndRejectsUnknown) {
    const auto kv = parse_config_text("# comment\nsteps = 12\n  particles=40 # trailing\n\nfilters = phd, cphd\n");
    ASSERT_EQ(kv.size(), 3u);
    auto c = RunConfig::defaults(Experiment::E1);
    for (const auto& [k, v] : kv) c.set(k, v);
    EXPECT_EQ(c.scenario.steps, 12u);
    EXPECT_EQ(c.smc.particles, 40u);
    EXPECT_EQ(c.variants().size(), 4u);
    EXPECT_EQ(c.variants()[3].name(), "cphd_l2");
    c.set("gate", "inf");
    EXPECT_TRUE(std::isinf(c.gate));
    c.set("shared_truth", "no");
    EXPECT_FALSE(c.shared_truth);
    EXPECT_THROW(c.set("bogus", "1"), ConfigError);
    EXPECT_THROW(c.set("steps", "many"), ConfigError);
    EXPECT_THROW(c.set("runs", "-2"), ConfigError);
    EXPECT_THROW(c.set("likelihoods", "l3"), ConfigError);
    EXPECT_THROW((void)parse_config_text("no equals sign"), ConfigError);
    c.set("runs", "0");
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, ExperimentDefaults) {
    const auto e1 = RunConfig::defaults(Experiment::E1);
    const auto e2 = RunConfig::defaults(Experiment::E2Birth);
    EXPECT_EQ(e1.variants().size(), 6u);
    EXPECT_EQ(e1.scenario.clutter_rate, 10.0);
    EXPECT_EQ(e2.scenario.targets_after_change, 30u);
    EXPECT_EQ(e2.birth_variance, 20.0);
    const auto m = build_models(e2, FilterKind::SoPhd);
    const auto* p = std::get_if<PanjerCardinality>(&m.birth.cardinality);
    ASSERT_NE(p, nullptr);
    EXPECT_NEAR(cardinality_variance(m.birth.cardinality), 20.0, 1e-12);
    EXPECT_TRUE(std::holds_alternative<PoissonCardinality>(build_models(e2, FilterKind::Phd).birth.cardinality));
}

TEST(Harness, SmokeRunShapes) {
    const auto t = run_experiment(tiny());
    EXPECT_EQ(t.steps, 3u);
    ASSERT_EQ(t.variants.size(), 6u);
    for (const auto& v : t.variants) {
        EXPECT_EQ(v.rmse.size(), 3u);
        EXPECT_EQ(v.cardinality.size(), 3u);
        EXPECT_EQ(v.excluded_runs, 0u);
        for (double x : v.rmse) EXPECT_TRUE(std::isfinite(x));
        EXPECT_EQ(v.variance_clamps, 0u);
        EXPECT_LT(v.max_weight_sum_error, 1e-12);
    }
    EXPECT_EQ(t.truth_cardinality, (std::vector<double>{15.0, 15.0, 15.0}));
}

TEST(Harness, EasyScenarioTracksSensor) {
    auto c = RunConfig::defaults(Experiment::E2Death);
    c.scenario.steps = 25;
    c.scenario.change_step = 1000;
    c.scenario.clutter_rate = 0.0;
    c.scenario.sensor_accel_noise = 0.0;
    c.scenario.target_accel_noise = 0.0;
    c.scenario.init_velocity_noise = 0.0;
    // Measurements only fix target positions relative to the sensor: a common
    // sensor velocity is indistinguishable from all targets moving the other
    // way. Static targets anchor the sensor only if the filter believes they
    // are far stiller than the sensor.
    c.filter_sensor_accel_noise = 0.01;
    c.filter_accel_noise = 0.001;
    c.birth_velocity_std = 0.001;
    c.filters = {FilterKind::Phd};
    c.likelihoods = {LikelihoodKind::L1};
    c.smc.particles = 1000;
    c.runs = 1;
    c.threads = 1;
    const auto t = run_experiment(c);
    const auto& v = t.at("phd_l1");
    for (std::size_t k = 20; k < 25; ++k) EXPECT_LT(v.rmse[k], 0.2) << k;
    EXPECT_NEAR(v.cardinality.back(), 15.0, 1.5);
}

TEST(Harness, DeterministicAcrossInvocations) {
    auto c = tiny(Experiment::E1);
    c.scenario.steps = 4;
    std::ostringstream a, b;
    write_rmse_csv(a, run_experiment(c));
    write_rmse_csv(b, run_experiment(c));
    EXPECT_EQ(a.str(), b.str());
    c.threads = 3;
    std::ostringstream d;
    write_rmse_csv(d, run_experiment(c));
    EXPECT_EQ(a.str(), d.str());
}

TEST(Harness, DegenerateRunsAreExcluded) {
    auto c = tiny();
    c.scenario.clutter_rate = 0.0;
    c.gate = 1e-9;
    c.filters = {FilterKind::Phd};
    c.likelihoods = {LikelihoodKind::L1};
    const auto t = run_experiment(c);
    const auto& v = t.at("phd_l1");
    EXPECT_EQ(v.excluded_runs, 2u);
    ASSERT_EQ(v.errors.size(), 2u);
    EXPECT_NE(v.errors[0].find("degenerate-filter"), std::string::npos);
    EXPECT_TRUE(std::isnan(v.rmse[0]));
    EXPECT_THROW((void)t.at("cphd_l1"), ConfigError);
}

TEST(Harness, CsvOutputsParseBack) {
    const auto t = run_experiment(tiny());
    const auto dir = std::filesystem::temp_directory_path() / "scmo_csv_test";
    std::filesystem::remove_all(dir);
    emit_csv(t, dir.string());
    std::ifstream rf(dir / "rmse.csv"), cf(dir / "card.csv");
    const auto rm = read_numeric_csv(rf);
    const auto cd = read_numeric_csv(cf);
    ASSERT_EQ(rm.header.size(), 7u);
    EXPECT_EQ(rm.header[0], "step");
    EXPECT_EQ(rm.header[1], "phd_l1");
    ASSERT_EQ(rm.rows.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(rm.rows[k][0], double(k + 1));
        EXPECT_EQ(rm.rows[k][1], t.variants[0].rmse[k]);
        EXPECT_EQ(cd.rows[k][1], t.truth_cardinality[k]);
        EXPECT_EQ(cd.rows[k][7], t.variants[5].cardinality[k]);
    }
    const auto runtime = slurp(dir / "runtime.csv");
    EXPECT_EQ(std::count(runtime.begin(), runtime.end(), '\n'), 1 + 3 * 6);
    EXPECT_EQ(runtime.rfind(kRuntimeHeader, 0), 0u);
    const auto diag = slurp(dir / "diagnostics.csv");
    EXPECT_EQ(std::count(diag.begin(), diag.end(), '\n'), 1 + 6);
    std::filesystem::remove_all(dir);
}

TEST(Harness, EmptyTableWritesHeadersOnly) {
    MetricsTable t;
    std::ostringstream a, b, c;
    write_rmse_csv(a, t);
    write_card_csv(b, t);
    write_runtime_csv(c, t);
    EXPECT_EQ(a.str(), "step\n");
    EXPECT_EQ(b.str(), "step,truth\n");
    EXPECT_EQ(c.str(), std::string(kRuntimeHeader) + "\n");
    std::istringstream empty("");
    EXPECT_THROW((void)read_numeric_csv(empty), IoError);
    std::istringstream ragged("step,a\n1,2,3\n");
    EXPECT_THROW((void)read_numeric_csv(ragged), IoError);
}

TEST(Harness, ImportReplaysSavedScenario) {
    auto c = tiny();
    const auto scen = prepare_scenarios(c);
    const auto dir = std::filesystem::temp_directory_path() / "scmo_import_test";
    std::filesystem::create_directories(dir);
    save_scenario(dir.string(), scen.front().truth, scen.front().frames);
    c.import_dir = dir.string();
    const auto replay = prepare_scenarios(c);
    ASSERT_EQ(replay.size(), 2u);
    for (const auto& r : replay) EXPECT_EQ(r.frames.front().measurements, scen.front().frames.front().measurements);
    std::filesystem::remove_all(dir);
}

#ifdef SCMO_CLI_PATH
namespace {

struct CliResult {
    int status;
    std::string err;
};

CliResult run_cli(const std::string& args) {
    const auto err = std::filesystem::temp_directory_path() / "scmo_cli_stderr.txt";
    const std::string cmd = std::string(SCMO_CLI_PATH) + " " + args + " >/dev/null 2>" + err.string();
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(err)};
}

} // namespace

TEST(Cli, ReportsErrorsWithKindAndExitCode) {
    auto r = run_cli("run --set bogus=1");
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.err.find("error kind=config"), std::string::npos) << r.err;
    r = run_cli("run --experiment e9");
    EXPECT_EQ(r.status, 2);
    r = run_cli("run --import /nonexistent/scmo --runs 1 --particles 2");
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.err.find("error kind=io"), std::string::npos) << r.err;
    EXPECT_NE(run_cli("").status, 0);
}

TEST(Cli, SimulateThenRunWritesCsv) {
    const auto dir = std::filesystem::temp_directory_path() / "scmo_cli_run";
    std::filesystem::remove_all(dir);
    const std::string d = dir.string();
    ASSERT_EQ(run_cli("simulate --experiment e2-death --steps 3 --out " + d + "/scen").status, 0);
    ASSERT_EQ(run_cli("run --import " + d + "/scen --runs 1 --particles 5 --filter phd --likelihood l1 --out " + d +
                      "/res")
                  .status,
              0);
    for (const char* f : {"rmse.csv", "card.csv", "runtime.csv", "diagnostics.csv"})
        EXPECT_TRUE(std::filesystem::exists(dir / "res" / f)) << f;
    std::filesystem::remove_all(dir);
}
#endif
