#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "scmo/calibration.hpp"
#include "scmo/harness.hpp"
#include "scmo/scenario_io.hpp"

namespace {

struct Flags {
    std::optional<std::string> experiment, filter, likelihood, out, config, import_dir;
    std::optional<std::size_t> runs, particles, steps, threads;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
};

void add_common(CLI::App& app, Flags& f) {
    app.add_option("--experiment", f.experiment, "e1 | e2-death | e2-birth");
    app.add_option("--steps", f.steps, "number of time steps");
    app.add_option("--seed", f.seed, "master seed");
    app.add_option("--out", f.out, "output directory");
    app.add_option("--config", f.config, "flat key = value file");
    app.add_option("--set", f.sets, "extra key=value override (repeatable)");
}

scmo::RunConfig resolve(const Flags& f) {
    std::vector<std::pair<std::string, std::string>> file;
    if (f.config) file = scmo::parse_config_text(scmo::read_text_file(*f.config));
    std::string exp = "e1";
    for (const auto& [k, v] : file)
        if (k == "experiment") exp = v;
    if (f.experiment) exp = *f.experiment;
    auto cfg = scmo::RunConfig::defaults(scmo::parse_experiment(exp));
    for (const auto& [k, v] : file)
        if (k != "experiment") cfg.set(k, v);
    for (const auto& s : f.sets) {
        const auto kv = scmo::parse_config_text(s);
        for (const auto& [k, v] : kv) cfg.set(k, v);
    }
    if (f.filter) cfg.set("filters", *f.filter);
    if (f.likelihood) cfg.set("likelihoods", *f.likelihood);
    if (f.runs) cfg.runs = *f.runs;
    if (f.particles) cfg.smc.particles = *f.particles;
    if (f.steps) cfg.scenario.steps = *f.steps;
    if (f.seed) cfg.seed = *f.seed;
    if (f.threads) cfg.threads = *f.threads;
    if (f.out) cfg.out_dir = *f.out;
    if (f.import_dir) cfg.import_dir = *f.import_dir;
    cfg.validate();
    return cfg;
}

void print_summary(const scmo::MetricsTable& t) {
    std::printf("%-10s %12s %12s %12s %12s %12s %s\n", "variant", "mean_rmse", "card_last20", "t_predict", "t_update",
                "t_lik", "excluded");
    const std::size_t from = t.steps > 20 ? t.steps - 20 : 0;
    for (const auto& v : t.variants) {
        double rm = 0, cd = 0;
        for (double x : v.rmse) rm += x / double(t.steps);
        for (std::size_t k = from; k < t.steps; ++k) cd += (v.cardinality[k] - t.truth_cardinality[k]) / double(t.steps - from);
        std::printf("%-10s %12.4f %+12.3f %12.3e %12.3e %12.3e %zu\n", v.name.c_str(), rm, cd, v.times.mean_predict(),
                    v.times.mean_update(), v.times.mean_likelihood(), v.excluded_runs);
        for (const auto& e : v.errors) std::printf("  %s\n", e.c_str());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Single-cluster multi-object filtering experiments"};
    app.require_subcommand(1);

    Flags run_flags;
    auto* run = app.add_subcommand("run", "run an experiment and write rmse.csv, card.csv, runtime.csv");
    add_common(*run, run_flags);
    run->add_option("--filter", run_flags.filter, "phd | sophd | cphd | all (comma list allowed)");
    run->add_option("--likelihood", run_flags.likelihood, "l1 | l2 | both");
    run->add_option("--runs", run_flags.runs, "Monte Carlo runs");
    run->add_option("--particles", run_flags.particles, "parent particles");
    run->add_option("--threads", run_flags.threads, "worker threads (0 = all cores)");
    run->add_option("--import", run_flags.import_dir, "directory with truth.csv and frames.csv to replay");

    Flags sim_flags;
    auto* sim = app.add_subcommand("simulate", "write truth.csv and frames.csv for one scenario");
    add_common(*sim, sim_flags);

    std::uint64_t cal_seed = 2024;
    std::size_t cal_count = 50;
    auto* cal = app.add_subcommand("oracle-calibrate", "score likelihood conventions against brute-force enumeration");
    cal->add_option("--seed", cal_seed, "instance seed");
    cal->add_option("--instances", cal_count, "number of random instances");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*run) {
            const auto cfg = resolve(run_flags);
            const auto t0 = std::chrono::steady_clock::now();
            const auto table = scmo::run_experiment(cfg);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (!cfg.out_dir.empty()) scmo::emit_csv(table, cfg.out_dir);
            print_summary(table);
            std::printf("elapsed %.1f s\n", secs);
        } else if (*sim) {
            const auto cfg = resolve(sim_flags);
            const std::string dir = cfg.out_dir.empty() ? "." : cfg.out_dir;
            std::filesystem::create_directories(dir);
            const auto scen = scmo::prepare_scenarios(cfg);
            scmo::save_scenario(dir, scen.front().truth, scen.front().frames);
            std::printf("wrote %s/truth.csv and %s/frames.csv (%zu steps)\n", dir.c_str(), dir.c_str(),
                        scen.front().frames.size());
        } else if (*cal) {
            const auto rep = scmo::calibration::calibrate(cal_seed, cal_count);
            std::cout << rep.to_text();
            bool ok = false, ok2 = false;
            for (const auto& c : rep.panjer) ok = ok || c.adopted;
            for (const auto& c : rep.cphd) ok2 = ok2 || c.adopted;
            if (!ok || !ok2) {
                std::fprintf(stderr, "error kind=calibration message=\"no candidate met the threshold\"\n");
                return 3;
            }
        }
    } catch (const scmo::Error& e) {
        std::fprintf(stderr, "error kind=%s message=\"%s\"\n", e.kind().c_str(), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error kind=internal message=\"%s\"\n", e.what());
        return 2;
    }
    return 0;
}
