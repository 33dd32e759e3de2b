#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "scmo/parent_smc.hpp"
#include "scmo/scenario.hpp"
#include "scmo/scenario_io.hpp"

namespace scmo {

using Models = FilterModels<4, 2>;

struct Variant {
    FilterKind filter;
    LikelihoodKind likelihood;
    [[nodiscard]] std::string name() const {
        return std::string(to_string(filter)) + "_" + std::string(to_string(likelihood));
    }
};

/// Everything one experiment invocation needs. Scenario values describe the
/// simulated world; the filter_* and birth_* values describe the model the
/// filters assume.
struct RunConfig {
    ScenarioConfig scenario;
    SmcConfig smc;
    std::vector<FilterKind> filters{FilterKind::Phd, FilterKind::SoPhd, FilterKind::Cphd};
    std::vector<LikelihoodKind> likelihoods{LikelihoodKind::L1, LikelihoodKind::L2};
    std::size_t runs = 10;
    std::uint64_t seed = 1;
    std::string out_dir;
    std::string import_dir;
    std::size_t threads = 0;
    /// One ground truth for all runs, with fresh measurements per run.
    bool shared_truth = true;

    double filter_p_s = 0.95;
    double filter_accel_noise = 0.3;
    double filter_sensor_accel_noise = 0.2;
    double birth_mean = 4.0;
    double birth_variance = 4.0;
    double birth_position_std = 100.0;
    double birth_velocity_std = 0.1;
    std::size_t n_max = 160;
    double gate = 60.0;
    ReductionConfig reduction;

    [[nodiscard]] static RunConfig defaults(Experiment e) {
        RunConfig c;
        c.scenario = ScenarioConfig::defaults(e);
        if (e != Experiment::E1) {
            c.filter_p_s = 0.99;
            c.filter_accel_noise = 0.1;
            c.birth_mean = 2.0;
            c.birth_variance = 20.0;
            c.n_max = 64;
        }
        c.smc.particles = 300;
        return c;
    }

    [[nodiscard]] std::vector<Variant> variants() const {
        std::vector<Variant> v;
        for (auto f : filters)
            for (auto l : likelihoods) v.push_back({f, l});
        return v;
    }

    /// Applies one "key = value" setting. `experiment` is handled by the
    /// caller because it resets every default.
    void set(const std::string& key, const std::string& value);

    void validate() const {
        scenario.validate();
        if (runs < 1) throw ConfigError("runs must be at least 1");
        if (smc.particles < 1) throw ConfigError("particles must be at least 1");
        if (filters.empty() || likelihoods.empty()) throw ConfigError("no filter or likelihood selected");
        if (!(birth_mean >= 0.0 && birth_variance >= 0.0)) throw ConfigError("birth moments must be nonnegative");
        if (!(filter_p_s >= 0.0 && filter_p_s <= 1.0)) throw ConfigError("filter_p_s must lie in [0, 1]");
        if (n_max < 1) throw ConfigError("n_max must be at least 1");
        reduction.validate();
        smc.gating.validate();
    }
};

namespace detail {

[[nodiscard]] inline bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("expected a boolean, got '" + v + "'");
}

[[nodiscard]] inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

[[nodiscard]] inline double to_real(const std::string& key, const std::string& v) {
    try {
        return parse_double(v);
    } catch (const IoError&) {
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
}

[[nodiscard]] inline std::size_t to_count(const std::string& key, const std::string& v) {
    long long n = 0;
    try {
        n = parse_int(v);
    } catch (const IoError&) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
    }
    if (n < 0) throw ConfigError("key '" + key + "' must be nonnegative");
    return static_cast<std::size_t>(n);
}

} // namespace detail

[[nodiscard]] inline std::vector<FilterKind> parse_filter_list(const std::string& v) {
    if (v == "all") return {FilterKind::Phd, FilterKind::SoPhd, FilterKind::Cphd};
    std::vector<FilterKind> out;
    for (const auto& s : detail::split_list(v)) out.push_back(parse_filter_kind(s));
    return out;
}

[[nodiscard]] inline std::vector<LikelihoodKind> parse_likelihood_list(const std::string& v) {
    if (v == "both") return {LikelihoodKind::L1, LikelihoodKind::L2};
    std::vector<LikelihoodKind> out;
    for (const auto& s : detail::split_list(v)) out.push_back(parse_likelihood_kind(s));
    return out;
}

inline void RunConfig::set(const std::string& key, const std::string& v) {
    using detail::to_count;
    using detail::to_real;
    auto& s = scenario;
    if (key == "steps") s.steps = to_count(key, v);
    else if (key == "runs") runs = to_count(key, v);
    else if (key == "particles") smc.particles = to_count(key, v);
    else if (key == "seed") seed = static_cast<std::uint64_t>(to_count(key, v));
    else if (key == "filters" || key == "filter") filters = parse_filter_list(v);
    else if (key == "likelihoods" || key == "likelihood") likelihoods = parse_likelihood_list(v);
    else if (key == "out") out_dir = v;
    else if (key == "import") import_dir = v;
    else if (key == "threads") threads = to_count(key, v);
    else if (key == "shared_truth") shared_truth = detail::parse_bool(v);
    else if (key == "resample_fraction") smc.resample_fraction = to_real(key, v);
    else if (key == "resampling") smc.resampling = parse_resampling_kind(v);
    else if (key == "dt") s.dt = to_real(key, v);
    else if (key == "target_accel_noise") s.target_accel_noise = to_real(key, v);
    else if (key == "sensor_accel_noise") s.sensor_accel_noise = to_real(key, v);
    else if (key == "p_s") s.p_s = to_real(key, v);
    else if (key == "p_d") s.p_d = to_real(key, v);
    else if (key == "birth_rate") s.birth_rate = to_real(key, v);
    else if (key == "clutter_rate") s.clutter_rate = to_real(key, v);
    else if (key == "meas_noise") s.meas_noise = to_real(key, v);
    else if (key == "init_velocity_noise") s.init_velocity_noise = to_real(key, v);
    else if (key == "window_half_width") {
        const double h = to_real(key, v);
        s.window_lower = Meas2(-h, -h);
        s.window_upper = Meas2(h, h);
    } else if (key == "initial_targets") s.initial_targets = to_count(key, v);
    else if (key == "change_step") s.change_step = to_count(key, v);
    else if (key == "targets_after_change") s.targets_after_change = to_count(key, v);
    else if (key == "filter_p_s") filter_p_s = to_real(key, v);
    else if (key == "filter_accel_noise") filter_accel_noise = to_real(key, v);
    else if (key == "filter_sensor_accel_noise") filter_sensor_accel_noise = to_real(key, v);
    else if (key == "birth_mean") birth_mean = to_real(key, v);
    else if (key == "birth_variance") birth_variance = to_real(key, v);
    else if (key == "birth_position_std") birth_position_std = to_real(key, v);
    else if (key == "birth_velocity_std") birth_velocity_std = to_real(key, v);
    else if (key == "n_max") n_max = to_count(key, v);
    else if (key == "gate") gate = v == "inf" ? std::numeric_limits<double>::infinity() : to_real(key, v);
    else if (key == "prune_threshold") reduction.prune_threshold = to_real(key, v);
    else if (key == "merge_distance") reduction.merge_distance = to_real(key, v);
    else if (key == "max_components") reduction.max_components = to_count(key, v);
    else if (key == "tau0") smc.gating.tau0 = to_real(key, v);
    else if (key == "tau") smc.gating.tau = to_real(key, v);
    else if (key == "max_group_measurements") smc.gating.max_group_measurements = to_count(key, v);
    else if (key == "max_group_targets") smc.gating.max_group_targets = to_count(key, v);
    else throw ConfigError("unknown configuration key '" + key + "'");
}

/// Flat "key = value" text; '#' starts a comment.
[[nodiscard]] inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string x) {
        x.erase(0, x.find_first_not_of(" \t\r"));
        x.erase(x.find_last_not_of(" \t\r") + 1);
        return x;
    };
    while (std::getline(ss, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

[[nodiscard]] inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Filter models for one variant: NCV motion, position measurements offset
/// by the sensor position, a single broad birth component at the window
/// centre and Poisson clutter uniform over the window.
[[nodiscard]] inline Models build_models(const RunConfig& c, FilterKind kind) {
    Models m;
    m.motion = ncv_motion<4>(2, c.scenario.dt, c.filter_accel_noise, c.filter_p_s);
    m.obs.H = Mat<2, 4>::Zero();
    m.obs.H(0, 0) = m.obs.H(1, 1) = 1.0;
    m.obs.R = Mat<2>::Identity() * c.scenario.meas_noise * c.scenario.meas_noise;
    m.obs.p_d = c.scenario.p_d;
    m.obs.drift = Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, 4);
    m.obs.drift(0, 0) = m.obs.drift(1, 1) = 1.0;

    GaussianComponent<4> b;
    b.weight = c.birth_mean;
    b.mean = State4::Zero();
    b.mean.head<2>() = 0.5 * (c.scenario.window_lower + c.scenario.window_upper);
    b.cov = State4(c.birth_position_std * c.birth_position_std, c.birth_position_std * c.birth_position_std,
                   c.birth_velocity_std * c.birth_velocity_std, c.birth_velocity_std * c.birth_velocity_std)
                .asDiagonal();
    if (c.birth_mean > 0.0) m.birth.intensity.components.push_back(b);
    if (kind == FilterKind::Phd) m.birth.cardinality = PoissonCardinality{c.birth_mean};
    else m.birth.cardinality = to_model(panjer_from_moments(c.birth_mean, c.birth_variance));

    m.clutter.lower = c.scenario.window_lower;
    m.clutter.upper = c.scenario.window_upper;
    m.clutter.cardinality = PoissonCardinality{c.scenario.clutter_rate};
    m.reduction = c.reduction;
    m.n_max = c.n_max;
    m.gate = c.gate;
    m.obs.validate();
    m.motion.validate();
    m.birth.validate();
    return m;
}

[[nodiscard]] inline SmcConfig build_smc(const RunConfig& c, Variant v) {
    SmcConfig s = c.smc;
    const auto sensor = ncv_motion<4>(2, c.scenario.dt, c.filter_sensor_accel_noise, 1.0);
    s.sensor_transition = sensor.F;
    s.sensor_noise = sensor.Q;
    s.filter = v.filter;
    s.likelihood = v.likelihood;
    return s;
}

struct RunResult {
    std::vector<Meas2> sensor_estimate;
    std::vector<Meas2> sensor_truth;
    std::vector<double> cardinality;
    std::vector<double> truth_cardinality;
    StageTimes times;
    bool failed = false;
    std::string error;
    std::size_t variance_clamps = 0;
    std::size_t resamples = 0;
    double max_card_sum_error = 0.0;
    double max_card_mass_error = 0.0;
    double max_weight_sum_error = 0.0;
};

/// One Monte Carlo run of one variant over a fixed truth and frame list.
[[nodiscard]] inline RunResult run_single(const RunConfig& c, Variant v, const ScenarioTruth& truth,
                                          const std::vector<MeasurementFrame>& frames, const StreamSeeder& seeder) {
    RunResult r;
    try {
        const Models models = build_models(c, v.filter);
        const SmcConfig smc = build_smc(c, v);
        auto particles = initialize_particles(smc, models, SensorState(truth.sensor.front()));
        for (std::size_t k = 0; k < frames.size(); ++k) {
            smc_predict(particles, smc, models, seeder.child({k, 1}), k > 0, &r.times);
            const auto rep = smc_update(particles, frames[k].measurements, models, smc, k == 0, &r.times);
            r.variance_clamps += rep.variance_clamps;
            r.max_card_sum_error = std::max(r.max_card_sum_error, rep.card_sum_error);
            r.max_card_mass_error = std::max(r.max_card_mass_error, rep.card_mass_error);
            r.max_weight_sum_error = std::max(r.max_weight_sum_error, rep.weight_sum_error);
            const auto e = estimate(particles);
            r.sensor_estimate.push_back(e.sensor.head<2>());
            r.sensor_truth.push_back(truth.sensor[k].head<2>());
            r.cardinality.push_back(e.cardinality);
            r.truth_cardinality.push_back(static_cast<double>(truth.alive_count(k)));
            Rng rng = seeder.stream({k, 2});
            r.resamples += resample_if_needed(particles, smc, rng) ? 1 : 0;
        }
    } catch (const Error& e) {
        r.failed = true;
        r.error = e.kind() + ": " + e.what();
    }
    return r;
}

/// Per step sqrt(mean over runs of |estimate - truth|^2), positions only.
[[nodiscard]] inline std::vector<double> compute_rmse(const std::vector<std::vector<Meas2>>& estimates,
                                                      const std::vector<std::vector<Meas2>>& truth) {
    if (estimates.size() != truth.size()) throw DimensionError("compute_rmse: run count mismatch");
    if (estimates.empty()) return {};
    const std::size_t steps = estimates.front().size();
    std::vector<double> out(steps, 0.0);
    for (std::size_t r = 0; r < estimates.size(); ++r) {
        if (estimates[r].size() != steps || truth[r].size() != steps)
            throw DimensionError("compute_rmse: step count mismatch");
        for (std::size_t k = 0; k < steps; ++k) out[k] += (estimates[r][k] - truth[r][k]).squaredNorm();
    }
    for (double& x : out) x = std::sqrt(x / double(estimates.size()));
    return out;
}

struct VariantMetrics {
    std::string name;
    std::vector<double> rmse;
    std::vector<double> cardinality;
    StageTimes times;
    std::size_t excluded_runs = 0;
    std::vector<std::string> errors;
    std::size_t variance_clamps = 0;
    std::size_t resamples = 0;
    double max_card_sum_error = 0.0;
    double max_card_mass_error = 0.0;
    double max_weight_sum_error = 0.0;
};

struct MetricsTable {
    std::size_t steps = 0;
    std::vector<double> truth_cardinality;
    std::vector<VariantMetrics> variants;

    [[nodiscard]] const VariantMetrics& at(const std::string& name) const {
        for (const auto& v : variants)
            if (v.name == name) return v;
        throw ConfigError("no variant named '" + name + "'");
    }
};

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& th : pool) th.join();
}

struct ScenarioBundle {
    ScenarioTruth truth;
    std::vector<MeasurementFrame> frames;
};

/// The truth and frames used by run `r`.
[[nodiscard]] inline std::vector<ScenarioBundle> prepare_scenarios(const RunConfig& c) {
    std::vector<ScenarioBundle> out(c.runs);
    if (!c.import_dir.empty()) {
        const auto loaded = load_scenario(c.import_dir);
        for (auto& b : out) b = {loaded.truth, loaded.frames};
        return out;
    }
    const StreamSeeder seeder(c.seed);
    ScenarioTruth shared;
    if (c.shared_truth) {
        Rng rng = seeder.stream({0x7472757468ULL});
        shared = simulate_truth(c.scenario, rng);
    }
    for (std::size_t r = 0; r < c.runs; ++r) {
        if (c.shared_truth) out[r].truth = shared;
        else {
            Rng rng = seeder.stream({0x7472757468ULL, r});
            out[r].truth = simulate_truth(c.scenario, rng);
        }
        Rng mrng = seeder.stream({0x6d656173ULL, r});
        out[r].frames = generate_measurements(out[r].truth, c.scenario, mrng);
    }
    return out;
}

/// Every (run, variant) pair, aggregated per variant. Failed runs are left
/// out of the aggregates and counted. Runs of different variants share
/// random streams, so variants are compared on common random numbers.
[[nodiscard]] inline MetricsTable run_experiment(const RunConfig& c) {
    c.validate();
    const auto scen = prepare_scenarios(c);
    const auto variants = c.variants();
    const std::size_t jobs = c.runs * variants.size();
    std::vector<RunResult> results(jobs);
    const StreamSeeder seeder(c.seed);
    parallel_for(jobs, c.threads, [&](std::size_t j) {
        const std::size_t r = j / variants.size(), v = j % variants.size();
        results[j] = run_single(c, variants[v], scen[r].truth, scen[r].frames, seeder.child({0x736d63ULL, r}));
    });

    MetricsTable t;
    t.steps = scen.front().frames.size();
    t.truth_cardinality.assign(t.steps, 0.0);
    for (const auto& s : scen)
        for (std::size_t k = 0; k < t.steps; ++k)
            t.truth_cardinality[k] += double(s.truth.alive_count(k)) / double(scen.size());
    for (std::size_t v = 0; v < variants.size(); ++v) {
        VariantMetrics m;
        m.name = variants[v].name();
        std::vector<std::vector<Meas2>> est, tru;
        std::vector<double> card(t.steps, 0.0);
        for (std::size_t r = 0; r < c.runs; ++r) {
            const auto& res = results[r * variants.size() + v];
            m.times.merge(res.times);
            m.variance_clamps += res.variance_clamps;
            m.resamples += res.resamples;
            m.max_card_sum_error = std::max(m.max_card_sum_error, res.max_card_sum_error);
            m.max_card_mass_error = std::max(m.max_card_mass_error, res.max_card_mass_error);
            m.max_weight_sum_error = std::max(m.max_weight_sum_error, res.max_weight_sum_error);
            if (res.failed) {
                ++m.excluded_runs;
                m.errors.push_back("run " + std::to_string(r) + ": " + res.error);
                continue;
            }
            est.push_back(res.sensor_estimate);
            tru.push_back(res.sensor_truth);
            for (std::size_t k = 0; k < t.steps; ++k) card[k] += res.cardinality[k];
        }
        if (!est.empty()) {
            m.rmse = compute_rmse(est, tru);
            for (double& x : card) x /= double(est.size());
            m.cardinality = card;
        } else {
            m.rmse.assign(t.steps, std::numeric_limits<double>::quiet_NaN());
            m.cardinality.assign(t.steps, std::numeric_limits<double>::quiet_NaN());
        }
        t.variants.push_back(std::move(m));
    }
    return t;
}

inline constexpr const char* kRuntimeHeader = "variant,stage,seconds";
inline constexpr const char* kDiagnosticsHeader =
    "variant,excluded_runs,variance_clamps,resamples,max_card_sum_error,max_card_mass_error,max_weight_sum_error";

inline void write_rmse_csv(std::ostream& os, const MetricsTable& t) {
    os << "step";
    for (const auto& v : t.variants) os << ',' << v.name;
    os << '\n';
    for (std::size_t k = 0; k < t.steps; ++k) {
        os << (k + 1);
        for (const auto& v : t.variants) os << ',' << format_double(v.rmse[k]);
        os << '\n';
    }
}

inline void write_card_csv(std::ostream& os, const MetricsTable& t) {
    os << "step,truth";
    for (const auto& v : t.variants) os << ',' << v.name;
    os << '\n';
    for (std::size_t k = 0; k < t.steps; ++k) {
        os << (k + 1) << ',' << format_double(t.truth_cardinality[k]);
        for (const auto& v : t.variants) os << ',' << format_double(v.cardinality[k]);
        os << '\n';
    }
}

/// Mean seconds per call of each stage (one call = one parent particle).
inline void write_runtime_csv(std::ostream& os, const MetricsTable& t) {
    os << kRuntimeHeader << '\n';
    for (const auto& v : t.variants) {
        os << v.name << ",predict," << format_double(v.times.mean_predict()) << '\n';
        os << v.name << ",update," << format_double(v.times.mean_update()) << '\n';
        os << v.name << ",likelihood," << format_double(v.times.mean_likelihood()) << '\n';
    }
}

inline void write_diagnostics_csv(std::ostream& os, const MetricsTable& t) {
    os << kDiagnosticsHeader << '\n';
    for (const auto& v : t.variants)
        os << v.name << ',' << v.excluded_runs << ',' << v.variance_clamps << ',' << v.resamples << ','
           << format_double(v.max_card_sum_error) << ',' << format_double(v.max_card_mass_error) << ','
           << format_double(v.max_weight_sum_error) << '\n';
}

/// Writes rmse.csv, card.csv, runtime.csv and diagnostics.csv into `dir`.
inline void emit_csv(const MetricsTable& t, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    auto open = [&](const char* name) {
        std::ofstream f(dir + "/" + name);
        if (!f) throw IoError("cannot write '" + dir + "/" + name + "'");
        return f;
    };
    auto a = open("rmse.csv");
    write_rmse_csv(a, t);
    auto b = open("card.csv");
    write_card_csv(b, t);
    auto c = open("runtime.csv");
    write_runtime_csv(c, t);
    auto d = open("diagnostics.csv");
    write_diagnostics_csv(d, t);
    if (!a || !b || !c || !d) throw IoError("write failed in '" + dir + "'");
}

/// Parsed back rmse.csv or card.csv: header names and numeric columns.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

[[nodiscard]] inline CsvTable read_numeric_csv(std::istream& is) {
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty file");
    for (auto f : split_csv(line)) t.header.emplace_back(f);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        for (auto f : split_csv(line)) row.push_back(f == "nan" ? std::numeric_limits<double>::quiet_NaN() : parse_double(f));
        if (row.size() != t.header.size()) throw IoError("ragged row");
        t.rows.push_back(std::move(row));
    }
    return t;
}

} // namespace scmo
