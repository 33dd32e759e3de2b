#include <gtest/gtest.h>

#include <array>

#include "scmo/parent_smc.hpp"
#include "test_support.hpp"

using namespace scmo;

namespace {

FilterModels<4, 2> small_models(double p_d = 0.9) {
    FilterModels<4, 2> m;
    m.motion = ncv_motion<4>(2, 1.0, 0.1, 0.99);
    m.obs = test::position_sensor(p_d, 0.5);
    m.clutter = test::window_clutter(PoissonCardinality{2.0});
    m.birth.cardinality = PoissonCardinality{0.0};
    m.n_max = 20;
    return m;
}

SmcConfig small_config(std::size_t n, double noise = 0.0) {
    SmcConfig c;
    c.particles = n;
    c.sensor_transition = Eigen::MatrixXd::Identity(4, 4);
    c.sensor_noise = Eigen::MatrixXd::Identity(4, 4) * noise;
    return c;
}

ParentParticle<4> particle(double weight, double sx, double sy, GaussianMixture<4> mix) {
    ParentParticle<4> p;
    p.weight = weight;
    p.y = SensorState::Zero(4);
    p.y << sx, sy, 0.0, 0.0;
    p.theta = PhdState<4>{std::move(mix)};
    return p;
}

GaussianMixture<4> one_target(double w, double x, double y) {
    GaussianMixture<4> m;
    m.components = {test::component(w, x, y, 0.1, 0.01)};
    return m;
}

ParticleSet<4> tagged(std::initializer_list<double> weights) {
    ParticleSet<4> ps;
    double tag = 0;
    for (double w : weights) ps.push_back(particle(w, tag++, 0, {}));
    return ps;
}

std::array<int, 4> counts(const ParticleSet<4>& ps) {
    std::array<int, 4> c{};
    for (const auto& p : ps) ++c[static_cast<std::size_t>(p.y(0))];
    return c;
}

} // namespace

TEST(Ess, Examples) {
    const std::vector<double> uniform(8, 0.125);
    EXPECT_NEAR(ess(uniform), 8.0, 1e-12);
    EXPECT_NEAR(ess(std::vector<double>{1.0, 0.0, 0.0}), 1.0, 1e-15);
    EXPECT_NEAR(ess(std::vector<double>{0.5, 0.25, 0.25}), 8.0 / 3.0, 1e-12);
}

TEST(SmcPredict, ZeroNoiseKeepsSensor) {
    const auto models = small_models();
    auto cfg = small_config(5);
    SensorState y0 = SensorState::Zero(4);
    y0 << 1.0, 2.0, 0.5, -0.5;
    auto ps = initialize_particles(cfg, models, y0);
    for (const auto& p : ps) EXPECT_DOUBLE_EQ(p.weight, 0.2);
    cfg.sensor_transition = ncv_motion<4>(2, 1.0, 0.0, 1.0).F;
    smc_predict(ps, cfg, models, StreamSeeder(3));
    for (const auto& p : ps) EXPECT_TRUE(p.y.isApprox(Vec<4>(1.5, 1.5, 0.5, -0.5)));
}

TEST(SmcPredict, EnsembleMeanAndDeterminism) {
    const auto models = small_models();
    const auto cfg = small_config(2000, 4.0);
    SensorState y0 = SensorState::Zero(4);
    y0 << 1.0, 2.0, 0.0, 0.0;
    auto a = initialize_particles(cfg, models, y0);
    auto b = a;
    smc_predict(a, cfg, models, StreamSeeder(11));
    smc_predict(b, cfg, models, StreamSeeder(11));
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].y, b[i].y);
        mean += a[i].y / double(a.size());
    }
    const double tol = 3.0 * 2.0 / std::sqrt(2000.0);
    EXPECT_NEAR(mean(0), 1.0, tol);
    EXPECT_NEAR(mean(1), 2.0, tol);
    EXPECT_NEAR(mean(2), 0.0, tol);
}

TEST(SmcUpdate, IdenticalParticlesStayUniform) {
    const auto models = small_models();
    ParticleSet<4> ps;
    for (int i = 0; i < 4; ++i) ps.push_back(particle(0.25, 0, 0, one_target(1.0, 3, 3)));
    const MeasurementSet<2> Z{Vec<2>(3.1, 2.9), Vec<2>(-20, 40)};
    const auto cfg = small_config(4);
    const auto rep = smc_update(ps, Z, models, cfg, false);
    for (const auto& p : ps) EXPECT_NEAR(p.weight, 0.25, 1e-15);
    EXPECT_NEAR(rep.ess, 4.0, 1e-12);
    EXPECT_LT(rep.weight_sum_error, 1e-15);
}

TEST(SmcUpdate, MatchingSensorHypothesisWins) {
    const auto models = small_models();
    for (auto kind : {LikelihoodKind::L1, LikelihoodKind::L2}) {
        auto cfg = small_config(2);
        cfg.likelihood = kind;
        ParticleSet<4> ps{particle(0.5, 0, 0, one_target(1.0, 10, 10)), particle(0.5, 5, 5, one_target(1.0, 10, 10))};
        (void)smc_update(ps, MeasurementSet<2>{Vec<2>(15.1, 14.9)}, models, cfg, false);
        EXPECT_GT(ps[1].weight, 0.99) << to_string(kind);
    }
}

TEST(SmcUpdate, EmptyFrameWeightRatio) {
    const auto models = small_models(0.8);
    const auto cfg = small_config(2);
    ParticleSet<4> ps{particle(0.5, 0, 0, one_target(1.0, 0, 0)), particle(0.5, 0, 0, one_target(3.0, 0, 0))};
    (void)smc_update(ps, MeasurementSet<2>{}, models, cfg, false);
    EXPECT_NEAR(ps[0].weight / ps[1].weight, std::exp(0.8 * 2.0), 1e-12);
}

TEST(SmcUpdate, AllWeightsVanishing) {
    const auto models = small_models(1.0);
    auto cfg = small_config(2);
    cfg.likelihood = LikelihoodKind::L2;
    ParticleSet<4> ps{particle(0.5, 0, 0, one_target(1.0, 0, 0)), particle(0.5, 1, 0, one_target(1.0, 0, 0))};
    EXPECT_THROW((void)smc_update(ps, MeasurementSet<2>{}, models, cfg, false), DegenerateFilterError);
}

TEST(SmcUpdate, ReportsCardinalityDiagnostics) {
    auto models = small_models();
    auto cfg = small_config(3);
    cfg.filter = FilterKind::Cphd;
    SensorState y0 = SensorState::Zero(4);
    auto ps = initialize_particles(cfg, models, y0);
    for (auto& p : ps) std::get<CphdState<4>>(p.theta) = CphdState<4>{one_target(2.0, 0, 0), CardinalityDist::delta(2, 20)};
    const auto rep = smc_update(ps, MeasurementSet<2>{Vec<2>(0.1, 0.1)}, models, cfg, false);
    EXPECT_LT(rep.card_sum_error, 1e-12);
    EXPECT_LT(rep.card_mass_error, 1e-9);
    EXPECT_EQ(rep.variance_clamps, 0u);
}

TEST(Resample, DegenerateWeightsGiveCopies) {
    Rng rng(61);
    const auto out = resample_roulette(tagged({0.0, 1.0, 0.0, 0.0}), rng);
    EXPECT_EQ(counts(out), (std::array<int, 4>{0, 4, 0, 0}));
    for (const auto& p : out) EXPECT_DOUBLE_EQ(p.weight, 0.25);
    const auto sys = resample_systematic(tagged({0.0, 0.0, 0.0, 1.0}), rng);
    EXPECT_EQ(counts(sys), (std::array<int, 4>{0, 0, 0, 4}));
}

TEST(Resample, RouletteIsUnbiased) {
    Rng rng(62);
    const std::array<double, 4> w{0.1, 0.2, 0.3, 0.4};
    const auto in = tagged({w[0], w[1], w[2], w[3]});
    std::array<double, 4> total{};
    const int reps = 20000;
    for (int r = 0; r < reps; ++r) {
        const auto c = counts(resample_roulette(in, rng));
        for (int i = 0; i < 4; ++i) total[i] += c[i];
    }
    double chi2 = 0.0;
    for (int i = 0; i < 4; ++i) {
        const double expected = 4.0 * reps * w[i];
        chi2 += (total[i] - expected) * (total[i] - expected) / expected;
    }
    EXPECT_LT(chi2, 16.27); // 3 degrees of freedom, p = 0.001
}

TEST(Resample, SystematicCountsAreNearProportional) {
    Rng rng(63);
    const auto in = tagged({0.1, 0.2, 0.3, 0.4});
    for (int r = 0; r < 200; ++r) {
        const auto c = counts(resample_systematic(in, rng));
        const std::array<double, 4> target{0.4, 0.8, 1.2, 1.6};
        for (int i = 0; i < 4; ++i) {
            EXPECT_GE(c[i], std::floor(target[i]));
            EXPECT_LE(c[i], std::ceil(target[i]));
        }
    }
}

TEST(Resample, TriggerFollowsEss) {
    Rng rng(64);
    auto cfg = small_config(4);
    auto even = tagged({0.25, 0.25, 0.25, 0.25});
    EXPECT_FALSE(resample_if_needed(even, cfg, rng));
    auto skewed = tagged({0.85, 0.05, 0.05, 0.05});
    EXPECT_TRUE(resample_if_needed(skewed, cfg, rng));
    for (const auto& p : skewed) EXPECT_DOUBLE_EQ(p.weight, 0.25);
    cfg.resample_fraction = 0.0;
    auto again = tagged({0.85, 0.05, 0.05, 0.05});
    EXPECT_FALSE(resample_if_needed(again, cfg, rng));
}

TEST(Estimate, WeightedMeans) {
    ParticleSet<4> ps{particle(0.25, 4, 0, one_target(2.0, 0, 0)), particle(0.75, 0, 8, one_target(6.0, 0, 0))};
    const auto e = estimate(ps);
    EXPECT_NEAR(e.sensor(0), 1.0, 1e-15);
    EXPECT_NEAR(e.sensor(1), 6.0, 1e-15);
    EXPECT_NEAR(e.cardinality, 5.0, 1e-15);
    EXPECT_NEAR(e.intensity_mass, 5.0, 1e-15);
    EXPECT_EQ(estimate(ParticleSet<4>{}).cardinality, 0.0);
}
