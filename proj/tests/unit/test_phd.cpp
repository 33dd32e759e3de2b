#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

#include "scmo/oracle.hpp"
#include "scmo/phd.hpp"
#include "test_support.hpp"

using namespace scmo;

namespace {

GaussianMixture<4> two_components() {
    GaussianMixture<4> m;
    m.components = {test::component(1.5, 0.0, 0.0), test::component(2.5, 10.0, -4.0, 2.0)};
    return m;
}

} // namespace

TEST(MissedDetection, ScalesWeights) {
    auto obs = test::position_sensor(1.0, 0.5);
    EXPECT_EQ(missed_detection_term(two_components(), obs).mass(), 0.0);
    obs.p_d = 0.0;
    EXPECT_EQ(missed_detection_term(two_components(), obs).mass(), 4.0);
    obs.p_d = 0.99;
    EXPECT_NEAR(missed_detection_term(two_components(), obs).mass(), 0.04, 1e-15);
}

TEST(AssociationTerm, DensityAtPredictedMeasurement) {
    GaussianMixture<4> m;
    m.components = {test::component(2.0, 1.0, 1.0, 0.5)};
    const auto obs = test::position_sensor(0.9, std::sqrt(0.5));
    const auto a = association_term(m, Vec<2>(1.0, 1.0), obs, test::zero_sensor());
    EXPECT_NEAR(a.mass(), 2.0 * 0.9 / (2.0 * std::numbers::pi), 1e-15);
    auto off = obs;
    off.p_d = 0.0;
    EXPECT_TRUE(association_term(m, Vec<2>(1.0, 1.0), off, test::zero_sensor()).empty());
}

TEST(AssociationTerm, SumsPerComponentTerms) {
    GaussianMixture<4> m;
    m.components = {test::component(1.0, 0, 0), test::component(0.5, 2, 1, 3.0), test::component(2.0, -1, 4, 0.7)};
    const auto obs = test::position_sensor(0.8, 0.3);
    SensorState s = SensorState::Zero(4);
    s << 0.4, -0.2, 0.0, 0.0;
    const Vec<2> z(1.0, 1.5);
    double expect = 0.0;
    for (const auto& c : m.components) {
        const Mat<2> S = c.cov.topLeftCorner<2, 2>() + obs.R;
        expect += c.weight * 0.8 * eval_gaussian<2>(z - s.head<2>(), c.mean.head<2>(), S);
    }
    EXPECT_NEAR(association_term(m, z, obs, s).mass(), expect, 1e-15);
}

TEST(PhdPredict, MassRule) {
    BirthModel<4> birth;
    auto motion = ncv_motion<4>(2, 1.0, 0.3, 1.0);
    PhdState<4> st{two_components()};
    EXPECT_NEAR(phd_predict(st, motion, birth).intensity.mass(), 4.0, 1e-15);
    birth.intensity.components = {test::component(2.0, 0, 0, 100.0)};
    birth.cardinality = PoissonCardinality{2.0};
    motion.p_s = 0.0;
    EXPECT_NEAR(phd_predict(st, motion, birth).intensity.mass(), 2.0, 1e-15);
    motion.p_s = 0.95;
    EXPECT_NEAR(phd_predict(st, motion, birth).intensity.mass(), 5.8, 1e-14);
}

TEST(PhdUpdate, EmptyFrameLeavesMissedTerm) {
    const auto obs = test::position_sensor(0.99, 0.1);
    const auto clutter = test::window_clutter(PoissonCardinality{10.0});
    const auto post = phd_update(PhdState<4>{two_components()}, MeasurementSet<2>{}, obs, clutter, test::zero_sensor());
    EXPECT_NEAR(post.intensity.mass(), 0.04, 1e-15);
}

TEST(PhdUpdate, BlindSensorKeepsPrior) {
    const auto obs = test::position_sensor(0.0, 0.1);
    const auto clutter = test::window_clutter(PoissonCardinality{10.0});
    const MeasurementSet<2> Z{Vec<2>(0.1, 0.0), Vec<2>(10.0, -4.0)};
    const auto post = phd_update(PhdState<4>{two_components()}, Z, obs, clutter, test::zero_sensor());
    EXPECT_LT(test::weight_rel_diff(post.intensity, two_components()), 1e-15);
}

TEST(PhdUpdate, RejectsNonPoissonClutter) {
    const auto obs = test::position_sensor(0.9, 0.1);
    const auto clutter = test::window_clutter(PanjerCardinality{2.0, 1.0});
    EXPECT_THROW((void)phd_update(PhdState<4>{two_components()}, MeasurementSet<2>{}, obs, clutter, test::zero_sensor()),
                 ModelMismatchError);
    EXPECT_THROW(
        (void)phd_log_likelihood(PhdState<4>{two_components()}, MeasurementSet<2>{}, obs, clutter, test::zero_sensor()),
        ModelMismatchError);
}

TEST(PhdUpdate, MassBounds) {
    Rng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const auto inst = calibration::random_instance(rng, calibration::PriorKind::Poisson,
                                                       calibration::ClutterKind::Poisson, 6);
        const auto prior = calibration::phd_state(inst);
        const auto post = phd_update(prior, inst.Z, inst.obs, inst.clutter, inst.s);
        const double missed = (1.0 - inst.obs.p_d) * prior.intensity.mass();
        EXPECT_GE(post.intensity.mass(), missed * (1 - 1e-12));
        EXPECT_LE(post.intensity.mass(), missed + double(inst.Z.size()) + 1e-12);
    }
}

TEST(PhdUpdate, PosteriorMassMatchesOracle) {
    Rng rng(22);
    for (int trial = 0; trial < 30; ++trial) {
        const auto inst = calibration::random_instance(rng, calibration::PriorKind::Poisson,
                                                       calibration::ClutterKind::Poisson);
        const auto post = phd_update(calibration::phd_state(inst), inst.Z, inst.obs, inst.clutter, inst.s);
        const auto ref = oracle::posterior_cardinality(inst);
        EXPECT_LT(test::rel_diff(post.intensity.mass(), static_cast<double>(ref.mean)), 1e-8);
    }
}

TEST(PhdLikelihood, Examples) {
    const auto obs = test::position_sensor(0.99, 0.1);
    const auto clutter = test::window_clutter(PoissonCardinality{10.0});
    GaussianMixture<4> m;
    m.components = {test::component(2.0, 0, 0)};
    EXPECT_NEAR(phd_log_likelihood(PhdState<4>{m}, MeasurementSet<2>{}, obs, clutter, test::zero_sensor()), -11.98, 1e-12);
    const MeasurementSet<2> Z{Vec<2>(3.0, 4.0)};
    EXPECT_NEAR(phd_log_likelihood(PhdState<4>{}, Z, obs, clutter, test::zero_sensor()),
                std::log(10.0 / 40000.0) - 10.0, 1e-12);
}

TEST(PhdLikelihood, MatchesOracle) {
    Rng rng(23);
    for (int trial = 0; trial < 40; ++trial) {
        const auto inst = calibration::random_instance(rng, calibration::PriorKind::Poisson,
                                                       calibration::ClutterKind::Poisson);
        const double ll = phd_log_likelihood(calibration::phd_state(inst), inst.Z, inst.obs, inst.clutter, inst.s);
        const double ref = std::log(static_cast<double>(oracle::likelihood(inst)));
        EXPECT_LT(test::rel_diff(std::exp(ll - ref), 1.0), 1e-10);
    }
}

TEST(PhdLikelihood, PermutationInvariant) {
    Rng rng(24);
    for (int trial = 0; trial < 20; ++trial) {
        auto inst = calibration::random_instance(rng, calibration::PriorKind::Poisson, calibration::ClutterKind::Poisson);
        const auto st = calibration::phd_state(inst);
        const double a = phd_log_likelihood(st, inst.Z, inst.obs, inst.clutter, inst.s);
        std::reverse(inst.Z.begin(), inst.Z.end());
        const double b = phd_log_likelihood(st, inst.Z, inst.obs, inst.clutter, inst.s);
        EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(a)));
    }
}

TEST(PhdLikelihood, GateOnlyDropsFarPairs) {
    const auto obs = test::position_sensor(0.9, 0.5);
    const auto clutter = test::window_clutter(PoissonCardinality{5.0});
    const MeasurementSet<2> Z{Vec<2>(0.2, 0.1), Vec<2>(60.0, 60.0)};
    PhdState<4> st{two_components()};
    const double exact = phd_log_likelihood(st, Z, obs, clutter, test::zero_sensor());
    const double gated = phd_log_likelihood(st, Z, obs, clutter, test::zero_sensor(), 60.0);
    EXPECT_NEAR(exact, gated, 1e-12);
}
