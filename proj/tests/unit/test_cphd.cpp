#include <gtest/gtest.h>

#include <algorithm>

#include "scmo/cphd.hpp"
#include "scmo/daughter.hpp"
#include "scmo/oracle.hpp"
#include "scmo/phd.hpp"
#include "test_support.hpp"

using namespace scmo;
using calibration::ClutterKind;
using calibration::PriorKind;

namespace {

CardinalityDist poisson_dist(double rate, std::size_t n_max) { return truncate_to_dist(PoissonCardinality{rate}, n_max).dist; }

double total_variation(const CardinalityDist& a, const CardinalityDist& b) {
    double tv = 0.0;
    for (std::size_t n = 0; n < std::max(a.rho.size(), b.rho.size()); ++n) {
        const double x = n < a.rho.size() ? a.rho[n] : 0.0, y = n < b.rho.size() ? b.rho[n] : 0.0;
        tv += std::abs(x - y);
    }
    return 0.5 * tv;
}

} // namespace

TEST(CphdPredict, CardinalityExamples) {
    auto motion = ncv_motion<4>(2, 1.0, 0.3, 1.0);
    BirthModel<4> birth;
    birth.cardinality = DiscreteCardinality{{1.0}};
    CphdState<4> st;
    st.card.rho = {0.2, 0.5, 0.3, 0.0};
    st.intensity.components = {test::component(1.1, 0, 0)};
    EXPECT_LT(total_variation(cphd_predict(st, motion, birth).card, st.card), 1e-15);

    motion.p_s = 0.5;
    st.card = CardinalityDist::delta(1, 4);
    st.intensity.components = {test::component(1.0, 0, 0)};
    const auto p = cphd_predict(st, motion, birth);
    EXPECT_NEAR(p.card.rho[0], 0.5, 1e-15);
    EXPECT_NEAR(p.card.rho[1], 0.5, 1e-15);

    motion.p_s = 0.95;
    birth.intensity.components = {test::component(2.0, 0, 0, 50.0)};
    birth.cardinality = PoissonCardinality{2.0};
    st.card = poisson_dist(4.0, 64);
    st.intensity.components = {test::component(4.0, 0, 0)};
    const auto q = cphd_predict(st, motion, birth);
    EXPECT_LT(total_variation(q.card, poisson_dist(5.8, 64)), 1e-9);
    EXPECT_NEAR(q.intensity.mass(), 5.8, 1e-12);
}

TEST(CphdUpdate, PoissonPriorReducesToPhd) {
    Rng rng(41);
    for (int trial = 0; trial < 30; ++trial) {
        const auto inst = calibration::random_instance(rng, PriorKind::Poisson, ClutterKind::Poisson, 6);
        const auto phd = calibration::phd_state(inst);
        CphdState<4> st{phd.intensity, poisson_dist(phd.intensity.mass(), 60)};
        const auto a = phd_update(phd, inst.Z, inst.obs, inst.clutter, inst.s);
        const auto b = cphd_update(st, inst.Z, inst.obs, inst.clutter, inst.s);
        EXPECT_LT(test::weight_rel_diff(b.intensity, a.intensity), 1e-6);
        EXPECT_NEAR(b.card.mean(), a.intensity.mass(), 1e-9 * std::max(1.0, a.intensity.mass()));
    }
}

TEST(CphdUpdate, SingleTargetWithoutClutterStaysSingle) {
    const auto obs = test::position_sensor(0.9, 0.3);
    const auto clutter = test::window_clutter(DiscreteCardinality{{1.0}});
    CphdState<4> st{{}, CardinalityDist::delta(1, 6)};
    st.intensity.components = {test::component(0.3, 0, 0), test::component(0.7, 2, 1)};
    const MeasurementSet<2> Z{Vec<2>(1.5, 0.5)};
    const auto post = cphd_update(st, Z, obs, clutter, test::zero_sensor());
    EXPECT_NEAR(post.card.rho[1], 1.0, 1e-15);
    EXPECT_NEAR(post.intensity.mass(), 1.0, 1e-12);
    // Single-target Bayes posterior: association weights proportional to w_i q_i(z).
    const auto a = association_term(st.intensity, Z[0], obs, test::zero_sensor());
    const auto ref = a.scaled(1.0 / a.mass());
    GaussianMixture<4> detected;
    for (const auto& c : post.intensity.components)
        if (c.cov(0, 0) < 0.5) detected.components.push_back(c);
    EXPECT_LT(test::weight_rel_diff(detected, ref), 1e-10);
}

TEST(CphdUpdate, EmptyFrameReweightsByMissProbability) {
    const auto obs = test::position_sensor(0.6, 0.3);
    const auto clutter = test::window_clutter(PoissonCardinality{3.0});
    CphdState<4> st;
    st.card.rho = {0.1, 0.2, 0.3, 0.25, 0.15};
    st.intensity.components = {test::component(st.card.mean(), 0, 0)};
    const auto post = cphd_update(st, MeasurementSet<2>{}, obs, clutter, test::zero_sensor());
    double z = 0.0;
    for (std::size_t n = 0; n < st.card.rho.size(); ++n) z += st.card.rho[n] * std::pow(0.4, double(n));
    for (std::size_t n = 0; n < st.card.rho.size(); ++n)
        EXPECT_NEAR(post.card.rho[n], st.card.rho[n] * std::pow(0.4, double(n)) / z, 1e-15);
}

TEST(CphdLikelihood, NoTargetsCollapsesToClutterTerm) {
    const auto obs = test::position_sensor(0.9, 0.3);
    const DiscreteCardinality rc{{0.1, 0.2, 0.3, 0.4}};
    const auto clutter = test::window_clutter(rc, 10.0);
    CphdState<4> st{{}, CardinalityDist::delta(0, 5)};
    const MeasurementSet<2> Z{Vec<2>(1, 1), Vec<2>(-3, 2), Vec<2>(4, 4)};
    const double ll = cphd_log_likelihood(st, Z, obs, clutter, test::zero_sensor());
    EXPECT_NEAR(ll, std::log(0.4 * 6.0) + 3.0 * std::log(1.0 / 400.0), 1e-12);
}

TEST(CphdLikelihood, PoissonEverythingMatchesPhd) {
    Rng rng(42);
    for (std::size_t m = 0; m <= 3; ++m) {
        int done = 0;
        while (done < 5) {
            auto inst = calibration::random_instance(rng, PriorKind::Poisson, ClutterKind::Poisson, 3);
            if (inst.Z.size() != m) continue;
            ++done;
            const auto phd = calibration::phd_state(inst);
            CphdState<4> st{phd.intensity, poisson_dist(phd.intensity.mass(), 60)};
            const double a = phd_log_likelihood(phd, inst.Z, inst.obs, inst.clutter, inst.s);
            const double b = cphd_log_likelihood(st, inst.Z, inst.obs, inst.clutter, inst.s);
            EXPECT_NEAR(a, b, 1e-10 * std::max(1.0, std::abs(a))) << "|Z| = " << m;
        }
    }
}

TEST(CphdLikelihood, MatchesOracle) {
    Rng rng(43);
    for (auto pk : {PriorKind::Discrete, PriorKind::Poisson, PriorKind::NegativeBinomial, PriorKind::Binomial})
        for (auto ck : {ClutterKind::Discrete, ClutterKind::Poisson, ClutterKind::NegativeBinomial})
            for (int trial = 0; trial < 6; ++trial) {
                auto inst = calibration::random_instance(rng, pk, ck);
                const auto st = calibration::cphd_state(inst, 12);
                inst.prior = DiscreteCardinality{st.card.rho};
                const double ll = cphd_log_likelihood(st, inst.Z, inst.obs, inst.clutter, inst.s);
                EXPECT_LT(calibration::rel_error(std::exp(static_cast<long double>(ll)), oracle::likelihood(inst)), 1e-9)
                    << calibration::name(pk) << "/" << calibration::name(ck);
                const auto post = cphd_update(st, inst.Z, inst.obs, inst.clutter, inst.s);
                const auto ref = oracle::posterior_cardinality(inst);
                for (std::size_t n = 0; n < post.card.rho.size(); ++n)
                    EXPECT_NEAR(post.card.rho[n], static_cast<double>(ref.pmf[n]), 1e-10);
            }
}

TEST(CphdUpdate, NormalisationAndMassCoupling) {
    Rng rng(44);
    for (int trial = 0; trial < 40; ++trial) {
        const auto inst = calibration::random_instance(rng, PriorKind::Discrete, ClutterKind::Poisson, 8);
        const auto post = cphd_update(calibration::cphd_state(inst), inst.Z, inst.obs, inst.clutter, inst.s);
        EXPECT_NEAR(post.card.total(), 1.0, 1e-12);
        EXPECT_NEAR(post.intensity.mass(), post.card.mean(), 1e-6 * std::max(1.0, post.card.mean()));
        for (double r : post.card.rho) EXPECT_GE(r, 0.0);
    }
}

TEST(CphdLikelihood, PermutationInvariant) {
    Rng rng(45);
    for (int trial = 0; trial < 20; ++trial) {
        auto inst = calibration::random_instance(rng, PriorKind::Discrete, ClutterKind::Discrete);
        const auto st = calibration::cphd_state(inst);
        const double a = cphd_log_likelihood(st, inst.Z, inst.obs, inst.clutter, inst.s);
        std::reverse(inst.Z.begin(), inst.Z.end());
        const double b = cphd_log_likelihood(st, inst.Z, inst.obs, inst.clutter, inst.s);
        EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(a)));
    }
}

TEST(Daughter, KindsAndInitialStates) {
    FilterModels<4, 2> m;
    m.n_max = 10;
    EXPECT_EQ(kind_of(initial_daughter<4, 2>(FilterKind::Phd, m)), FilterKind::Phd);
    EXPECT_EQ(kind_of(initial_daughter<4, 2>(FilterKind::SoPhd, m)), FilterKind::SoPhd);
    const auto c = initial_daughter<4, 2>(FilterKind::Cphd, m);
    ASSERT_EQ(kind_of(c), FilterKind::Cphd);
    EXPECT_EQ(std::get<CphdState<4>>(c).card.n_max(), 10u);
    EXPECT_EQ(expected_cardinality(c), 0.0);
    EXPECT_EQ(parse_filter_kind("sophd"), FilterKind::SoPhd);
    EXPECT_EQ(to_string(FilterKind::Cphd), "cphd");
    EXPECT_THROW((void)parse_filter_kind("lmb"), ConfigError);
}

TEST(Daughter, DispatchMatchesDirectCalls) {
    Rng rng(46);
    const auto inst = calibration::random_instance(rng, PriorKind::Poisson, ClutterKind::Poisson, 4);
    auto models = calibration::models_for(inst, 30);
    models.reduction.prune_threshold = 0.0;
    models.reduction.merge_distance = -1.0;
    const DaughterState<4> d = calibration::cphd_state(inst, 30);
    const double direct = cphd_log_likelihood(std::get<CphdState<4>>(d), inst.Z, inst.obs, inst.clutter, inst.s);
    EXPECT_EQ(daughter_log_likelihood(d, inst.Z, models, inst.s), direct);
    const auto u = daughter_update(d, inst.Z, models, inst.s);
    EXPECT_NEAR(expected_cardinality(u),
                cphd_update(std::get<CphdState<4>>(d), inst.Z, inst.obs, inst.clutter, inst.s).card.mean(), 1e-12);
}
