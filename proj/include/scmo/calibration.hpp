#pragma once

// Random oracle instances and the convention calibration for the Panjer and
// cardinalized likelihoods. The "literal" evaluators below implement the
// printed likelihood formulas by direct subset summation, one candidate
// reading at a time, so that each reading can be scored against the
// enumeration oracle.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "scmo/cardinality.hpp"
#include "scmo/cphd.hpp"
#include "scmo/oracle.hpp"
#include "scmo/phd.hpp"
#include "scmo/random.hpp"
#include "scmo/sophd.hpp"

namespace scmo::calibration {

using Inst = oracle::Instance<4, 2>;

enum class PriorKind { Poisson, NegativeBinomial, Binomial, Discrete };
enum class ClutterKind { Poisson, NegativeBinomial, Discrete };

[[nodiscard]] inline const char* name(PriorKind k) {
    switch (k) {
    case PriorKind::Poisson: return "poisson";
    case PriorKind::NegativeBinomial: return "negbin";
    case PriorKind::Binomial: return "binomial";
    case PriorKind::Discrete: return "discrete";
    }
    return "?";
}
[[nodiscard]] inline const char* name(ClutterKind k) {
    switch (k) {
    case ClutterKind::Poisson: return "poisson";
    case ClutterKind::NegativeBinomial: return "negbin";
    case ClutterKind::Discrete: return "discrete";
    }
    return "?";
}

/// Random instance in a 20 m x 20 m window: up to three components, up to
/// `max_meas` measurements, half of them near a component.
[[nodiscard]] inline Inst random_instance(Rng& rng, PriorKind pk, ClutterKind ck, std::size_t max_meas = 4) {
    auto unif = [&](double a, double b) { return a + (b - a) * uniform01(rng); };
    Inst inst;
    const auto ncomp = static_cast<std::size_t>(1 + rng() % 3);
    double wsum = 0.0;
    for (std::size_t i = 0; i < ncomp; ++i) {
        GaussianComponent<4> c;
        c.weight = unif(0.2, 1.0);
        wsum += c.weight;
        c.mean << unif(-6, 6), unif(-6, 6), unif(-1, 1), unif(-1, 1);
        Mat<4> A = Mat<4>::Zero();
        for (int r = 0; r < 4; ++r)
            for (int k = 0; k <= r; ++k) A(r, k) = (r == k) ? unif(0.3, 1.5) : unif(-0.3, 0.3);
        c.cov = A * A.transpose();
        inst.spatial.components.push_back(c);
    }
    inst.spatial.scale(1.0 / wsum);

    inst.obs.H = Mat<2, 4>::Zero();
    inst.obs.H(0, 0) = inst.obs.H(1, 1) = 1.0;
    const double r = unif(0.2, 1.0);
    inst.obs.R = Mat<2>::Identity() * r * r;
    inst.obs.p_d = unif(0.3, 0.99);
    inst.obs.drift = Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, 4);
    inst.obs.drift(0, 0) = inst.obs.drift(1, 1) = 1.0;
    inst.s = Eigen::VectorXd::Zero(4);
    inst.s << unif(-1, 1), unif(-1, 1), 0.0, 0.0;

    inst.clutter.lower = Vec<2>(-10, -10);
    inst.clutter.upper = Vec<2>(10, 10);
    switch (ck) {
    case ClutterKind::Poisson: inst.clutter.cardinality = PoissonCardinality{unif(0.5, 4.0)}; break;
    case ClutterKind::NegativeBinomial: {
        const double mean = unif(0.5, 4.0);
        inst.clutter.cardinality = to_model(panjer_from_moments(mean, mean * unif(1.3, 4.0)));
        break;
    }
    case ClutterKind::Discrete: {
        DiscreteCardinality d;
        for (int n = 0; n <= 6; ++n) d.rho.push_back(unif(0.05, 1.0));
        double s = 0;
        for (double x : d.rho) s += x;
        for (double& x : d.rho) x /= s;
        inst.clutter.cardinality = d;
        break;
    }
    }
    switch (pk) {
    case PriorKind::Poisson: inst.prior = PoissonCardinality{unif(0.3, 4.0)}; break;
    case PriorKind::NegativeBinomial: {
        const double mean = unif(0.5, 4.0);
        inst.prior = to_model(panjer_from_moments(mean, mean * unif(1.2, 5.0)));
        break;
    }
    case PriorKind::Binomial: {
        const int n = 1 + static_cast<int>(rng() % 6);
        const double p = unif(0.2, 0.9);
        inst.prior = PanjerCardinality{-double(n), -1.0 / p};
        break;
    }
    case PriorKind::Discrete: {
        DiscreteCardinality d;
        const int top = 2 + static_cast<int>(rng() % 11);
        for (int n = 0; n <= top; ++n) d.rho.push_back(unif(0.0, 1.0));
        double s = 0;
        for (double x : d.rho) s += x;
        for (double& x : d.rho) x /= s;
        inst.prior = d;
        break;
    }
    }

    const auto m = static_cast<std::size_t>(rng() % (max_meas + 1));
    for (std::size_t j = 0; j < m; ++j) {
        Vec<2> z;
        if (uniform01(rng) < 0.5) {
            const auto& c = inst.spatial.components[rng() % ncomp];
            z << unif(-1.5, 1.5), unif(-1.5, 1.5);
            z += c.mean.head<2>() + inst.obs.offset(inst.s);
        } else {
            z << unif(-10, 10), unif(-10, 10);
        }
        inst.Z.push_back(z);
    }
    return inst;
}

/// Filter models matching an instance (no birth, no motion).
[[nodiscard]] inline FilterModels<4, 2> models_for(const Inst& inst, std::size_t n_max = 12) {
    FilterModels<4, 2> m;
    m.obs = inst.obs;
    m.clutter = inst.clutter;
    m.n_max = n_max;
    return m;
}

[[nodiscard]] inline PhdState<4> phd_state(const Inst& inst) {
    return {inst.spatial.scaled(cardinality_mean(inst.prior))};
}
[[nodiscard]] inline SoPhdState<4> sophd_state(const Inst& inst) {
    return {inst.spatial.scaled(cardinality_mean(inst.prior)), cardinality_variance(inst.prior), false};
}
/// The cardinalized filter's prior truncated to {0..n_max}; the oracle
/// should be run on the same truncated law.
[[nodiscard]] inline CphdState<4> cphd_state(const Inst& inst, std::size_t n_max = 12) {
    CphdState<4> st;
    st.card = truncate_to_dist(inst.prior, n_max).dist;
    st.intensity = inst.spatial.scaled(st.card.mean());
    return st;
}

// ---- Candidate readings --------------------------------------------------

enum class ClutterExponent { Printed, Appendix, Closed };

struct PanjerConvention {
    int f_sign = 1;                         // F_d = 1 + f_sign p_d / beta
    ClutterExponent exponent = ClutterExponent::Closed;
    bool normalized_targets = true;         // mu^z over s rather than mu
    bool spatial_clutter = true;            // s_c(z) rather than mu_c(z)

    [[nodiscard]] std::string describe() const {
        std::ostringstream os;
        os << "F_d sign " << (f_sign > 0 ? '+' : '-') << ", F_c exponent "
           << (exponent == ClutterExponent::Printed ? "-a_c-|Z|-j"
               : exponent == ClutterExponent::Appendix ? "-a_c-(|Z|-j)"
                                                       : "-a_c")
           << ", target terms " << (normalized_targets ? "over s" : "over mu") << ", clutter product "
           << (spatial_clutter ? "s_c" : "mu_c");
        return os.str();
    }
};

[[nodiscard]] inline std::vector<PanjerConvention> panjer_candidates() {
    std::vector<PanjerConvention> out;
    for (int sign : {1, -1})
        for (auto e : {ClutterExponent::Printed, ClutterExponent::Appendix, ClutterExponent::Closed})
            for (bool nt : {false, true})
                for (bool sc : {false, true}) out.push_back({sign, e, nt, sc});
    return out;
}

namespace detail {

[[nodiscard]] inline long double lpoch(long double a, std::size_t n) {
    long double r = 1.0L;
    for (std::size_t i = 0; i < n; ++i) r *= a + static_cast<long double>(i);
    return r;
}

[[nodiscard]] inline std::vector<long double> detection_terms(const Inst& inst) {
    std::vector<long double> g;
    for (const auto& z : inst.Z) g.push_back(oracle::detail::detection_integral(inst, z));
    return g;
}

} // namespace detail

/// Printed Panjer likelihood under one reading. Prior and clutter must both
/// be negative binomial.
[[nodiscard]] inline long double literal_panjer_likelihood(const Inst& inst, const PanjerConvention& c) {
    const auto& pp = std::get<PanjerCardinality>(inst.prior);
    const auto& pc = std::get<PanjerCardinality>(inst.clutter.cardinality);
    const long double a = pp.alpha, b = pp.beta, ac = pc.alpha, bc = pc.beta;
    const long double mass = a / b;
    const long double pd = inst.obs.p_d;
    const long double fd = 1.0L + c.f_sign * pd / b;
    const long double fc = 1.0L + 1.0L / bc;
    const auto g = detail::detection_terms(inst);
    const std::size_t m = inst.Z.size();
    oracle::KahanSum total;
    for (std::size_t j = 0; j <= m; ++j) {
        long double exponent = -ac;
        if (c.exponent == ClutterExponent::Printed) exponent = -ac - static_cast<long double>(m + j);
        if (c.exponent == ClutterExponent::Appendix) exponent = -ac - static_cast<long double>(m - j);
        const long double lead = detail::lpoch(a, j) / std::pow(b, static_cast<long double>(j)) *
                                 detail::lpoch(ac, m - j) / std::pow(bc + 1.0L, static_cast<long double>(m - j)) *
                                 std::pow(fd, -a - static_cast<long double>(j)) * std::pow(fc, exponent);
        oracle::KahanSum subsets;
        for (unsigned mask = 0; mask < (1u << m); ++mask) {
            if (oracle::detail::popcount(mask) != j) continue;
            long double prod = 1.0L;
            for (std::size_t k = 0; k < m; ++k) {
                if (mask >> k & 1u) prod *= c.normalized_targets ? g[k] : mass * g[k];
                else {
                    const long double sc = inst.clutter.spatial_density(inst.Z[k]);
                    prod *= c.spatial_clutter ? sc : (ac / bc) * sc;
                }
            }
            subsets.add(prod);
        }
        total.add(lead * subsets.value());
    }
    return total.value();
}

struct CphdConvention {
    bool divide_by_mass = true;  // mu^phi(X)^{n-j} / mu(X)^n
    bool spatial_clutter = true; // s_c(z) rather than mu_c(z)

    [[nodiscard]] std::string describe() const {
        std::ostringstream os;
        os << "target terms " << (divide_by_mass ? "divided by mu(X)^n" : "unnormalised") << ", clutter product "
           << (spatial_clutter ? "s_c" : "mu_c");
        return os.str();
    }
};

[[nodiscard]] inline std::vector<CphdConvention> cphd_candidates() {
    return {{false, false}, {false, true}, {true, false}, {true, true}};
}

/// Printed cardinalized likelihood with u = d = 0 under one reading.
[[nodiscard]] inline long double literal_cphd_likelihood(const Inst& inst, const CphdConvention& c) {
    const auto rho = oracle::pmf_table(inst.prior);
    const auto rc = oracle::pmf_table(inst.clutter.cardinality, inst.Z.size() + 1);
    long double mass = 0.0L;
    for (std::size_t n = 0; n < rho.size(); ++n) mass += static_cast<long double>(n) * rho[n];
    const long double clutter_mean = cardinality_mean(inst.clutter.cardinality);
    const long double pd = inst.obs.p_d;
    const auto g = detail::detection_terms(inst);
    const std::size_t m = inst.Z.size();
    std::vector<oracle::KahanSum> by_j(m + 1);
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        long double prod = 1.0L;
        for (std::size_t k = 0; k < m; ++k) {
            const long double sc = inst.clutter.spatial_density(inst.Z[k]);
            prod *= (mask >> k & 1u) ? mass * g[k] : (c.spatial_clutter ? sc : clutter_mean * sc);
        }
        by_j[oracle::detail::popcount(mask)].add(prod);
    }
    oracle::KahanSum total;
    for (std::size_t n = 0; n < rho.size(); ++n) {
        oracle::KahanSum ups;
        for (std::size_t j = 0; j <= std::min(m, n); ++j) {
            long double t = 1.0L;
            for (std::size_t i = 0; i < j; ++i) t *= static_cast<long double>(n - i);
            for (std::size_t i = 2; i <= m - j; ++i) t *= static_cast<long double>(i);
            t *= (m - j < rc.size()) ? rc[m - j] : 0.0L;
            t *= std::pow((1.0L - pd) * mass, static_cast<long double>(n - j));
            if (c.divide_by_mass) t /= std::pow(mass, static_cast<long double>(n));
            ups.add(t * by_j[j].value());
        }
        total.add(rho[n] * ups.value());
    }
    return total.value();
}

// ---- Report --------------------------------------------------------------

struct CandidateScore {
    std::string description;
    double max_rel_error = 0.0;
    bool adopted = false;
};

struct CalibrationReport {
    std::size_t instances = 0;
    std::vector<CandidateScore> panjer;
    std::vector<CandidateScore> cphd;
    double library_panjer_error = 0.0;
    double library_cphd_error = 0.0;

    [[nodiscard]] std::string to_text() const {
        std::ostringstream os;
        os.precision(3);
        os << "calibration over " << instances << " instances (adoption threshold 1e-8 relative)\n";
        os << "panjer likelihood candidates:\n";
        for (const auto& c : panjer)
            os << (c.adopted ? "  * " : "    ") << std::scientific << c.max_rel_error << "  " << c.description << "\n";
        os << "cardinalized likelihood candidates (u = d = 0):\n";
        for (const auto& c : cphd)
            os << (c.adopted ? "  * " : "    ") << std::scientific << c.max_rel_error << "  " << c.description << "\n";
        os << "library panjer likelihood max rel error: " << library_panjer_error << "\n";
        os << "library cardinalized likelihood max rel error: " << library_cphd_error << "\n";
        return os.str();
    }
};

[[nodiscard]] inline double rel_error(long double value, long double reference) {
    if (reference == 0.0L) return value == 0.0L ? 0.0 : std::numeric_limits<double>::infinity();
    const long double e = std::fabs(value - reference) / std::fabs(reference);
    return std::isfinite(static_cast<double>(e)) ? static_cast<double>(e) : std::numeric_limits<double>::infinity();
}

/// Scores every candidate reading on `count` random instances (negative
/// binomial prior and clutter for the Panjer form, discrete prior and
/// clutter for the cardinalized form) against the enumeration oracle.
[[nodiscard]] inline CalibrationReport calibrate(std::uint64_t seed = 2024, std::size_t count = 50) {
    CalibrationReport rep;
    rep.instances = count;
    const auto pc = panjer_candidates();
    const auto cc = cphd_candidates();
    std::vector<double> pe(pc.size(), 0.0), ce(cc.size(), 0.0);
    StreamSeeder seeder(seed);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng = seeder.stream({i, 0});
        const Inst a = random_instance(rng, PriorKind::NegativeBinomial, ClutterKind::NegativeBinomial);
        const long double ref_a = oracle::likelihood(a);
        for (std::size_t k = 0; k < pc.size(); ++k)
            pe[k] = std::max(pe[k], rel_error(literal_panjer_likelihood(a, pc[k]), ref_a));
        const auto models = models_for(a);
        const double lib_a = sophd_log_likelihood(sophd_state(a), a.Z, models.obs, models.clutter, a.s);
        rep.library_panjer_error = std::max(rep.library_panjer_error, rel_error(std::exp((long double)lib_a), ref_a));

        Rng rng2 = seeder.stream({i, 1});
        const Inst b = random_instance(rng2, PriorKind::Discrete, ClutterKind::Discrete);
        const long double ref_b = oracle::likelihood(b);
        for (std::size_t k = 0; k < cc.size(); ++k)
            ce[k] = std::max(ce[k], rel_error(literal_cphd_likelihood(b, cc[k]), ref_b));
        const double lib_b = cphd_log_likelihood(cphd_state(b), b.Z, b.obs, b.clutter, b.s);
        rep.library_cphd_error = std::max(rep.library_cphd_error, rel_error(std::exp((long double)lib_b), ref_b));
    }
    for (std::size_t k = 0; k < pc.size(); ++k) rep.panjer.push_back({pc[k].describe(), pe[k], pe[k] < 1e-8});
    for (std::size_t k = 0; k < cc.size(); ++k) rep.cphd.push_back({cc[k].describe(), ce[k], ce[k] < 1e-8});
    return rep;
}

} // namespace scmo::calibration
