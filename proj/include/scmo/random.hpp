#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

#include "scmo/errors.hpp"

namespace scmo {

using Rng = std::mt19937_64;

namespace detail {

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// Derives independent generator streams from a master seed and a tuple of
/// counters (run, step, particle, ...). The same counters always yield the
/// same stream, so results do not depend on evaluation order.
class StreamSeeder {
public:
    explicit StreamSeeder(std::uint64_t master = 0) : master_(master) {}

    [[nodiscard]] std::uint64_t derive(std::initializer_list<std::uint64_t> counters) const {
        std::uint64_t h = detail::splitmix64(master_);
        for (std::uint64_t c : counters) h = detail::splitmix64(h ^ detail::splitmix64(c + 0x632BE59BD9B4E019ULL));
        return h;
    }

    [[nodiscard]] Rng stream(std::initializer_list<std::uint64_t> counters) const {
        return Rng(derive(counters));
    }

    [[nodiscard]] StreamSeeder child(std::initializer_list<std::uint64_t> counters) const {
        return StreamSeeder(derive(counters));
    }

    [[nodiscard]] std::uint64_t master() const { return master_; }

private:
    std::uint64_t master_;
};

[[nodiscard]] inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Square-root factor L with L * L^T = cov for a PSD matrix (zero blocks allowed).
template <typename Derived>
[[nodiscard]] Eigen::Matrix<double, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>
psd_sqrt(const Eigen::MatrixBase<Derived>& cov) {
    using M = Eigen::Matrix<double, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>;
    M c = cov;
    Eigen::LLT<M> llt(c);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<M> es(c);
    auto ev = es.eigenvalues();
    const double tol = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < -tol) throw NumericalDomainError("psd_sqrt: matrix is not positive semi-definite");
        ev(i) = ev(i) > 0 ? std::sqrt(ev(i)) : 0.0;
    }
    return es.eigenvectors() * ev.asDiagonal();
}

/// Standard normal vector of the given size.
[[nodiscard]] inline Eigen::VectorXd standard_normal(Rng& rng, Eigen::Index n) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = nd(rng);
    return v;
}

} // namespace scmo
