#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <math.h>

namespace scmo {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow.
[[nodiscard]] inline double log_add_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

[[nodiscard]] inline double log_sum_exp(std::span<const double> xs) {
    double mx = kNegInf;
    for (double x : xs) mx = std::max(mx, x);
    if (mx == kNegInf || !std::isfinite(mx)) return mx;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - mx);
    return mx + std::log(acc);
}

/// Real number stored as sign and log-magnitude. Used where sums of
/// products with alternating signs would overflow in linear form.
struct SignedLog {
    double log_abs = kNegInf;
    int sign = 0;

    [[nodiscard]] static SignedLog from(double x) {
        if (x == 0.0) return {};
        return {std::log(std::abs(x)), x > 0 ? 1 : -1};
    }
    [[nodiscard]] bool is_zero() const { return sign == 0 || log_abs == kNegInf; }
    [[nodiscard]] double value() const { return is_zero() ? 0.0 : sign * std::exp(log_abs); }

    friend SignedLog operator*(SignedLog a, SignedLog b) {
        if (a.is_zero() || b.is_zero()) return {};
        return {a.log_abs + b.log_abs, a.sign * b.sign};
    }
    friend SignedLog operator/(SignedLog a, SignedLog b) {
        if (a.is_zero()) return {};
        return {a.log_abs - b.log_abs, a.sign * b.sign};
    }
};

/// Sum of signed log-domain terms with a single max shift.
[[nodiscard]] inline SignedLog signed_log_sum(std::span<const SignedLog> terms) {
    double mx = kNegInf;
    for (const auto& t : terms)
        if (!t.is_zero()) mx = std::max(mx, t.log_abs);
    if (mx == kNegInf) return {};
    double acc = 0.0;
    for (const auto& t : terms)
        if (!t.is_zero()) acc += t.sign * std::exp(t.log_abs - mx);
    if (acc == 0.0) return {};
    return {mx + std::log(std::abs(acc)), acc > 0 ? 1 : -1};
}

namespace detail {

// Reentrant log-gamma for positive arguments.
[[nodiscard]] inline double lgamma_pos(double x) {
#if defined(__GLIBC__)
    int s = 0;
    return ::lgamma_r(x, &s);
#else
    return std::lgamma(x);
#endif
}

} // namespace detail

[[nodiscard]] inline double log_factorial(std::size_t n) {
    if (n < 2) return 0.0;
    return detail::lgamma_pos(static_cast<double>(n) + 1.0);
}

/// log(n! / (n-k)!), the falling factorial. Requires k <= n.
[[nodiscard]] inline double log_falling_factorial(std::size_t n, std::size_t k) {
    return log_factorial(n) - log_factorial(n - k);
}

/// k * log_base with the convention 0 * (-inf) = 0, i.e. 0^0 = 1.
[[nodiscard]] inline double log_pow(double log_base, double k) {
    return k == 0.0 ? 0.0 : k * log_base;
}

} // namespace scmo
