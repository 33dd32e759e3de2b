#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "scmo/cphd.hpp"
#include "scmo/errors.hpp"
#include "scmo/models.hpp"
#include "scmo/phd.hpp"
#include "scmo/sophd.hpp"

namespace scmo {

enum class FilterKind { Phd, SoPhd, Cphd };

[[nodiscard]] inline std::string_view to_string(FilterKind k) {
    switch (k) {
    case FilterKind::Phd: return "phd";
    case FilterKind::SoPhd: return "sophd";
    case FilterKind::Cphd: return "cphd";
    }
    return "?";
}

[[nodiscard]] inline FilterKind parse_filter_kind(std::string_view s) {
    if (s == "phd") return FilterKind::Phd;
    if (s == "sophd") return FilterKind::SoPhd;
    if (s == "cphd") return FilterKind::Cphd;
    throw ConfigError("unknown filter kind '" + std::string(s) + "'");
}

template <int Nx>
using DaughterState = std::variant<PhdState<Nx>, SoPhdState<Nx>, CphdState<Nx>>;

[[nodiscard]] inline FilterKind kind_of(const auto& state) { return static_cast<FilterKind>(state.index()); }

/// Empty prior: no targets, zero variance, all cardinality mass at zero.
template <int Nx, int Nz>
[[nodiscard]] DaughterState<Nx> initial_daughter(FilterKind kind, const FilterModels<Nx, Nz>& models) {
    switch (kind) {
    case FilterKind::Phd: return PhdState<Nx>{};
    case FilterKind::SoPhd: return SoPhdState<Nx>{};
    case FilterKind::Cphd: return CphdState<Nx>{{}, CardinalityDist::delta(0, models.n_max)};
    }
    throw ConfigError("unknown filter kind");
}

template <int Nx>
[[nodiscard]] const GaussianMixture<Nx>& intensity_of(const DaughterState<Nx>& state) {
    return std::visit([](const auto& s) -> const GaussianMixture<Nx>& { return s.intensity; }, state);
}

/// Expected number of targets: intensity mass, or the cardinality mean for
/// the cardinalized filter.
template <int Nx>
[[nodiscard]] double expected_cardinality(const DaughterState<Nx>& state) {
    if (const auto* c = std::get_if<CphdState<Nx>>(&state)) return c->card.mean();
    return intensity_of(state).mass();
}

template <int Nx, int Nz>
[[nodiscard]] DaughterState<Nx> daughter_predict(const DaughterState<Nx>& state, const FilterModels<Nx, Nz>& m) {
    return std::visit(
        [&](const auto& s) -> DaughterState<Nx> {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, PhdState<Nx>>) return phd_predict(s, m.motion, m.birth);
            else if constexpr (std::is_same_v<S, SoPhdState<Nx>>) return sophd_predict(s, m.motion, m.birth);
            else return cphd_predict(s, m.motion, m.birth);
        },
        state);
}

/// Filter update followed by mixture reduction.
template <int Nx, int Nz>
[[nodiscard]] DaughterState<Nx> daughter_update(const DaughterState<Nx>& state, const MeasurementSet<Nz>& Z,
                                                const FilterModels<Nx, Nz>& m, const SensorState& s) {
    return std::visit(
        [&](const auto& st) -> DaughterState<Nx> {
            using S = std::decay_t<decltype(st)>;
            S out;
            if constexpr (std::is_same_v<S, PhdState<Nx>>) out = phd_update(st, Z, m.obs, m.clutter, s, m.gate);
            else if constexpr (std::is_same_v<S, SoPhdState<Nx>>) out = sophd_update(st, Z, m.obs, m.clutter, s, m.gate);
            else out = cphd_update(st, Z, m.obs, m.clutter, s, m.gate);
            out.intensity = reduce_mixture(out.intensity, m.reduction);
            return out;
        },
        state);
}

/// Closed-form multi-object log-likelihood of the filter matching the state.
template <int Nx, int Nz>
[[nodiscard]] double daughter_log_likelihood(const DaughterState<Nx>& state, const MeasurementSet<Nz>& Z,
                                             const FilterModels<Nx, Nz>& m, const SensorState& s) {
    return std::visit(
        [&](const auto& st) -> double {
            using S = std::decay_t<decltype(st)>;
            if constexpr (std::is_same_v<S, PhdState<Nx>>) return phd_log_likelihood(st, Z, m.obs, m.clutter, s, m.gate);
            else if constexpr (std::is_same_v<S, SoPhdState<Nx>>)
                return sophd_log_likelihood(st, Z, m.obs, m.clutter, s, m.gate);
            else return cphd_log_likelihood(st, Z, m.obs, m.clutter, s, m.gate);
        },
        state);
}

} // namespace scmo
