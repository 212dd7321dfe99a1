#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cursed/errors.hpp"
#include "cursed/numerics.hpp"
#include "cursed/random_stream.hpp"
#include "cursed/scalar_map.hpp"

namespace cursed {

/// Boundary overshoot absorbed by cdf/quantile instead of raising.
inline constexpr double kBoundarySlack = 1e-12;

struct UniformIID {
    friend bool operator==(const UniformIID&, const UniformIID&) = default;
};

/// Uniform mass on a sorted list of points inside [0, s_bar].
struct DiscreteGridIID {
    std::vector<double> points;
    friend bool operator==(const DiscreteGridIID&, const DiscreteGridIID&) = default;
};

/// Marginal given by a strictly increasing quantile map [0,1] -> [0, s_bar].
/// U[a,b] is GenericIID{ScalarMap::affine(b - a, a)}.
struct GenericIID {
    ScalarMap quantile;
    friend bool operator==(const GenericIID&, const GenericIID&) = default;
};

using Marginal = std::variant<UniformIID, DiscreteGridIID, GenericIID>;

/// i.i.d. signal environment for n bidders on [0, s_bar].
struct SignalSpace {
    std::size_t n = 2;
    double s_bar = 1.0;
    Marginal marginal = UniformIID{};

    [[nodiscard]] bool is_atomic() const { return std::holds_alternative<DiscreteGridIID>(marginal); }
    friend bool operator==(const SignalSpace&, const SignalSpace&) = default;
};

inline void validate(const SignalSpace& space) {
    if (space.n < 2) throw std::invalid_argument("need at least two bidders");
    if (!(space.s_bar > 0.0) || !std::isfinite(space.s_bar))
        throw std::invalid_argument("s_bar must be positive and finite");
    if (const auto* grid = std::get_if<DiscreteGridIID>(&space.marginal)) {
        if (grid->points.empty()) throw std::invalid_argument("grid marginal needs at least one point");
        if (!std::is_sorted(grid->points.begin(), grid->points.end()))
            throw std::invalid_argument("grid points must be sorted");
        if (grid->points.front() < 0.0 || grid->points.back() > space.s_bar)
            throw std::invalid_argument("grid points must lie in [0, s_bar]");
    }
    if (const auto* generic = std::get_if<GenericIID>(&space.marginal)) {
        const double lo = generic->quantile(0.0);
        const double hi = generic->quantile(1.0);
        if (lo < -kBoundarySlack || hi > space.s_bar * (1.0 + kBoundarySlack) || !(hi > lo))
            throw std::invalid_argument("quantile map must be increasing from [0,1] into [0, s_bar]");
    }
}

inline SignalSpace uniform_space(std::size_t n, double s_bar = 1.0) {
    SignalSpace space{n, s_bar, UniformIID{}};
    validate(space);
    return space;
}

/// m equally spaced points 0, s_bar/(m-1), ..., s_bar (m = 1 gives {0}).
inline std::vector<double> equally_spaced_grid(std::size_t m, double s_bar) {
    std::vector<double> pts(m, 0.0);
    for (std::size_t k = 1; k < m; ++k)
        pts[k] = s_bar * static_cast<double>(k) / static_cast<double>(m - 1);
    return pts;
}

inline SignalSpace grid_space(std::size_t n, std::vector<double> points, double s_bar) {
    SignalSpace space{n, s_bar, DiscreteGridIID{std::move(points)}};
    validate(space);
    return space;
}

/// U[lo, hi] embedded in [0, hi].
inline SignalSpace shifted_uniform_space(std::size_t n, double lo, double hi) {
    SignalSpace space{n, hi, GenericIID{ScalarMap::affine(hi - lo, lo)}};
    validate(space);
    return space;
}

/// P[s <= t].
inline double cdf(const SignalSpace& space, double t) {
    if (t < 0.0) return 0.0;
    if (t >= space.s_bar) return 1.0;
    return std::visit(
        [&](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, UniformIID>) {
                return t / space.s_bar;
            } else if constexpr (std::is_same_v<M, DiscreteGridIID>) {
                const auto it = std::upper_bound(m.points.begin(), m.points.end(), t);
                return static_cast<double>(it - m.points.begin()) / static_cast<double>(m.points.size());
            } else {
                if (t < m.quantile(0.0)) return 0.0;
                if (t >= m.quantile(1.0)) return 1.0;
                return std::clamp(m.quantile.inverse(t), 0.0, 1.0);
            }
        },
        space.marginal);
}

/// Smallest t with cdf(t) >= p; quantile(0) = 0.
inline double quantile(const SignalSpace& space, double p) {
    if (p < -kBoundarySlack || p > 1.0 + kBoundarySlack || std::isnan(p))
        throw std::domain_error("quantile probability outside [0, 1]");
    p = std::clamp(p, 0.0, 1.0);
    if (p == 0.0) return 0.0;
    return std::visit(
        [&](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, UniformIID>) {
                return p * space.s_bar;
            } else if constexpr (std::is_same_v<M, DiscreteGridIID>) {
                const double size = static_cast<double>(m.points.size());
                auto index = static_cast<std::size_t>(std::ceil(p * size - kBoundarySlack));
                index = std::clamp<std::size_t>(index, 1, m.points.size());
                return m.points[index - 1];
            } else {
                return std::clamp(m.quantile(p), 0.0, space.s_bar);
            }
        },
        space.marginal);
}

/// Density of the marginal; grids have none.
inline double density(const SignalSpace& space, double t) {
    return std::visit(
        [&](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, UniformIID>) {
                return (t >= 0.0 && t <= space.s_bar) ? 1.0 / space.s_bar : 0.0;
            } else if constexpr (std::is_same_v<M, DiscreteGridIID>) {
                throw UnsupportedOperation("grid marginals have no density");
            } else {
                if (t < m.quantile(0.0) || t > m.quantile(1.0)) return 0.0;
                const double p = std::clamp(m.quantile.inverse(t), 0.0, 1.0);
                return 1.0 / m.quantile.derivative(p);
            }
        },
        space.marginal);
}

/// E[g(s)] under the marginal.
template <typename G>
double expect(const SignalSpace& space, G&& g) {
    return std::visit(
        [&](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, UniformIID>) {
                return numerics::integrate(g, 0.0, space.s_bar) / space.s_bar;
            } else if constexpr (std::is_same_v<M, DiscreteGridIID>) {
                numerics::CompensatedSum<long double> sum;
                for (double x : m.points) sum.add(static_cast<long double>(g(x)));
                return static_cast<double>(sum.value() / static_cast<long double>(m.points.size()));
            } else {
                return numerics::integrate([&](double p) { return g(m.quantile(p)); }, 0.0, 1.0);
            }
        },
        space.marginal);
}

inline double mean_signal(const SignalSpace& space) {
    if (std::holds_alternative<UniformIID>(space.marginal)) return 0.5 * space.s_bar;
    if (const auto* generic = std::get_if<GenericIID>(&space.marginal); generic && generic->quantile.is_affine())
        return 0.5 * (generic->quantile(0.0) + generic->quantile(1.0));
    return expect(space, [](double x) { return x; });
}

/// One draw from the marginal using a uniform variate u in [0,1).
inline double draw_signal(const SignalSpace& space, double u) {
    return std::visit(
        [&](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, UniformIID>) {
                return u * space.s_bar;
            } else if constexpr (std::is_same_v<M, DiscreteGridIID>) {
                auto k = static_cast<std::size_t>(u * static_cast<double>(m.points.size()));
                return m.points[std::min(k, m.points.size() - 1)];
            } else {
                return std::clamp(m.quantile(u), 0.0, space.s_bar);
            }
        },
        space.marginal);
}

/// Signal profile s = (s_1, ..., s_n).
struct SignalProfile {
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const { return values.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return values[i]; }
    [[nodiscard]] std::span<const double> view() const { return values; }

    /// s_{-i}, order preserved.
    [[nodiscard]] std::vector<double> without(std::size_t i) const {
        std::vector<double> out;
        out.reserve(values.size() - 1);
        for (std::size_t j = 0; j < values.size(); ++j)
            if (j != i) out.push_back(values[j]);
        return out;
    }

    friend bool operator==(const SignalProfile&, const SignalProfile&) = default;
};

inline void validate(const SignalProfile& profile, const SignalSpace& space) {
    if (profile.size() != space.n) throw std::invalid_argument("profile length differs from bidder count");
    for (double s : profile.values)
        if (!(s >= 0.0 && s <= space.s_bar)) throw std::invalid_argument("signal outside [0, s_bar]");
}

inline SignalProfile sample_profile(const SignalSpace& space, RandomStream stream) {
    SignalProfile profile;
    profile.values.resize(space.n);
    for (auto& s : profile.values) s = draw_signal(space, stream.uniform());
    return profile;
}

inline SignalProfile sample_profile(const SignalSpace& space, std::uint64_t seed, std::uint64_t stream_index) {
    return sample_profile(space, RandomStream(seed, stream_index));
}

}  // namespace cursed
