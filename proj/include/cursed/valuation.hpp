#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cursed/check_report.hpp"
#include "cursed/errors.hpp"
#include "cursed/numerics.hpp"
#include "cursed/random_stream.hpp"
#include "cursed/scalar_map.hpp"
#include "cursed/signal_model.hpp"

namespace cursed {

/// v_i(s) = s_i + beta * sum_{j != i} s_j
struct WeightedSum {
    double beta = 1.0;
    friend bool operator==(const WeightedSum&, const WeightedSum&) = default;
};

/// v_i(s) = max_j s_j
struct MaxSignal {
    friend bool operator==(const MaxSignal&, const MaxSignal&) = default;
};

/// v_i(s) = l(g(s_i) + sum_{j != i} h(s_j))
struct ConcaveSum {
    ScalarMap l;
    ScalarMap g;
    ScalarMap h;
    friend bool operator==(const ConcaveSum&, const ConcaveSum&) = default;
};

using ValuationFamily = std::variant<WeightedSum, MaxSignal, ConcaveSum>;

/// Symmetric interdependent valuation. Aggregate construction skips parameter
/// checks (tests use it to build out-of-family negative controls); the named
/// factories validate.
struct ValuationModel {
    ValuationFamily family = WeightedSum{};

    friend bool operator==(const ValuationModel&, const ValuationModel&) = default;

    static ValuationModel weighted_sum(double beta) {
        if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("weighted-sum beta must lie in (0, 1]");
        return {WeightedSum{beta}};
    }
    static ValuationModel max_signal() { return {MaxSignal{}}; }
    static ValuationModel concave_sum(ScalarMap l, ScalarMap g, ScalarMap h) {
        if (!l.is_concave()) throw std::invalid_argument("concave-sum outer map must be concave");
        return {ConcaveSum{l, g, h}};
    }

    [[nodiscard]] std::string name() const {
        return std::visit(
            [](const auto& f) -> std::string {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, WeightedSum>) return "weighted_sum";
                else if constexpr (std::is_same_v<F, MaxSignal>) return "max_signal";
                else return "concave_sum";
            },
            family);
    }

    /// Per-other-bidder summand h for additive families (weighted sums use h(s) = beta*s).
    [[nodiscard]] bool has_additive_others() const { return !std::holds_alternative<MaxSignal>(family); }

    [[nodiscard]] double others_term(double s) const {
        if (const auto* ws = std::get_if<WeightedSum>(&family)) return ws->beta * s;
        if (const auto* cs = std::get_if<ConcaveSum>(&family)) return cs->h(s);
        throw UnsupportedOperation("max-signal valuations have no additive others term");
    }
};

/// Everything a symmetric valuation needs to know about s_{-i}.
struct OthersStats {
    std::size_t count = 0;
    double max = 0.0;     // s*_{-i}; 0 when there are no others
    double sum = 0.0;     // sum of signals
    double h_sum = 0.0;   // sum of h(s_j) for concave-sum models
};

inline OthersStats summarize(const ValuationModel& model, std::span<const double> others) {
    OthersStats st;
    st.count = others.size();
    numerics::CompensatedSum<double> sum;
    numerics::CompensatedSum<double> h_sum;
    const auto* cs = std::get_if<ConcaveSum>(&model.family);
    for (double s : others) {
        st.max = std::max(st.max, s);
        sum.add(s);
        if (cs) h_sum.add(cs->h(s));
    }
    st.sum = sum.value();
    st.h_sum = h_sum.value();
    return st;
}

/// v(own, s_{-i}) from a summary of the others.
inline double value(const ValuationModel& model, double own, const OthersStats& others) {
    return std::visit(
        [&](const auto& f) -> double {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, WeightedSum>) return own + f.beta * others.sum;
            else if constexpr (std::is_same_v<F, MaxSignal>) return std::max(own, others.max);
            else return f.l(f.g(own) + others.h_sum);
        },
        model.family);
}

/// v_i(s) evaluated directly from the full profile.
inline double value(const ValuationModel& model, std::span<const double> profile, std::size_t i) {
    if (i >= profile.size()) throw std::out_of_range("agent index out of range");
    return std::visit(
        [&](const auto& f) -> double {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, WeightedSum>) {
                double rest = 0.0;
                for (std::size_t j = 0; j < profile.size(); ++j)
                    if (j != i) rest += profile[j];
                return profile[i] + f.beta * rest;
            } else if constexpr (std::is_same_v<F, MaxSignal>) {
                return *std::max_element(profile.begin(), profile.end());
            } else {
                double rest = 0.0;
                for (std::size_t j = 0; j < profile.size(); ++j)
                    if (j != i) rest += f.h(profile[j]);
                return f.l(f.g(profile[i]) + rest);
            }
        },
        model.family);
}

inline double value(const ValuationModel& model, const SignalProfile& profile, std::size_t i) {
    return value(model, profile.view(), i);
}

/// Profile-wide sums so that each agent's OthersStats costs O(1).
class ProfileAggregate {
public:
    ProfileAggregate(const ValuationModel& model, std::span<const double> profile) : profile_(profile) {
        numerics::CompensatedSum<double> sum;
        numerics::CompensatedSum<double> h_sum;
        const auto* cs = std::get_if<ConcaveSum>(&model.family);
        for (std::size_t j = 0; j < profile.size(); ++j) {
            const double s = profile[j];
            sum.add(s);
            if (cs) {
                h_.push_back(cs->h(s));
                h_sum.add(h_.back());
            }
            if (top1_ == npos || s > profile[top1_]) {
                top2_ = top1_;
                top1_ = j;
            } else if (top2_ == npos || s > profile[top2_]) {
                top2_ = j;
            }
        }
        sum_ = sum.value();
        h_sum_ = h_sum.value();
    }

    [[nodiscard]] OthersStats others(std::size_t i) const {
        OthersStats st;
        st.count = profile_.size() - 1;
        const std::size_t top = (i == top1_) ? top2_ : top1_;
        st.max = top == npos ? 0.0 : profile_[top];
        st.sum = sum_ - profile_[i];
        st.h_sum = h_.empty() ? 0.0 : h_sum_ - h_[i];
        if (st.count == 0) st.sum = st.h_sum = 0.0;
        return st;
    }

    /// Index of the unique highest signal, if there is one.
    [[nodiscard]] std::optional<std::size_t> unique_max() const {
        if (top1_ == npos) return std::nullopt;
        if (top2_ != npos && profile_[top2_] == profile_[top1_]) return std::nullopt;
        return top1_;
    }

    [[nodiscard]] std::size_t argmax() const { return top1_; }

private:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    std::span<const double> profile_;
    std::vector<double> h_;
    double sum_ = 0.0;
    double h_sum_ = 0.0;
    std::size_t top1_ = npos;
    std::size_t top2_ = npos;
};

/// Resolution of the interim-expectation table.
struct QuadSpec {
    std::size_t grid_points = 512;
    std::size_t inner_samples = 100000;
    std::uint64_t seed = 0x5EEDCAFEull;
};

/// mu(s) = E[v(s, S_{-i})] with S_{-i} i.i.d. from the marginal.
///
/// Weighted sums, affine concave sums and max-of-signals on uniform or grid
/// marginals use closed forms. Other cases read a table on `grid_points`
/// equally spaced points with linear interpolation: quadrature for max-signal,
/// fixed-seed inner Monte Carlo over sum h(s_j) for concave sums.
class InterimCache {
public:
    InterimCache(SignalSpace space, ValuationModel model, QuadSpec spec = {})
        : space_(std::move(space)), model_(std::move(model)), spec_(spec) {
        validate(space_);
        if (spec_.grid_points < 2) throw std::invalid_argument("interim grid needs two points");
        mean_signal_ = cursed::mean_signal(space_);
        if (model_.has_additive_others())
            mean_others_term_ = expect(space_, [this](double s) { return model_.others_term(s); });
        value_scale_ = value(model_, std::vector<double>(space_.n, space_.s_bar), 0);
        build_grid();
    }

    /// v(s_bar, ..., s_bar)
    [[nodiscard]] double value_scale() const { return value_scale_; }

    [[nodiscard]] const SignalSpace& space() const { return space_; }
    [[nodiscard]] const ValuationModel& model() const { return model_; }
    [[nodiscard]] const QuadSpec& spec() const { return spec_; }

    /// lambda = E[h(s)] for additive families.
    [[nodiscard]] double mean_others_term() const { return mean_others_term_; }
    [[nodiscard]] double mean_signal() const { return mean_signal_; }
    [[nodiscard]] bool closed_form() const { return closed_form_; }

    [[nodiscard]] double mu(double s) const {
        s = std::clamp(s, 0.0, space_.s_bar);
        if (closed_form_) return mu_exact(s);
        const double pos = s / space_.s_bar * static_cast<double>(grid_s_.size() - 1);
        const auto k = std::min(static_cast<std::size_t>(pos), grid_s_.size() - 2);
        const double w = pos - static_cast<double>(k);
        return (1.0 - w) * grid_mu_[k] + w * grid_mu_[k + 1];
    }

    [[nodiscard]] const std::vector<double>& grid_signals() const { return grid_s_; }
    [[nodiscard]] const std::vector<double>& grid_mu() const { return grid_mu_; }

private:
    [[nodiscard]] double mu_exact(double s) const {
        const auto others = static_cast<double>(space_.n - 1);
        if (const auto* ws = std::get_if<WeightedSum>(&model_.family)) return s + ws->beta * others * mean_signal_;
        if (const auto* cs = std::get_if<ConcaveSum>(&model_.family))
            return cs->l(cs->g(s) + others * mean_others_term_);
        // max-signal: E[max(s, M)], M the max of n-1 draws
        const double s_bar = space_.s_bar;
        if (std::holds_alternative<UniformIID>(space_.marginal)) {
            const double n = static_cast<double>(space_.n);
            return s_bar - (std::pow(s_bar, n) - std::pow(s, n)) / (n * std::pow(s_bar, n - 1.0));
        }
        if (const auto* grid = std::get_if<DiscreteGridIID>(&space_.marginal)) {
            const double m = static_cast<double>(grid->points.size());
            numerics::CompensatedSum<long double> total;
            for (std::size_t k = 0; k < grid->points.size(); ++k) {
                const double mass = std::pow((static_cast<double>(k) + 1.0) / m, others) -
                                    std::pow(static_cast<double>(k) / m, others);
                total.add(static_cast<long double>(std::max(s, grid->points[k]) * mass));
            }
            return static_cast<double>(total.value());
        }
        return s + numerics::integrate(
                       [&](double x) { return 1.0 - std::pow(cdf(space_, x), others); }, s, s_bar);
    }

    void build_grid() {
        const auto* cs = std::get_if<ConcaveSum>(&model_.family);
        const bool generic_max = std::holds_alternative<MaxSignal>(model_.family) &&
                                 std::holds_alternative<GenericIID>(space_.marginal);
        closed_form_ = !(generic_max || (cs && !cs->l.is_affine()));

        grid_s_.resize(spec_.grid_points);
        grid_mu_.resize(spec_.grid_points);
        for (std::size_t k = 0; k < grid_s_.size(); ++k)
            grid_s_[k] = space_.s_bar * static_cast<double>(k) / static_cast<double>(grid_s_.size() - 1);

        if (closed_form_ || generic_max) {
            for (std::size_t k = 0; k < grid_s_.size(); ++k) grid_mu_[k] = mu_exact(grid_s_[k]);
            return;
        }
        // concave sum with non-linear outer map: common inner draws across the grid
        std::vector<double> inner(spec_.inner_samples);
        for (std::size_t k = 0; k < inner.size(); ++k) {
            RandomStream stream(spec_.seed, k);
            double h_sum = 0.0;
            for (std::size_t j = 0; j + 1 < space_.n; ++j) h_sum += cs->h(draw_signal(space_, stream.uniform()));
            inner[k] = h_sum;
        }
        for (std::size_t k = 0; k < grid_s_.size(); ++k) {
            const double own = cs->g(grid_s_[k]);
            numerics::CompensatedSum<double> total;
            for (double h_sum : inner) total.add(cs->l(own + h_sum));
            grid_mu_[k] = total.value() / static_cast<double>(inner.size());
        }
    }

    SignalSpace space_;
    ValuationModel model_;
    QuadSpec spec_;
    double mean_signal_ = 0.0;
    double value_scale_ = 0.0;
    double mean_others_term_ = 0.0;
    bool closed_form_ = true;
    std::vector<double> grid_s_;
    std::vector<double> grid_mu_;
};

/// Environment shared by mechanisms, checkers and estimators.
struct AuctionContext {
    std::shared_ptr<const InterimCache> cache;

    [[nodiscard]] const SignalSpace& space() const { return cache->space(); }
    [[nodiscard]] const ValuationModel& model() const { return cache->model(); }
    [[nodiscard]] std::size_t n() const { return cache->space().n; }
    [[nodiscard]] double s_bar() const { return cache->space().s_bar; }

    /// v(s_bar, ..., s_bar), the scale for value-relative tolerances.
    [[nodiscard]] double value_scale() const { return cache->value_scale(); }

    /// Absolute tolerance for sign decisions on v - mu (absorbs rounding only).
    [[nodiscard]] double noise() const { return 1e-12 * std::max(value_scale(), 1.0); }

    [[nodiscard]] OthersStats summarize(std::span<const double> others) const {
        return cursed::summarize(model(), others);
    }
};

inline AuctionContext make_context(SignalSpace space, ValuationModel model, QuadSpec spec = {}) {
    return AuctionContext{std::make_shared<const InterimCache>(std::move(space), std::move(model), spec)};
}

inline double interim_mu(const InterimCache& cache, double s_i) { return cache.mu(s_i); }

inline void check_chi(double chi) {
    if (!(chi >= 0.0 && chi <= 1.0)) throw std::domain_error("cursedness chi must lie in [0, 1]");
}

/// v^chi = (1 - chi) v + chi mu(own), written as v + chi (mu - v) so that the
/// rounded result is monotone in chi and never crosses v.
inline double cursed_mix(double v, double mu, double chi) { return v + chi * (mu - v); }

inline double cursed_value(const AuctionContext& ctx, double chi, double own, const OthersStats& others) {
    check_chi(chi);
    const double v = value(ctx.model(), own, others);
    if (chi == 0.0) return v;
    return cursed_mix(v, ctx.cache->mu(own), chi);
}

inline double cursed_value(const AuctionContext& ctx, double chi, const SignalProfile& profile, std::size_t i) {
    check_chi(chi);
    const double v = value(ctx.model(), profile, i);
    if (chi == 0.0) return v;
    return cursed_mix(v, ctx.cache->mu(profile[i]), chi);
}

/// d/ds_i of v^chi at (s_i, s_{-i}).
inline double cursed_value_slope(const AuctionContext& ctx, double chi, double s_i, const OthersStats& others) {
    if (std::holds_alternative<WeightedSum>(ctx.model().family)) return 1.0;
    const double s_bar = ctx.s_bar();
    const double step = 1e-5 * s_bar;
    const double lo = std::max(0.0, s_i - step);
    const double hi = std::min(s_bar, s_i + step);
    return (cursed_value(ctx, chi, hi, others) - cursed_value(ctx, chi, lo, others)) / (hi - lo);
}

/// phi^chi(s_i | s_{-i}) = v^chi - (d v^chi / d s_i) (1 - F(s_i)) / f(s_i)
inline double cursed_virtual_value(const AuctionContext& ctx, double chi, double s_i, std::span<const double> others) {
    check_chi(chi);
    const double f = density(ctx.space(), s_i);  // throws for grids
    if (!(f > 0.0)) throw std::domain_error("virtual value needs positive density at s_i");
    const OthersStats st = ctx.summarize(others);
    const double hazard = (1.0 - cdf(ctx.space(), s_i)) / f;
    return cursed_value(ctx, chi, s_i, st) - cursed_value_slope(ctx, chi, s_i, st) * hazard;
}

/// s_i >= s_j implies v_i(s) >= v_j(s) on sampled profiles and all index pairs.
inline CheckReport check_single_crossing(const ValuationModel& model, const SignalSpace& space,
                                         std::size_t sample_count, RandomStream stream) {
    CheckReport report;
    report.property = "single_crossing";
    const double scale = value(model, std::vector<double>(space.n, space.s_bar), 0);
    report.tolerance = 1e-9 * std::max(std::abs(scale), 1.0);
    std::vector<double> values(space.n);
    for (std::size_t k = 0; k < sample_count; ++k) {
        const SignalProfile profile = sample_profile(space, stream.substream(k));
        for (std::size_t i = 0; i < space.n; ++i) values[i] = value(model, profile, i);
        for (std::size_t i = 0; i < space.n; ++i)
            for (std::size_t j = 0; j < space.n; ++j)
                if (i != j && profile[i] >= profile[j])
                    report.record(values[j] - values[i], Witness{profile.values, i, std::nullopt, 0.0});
        ++report.samples_checked;
    }
    report.finalize();
    return report;
}

/// Whether a family carries a proven cursedness-monotonicity result.
inline bool cursedness_monotone_analytic(const ValuationModel& model) {
    return std::holds_alternative<WeightedSum>(model.family) || std::holds_alternative<MaxSignal>(model.family);
}

/// Sampled cursedness-monotonicity: if some winning s_i over s_{-i} has v < v^chi, every
/// coordinate-wise smaller s'_{-i} and every winning s'_i must keep v < v^chi.
inline CheckReport check_cursedness_monotonicity(const AuctionContext& ctx, double chi, std::size_t sample_count,
                                                 RandomStream stream, std::size_t own_grid = 32) {
    if (!(chi > 0.0)) throw std::domain_error("cursedness-monotonicity needs chi > 0");
    check_chi(chi);
    CheckReport report;
    report.property = "cursedness_monotonicity";
    report.tolerance = ctx.noise();
    const double s_bar = ctx.s_bar();
    const std::size_t m = ctx.n() - 1;
    std::size_t triggered = 0;

    auto cursed_gap = [&](double own, const OthersStats& st) {
        return value(ctx.model(), own, st) - cursed_value(ctx, chi, own, st);
    };
    auto winning_points = [&](double floor) {
        std::vector<double> pts;
        for (std::size_t k = 1; k <= own_grid; ++k) {
            const double t = floor + (s_bar - floor) * static_cast<double>(k) / static_cast<double>(own_grid + 1);
            if (t > floor && t < s_bar) pts.push_back(t);
        }
        return pts;
    };

    std::vector<double> others(m);
    std::vector<double> smaller(m);
    for (std::size_t k = 0; k < sample_count; ++k) {
        RandomStream local = stream.substream(k);
        for (auto& s : others) s = draw_signal(ctx.space(), local.uniform());
        const OthersStats st = ctx.summarize(others);
        bool cursed_somewhere = false;
        for (double own : winning_points(st.max)) {
            if (cursed_gap(own, st) < -report.tolerance) {
                cursed_somewhere = true;
                break;
            }
        }
        ++report.samples_checked;
        if (!cursed_somewhere) continue;
        ++triggered;
        for (std::size_t j = 0; j < m; ++j) smaller[j] = others[j] * local.uniform();
        const OthersStats st2 = ctx.summarize(smaller);
        for (double own : winning_points(st2.max)) {
            const double gap = cursed_gap(own, st2);
            if (!(gap < 0.0)) {
                std::vector<double> profile{own};
                profile.insert(profile.end(), smaller.begin(), smaller.end());
                report.record(gap + report.tolerance * 2.0, Witness{profile, 0, std::nullopt, 0.0});
            }
        }
    }
    report.metrics["triggered_profiles"] = static_cast<double>(triggered);
    report.finalize();
    if (cursedness_monotone_analytic(ctx.model())) {
        report.note = "analytic";
        report.passed = true;
    } else {
        report.note = "empirical";
    }
    return report;
}

/// Sampled structural checks of the valuation assumptions (normalisation,
/// non-negativity, strict own-signal and weak others monotonicity, symmetry).
inline CheckReport check_valuation_assumptions(const ValuationModel& model, const SignalSpace& space,
                                               std::size_t sample_count, RandomStream stream) {
    CheckReport report;
    report.property = "valuation_assumptions";
    const double scale = std::max(std::abs(value(model, std::vector<double>(space.n, space.s_bar), 0)), 1.0);
    report.tolerance = 1e-9 * scale;
    report.record(std::abs(value(model, std::vector<double>(space.n, 0.0), 0)), Witness{std::vector<double>(space.n, 0.0), 0, std::nullopt, 0.0});
    const double step = 1e-4 * space.s_bar;
    const bool max_family = std::holds_alternative<MaxSignal>(model.family);
    for (std::size_t k = 0; k < sample_count; ++k) {
        RandomStream local = stream.substream(k);
        std::vector<double> s(space.n);
        for (auto& x : s) x = local.uniform() * (space.s_bar - step);
        const double base = value(model, s, 0);
        report.record(-base, Witness{s, 0, std::nullopt, 0.0});
        for (std::size_t j = 0; j < space.n; ++j) {
            auto bumped = s;
            bumped[j] += step;
            const double up = value(model, bumped, 0);
            const bool own_is_max = s[0] >= *std::max_element(s.begin(), s.end());
            if (j == 0 && (!max_family || own_is_max)) {
                if (!(up > base)) report.record(report.tolerance + (base - up) + 1e-300, Witness{s, 0, std::nullopt, 0.0});
            } else {
                report.record(base - up, Witness{s, j, std::nullopt, 0.0});
            }
        }
        auto rotated = s;
        if (space.n > 2) std::rotate(rotated.begin() + 1, rotated.begin() + 2, rotated.end());
        report.record(std::abs(value(model, rotated, 0) - base), Witness{s, 0, std::nullopt, 0.0});
        ++report.samples_checked;
    }
    report.finalize();
    return report;
}

}  // namespace cursed
