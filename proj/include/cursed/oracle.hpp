#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cursed/check_report.hpp"
#include "cursed/mechanism.hpp"
#include "cursed/numerics.hpp"
#include "cursed/signal_model.hpp"
#include "cursed/valuation.hpp"

namespace cursed::oracle {

using Real = long double;

inline constexpr std::size_t kMaxBidders = 4;
inline constexpr std::size_t kMaxGridPoints = 21;

/// Small i.i.d. instance on m equally spaced points of [0, s_bar] with uniform mass.
class GridModel {
public:
    GridModel(std::size_t n, std::size_t m, ValuationModel model, double chi, double s_bar = 1.0)
        : n_(n), m_(m), s_bar_(s_bar), model_(std::move(model)), chi_(chi) {
        if (n < 2 || n > kMaxBidders) throw std::invalid_argument("oracle supports 2 to 4 bidders");
        if (m < 1 || m > kMaxGridPoints) throw std::invalid_argument("oracle supports 1 to 21 grid points");
        if (!(s_bar > 0.0)) throw std::invalid_argument("s_bar must be positive");
        check_chi(chi);
        points_ = equally_spaced_grid(m, s_bar);
    }

    [[nodiscard]] std::size_t n() const { return n_; }
    [[nodiscard]] std::size_t m() const { return m_; }
    [[nodiscard]] double s_bar() const { return s_bar_; }
    [[nodiscard]] double chi() const { return chi_; }
    [[nodiscard]] const ValuationModel& model() const { return model_; }
    [[nodiscard]] const std::vector<double>& points() const { return points_; }
    [[nodiscard]] double spacing() const { return m_ > 1 ? s_bar_ / static_cast<double>(m_ - 1) : s_bar_; }

    /// The same environment as a DiscreteGridIID signal space.
    [[nodiscard]] SignalSpace space() const { return grid_space(n_, points_, s_bar_); }
    [[nodiscard]] AuctionContext matched_context() const { return make_context(space(), model_); }

    /// v(s_bar, ..., s_bar)
    [[nodiscard]] Real scale() const;
    [[nodiscard]] Real noise() const { return 1e-12L * std::max<Real>(scale(), 1.0L); }

private:
    std::size_t n_;
    std::size_t m_;
    double s_bar_;
    ValuationModel model_;
    double chi_;
    std::vector<double> points_;
};

namespace detail {

/// v(own, others) straight from the family definition, in extended precision.
inline Real full_value(const ValuationModel& model, Real own, const std::vector<double>& others) {
    if (const auto* ws = std::get_if<WeightedSum>(&model.family)) {
        numerics::CompensatedSum<Real> rest;
        for (double s : others) rest.add(static_cast<Real>(s));
        return own + static_cast<Real>(ws->beta) * rest.value();
    }
    if (std::holds_alternative<MaxSignal>(model.family)) {
        Real top = own;
        for (double s : others) top = std::max(top, static_cast<Real>(s));
        return top;
    }
    const auto& cs = std::get<ConcaveSum>(model.family);
    numerics::CompensatedSum<Real> rest;
    for (double s : others) rest.add(static_cast<Real>(cs.h(s)));
    return static_cast<Real>(cs.l(static_cast<double>(static_cast<Real>(cs.g(static_cast<double>(own))) + rest.value())));
}

/// Calls f(profile) for every profile in points^k (odometer order, first index slowest).
template <typename F>
void for_each_profile(const std::vector<double>& points, std::size_t k, F&& f) {
    if (points.empty()) return;
    std::vector<std::size_t> idx(k, 0);
    std::vector<double> profile(k, points[0]);
    if (k == 0) {
        f(static_cast<const std::vector<double>&>(profile));
        return;
    }
    while (true) {
        for (std::size_t j = 0; j < k; ++j) profile[j] = points[idx[j]];
        f(static_cast<const std::vector<double>&>(profile));
        std::size_t j = k;
        while (j > 0) {
            --j;
            if (++idx[j] < points.size()) break;
            idx[j] = 0;
            if (j == 0) return;
        }
    }
}

/// mu(s) by enumeration; s may lie off the grid.
inline Real interim_mu(const GridModel& gm, Real s) {
    numerics::CompensatedSum<Real> total;
    std::size_t count = 0;
    for_each_profile(gm.points(), gm.n() - 1, [&](const std::vector<double>& others) {
        total.add(full_value(gm.model(), s, others));
        ++count;
    });
    return total.value() / static_cast<Real>(count);
}

inline Real cursed(const GridModel& gm, Real v, Real mu) {
    return v + static_cast<Real>(gm.chi()) * (mu - v);
}

}  // namespace detail

inline Real GridModel::scale() const {
    return detail::full_value(model_, s_bar_, std::vector<double>(n_ - 1, s_bar_));
}

/// mu(s_i) for an on-grid s_i.
inline Real exact_interim_mu(const GridModel& gm, double s_i) {
    const auto& pts = gm.points();
    const bool on_grid = std::any_of(pts.begin(), pts.end(),
                                     [&](double g) { return std::abs(g - s_i) <= 1e-12 * gm.s_bar(); });
    if (!on_grid) throw std::domain_error("oracle interim expectation needs an on-grid signal");
    return detail::interim_mu(gm, s_i);
}

/// Rule and payment policy as seen by the oracle.
struct OracleMechanism {
    enum class Kind { Gva, MaskedGva, Tabulated };
    Kind kind = Kind::Gva;
    std::map<std::vector<double>, double> table;  // sorted others -> threshold, for Tabulated
    bool zero_transfer = false;
};

inline OracleMechanism oracle_gva() { return {OracleMechanism::Kind::Gva, {}, false}; }
inline OracleMechanism oracle_m_gva() { return {OracleMechanism::Kind::MaskedGva, {}, false}; }
inline OracleMechanism oracle_tabulated(const ThresholdRule& tab) {
    return {OracleMechanism::Kind::Tabulated, std::get<TabulatedGrid>(tab.kind).table, false};
}

/// inf{t >= max others : v(t, others) >= mu(t)}, s_bar if empty; dense scan plus bisection.
inline double oracle_masked_threshold(const GridModel& gm, const std::vector<double>& others) {
    const double s_bar = gm.s_bar();
    const double t0 = *std::max_element(others.begin(), others.end());
    if (!(t0 < s_bar)) return s_bar;
    auto gap = [&](Real t) { return detail::full_value(gm.model(), t, others) - detail::interim_mu(gm, t); };
    if (gap(t0) >= -gm.noise()) return t0;
    constexpr std::size_t kScan = 1024;
    const Real tol = 1e-10L * s_bar;
    Real prev = t0;
    for (std::size_t k = 1; k <= kScan; ++k) {
        const Real t = k == kScan ? Real(s_bar) : t0 + (s_bar - t0) * static_cast<Real>(k) / kScan;
        if (gap(t) >= 0) {
            Real lo = prev;
            Real hi = t;
            while (hi - lo > tol) {
                const Real mid = (lo + hi) / 2;
                (gap(mid) >= 0 ? hi : lo) = mid;
            }
            return hi >= s_bar - 1e-9L * s_bar ? s_bar : static_cast<double>(hi);
        }
        prev = t;
    }
    return s_bar;
}

inline double oracle_threshold(const GridModel& gm, const OracleMechanism& mech, std::vector<double> others) {
    switch (mech.kind) {
        case OracleMechanism::Kind::Gva: return *std::max_element(others.begin(), others.end());
        case OracleMechanism::Kind::MaskedGva:
            if (gm.chi() == 0.0) return *std::max_element(others.begin(), others.end());
            return oracle_masked_threshold(gm, others);
        case OracleMechanism::Kind::Tabulated: {
            std::sort(others.begin(), others.end());
            const auto it = mech.table.find(others);
            if (it == mech.table.end()) throw std::out_of_range("others-profile missing from oracle table");
            return it->second;
        }
    }
    return gm.s_bar();
}

/// Oracle thresholds for every others-multiset, so each is computed once.
inline OracleMechanism resolve(const GridModel& gm, const OracleMechanism& mech) {
    if (mech.kind == OracleMechanism::Kind::Tabulated) return mech;
    OracleMechanism out{OracleMechanism::Kind::Tabulated, {}, mech.zero_transfer};
    for (auto& others : sorted_multisets(gm.points(), gm.n() - 1)) {
        const double t = oracle_threshold(gm, mech, others);
        out.table.emplace(std::move(others), t);
    }
    return out;
}

struct OracleOutcome {
    std::optional<std::size_t> winner;
    std::vector<Real> payments;
    std::vector<double> thresholds;
    Real welfare = 0;
    Real revenue = 0;
};

/// Payments via the payment identity: winner pays v^chi(t) + p(0), losers pay p(0).
inline OracleOutcome exact_outcome(const GridModel& gm, const OracleMechanism& mech, const std::vector<double>& s) {
    const std::size_t n = s.size();
    OracleOutcome out;
    out.payments.assign(n, 0);
    out.thresholds.assign(n, 0.0);
    numerics::CompensatedSum<Real> revenue;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> others;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) others.push_back(s[j]);
        const double t = oracle_threshold(gm, mech, others);
        out.thresholds[i] = t;
        const bool wins = s[i] > t;
        Real comp = 0;
        Real vc_t = 0;
        if (wins || (!mech.zero_transfer && t < gm.s_bar())) {
            const Real v_t = detail::full_value(gm.model(), t, others);
            vc_t = detail::cursed(gm, v_t, detail::interim_mu(gm, t));
            if (!mech.zero_transfer && t < gm.s_bar() && gm.chi() != 0.0) {
                comp = std::min<Real>(0, v_t - vc_t);
                if (comp > -gm.noise()) comp = 0;
            }
        }
        out.payments[i] = wins ? vc_t + comp : comp;
        if (wins) {
            out.winner = i;
            out.welfare = detail::full_value(gm.model(), s[i], others);
        }
        revenue.add(out.payments[i]);
    }
    out.revenue = revenue.value();
    return out;
}

enum class ExactMetric { Revenue, Welfare, AllocationProb, TransfersOut };

/// Average of a metric over all m^n profiles.
inline Real exact_expectation(const GridModel& gm, const OracleMechanism& mech_in, ExactMetric metric) {
    const OracleMechanism mech = resolve(gm, mech_in);
    numerics::CompensatedSum<Real> total;
    std::size_t count = 0;
    detail::for_each_profile(gm.points(), gm.n(), [&](const std::vector<double>& s) {
        const OracleOutcome out = exact_outcome(gm, mech, s);
        Real x = 0;
        switch (metric) {
            case ExactMetric::Revenue: x = out.revenue; break;
            case ExactMetric::Welfare: x = out.welfare; break;
            case ExactMetric::AllocationProb: x = out.winner ? 1 : 0; break;
            case ExactMetric::TransfersOut:
                for (Real p : out.payments) x += std::max<Real>(0, -p);
                break;
        }
        total.add(x);
        ++count;
    });
    return total.value() / static_cast<Real>(count);
}

/// Smallest grid value g >= max others maximising
///   min{v^chi(g), v(g)} - v^chi(g) F(g-),
/// i.e. the revenue of a threshold just below g (lowest winning signal g), or s_bar
/// (never allocate, revenue 0) when no candidate beats 0.
inline double brute_force_rev_optimal_threshold(const GridModel& gm, const std::vector<double>& others) {
    const double top = *std::max_element(others.begin(), others.end());
    const auto& pts = gm.points();
    const Real m = static_cast<Real>(pts.size());
    double best_t = gm.s_bar();
    Real best_r = 0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const double g = pts[k];
        if (g < top) continue;
        const Real v = detail::full_value(gm.model(), g, others);
        const Real vc = detail::cursed(gm, v, detail::interim_mu(gm, g));
        const Real below = static_cast<Real>(k) / m;  // P[s < g]
        const Real r = std::min(v, vc) - vc * below;
        if (r > best_r + gm.noise()) {
            best_r = r;
            best_t = g;
        }
    }
    return best_t;
}

struct BestResponse {
    double best_bid = 0.0;
    Real best_utility = 0;
    Real truthful_utility = 0;
    Real max_regret = 0;                // worst over others-profiles
    std::vector<double> worst_others;   // where the regret is attained
};

/// Exhaustive grid deviation search for agent i with signal s_i against every
/// others-profile. Allocation and payments come from the mechanism under test;
/// cursed values come from the oracle's enumeration.
inline BestResponse brute_force_best_response(const GridModel& gm, const Mechanism& mech, const AuctionContext& ctx,
                                              std::size_t i, double s_i) {
    if (i >= gm.n()) throw std::out_of_range("agent index out of range");
    const Real mu_own = exact_interim_mu(gm, s_i);
    BestResponse best;
    bool first = true;
    detail::for_each_profile(gm.points(), gm.n() - 1, [&](const std::vector<double>& others) {
        const Real vc = detail::cursed(gm, detail::full_value(gm.model(), s_i, others), mu_own);
        std::vector<double> profile(others.begin(), others.end());
        profile.insert(profile.begin() + static_cast<std::ptrdiff_t>(i), s_i);
        auto utility = [&](double bid) {
            profile[i] = bid;
            const Outcome out = run(mech, SignalProfile{profile}, ctx);
            const bool wins = out.winner && *out.winner == i;
            return (wins ? vc : Real(0)) - static_cast<Real>(out.payments[i]);
        };
        const Real truthful = utility(s_i);
        Real top = truthful;
        double top_bid = s_i;
        for (double b : gm.points()) {
            const Real u = utility(b);
            if (u > top) {
                top = u;
                top_bid = b;
            }
        }
        const Real regret = top - truthful;
        if (first || regret > best.max_regret) {
            first = false;
            best.max_regret = regret;
            best.best_bid = top_bid;
            best.best_utility = top;
            best.truthful_utility = truthful;
            best.worst_others = others;
        }
    });
    return best;
}

/// |analytic - oracle| <= tol.
inline CheckReport compare(double analytic_value, double oracle_value, double tol, std::string property = "compare") {
    CheckReport r;
    r.property = std::move(property);
    r.tolerance = tol;
    r.samples_checked = 1;
    const double margin = std::abs(analytic_value - oracle_value);
    r.observe(margin);
    r.record(margin, Witness{{analytic_value, oracle_value}, std::nullopt, std::nullopt, 0.0});
    r.finalize();
    return r;
}

/// Mechanism payments against oracle payments on every profile of the grid.
inline CheckReport compare_payments(const GridModel& gm, const Mechanism& mech, const AuctionContext& ctx,
                                    const OracleMechanism& omech_in, std::string property = "payments") {
    const OracleMechanism omech = resolve(gm, omech_in);
    CheckReport r;
    r.property = std::move(property);
    r.tolerance = static_cast<double>(gm.noise());
    detail::for_each_profile(gm.points(), gm.n(), [&](const std::vector<double>& s) {
        const Outcome got = run(mech, SignalProfile{s}, ctx);
        const OracleOutcome want = exact_outcome(gm, omech, s);
        double margin = 0.0;
        if (got.winner != want.winner) margin = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < s.size(); ++i)
            margin = std::max(margin, static_cast<double>(std::abs(static_cast<Real>(got.payments[i]) - want.payments[i])));
        r.observe(margin);
        r.record(margin, Witness{s, std::nullopt, std::nullopt, 0.0});
        ++r.samples_checked;
    });
    r.finalize();
    return r;
}

}  // namespace cursed::oracle
