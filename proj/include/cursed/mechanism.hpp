#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cursed/errors.hpp"
#include "cursed/numerics.hpp"
#include "cursed/signal_model.hpp"
#include "cursed/valuation.hpp"

namespace cursed {

struct ThresholdRule;

/// t(s_{-i}) = max_{j != i} s_j
struct GVA {};

/// Per-query maximiser of r(t) = min{v^chi, v} - v^chi F(t).
struct RevenueOptimal {
    double chi = 1.0;
    std::size_t grid = 2048;
    int iterations = 60;
};

/// First point at or above the base threshold where v(t, s_{-i}) >= mu(t).
struct Masked {
    std::shared_ptr<const ThresholdRule> base;
};

/// Negative control: t = min(max others + c, s_bar).
struct ConstantOffset {
    double c = 0.0;
};

/// Thresholds looked up by the sorted others-profile.
struct TabulatedGrid {
    std::map<std::vector<double>, double> table;
};

/// Negative control: wins only on (t, t + width), so allocation is not monotone.
struct IntervalBand {
    double width = 0.1;
};

using RuleKind = std::variant<GVA, RevenueOptimal, Masked, ConstantOffset, TabulatedGrid, IntervalBand>;

struct ThresholdRule {
    RuleKind kind = GVA{};

    [[nodiscard]] std::string name() const;
};

inline std::string ThresholdRule::name() const {
    return std::visit(
        [](const auto& k) -> std::string {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, GVA>) return "gva";
            else if constexpr (std::is_same_v<K, RevenueOptimal>) return "revenue_optimal";
            else if constexpr (std::is_same_v<K, Masked>) return "masked(" + k.base->name() + ")";
            else if constexpr (std::is_same_v<K, ConstantOffset>) return "constant_offset";
            else if constexpr (std::is_same_v<K, TabulatedGrid>) return "tabulated";
            else return "interval_band";
        },
        kind);
}

/// Loser-side constant min{0, v(t) - v^chi(t)}; winner pays min{v, v^chi} at t.
struct EpirCompensated {};
/// Winner pays v^chi(t, s_{-i}); nobody else pays or receives.
struct ZeroTransfer {};
/// Negative control: winner pays v^chi at its own report instead of at t.
struct RealizedCursedValue {};
/// Negative control: EPIR-compensated payments plus a fixed charge on every loser.
struct LoserCharge {
    double amount = 0.01;
};

using PaymentPolicy = std::variant<EpirCompensated, ZeroTransfer, RealizedCursedValue, LoserCharge>;

inline std::string policy_name(const PaymentPolicy& p) {
    return std::visit(
        [](const auto& k) -> std::string {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, EpirCompensated>) return "epir_compensated";
            else if constexpr (std::is_same_v<K, ZeroTransfer>) return "zero_transfer";
            else if constexpr (std::is_same_v<K, RealizedCursedValue>) return "realized_cursed_value";
            else return "loser_charge";
        },
        p);
}

struct Mechanism {
    ThresholdRule rule;
    double chi = 0.0;
    PaymentPolicy policy = EpirCompensated{};
};

struct Outcome {
    std::optional<std::size_t> winner;
    std::vector<double> payments;
    std::vector<double> thresholds;      // t_i(s_{-i}) for every agent
    std::optional<double> threshold_used;  // winner's threshold
    std::vector<double> compensations;   // p_i(0, s_{-i})
    double welfare = 0.0;
    double revenue = 0.0;
};

/// One agent's allocation and payment given its report and threshold.
struct AgentResult {
    bool wins = false;
    double payment = 0.0;
    double compensation = 0.0;
};

namespace detail {

inline bool rule_needs_others_list(const ThresholdRule& rule) {
    if (std::holds_alternative<TabulatedGrid>(rule.kind)) return true;
    if (const auto* m = std::get_if<Masked>(&rule.kind)) return rule_needs_others_list(*m->base);
    return false;
}

/// v(t, s_{-i}) - mu(t) is free of t when the others enter additively through an affine map.
inline bool mask_gap_constant_in_t(const ValuationModel& model) {
    if (std::holds_alternative<WeightedSum>(model.family)) return true;
    if (const auto* cs = std::get_if<ConcaveSum>(&model.family)) return cs->l.is_affine();
    return false;
}

}  // namespace detail

/// r(t) for a fixed others-profile; r(s_bar) = 0.
inline double revenue_objective(const AuctionContext& ctx, double chi, const OthersStats& others, double t) {
    if (t >= ctx.s_bar()) return 0.0;
    const double v = value(ctx.model(), t, others);
    const double vc = cursed_value(ctx, chi, t, others);
    return std::min(vc, v) - vc * cdf(ctx.space(), t);
}

inline double revenue_optimal_threshold(const RevenueOptimal& spec, const AuctionContext& ctx,
                                        const OthersStats& others) {
    const double s_bar = ctx.s_bar();
    const double lo = std::min(others.max, s_bar);
    if (!(lo < s_bar)) return s_bar;
    const std::size_t grid = std::max<std::size_t>(spec.grid, 2);
    const double step = (s_bar - lo) / static_cast<double>(grid);
    auto r = [&](double t) { return revenue_objective(ctx, spec.chi, others, t); };

    std::size_t best_k = 0;
    double best_r = r(lo);
    for (std::size_t k = 1; k < grid; ++k) {
        const double val = r(lo + step * static_cast<double>(k));
        if (val > best_r) {
            best_r = val;
            best_k = k;
        }
    }
    double best_t = lo + step * static_cast<double>(best_k);
    if (spec.iterations > 0) {
        const double a = std::max(lo, best_t - step);
        const double b = std::min(s_bar, best_t + step);
        if (b > a) {
            const auto [x, fx] = numerics::golden_maximize(r, a, b, spec.iterations);
            if (fx > best_r || (fx == best_r && x < best_t)) {
                best_t = x;
                best_r = fx;
            }
        }
    }
    return best_r > ctx.noise() ? best_t : s_bar;
}

/// First t >= t0 with v(t, s_{-i}) >= mu(t); s_bar when there is none.
inline double masked_threshold(double t0, const AuctionContext& ctx, const OthersStats& others) {
    const double s_bar = ctx.s_bar();
    if (!(t0 < s_bar)) return s_bar;
    auto gap = [&](double t) { return value(ctx.model(), t, others) - ctx.cache->mu(t); };
    if (gap(t0) >= -ctx.noise()) return t0;
    if (detail::mask_gap_constant_in_t(ctx.model())) return s_bar;

    constexpr std::size_t kScan = 64;
    const double tol = 1e-9 * s_bar;
    double prev = t0;
    // a crossing must clear the noise floor; a tangential touch (max-signal at s_bar) is not one
    auto crossed = [&](double t) { return gap(t) > ctx.noise(); };
    for (std::size_t k = 1; k <= kScan; ++k) {
        const double t = k == kScan ? s_bar : t0 + (s_bar - t0) * static_cast<double>(k) / kScan;
        if (crossed(t)) {
            double lo = prev;
            double hi = t;
            while (hi - lo > tol) {
                const double mid = 0.5 * (lo + hi);
                if (crossed(mid)) hi = mid;
                else lo = mid;
            }
            // a crossing that only happens at the top of the support is never-allocate
            return hi >= s_bar - tol ? s_bar : hi;
        }
        prev = t;
    }
    return s_bar;
}

/// Threshold from precomputed others statistics. `others` must be supplied for
/// tabulated rules (possibly nested inside a mask).
inline double threshold(const ThresholdRule& rule, const AuctionContext& ctx, const OthersStats& stats,
                        std::span<const double> others = {}) {
    const double s_bar = ctx.s_bar();
    return std::visit(
        [&](const auto& k) -> double {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, GVA> || std::is_same_v<K, IntervalBand>) {
                return std::min(stats.max, s_bar);
            } else if constexpr (std::is_same_v<K, RevenueOptimal>) {
                return revenue_optimal_threshold(k, ctx, stats);
            } else if constexpr (std::is_same_v<K, Masked>) {
                return masked_threshold(threshold(*k.base, ctx, stats, others), ctx, stats);
            } else if constexpr (std::is_same_v<K, ConstantOffset>) {
                return std::min(stats.max + k.c, s_bar);
            } else {
                if (others.size() != stats.count) throw std::invalid_argument("tabulated rule needs the others list");
                std::vector<double> key(others.begin(), others.end());
                std::sort(key.begin(), key.end());
                const auto it = k.table.find(key);
                if (it == k.table.end()) throw std::out_of_range("others-profile missing from threshold table");
                return it->second;
            }
        },
        rule.kind);
}

inline double critical_bid(const ThresholdRule& rule, std::span<const double> others, const AuctionContext& ctx) {
    return threshold(rule, ctx, ctx.summarize(others), others);
}

inline bool allocates(const ThresholdRule& rule, double bid, double t) {
    if (const auto* band = std::get_if<IntervalBand>(&rule.kind)) return bid > t && bid < t + band->width;
    return bid > t;
}

/// p_i(0, s_{-i}) = min{0, v(t) - v^chi(t)} for t < s_bar, else 0.
inline double compensation_at(const Mechanism& mech, const AuctionContext& ctx, const OthersStats& stats, double t) {
    if (std::holds_alternative<ZeroTransfer>(mech.policy)) return 0.0;
    if (mech.chi == 0.0 || !(t < ctx.s_bar())) return 0.0;
    const double v = value(ctx.model(), t, stats);
    const double c = std::min(0.0, v - cursed_value(ctx, mech.chi, t, stats));
    return c > -ctx.noise() ? 0.0 : c;
}

inline double compensation(const Mechanism& mech, std::span<const double> others, const AuctionContext& ctx) {
    const OthersStats stats = ctx.summarize(others);
    return compensation_at(mech, ctx, stats, threshold(mech.rule, ctx, stats, others));
}

/// Allocation and payment of an agent reporting `bid` against others summarised by
/// `stats`, whose threshold is `t`.
inline AgentResult agent_outcome(const Mechanism& mech, const AuctionContext& ctx, double bid,
                                 const OthersStats& stats, double t) {
    AgentResult res;
    res.wins = allocates(mech.rule, bid, t);
    res.compensation = compensation_at(mech, ctx, stats, t);
    if (!res.wins) {
        res.payment = res.compensation;
        if (const auto* charge = std::get_if<LoserCharge>(&mech.policy)) res.payment += charge->amount;
        return res;
    }
    const double v = value(ctx.model(), t, stats);
    const double vc = cursed_value(ctx, mech.chi, t, stats);
    std::visit(
        [&](const auto& p) {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ZeroTransfer>) {
                res.payment = vc;
            } else if constexpr (std::is_same_v<P, RealizedCursedValue>) {
                res.payment = cursed_value(ctx, mech.chi, bid, stats) + res.compensation;
            } else {
                // payment identity and the price shorthand must agree
                const double identity = vc + res.compensation;
                const double shorthand = std::min(v, vc);
                if (std::abs(identity - shorthand) > 4.0 * ctx.noise())
                    throw std::logic_error("winner price disagrees between payment identity and shorthand");
                res.payment = shorthand;
            }
        },
        mech.policy);
    return res;
}

inline void check_masked_compensation(const Mechanism& mech, double comp) {
    if (std::holds_alternative<Masked>(mech.rule.kind) && comp != 0.0)
        throw std::logic_error("masked rule produced a non-zero compensation");
}

/// Runs the mechanism on a truthful profile.
inline Outcome run(const Mechanism& mech, const SignalProfile& profile, const AuctionContext& ctx) {
    const std::size_t n = profile.size();
    if (n != ctx.n()) throw std::invalid_argument("profile length differs from bidder count");
    const ProfileAggregate agg(ctx.model(), profile.view());
    const bool need_list = detail::rule_needs_others_list(mech.rule);

    Outcome out;
    out.payments.resize(n);
    out.thresholds.resize(n);
    out.compensations.resize(n);
    // plain left-to-right sum: rounding stays monotone in the payments
    double revenue = 0.0;
    std::vector<double> others;
    for (std::size_t i = 0; i < n; ++i) {
        const OthersStats stats = agg.others(i);
        if (need_list) others = profile.without(i);
        const double t = threshold(mech.rule, ctx, stats, others);
        const AgentResult res = agent_outcome(mech, ctx, profile[i], stats, t);
        check_masked_compensation(mech, res.compensation);
        out.thresholds[i] = t;
        out.compensations[i] = res.compensation;
        out.payments[i] = res.payment;
        revenue += res.payment;
        if (res.wins) {
            if (out.winner) throw std::logic_error("two winners on one profile");
            out.winner = i;
            out.threshold_used = t;
            out.welfare = value(ctx.model(), profile[i], stats);
        }
    }
    out.revenue = revenue;
    return out;
}

inline ThresholdRule gva_rule() { return {GVA{}}; }

inline ThresholdRule revenue_optimal_rule(const AuctionContext& ctx, double chi, std::size_t grid = 2048,
                                          int iterations = 60) {
    check_chi(chi);
    (void)ctx;  // the rule evaluates v, mu and F from the context at query time
    return {RevenueOptimal{chi, grid, iterations}};
}

/// Masking is idempotent: masking an already-masked rule returns it unchanged.
inline ThresholdRule mask(const ThresholdRule& rule) {
    if (std::holds_alternative<Masked>(rule.kind)) return rule;
    return {Masked{std::make_shared<const ThresholdRule>(rule)}};
}

/// Masked GVA with EPIR-compensated payments; at chi = 0 the mask is skipped.
inline Mechanism m_gva(const AuctionContext& ctx, double chi, std::size_t single_crossing_samples = 2000,
                       std::uint64_t seed = 0x9A11u) {
    check_chi(chi);
    const CheckReport sc = check_single_crossing(ctx.model(), ctx.space(), single_crossing_samples,
                                                 RandomStream(seed, 0));
    if (!sc.passed) throw ModelUnsupported("M-GVA needs a single-crossing valuation");
    return {chi == 0.0 ? gva_rule() : mask(gva_rule()), chi, EpirCompensated{}};
}

inline Mechanism compensated_gva(double chi) { return {gva_rule(), chi, EpirCompensated{}}; }

inline Mechanism revenue_optimal_mechanism(const AuctionContext& ctx, double chi) {
    return {revenue_optimal_rule(ctx, chi), chi, EpirCompensated{}};
}

/// All multisets of size k drawn from `points`, each sorted.
inline std::vector<std::vector<double>> sorted_multisets(const std::vector<double>& points, std::size_t k) {
    std::vector<std::vector<double>> out;
    std::vector<std::size_t> idx(k, 0);
    if (points.empty()) return out;
    while (true) {
        std::vector<double> row(k);
        for (std::size_t j = 0; j < k; ++j) row[j] = points[idx[j]];
        out.push_back(std::move(row));
        std::size_t j = k;
        while (j > 0 && idx[j - 1] == points.size() - 1) --j;
        if (j == 0) break;
        ++idx[j - 1];
        for (std::size_t q = j; q < k; ++q) idx[q] = idx[j - 1];
    }
    return out;
}

/// Evaluates `rule` on every others-multiset over `points`.
inline ThresholdRule tabulate(const ThresholdRule& rule, const AuctionContext& ctx, const std::vector<double>& points) {
    TabulatedGrid tab;
    for (auto& others : sorted_multisets(points, ctx.n() - 1)) {
        const double t = critical_bid(rule, others, ctx);
        tab.table.emplace(std::move(others), t);
    }
    return {std::move(tab)};
}

}  // namespace cursed
