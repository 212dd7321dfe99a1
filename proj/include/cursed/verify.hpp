#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "cursed/check_report.hpp"
#include "cursed/mechanism.hpp"
#include "cursed/random_stream.hpp"
#include "cursed/signal_model.hpp"
#include "cursed/valuation.hpp"

namespace cursed {

struct SamplingPlan {
    std::size_t profile_count = 10000;
    std::size_t deviation_grid_size = 101;  // uniform bids over [0, s_bar]
    double tol_rel = 1e-9;                  // tolerance = tol_rel * v(s_bar, ..., s_bar)
    std::uint64_t seed = 2024;
    double threshold_delta_rel = 1e-6;      // bids at t +- delta * s_bar
};

inline double plan_tolerance(const SamplingPlan& plan, const AuctionContext& ctx) {
    return plan.tol_rel * std::max(std::abs(ctx.value_scale()), 1e-300);
}

/// Deviation bids for an agent with report `truthful` and threshold `t`.
inline std::vector<double> deviation_grid(const SamplingPlan& plan, const AuctionContext& ctx, double truthful,
                                          double t) {
    const double s_bar = ctx.s_bar();
    std::vector<double> bids;
    const std::size_t g = std::max<std::size_t>(plan.deviation_grid_size, 2);
    bids.reserve(g + 5);
    for (std::size_t k = 0; k < g; ++k) bids.push_back(s_bar * static_cast<double>(k) / static_cast<double>(g - 1));
    bids.push_back(truthful);
    const double delta = plan.threshold_delta_rel * s_bar;
    for (double b : {t - delta, t, t + delta})
        if (b >= 0.0 && b <= s_bar) bids.push_back(b);
    return bids;
}

namespace detail {

inline SignalProfile plan_profile(const SamplingPlan& plan, const AuctionContext& ctx, std::size_t k) {
    return sample_profile(ctx.space(), plan.seed, k);
}

inline CheckReport start_report(const std::string& property, const SamplingPlan& plan, const AuctionContext& ctx) {
    CheckReport r;
    r.property = property;
    r.tolerance = plan_tolerance(plan, ctx);
    return r;
}

/// Calls f(profile, outcome, agent, stats) for every sampled profile and agent.
template <typename F>
void for_each_agent(const Mechanism& mech, const AuctionContext& ctx, const SamplingPlan& plan, CheckReport& report,
                    F&& f) {
    for (std::size_t k = 0; k < plan.profile_count; ++k) {
        const SignalProfile profile = plan_profile(plan, ctx, k);
        const Outcome out = run(mech, profile, ctx);
        const ProfileAggregate agg(ctx.model(), profile.view());
        for (std::size_t i = 0; i < profile.size(); ++i) f(profile, out, i, agg.others(i));
        ++report.samples_checked;
    }
}

inline double realized_utility(const Outcome& out, std::size_t i, double value_i) {
    return (out.winner && *out.winner == i ? value_i : 0.0) - out.payments[i];
}

}  // namespace detail

/// Truthful cursed utility against every grid deviation.
inline CheckReport check_cepic(const Mechanism& mech, const AuctionContext& ctx, const SamplingPlan& plan) {
    CheckReport report = detail::start_report("cepic", plan, ctx);
    double two_way_gap = 0.0;
    detail::for_each_agent(mech, ctx, plan, report,
                           [&](const SignalProfile& s, const Outcome& out, std::size_t i, const OthersStats& stats) {
        const double vc = cursed_value(ctx, mech.chi, s[i], stats);
        const double t = out.thresholds[i];
        const double u_run = detail::realized_utility(out, i, vc);
        const AgentResult direct = agent_outcome(mech, ctx, s[i], stats, t);
        const double u_direct = (direct.wins ? vc : 0.0) - direct.payment;
        two_way_gap = std::max(two_way_gap, std::abs(u_run - u_direct));
        for (double b : deviation_grid(plan, ctx, s[i], t)) {
            const AgentResult dev = agent_outcome(mech, ctx, b, stats, t);
            const double gain = (dev.wins ? vc : 0.0) - dev.payment - u_run;
            report.observe(gain);
            report.record(gain, Witness{s.values, i, b, 0.0});
        }
    });
    report.metrics["truthful_two_way_gap"] = two_way_gap;
    report.finalize();
    if (two_way_gap > ctx.noise()) {
        report.passed = false;
        report.note = "truthful utility differs between run() and the direct formula";
    }
    return report;
}

/// True-value ex-post IR.
inline CheckReport check_epir(const Mechanism& mech, const AuctionContext& ctx, const SamplingPlan& plan) {
    CheckReport report = detail::start_report("epir", plan, ctx);
    detail::for_each_agent(mech, ctx, plan, report,
                           [&](const SignalProfile& s, const Outcome& out, std::size_t i, const OthersStats& stats) {
        const double u = detail::realized_utility(out, i, value(ctx.model(), s[i], stats));
        report.observe(-u);
        report.record(-u, Witness{s.values, i, std::nullopt, 0.0});
    });
    report.finalize();
    return report;
}

/// Cursed-value ex-post IR.
inline CheckReport check_cepir(const Mechanism& mech, const AuctionContext& ctx, const SamplingPlan& plan) {
    CheckReport report = detail::start_report("cepir", plan, ctx);
    detail::for_each_agent(mech, ctx, plan, report,
                           [&](const SignalProfile& s, const Outcome& out, std::size_t i, const OthersStats& stats) {
        const double u = detail::realized_utility(out, i, cursed_value(ctx, mech.chi, s[i], stats));
        report.observe(-u);
        report.record(-u, Witness{s.values, i, std::nullopt, 0.0});
    });
    report.finalize();
    return report;
}

/// Sum of payments is non-negative on every profile.
inline CheckReport check_epbb(const Mechanism& mech, const AuctionContext& ctx, const SamplingPlan& plan) {
    CheckReport report = detail::start_report("epbb", plan, ctx);
    for (std::size_t k = 0; k < plan.profile_count; ++k) {
        const SignalProfile profile = detail::plan_profile(plan, ctx, k);
        const Outcome out = run(mech, profile, ctx);
        report.observe(-out.revenue);
        report.record(-out.revenue, Witness{profile.values, std::nullopt, std::nullopt, 0.0});
        ++report.samples_checked;
    }
    report.finalize();
    return report;
}

/// Every compensation term is zero.
inline CheckReport check_no_positive_transfers(const Mechanism& mech, const AuctionContext& ctx,
                                               const SamplingPlan& plan) {
    CheckReport report = detail::start_report("no_positive_transfers", plan, ctx);
    detail::for_each_agent(mech, ctx, plan, report,
                           [&](const SignalProfile& s, const Outcome& out, std::size_t i, const OthersStats&) {
        const double transfer = -out.compensations[i];
        report.observe(transfer);
        report.record(transfer, Witness{s.values, i, std::nullopt, 0.0});
    });
    report.finalize();
    return report;
}

/// Win indicator is non-decreasing along a 201-point own-signal scan.
inline CheckReport check_allocation_monotone(const Mechanism& mech, const AuctionContext& ctx,
                                             const SamplingPlan& plan, std::size_t scan_points = 201) {
    CheckReport report = detail::start_report("allocation_monotone", plan, ctx);
    const double s_bar = ctx.s_bar();
    const bool need_list = detail::rule_needs_others_list(mech.rule);
    for (std::size_t k = 0; k < plan.profile_count; ++k) {
        const SignalProfile profile = detail::plan_profile(plan, ctx, k);
        const std::vector<double> others = profile.without(0);
        const OthersStats stats = ctx.summarize(others);
        const double t = threshold(mech.rule, ctx, stats, need_list ? std::span<const double>(others) : std::span<const double>{});
        bool won_before = false;
        for (std::size_t q = 0; q < scan_points; ++q) {
            const double b = s_bar * static_cast<double>(q) / static_cast<double>(scan_points - 1);
            const bool wins = agent_outcome(mech, ctx, b, stats, t).wins;
            if (won_before && !wins) {
                report.observe(1.0);
                report.record(1.0, Witness{profile.values, 0, b, 0.0});
            }
            won_before = won_before || wins;
        }
        ++report.samples_checked;
    }
    report.finalize();
    return report;
}

/// Truthful regret when agents are cursed at chi + eps while the mechanism was built for chi.
inline CheckReport check_chi_robustness(const Mechanism& mech, const AuctionContext& ctx,
                                        const std::vector<double>& eps_list, const SamplingPlan& plan) {
    CheckReport report = detail::start_report("chi_robustness", plan, ctx);
    const double scale = ctx.value_scale();
    for (double eps : eps_list) check_chi(mech.chi + eps);
    std::vector<double> worst(eps_list.size(), 0.0);
    detail::for_each_agent(mech, ctx, plan, report,
                           [&](const SignalProfile& s, const Outcome& out, std::size_t i, const OthersStats& stats) {
        const double t = out.thresholds[i];
        const std::vector<double> bids = deviation_grid(plan, ctx, s[i], t);
        std::vector<AgentResult> results;
        results.reserve(bids.size());
        for (double b : bids) results.push_back(agent_outcome(mech, ctx, b, stats, t));
        for (std::size_t e = 0; e < eps_list.size(); ++e) {
            const double vc = cursed_value(ctx, mech.chi + eps_list[e], s[i], stats);
            const double u_truth = detail::realized_utility(out, i, vc);
            double regret = 0.0;
            double best_bid = s[i];
            for (std::size_t q = 0; q < bids.size(); ++q) {
                const double u = (results[q].wins ? vc : 0.0) - results[q].payment;
                if (u - u_truth > regret) {
                    regret = u - u_truth;
                    best_bid = bids[q];
                }
            }
            worst[e] = std::max(worst[e], regret);
            const double excess = regret - eps_list[e] * scale;
            report.observe(excess);
            report.record(excess, Witness{s.values, i, best_bid, 0.0});
        }
    });
    for (std::size_t e = 0; e < eps_list.size(); ++e) {
        std::ostringstream key;
        key << "max_regret_eps_" << eps_list[e];
        report.metrics[key.str()] = worst[e];
        key.str("");
        key << "bound_eps_" << eps_list[e];
        report.metrics[key.str()] = eps_list[e] * scale;
    }
    report.finalize();
    return report;
}

/// Pointwise p^chi >= p^chi' for chi <= chi' under a fixed rule, plus exact
/// monotonicity of the sample-mean revenue on the same draws.
inline CheckReport check_payment_chi_monotone(const ThresholdRule& rule, const AuctionContext& ctx,
                                              std::vector<double> chi_grid, const SamplingPlan& plan) {
    CheckReport report = detail::start_report("payment_chi_monotone", plan, ctx);
    std::sort(chi_grid.begin(), chi_grid.end());
    std::vector<Mechanism> mechs;
    for (double chi : chi_grid) {
        check_chi(chi);
        mechs.push_back({rule, chi, EpirCompensated{}});
    }
    std::vector<double> revenue_sum(chi_grid.size(), 0.0);
    std::vector<Outcome> outs(chi_grid.size());
    for (std::size_t k = 0; k < plan.profile_count; ++k) {
        const SignalProfile profile = detail::plan_profile(plan, ctx, k);
        for (std::size_t c = 0; c < mechs.size(); ++c) {
            outs[c] = run(mechs[c], profile, ctx);
            revenue_sum[c] += outs[c].revenue;
        }
        for (std::size_t c = 0; c + 1 < mechs.size(); ++c)
            for (std::size_t i = 0; i < profile.size(); ++i) {
                const double rise = outs[c + 1].payments[i] - outs[c].payments[i];
                report.observe(rise);
                report.record(rise, Witness{profile.values, i, chi_grid[c + 1], 0.0});
            }
        ++report.samples_checked;
    }
    bool exact = true;
    for (std::size_t c = 0; c < chi_grid.size(); ++c) {
        std::ostringstream key;
        key << "revenue_mean_chi_" << chi_grid[c];
        const double mean = plan.profile_count ? revenue_sum[c] / static_cast<double>(plan.profile_count) : 0.0;
        report.metrics[key.str()] = mean;
        if (c > 0 && revenue_sum[c] > revenue_sum[c - 1]) exact = false;
    }
    report.metrics["revenue_means_exactly_non_increasing"] = exact ? 1.0 : 0.0;
    report.finalize();
    if (!exact) {
        report.passed = false;
        report.note = "sample-mean revenue increased with chi on common draws";
    }
    return report;
}

}  // namespace cursed
