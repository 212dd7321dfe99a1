#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cursed/evaluate.hpp"

using namespace cursed;

namespace {

AuctionContext ws_context(double beta, std::size_t n, double s_bar = 1.0) {
    return make_context(uniform_space(n, s_bar), ValuationModel::weighted_sum(beta));
}

bool within(double est, double se, double truth, double k = 3.0) { return std::abs(est - truth) <= k * se; }

}  // namespace

TEST(EstimateReport, SingleSampleHasZeroErrorAndCiIsSymmetric) {
    const auto ctx = ws_context(0.5, 3);
    const Mechanism mech = compensated_gva(1.0);
    const EstimateReport r = estimate(mech, ctx, Metric::Revenue, 1, 42);
    EXPECT_EQ(r.sample_count, 1u);
    EXPECT_EQ(r.standard_error, 0.0);
    EXPECT_EQ(r.mean, run(mech, sample_profile(ctx.space(), 42, 0), ctx).revenue);
    const EstimateReport big = estimate(mech, ctx, Metric::Welfare, 5000, 42);
    EXPECT_NEAR(big.ci_low, big.mean - 1.96 * big.standard_error, 1e-15);
    EXPECT_NEAR(big.ci_high, big.mean + 1.96 * big.standard_error, 1e-15);
    EXPECT_EQ(big.metric, "welfare");
}

TEST(EstimateReport, StandardErrorIsSampleStdOverRootN) {
    const auto ctx = ws_context(1.0, 2);
    const Mechanism mech = compensated_gva(0.5);
    const std::size_t n = 10000;
    const EstimateReport r = estimate(mech, ctx, Metric::Revenue, n, 3);
    std::vector<double> xs;
    for (std::size_t k = 0; k < n; ++k) xs.push_back(run(mech, sample_profile(ctx.space(), 3, k), ctx).revenue);
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(r.mean, mean, 1e-12);
    EXPECT_NEAR(r.standard_error, std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n)), 1e-12);
}

TEST(Estimate, DeterministicAndIndependentOfWorkers) {
    const auto ctx = ws_context(0.5, 4);
    const Mechanism mech = m_gva(ctx, 0.63);
    const auto a = estimate_all(mech, ctx, {Metric::Revenue, Metric::Welfare}, 20000, 9, 1);
    const auto b = estimate_all(mech, ctx, {Metric::Revenue, Metric::Welfare}, 20000, 9, 4);
    const auto c = estimate_all(mech, ctx, {Metric::Revenue, Metric::Welfare}, 20000, 9, 1);
    for (std::size_t m = 0; m < 2; ++m) {
        EXPECT_EQ(a[m].mean, b[m].mean);
        EXPECT_EQ(a[m].standard_error, b[m].standard_error);
        EXPECT_EQ(a[m].mean, c[m].mean);
    }
}

TEST(Estimate, MaxSignalMaskedNeverAllocates) {
    const auto ctx = make_context(uniform_space(3, 1.0), ValuationModel::max_signal());
    const auto r = estimate_all(m_gva(ctx, 0.5), ctx, {Metric::AllocationProb, Metric::Welfare, Metric::Revenue},
                                100000, 2024);
    for (const auto& e : r) EXPECT_EQ(e.mean, 0.0) << e.metric;
}

TEST(Estimate, TransfersOutMatchesLoserCompensationIntegral) {
    // n = 3, beta = 1/2, chi = 1: agent i with others (a, b) receives (1 - a - b)/2 when a + b < 1
    // and it loses, which happens with probability max(a, b).
    const auto ctx = ws_context(0.5, 3);
    const int grid = 2000;
    double integral = 0.0;
    for (int p = 0; p < grid; ++p)
        for (int q = 0; q < grid; ++q) {
            const double a = (p + 0.5) / grid;
            const double b = (q + 0.5) / grid;
            integral += std::max(0.0, 0.5 * (1.0 - a - b)) * std::max(a, b);
        }
    const double oracle = 3.0 * integral / (static_cast<double>(grid) * grid);
    const EstimateReport r = estimate(compensated_gva(1.0), ctx, Metric::TransfersOut, 100000, 2024);
    EXPECT_TRUE(within(r.mean, r.standard_error, oracle)) << r.mean << " vs " << oracle;
}

TEST(OptimalWelfare, OrderStatisticValues) {
    const auto ws = ws_context(0.5, 2);
    const EstimateReport a = optimal_welfare(ws, 100000, 1);
    EXPECT_TRUE(within(a.mean, a.standard_error, 5.0 / 6.0)) << a.mean;
    const auto mx = make_context(uniform_space(2, 1.0), ValuationModel::max_signal());
    const EstimateReport b = optimal_welfare(mx, 100000, 1);
    EXPECT_TRUE(within(b.mean, b.standard_error, 2.0 / 3.0)) << b.mean;
    const auto zero = make_context(grid_space(2, {0.0}, 1.0), ValuationModel::weighted_sum(1.0));
    EXPECT_EQ(optimal_welfare(zero, 100, 1).mean, 0.0);
}

TEST(OptimalWelfare, BoundsMaskedWelfarePointwise) {
    const auto ctx = ws_context(0.5, 5);
    const Mechanism m = m_gva(ctx, 1.0);
    for (std::uint64_t k = 0; k < 3000; ++k) {
        const SignalProfile p = sample_profile(ctx.space(), 14, k);
        const Outcome out = run(m, p, ctx);
        const std::size_t top = ProfileAggregate(ctx.model(), p.view()).argmax();
        EXPECT_LE(out.welfare, value(ctx.model(), p, top) + ctx.noise());
    }
}

TEST(Accounting, RevenuePlusUtilitiesIsWelfare) {
    const auto ctx = ws_context(0.5, 3);
    for (const Mechanism& mech : {compensated_gva(1.0), m_gva(ctx, 1.0), revenue_optimal_mechanism(ctx, 0.6)}) {
        for (std::uint64_t k = 0; k < 2000; ++k) {
            const SignalProfile p = sample_profile(ctx.space(), 15, k);
            const Outcome out = run(mech, p, ctx);
            double utilities = 0.0;
            for (std::size_t i = 0; i < 3; ++i)
                utilities += (out.winner == std::optional<std::size_t>(i) ? value(ctx.model(), p, i) : 0.0) -
                             out.payments[i];
            EXPECT_NEAR(out.revenue + utilities, out.welfare, ctx.noise());
        }
    }
}

TEST(ChiSweep, FixedRuleRevenueExactlyNonIncreasing) {
    const auto ctx = ws_context(0.5, 3);
    const auto rows = chi_sweep([](double chi) { return compensated_gva(chi); }, ctx, {0.0, 0.5, 1.0},
                                Metric::Revenue, 10000, 2024);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_GE(rows[0].mean, rows[1].mean);
    EXPECT_GE(rows[1].mean, rows[2].mean);
    EXPECT_EQ(rows[1].chi, 0.5);
}

TEST(ChiSweep, OptimalRuleRevenueAndMaskedWelfareTrend) {
    const auto ctx = ws_context(0.5, 3);
    const auto rev = chi_sweep([&](double chi) { return revenue_optimal_mechanism(ctx, chi); }, ctx, {0.0, 0.5, 1.0},
                               Metric::Revenue, 10000, 2024);
    for (std::size_t c = 1; c < rev.size(); ++c) EXPECT_LE(rev[c].ci_low, rev[c - 1].ci_high);
    const auto wel = chi_sweep([&](double chi) { return m_gva(ctx, chi); }, ctx, {0.0, 0.5}, Metric::Welfare, 10000,
                               2024);
    EXPECT_GE(wel[0].mean, wel[1].mean);
}

TEST(EventProbability, ExactSmallNAndLimit) {
    const auto ctx = ws_context(0.5, 2);
    // h = s/2, lambda = 1/4, b = 1/2: the event is sum s_j >= n/2 + 1
    EXPECT_EQ(event_probability(ctx, 2, 20000, 1).mean, 0.0);
    const EstimateReport four = event_probability(ctx, 4, 100000, 1);
    EXPECT_TRUE(within(four.mean, four.standard_error, 1.0 / 24.0)) << four.mean;  // P[Irwin-Hall(4) >= 3]
    const EstimateReport big = event_probability(ctx, 1000, 20000, 1);
    EXPECT_NEAR(big.mean, 0.5, 0.05);
    EXPECT_LT(big.mean, 0.5);
    const auto point = make_context(grid_space(2, {0.5}, 1.0), ValuationModel::weighted_sum(0.5));
    EXPECT_EQ(event_probability(point, 50, 1000, 1).mean, 0.0);
    const auto mx = make_context(uniform_space(2, 1.0), ValuationModel::max_signal());
    EXPECT_THROW((void)event_probability(mx, 10, 10, 1), UnsupportedOperation);
}

TEST(VirtualSurplus, RevenueIdentityInExpectation) {
    const auto ctx = ws_context(1.0, 2);
    for (double chi : {0.0, 1.0}) {
        const Mechanism mech = compensated_gva(chi);
        // paired per-profile difference: revenue - (virtual surplus + compensations)
        const auto stats = monte_carlo(1, 100000, 1, [&](std::size_t k, double* slot) {
            const SignalProfile p = sample_profile(ctx.space(), 2024, k);
            const Outcome out = run(mech, p, ctx);
            slot[0] = out.revenue - metric_value(Metric::VirtualSurplus, mech, ctx, p, out) -
                      metric_value(Metric::Compensation, mech, ctx, p, out);
        });
        const EstimateReport d = stats[0].report("difference", 2024);
        EXPECT_TRUE(within(d.mean, d.standard_error, 0.0)) << "chi=" << chi << " diff=" << d.mean;
    }
}

TEST(Wallet, BidFunctionsAndMaskedCutoff) {
    const WalletReport a = wallet_report(WalletSupport::Uniform0To100, 1.0, 100000, 2024, 30.0);
    EXPECT_EQ(a.bid_at_own, 80.0);
    EXPECT_NEAR(a.winner_utility.mean, -20.0, 1.0);
    EXPECT_NEAR(a.masked_cutoff, 50.0, 1e-6);
    const WalletReport b = wallet_report(WalletSupport::Uniform1To4, 1.0, 1000, 1);
    EXPECT_NEAR(b.bid_slope, 1.0, 1e-12);
    EXPECT_NEAR(b.bid_intercept, 2.5, 1e-12);
    EXPECT_NEAR(b.masked_cutoff, 2.5, 1e-6);
    const WalletReport c = wallet_report(WalletSupport::Uniform1To4, 0.0, 1000, 1);
    EXPECT_NEAR(c.bid_slope, 2.0, 1e-12);
    EXPECT_NEAR(c.bid_intercept, 0.0, 1e-12);
    const WalletReport d = wallet_report(WalletSupport::Uniform1To4, 0.63, 1000, 1);
    EXPECT_NEAR(d.bid_slope, 1.37, 1e-12);
    EXPECT_NEAR(d.bid_intercept, 1.575, 1e-12);
}

TEST(Wallet, CursedBidIsBestResponseToItself) {
    // Discretised strategy space: against b(s_j) = slope s_j + intercept, a chi-cursed bidder
    // with signal s values winning against s_j at (1-chi)(s + s_j) + chi (s + 2.5).
    for (double chi : {0.0, 0.63, 1.0}) {
        const WalletReport rep = wallet_report(WalletSupport::Uniform1To4, chi, 10, 1);
        auto b = [&](double sj) { return rep.bid_slope * sj + rep.bid_intercept; };
        const int quad = 6000;
        for (double s : {1.3, 2.0, 2.5, 3.6}) {
            auto payoff = [&](double x) {
                double total = 0.0;
                for (int q = 0; q < quad; ++q) {
                    const double sj = 1.0 + 3.0 * (q + 0.5) / quad;
                    if (b(sj) < x) total += (1.0 - chi) * (s + sj) + chi * (s + 2.5) - b(sj);
                }
                return total / quad;
            };
            double best_x = 0.0;
            double best_u = -1e300;
            for (int g = 0; g <= 4000; ++g) {
                const double x = 1.0 + 8.0 * g / 4000.0;
                const double u = payoff(x);
                if (u > best_u + 1e-12) {
                    best_u = u;
                    best_x = x;
                }
            }
            EXPECT_NEAR(best_x, b(s), 5e-3) << "chi=" << chi << " s=" << s;
            EXPECT_GE(payoff(b(s)), best_u - 1e-6);
        }
    }
}

TEST(Metric, NamesRoundTrip) {
    for (Metric m : {Metric::Revenue, Metric::Welfare, Metric::TransfersOut, Metric::AllocationProb,
                     Metric::Compensation, Metric::VirtualSurplus})
        EXPECT_EQ(metric_from_name(metric_name(m)), m);
    EXPECT_THROW((void)metric_from_name("profit"), std::invalid_argument);
}
