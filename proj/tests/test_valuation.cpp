#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cursed/valuation.hpp"

using namespace cursed;

namespace {

AuctionContext ws_context(double beta, std::size_t n, double s_bar = 1.0) {
    return make_context(uniform_space(n, s_bar), ValuationModel::weighted_sum(beta));
}

ValuationModel log_concave() {
    return ValuationModel::concave_sum(ScalarMap::log1p_scaled(1.0), ScalarMap::identity(), ScalarMap::identity());
}

// composite Simpson on [a, b]
template <typename F>
double simpson(F f, double a, double b, int panels = 2000) {
    const double h = (b - a) / panels;
    double total = f(a) + f(b);
    for (int k = 1; k < panels; ++k) total += f(a + h * k) * (k % 2 ? 4.0 : 2.0);
    return total * h / 3.0;
}

}  // namespace

TEST(Value, WalletArithmetic) {
    const std::vector<double> s{30.0, 15.0};
    EXPECT_DOUBLE_EQ(value(ValuationModel::weighted_sum(1.0), s, 0), 45.0);
}

TEST(Value, MaxSignalIsProfileMax) {
    const std::vector<double> s{0.2, 0.7, 0.4};
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(value(ValuationModel::max_signal(), s, i), 0.7);
}

TEST(Value, HalfBetaThreeBidders) {
    const std::vector<double> s{0.5, 0.2, 0.2};
    EXPECT_NEAR(value(ValuationModel::weighted_sum(0.5), s, 0), 0.7, 1e-15);
}

TEST(Value, SummaryAgreesWithProfileForm) {
    const std::vector<ValuationModel> models{ValuationModel::weighted_sum(0.3), ValuationModel::max_signal(),
                                             log_concave()};
    const SignalSpace space = uniform_space(4, 1.0);
    for (const auto& model : models) {
        for (std::uint64_t k = 0; k < 200; ++k) {
            const SignalProfile p = sample_profile(space, 1, k);
            for (std::size_t i = 0; i < 4; ++i) {
                const auto others = p.without(i);
                EXPECT_NEAR(value(model, p[i], summarize(model, others)), value(model, p, i), 1e-14);
            }
        }
    }
}

TEST(Value, FactoriesRejectOutOfFamilyParameters) {
    EXPECT_THROW(ValuationModel::weighted_sum(0.0), std::invalid_argument);
    EXPECT_THROW(ValuationModel::weighted_sum(1.5), std::invalid_argument);
    EXPECT_THROW(ValuationModel::concave_sum(ScalarMap::power(2.0), ScalarMap::identity(), ScalarMap::identity()),
                 std::invalid_argument);
}

TEST(InterimMu, WalletNaiveBid) {
    const auto ctx = ws_context(1.0, 2, 100.0);
    EXPECT_DOUBLE_EQ(interim_mu(*ctx.cache, 30.0), 80.0);
}

TEST(InterimMu, MaxSignalAgainstIntegration) {
    for (std::size_t n : {2u, 3u, 5u}) {
        const auto ctx = make_context(uniform_space(n, 1.0), ValuationModel::max_signal());
        for (double s : {0.0, 0.1, 0.5, 0.77, 1.0}) {
            // E[max(s, M)] = s + int_s^1 P[M > x] dx with M the max of n-1 uniforms
            const double oracle =
                s + simpson([&](double x) { return 1.0 - std::pow(x, static_cast<double>(n - 1)); }, s, 1.0);
            EXPECT_NEAR(interim_mu(*ctx.cache, s), oracle, 1e-4) << "n=" << n << " s=" << s;
            const double nn = static_cast<double>(n);
            EXPECT_NEAR(interim_mu(*ctx.cache, s), (nn - 1.0) / nn + std::pow(s, nn) / nn, 1e-12);
        }
    }
    const auto two = make_context(uniform_space(2, 1.0), ValuationModel::max_signal());
    EXPECT_NEAR(interim_mu(*two.cache, 0.5), 0.625, 1e-12);
}

TEST(InterimMu, WeightedSumClosedForm) {
    const auto ctx = ws_context(0.5, 3);
    EXPECT_NEAR(interim_mu(*ctx.cache, 0.5), 1.0, 1e-12);
    for (double s : {0.0, 0.25, 0.9}) EXPECT_NEAR(interim_mu(*ctx.cache, s), s + 0.5, 1e-9);
}

TEST(InterimMu, ShiftedUniformMean) {
    const auto ctx = make_context(shifted_uniform_space(2, 1.0, 4.0), ValuationModel::weighted_sum(1.0));
    EXPECT_NEAR(interim_mu(*ctx.cache, 2.0), 4.5, 1e-9);
}

TEST(InterimMu, ConcaveSumAgainstNestedIntegration) {
    const auto ctx = make_context(uniform_space(3, 1.0), log_concave());
    EXPECT_FALSE(ctx.cache->closed_form());
    for (double s : {0.0, 0.3, 0.6, 1.0}) {
        const double oracle = simpson(
            [&](double a) { return simpson([&](double b) { return std::log1p(s + a + b); }, 0.0, 1.0, 200); }, 0.0,
            1.0, 200);
        EXPECT_NEAR(interim_mu(*ctx.cache, s), oracle, 3e-3) << "s=" << s;
    }
}

TEST(InterimMu, NonDecreasingAndAboveZeroOthersValue) {
    for (const auto& model : {ValuationModel::weighted_sum(0.4), ValuationModel::max_signal(), log_concave()}) {
        const auto ctx = make_context(uniform_space(3, 1.0), model);
        const auto& mu = ctx.cache->grid_mu();
        const auto& s = ctx.cache->grid_signals();
        for (std::size_t k = 1; k < mu.size(); ++k) EXPECT_GE(mu[k], mu[k - 1]) << model.name();
        for (std::size_t k = 0; k < mu.size(); ++k) {
            const double zeros[2] = {0.0, 0.0};
            EXPECT_GE(mu[k], value(model, s[k], summarize(model, zeros)) - 1e-12) << model.name();
        }
    }
}

TEST(CursedValue, ChiZeroIsTrueValue) {
    const auto ctx = make_context(uniform_space(3, 1.0), log_concave());
    for (std::uint64_t k = 0; k < 500; ++k) {
        const SignalProfile p = sample_profile(ctx.space(), 4, k);
        EXPECT_EQ(cursed_value(ctx, 0.0, p, 1), value(ctx.model(), p, 1));
    }
}

TEST(CursedValue, WalletExamples) {
    const auto ctx = ws_context(1.0, 2, 100.0);
    const SignalProfile p{{30.0, 90.0}};
    EXPECT_DOUBLE_EQ(cursed_value(ctx, 1.0, p, 0), 80.0);
    EXPECT_DOUBLE_EQ(cursed_value(ctx, 1.0, SignalProfile{{30.0, 5.0}}, 0), 80.0);
    EXPECT_DOUBLE_EQ(cursed_value(ctx, 0.5, p, 0), 100.0);
}

TEST(CursedValue, ChiOutsideUnitIntervalIsDomainError) {
    const auto ctx = ws_context(1.0, 2);
    const SignalProfile p{{0.1, 0.2}};
    EXPECT_THROW((void)cursed_value(ctx, 1.2, p, 0), std::domain_error);
    EXPECT_THROW((void)cursed_value(ctx, -0.1, p, 0), std::domain_error);
}

TEST(CursedValue, OverestimationSignDoesNotDependOnChi) {
    for (const auto& model : {ValuationModel::weighted_sum(0.5), ValuationModel::max_signal(), log_concave()}) {
        const auto ctx = make_context(uniform_space(3, 1.0), model);
        for (std::uint64_t k = 0; k < 1000; ++k) {
            const SignalProfile p = sample_profile(ctx.space(), 8, k);
            const double v = value(model, p, 0);
            auto sign = [&](double chi) {
                const double d = v - cursed_value(ctx, chi, p, 0);
                return (d > 0) - (d < 0);
            };
            EXPECT_EQ(sign(0.2), sign(1.0)) << model.name();
            EXPECT_EQ(sign(0.63), sign(0.05)) << model.name();
        }
    }
}

TEST(CursedValue, MonotoneInEverySignal) {
    const double step = 1e-3;
    for (const auto& model : {ValuationModel::weighted_sum(0.5), ValuationModel::max_signal(), log_concave()}) {
        const auto ctx = make_context(uniform_space(3, 1.0), model);
        for (double chi : {0.0, 0.5, 1.0}) {
            for (std::uint64_t k = 0; k < 300; ++k) {
                SignalProfile p = sample_profile(ctx.space(), 9, k);
                for (auto& s : p.values) s *= 1.0 - step;
                const double base = cursed_value(ctx, chi, p, 0);
                for (std::size_t j = 0; j < 3; ++j) {
                    SignalProfile up = p;
                    up.values[j] += step;
                    const double bumped = cursed_value(ctx, chi, up, 0);
                    EXPECT_GE(bumped, base - 1e-12) << model.name();
                    const bool max_flat = std::holds_alternative<MaxSignal>(model.family);
                    if (j == 0 && !max_flat) {
                        EXPECT_GT(bumped, base) << model.name();
                    }
                }
            }
        }
    }
}

TEST(VirtualValue, SpecExamples) {
    const auto ctx = ws_context(1.0, 2);
    const double half[1] = {0.5};
    EXPECT_NEAR(cursed_virtual_value(ctx, 0.0, 0.5, half), 0.5, 1e-12);
    EXPECT_NEAR(cursed_virtual_value(ctx, 1.0, 0.25, half), 0.0, 1e-12);
    const auto mx = make_context(uniform_space(2, 1.0), ValuationModel::max_signal());
    const double low[1] = {0.2};
    EXPECT_NEAR(cursed_virtual_value(mx, 0.0, 0.5, low), 0.0, 1e-9);
}

TEST(VirtualValue, AnalyticSlopeMatchesFiniteDifference) {
    for (double beta : {0.25, 1.0}) {
        const auto ctx = ws_context(beta, 3);
        for (double chi : {0.0, 0.4, 1.0}) {
            for (std::uint64_t k = 0; k < 200; ++k) {
                const SignalProfile p = sample_profile(ctx.space(), 10, k);
                const auto others = p.without(0);
                const OthersStats st = ctx.summarize(others);
                const double s = std::clamp(p[0], 1e-3, 1.0 - 1e-3);
                const double h = 1e-5;
                const double fd = (cursed_value(ctx, chi, s + h, st) - cursed_value(ctx, chi, s - h, st)) / (2 * h);
                EXPECT_NEAR(cursed_value_slope(ctx, chi, s, st), fd, 1e-6);
                // phi = v^chi - slope (1 - s); oracle built from the finite difference
                EXPECT_NEAR(cursed_virtual_value(ctx, chi, s, others), cursed_value(ctx, chi, s, st) - fd * (1.0 - s),
                            1e-6);
            }
        }
    }
}

TEST(VirtualValue, GridMarginalIsUnsupported) {
    const auto ctx = make_context(grid_space(2, {0.0, 0.5, 1.0}, 1.0), ValuationModel::weighted_sum(1.0));
    const double others[1] = {0.5};
    EXPECT_THROW((void)cursed_virtual_value(ctx, 0.5, 0.5, others), UnsupportedOperation);
}

TEST(SingleCrossing, FamiliesPassAndAntiModelFails) {
    const SignalSpace space = uniform_space(3, 1.0);
    EXPECT_TRUE(check_single_crossing(ValuationModel::weighted_sum(0.5), space, 10000, RandomStream(1)).passed);
    EXPECT_TRUE(check_single_crossing(ValuationModel::max_signal(), space, 10000, RandomStream(1)).passed);
    EXPECT_TRUE(check_single_crossing(log_concave(), space, 2000, RandomStream(1)).passed);
    const ValuationModel anti{WeightedSum{1.5}};  // aggregate construction skips the factory check
    const CheckReport r = check_single_crossing(anti, space, 10000, RandomStream(1));
    EXPECT_FALSE(r.passed);
    ASSERT_FALSE(r.witnesses.empty());
    const auto& w = r.witnesses.front();
    ASSERT_TRUE(w.agent.has_value());
    EXPECT_GT(w.margin, 0.0);
}

TEST(CursednessMonotonicity, AnalyticFamiliesAndEmpiricalConcaveSum) {
    const auto ws = ws_context(0.5, 3);
    const CheckReport a = check_cursedness_monotonicity(ws, 1.0, 2000, RandomStream(2));
    EXPECT_TRUE(a.passed);
    EXPECT_EQ(a.note, "analytic");
    const auto mx = make_context(uniform_space(3, 1.0), ValuationModel::max_signal());
    const CheckReport b = check_cursedness_monotonicity(mx, 0.5, 2000, RandomStream(2));
    EXPECT_TRUE(b.passed);
    EXPECT_EQ(b.note, "analytic");
    const auto cs = make_context(uniform_space(3, 1.0), log_concave());
    const CheckReport c = check_cursedness_monotonicity(cs, 1.0, 10000, RandomStream(2));
    EXPECT_EQ(c.note, "empirical");
    EXPECT_GT(c.metrics.at("triggered_profiles"), 0.0);
    // the weighted-sum empirical evidence agrees with its analytic flag
    EXPECT_EQ(a.max_violation, 0.0);
    EXPECT_THROW((void)check_cursedness_monotonicity(ws, 0.0, 10, RandomStream(2)), std::domain_error);
}

TEST(ValuationAssumptions, CatalogueFamiliesPass) {
    const SignalSpace space = uniform_space(3, 1.0);
    for (const auto& model : {ValuationModel::weighted_sum(0.5), ValuationModel::max_signal(), log_concave()})
        EXPECT_TRUE(check_valuation_assumptions(model, space, 2000, RandomStream(3)).passed) << model.name();
}
