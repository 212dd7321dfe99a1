#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "cursed/signal_model.hpp"

using namespace cursed;

namespace {

// sup_x |F_n(x) - F(x)| for sorted samples and a reference CDF
template <typename F>
double ks_distance(std::vector<double> xs, F ref) {
    std::sort(xs.begin(), xs.end());
    const double m = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double f = ref(xs[k]);
        d = std::max({d, std::abs(static_cast<double>(k + 1) / m - f), std::abs(f - static_cast<double>(k) / m)});
    }
    return d;
}

}  // namespace

TEST(SampleProfile, LengthAndBounds) {
    const SignalSpace space = uniform_space(3, 1.0);
    const SignalProfile p = sample_profile(space, 7, 0);
    ASSERT_EQ(p.size(), 3u);
    for (double s : p.values) {
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
    }
}

TEST(SampleProfile, GridSupportMembership) {
    const SignalSpace space = grid_space(2, {0.0, 1.0}, 1.0);
    for (std::uint64_t k = 0; k < 200; ++k)
        for (double s : sample_profile(space, 11, k).values) EXPECT_TRUE(s == 0.0 || s == 1.0);
}

TEST(SampleProfile, DeterministicInSeedAndIndex) {
    const SignalSpace space = uniform_space(4, 1.0);
    EXPECT_EQ(sample_profile(space, 99, 5), sample_profile(space, 99, 5));
    EXPECT_NE(sample_profile(space, 99, 5), sample_profile(space, 99, 6));
    EXPECT_NE(sample_profile(space, 99, 5), sample_profile(space, 98, 5));
}

TEST(Cdf, UniformValuesAndClamping) {
    EXPECT_DOUBLE_EQ(cdf(uniform_space(2, 1.0), 0.25), 0.25);
    EXPECT_DOUBLE_EQ(cdf(uniform_space(2, 100.0), 50.0), 0.5);
    EXPECT_EQ(cdf(uniform_space(2, 1.0), -0.1), 0.0);
    EXPECT_EQ(cdf(uniform_space(2, 1.0), 1.0), 1.0);
    EXPECT_EQ(cdf(uniform_space(2, 1.0), 3.0), 1.0);
}

TEST(Cdf, GridIsRightContinuousStep) {
    const SignalSpace space = grid_space(2, {0.0, 0.5, 1.0}, 1.0);
    EXPECT_NEAR(cdf(space, 0.0), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(cdf(space, 0.49), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(cdf(space, 0.5), 2.0 / 3.0, 1e-15);
    EXPECT_EQ(cdf(space, 1.0), 1.0);
}

TEST(Quantile, UniformAndShifted) {
    EXPECT_DOUBLE_EQ(quantile(uniform_space(2, 1.0), 0.5), 0.5);
    EXPECT_EQ(quantile(uniform_space(2, 1.0), 0.0), 0.0);
    EXPECT_NEAR(quantile(shifted_uniform_space(2, 1.0, 4.0), 0.5), 2.5, 1e-12);
}

TEST(Quantile, OutOfRangeIsDomainError) {
    EXPECT_THROW((void)quantile(uniform_space(2, 1.0), 1.5), std::domain_error);
    EXPECT_THROW((void)quantile(uniform_space(2, 1.0), -0.01), std::domain_error);
}

TEST(Quantile, ConsistentWithCdf) {
    const std::vector<SignalSpace> spaces{uniform_space(2, 1.0), uniform_space(2, 100.0),
                                          shifted_uniform_space(2, 1.0, 4.0),
                                          grid_space(2, equally_spaced_grid(5, 1.0), 1.0),
                                          grid_space(2, {0.0, 0.3, 0.9}, 1.0)};
    const double delta = 1e-7;
    for (const auto& space : spaces) {
        for (int k = 0; k <= 10; ++k) {
            const double p = k / 10.0;
            const double q = quantile(space, p);
            EXPECT_GE(cdf(space, q), p - 1e-12) << "p=" << p;
            if (p > 0.0) {
                EXPECT_LT(cdf(space, q - delta), p) << "p=" << p;
            }
        }
    }
}

TEST(Sampling, KolmogorovSmirnovUniform) {
    const SignalSpace space = uniform_space(2, 1.0);
    std::vector<double> xs;
    for (std::uint64_t k = 0; k < 100000; ++k) xs.push_back(sample_profile(space, 2024, k)[0]);
    EXPECT_LT(ks_distance(xs, [](double x) { return x; }), 0.01);
}

TEST(Sampling, KolmogorovSmirnovShiftedUniform) {
    const SignalSpace space = shifted_uniform_space(2, 1.0, 4.0);
    std::vector<double> xs;
    for (std::uint64_t k = 0; k < 100000; ++k) xs.push_back(sample_profile(space, 5, k)[1]);
    EXPECT_LT(ks_distance(xs, [](double x) { return std::clamp((x - 1.0) / 3.0, 0.0, 1.0); }), 0.01);
}

TEST(SignalSpace, ValidationRejectsBadInput) {
    EXPECT_THROW(validate(uniform_space(1, 1.0)), std::invalid_argument);
    SignalSpace bad = uniform_space(2, 1.0);
    bad.s_bar = 0.0;
    EXPECT_THROW(validate(bad), std::invalid_argument);
    EXPECT_THROW(validate(grid_space(2, {0.5, 0.2}, 1.0)), std::invalid_argument);
}

TEST(RandomStream, ReproducibleAndIndependentOfOrder) {
    RandomStream a(3, 17);
    RandomStream b(3, 17);
    for (int k = 0; k < 100; ++k) EXPECT_EQ(a(), b());
    RandomStream c(3, 18);
    RandomStream d(3, 17);
    EXPECT_NE(c(), d());
}
