#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cursed/errors.hpp"
#include "cursed/mechanism.hpp"
#include "cursed/random_stream.hpp"
#include "cursed/signal_model.hpp"
#include "cursed/valuation.hpp"

namespace cursed {

struct EstimateReport {
    std::string metric;
    double mean = 0.0;
    double standard_error = 0.0;
    std::size_t sample_count = 0;
    std::uint64_t seed = 0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double chi = std::numeric_limits<double>::quiet_NaN();
    std::size_t n = 0;
};

/// Mean via a plain ordered sum (so pointwise-larger inputs give a larger mean),
/// spread via Welford; chunks merge with Chan's update.
struct RunningStats {
    std::size_t count = 0;
    double sum = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++count;
        sum += x;
        const double d = x - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (x - mean);
    }

    void merge(const RunningStats& o) {
        if (o.count == 0) return;
        if (count == 0) {
            *this = o;
            return;
        }
        const double total = static_cast<double>(count + o.count);
        const double d = o.mean - mean;
        m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) / total;
        mean += d * static_cast<double>(o.count) / total;
        sum += o.sum;
        count += o.count;
    }

    [[nodiscard]] EstimateReport report(std::string metric, std::uint64_t seed) const {
        EstimateReport r;
        r.metric = std::move(metric);
        r.sample_count = count;
        r.seed = seed;
        if (count > 0) r.mean = sum / static_cast<double>(count);
        if (count > 1) r.standard_error = std::sqrt(std::max(m2, 0.0) / static_cast<double>(count - 1)) /
                                          std::sqrt(static_cast<double>(count));
        r.ci_low = r.mean - 1.96 * r.standard_error;
        r.ci_high = r.mean + 1.96 * r.standard_error;
        return r;
    }
};

inline constexpr std::size_t kChunkSize = 4096;

/// Runs f(sample_index, out) for every sample, where out holds `width` metric
/// slots. A NaN slot means "no observation" (used by conditional metrics).
/// Chunks are reduced in index order, so results do not depend on `workers`.
template <typename F>
std::vector<RunningStats> monte_carlo(std::size_t width, std::size_t samples, std::size_t workers, F&& f) {
    const std::size_t chunks = (samples + kChunkSize - 1) / kChunkSize;
    std::vector<std::vector<RunningStats>> partial(chunks, std::vector<RunningStats>(width));
    auto work_chunk = [&](std::size_t c) {
        std::vector<double> slot(width);
        const std::size_t end = std::min(samples, (c + 1) * kChunkSize);
        for (std::size_t k = c * kChunkSize; k < end; ++k) {
            f(k, slot.data());
            for (std::size_t m = 0; m < width; ++m)
                if (!std::isnan(slot[m])) partial[c][m].add(slot[m]);
        }
    };
    workers = std::max<std::size_t>(1, std::min(workers, chunks));
    if (workers == 1) {
        for (std::size_t c = 0; c < chunks; ++c) work_chunk(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        std::exception_ptr failure;
        std::atomic<bool> failed{false};
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t c = next++; c < chunks && !failed; c = next++) {
                    try {
                        work_chunk(c);
                    } catch (...) {
                        if (!failed.exchange(true)) failure = std::current_exception();
                    }
                }
            });
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }
    std::vector<RunningStats> total(width);
    for (const auto& chunk : partial)
        for (std::size_t m = 0; m < width; ++m) total[m].merge(chunk[m]);
    return total;
}

enum class Metric { Revenue, Welfare, TransfersOut, AllocationProb, Compensation, VirtualSurplus };

inline std::string metric_name(Metric m) {
    switch (m) {
        case Metric::Revenue: return "revenue";
        case Metric::Welfare: return "welfare";
        case Metric::TransfersOut: return "transfers_out";
        case Metric::AllocationProb: return "allocation_prob";
        case Metric::Compensation: return "compensation";
        case Metric::VirtualSurplus: return "virtual_surplus";
    }
    return "unknown";
}

inline Metric metric_from_name(const std::string& name) {
    for (Metric m : {Metric::Revenue, Metric::Welfare, Metric::TransfersOut, Metric::AllocationProb,
                     Metric::Compensation, Metric::VirtualSurplus})
        if (metric_name(m) == name) return m;
    throw std::invalid_argument("unknown metric: " + name);
}

/// Value of one metric on one executed profile.
inline double metric_value(Metric m, const Mechanism& mech, const AuctionContext& ctx, const SignalProfile& profile,
                           const Outcome& out) {
    switch (m) {
        case Metric::Revenue: return out.revenue;
        case Metric::Welfare: return out.welfare;
        case Metric::AllocationProb: return out.winner ? 1.0 : 0.0;
        case Metric::TransfersOut: {
            double total = 0.0;
            for (double p : out.payments) total += std::max(0.0, -p);
            return total;
        }
        case Metric::Compensation: {
            double total = 0.0;
            for (double c : out.compensations) total += c;
            return total;
        }
        case Metric::VirtualSurplus: {
            if (!out.winner) return 0.0;
            const std::size_t w = *out.winner;
            return cursed_virtual_value(ctx, mech.chi, profile[w], profile.without(w));
        }
    }
    return 0.0;
}

/// Estimates several metrics of the same runs.
inline std::vector<EstimateReport> estimate_all(const Mechanism& mech, const AuctionContext& ctx,
                                                const std::vector<Metric>& metrics, std::size_t samples,
                                                std::uint64_t seed, std::size_t workers = 1) {
    const auto stats = monte_carlo(metrics.size(), samples, workers, [&](std::size_t k, double* slot) {
        const SignalProfile profile = sample_profile(ctx.space(), seed, k);
        const Outcome out = run(mech, profile, ctx);
        for (std::size_t m = 0; m < metrics.size(); ++m) slot[m] = metric_value(metrics[m], mech, ctx, profile, out);
    });
    std::vector<EstimateReport> out;
    for (std::size_t m = 0; m < metrics.size(); ++m) {
        out.push_back(stats[m].report(metric_name(metrics[m]), seed));
        out.back().chi = mech.chi;
        out.back().n = ctx.n();
    }
    return out;
}

inline EstimateReport estimate(const Mechanism& mech, const AuctionContext& ctx, Metric metric, std::size_t samples,
                               std::uint64_t seed, std::size_t workers = 1) {
    return estimate_all(mech, ctx, {metric}, samples, seed, workers).front();
}

/// E[v_{i*}(s)] with i* the highest signal.
inline EstimateReport optimal_welfare(const AuctionContext& ctx, std::size_t samples, std::uint64_t seed,
                                      std::size_t workers = 1) {
    if (!check_single_crossing(ctx.model(), ctx.space(), 2000, RandomStream(seed ^ 0x5C5Cu, 0)).passed)
        throw ModelUnsupported("optimal welfare benchmark needs single crossing");
    const auto stats = monte_carlo(1, samples, workers, [&](std::size_t k, double* slot) {
        const SignalProfile profile = sample_profile(ctx.space(), seed, k);
        const ProfileAggregate agg(ctx.model(), profile.view());
        const std::size_t top = agg.argmax();
        slot[0] = value(ctx.model(), profile[top], agg.others(top));
    });
    EstimateReport r = stats[0].report("optimal_welfare", seed);
    r.n = ctx.n();
    return r;
}

/// Per-chi estimates on common random numbers (identical profiles for every chi).
inline std::vector<EstimateReport> chi_sweep(const std::function<Mechanism(double)>& factory,
                                             const AuctionContext& ctx, const std::vector<double>& chi_grid,
                                             Metric metric, std::size_t samples, std::uint64_t seed,
                                             std::size_t workers = 1) {
    std::vector<EstimateReport> out;
    for (double chi : chi_grid) {
        check_chi(chi);
        out.push_back(estimate(factory(chi), ctx, metric, samples, seed, workers));
        out.back().chi = chi;
    }
    return out;
}

/// P[(1/n) sum_j h(s_j) >= lambda + b/n] with lambda = E[h(s)] and b = h(s_bar).
inline EstimateReport event_probability(const AuctionContext& ctx, std::size_t n, std::size_t samples,
                                        std::uint64_t seed, std::size_t workers = 1) {
    const ValuationModel& model = ctx.model();
    if (!model.has_additive_others()) throw UnsupportedOperation("event probability needs an additive others term");
    if (n == 0) throw std::invalid_argument("event probability needs n >= 1");
    const double lambda = ctx.cache->mean_others_term();
    const double b = model.others_term(ctx.s_bar());
    const double cut = lambda + b / static_cast<double>(n);
    const auto stats = monte_carlo(1, samples, workers, [&](std::size_t k, double* slot) {
        RandomStream stream(seed, k);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) total += model.others_term(draw_signal(ctx.space(), stream.uniform()));
        slot[0] = total / static_cast<double>(n) >= cut ? 1.0 : 0.0;
    });
    EstimateReport r = stats[0].report("event_probability", seed);
    r.n = n;
    return r;
}

enum class WalletSupport { Uniform0To100, Uniform1To4 };

inline std::string wallet_support_name(WalletSupport s) {
    return s == WalletSupport::Uniform0To100 ? "U[0,100]" : "U[1,4]";
}

inline WalletSupport wallet_support_from_name(const std::string& name) {
    if (name == "U[0,100]") return WalletSupport::Uniform0To100;
    if (name == "U[1,4]") return WalletSupport::Uniform1To4;
    throw std::invalid_argument("unknown wallet support: " + name);
}

inline AuctionContext wallet_context(WalletSupport support) {
    SignalSpace space = support == WalletSupport::Uniform0To100 ? uniform_space(2, 100.0)
                                                                : shifted_uniform_space(2, 1.0, 4.0);
    return make_context(std::move(space), ValuationModel::weighted_sum(1.0));
}

struct WalletReport {
    WalletSupport support = WalletSupport::Uniform0To100;
    double chi = 1.0;
    double bid_slope = 0.0;      // b(s) = slope * s + intercept
    double bid_intercept = 0.0;
    double own_signal = 0.0;
    double bid_at_own = 0.0;
    EstimateReport winner_utility;  // true utility given the own signal wins
    double masked_cutoff = 0.0;     // M-GVA sells only when the loser's signal is at least this
};

/// Two-bidder wallet game with v = s_1 + s_2. Both bidders bid b(s) = v^chi(s, s) in a
/// second-price auction; the utility estimate fixes one bidder's signal at
/// `own_signal`, draws the other from the marginal and keeps `samples` winning draws.
inline WalletReport wallet_report(WalletSupport support, double chi, std::size_t samples, std::uint64_t seed,
                                  std::optional<double> own_signal = std::nullopt) {
    check_chi(chi);
    const AuctionContext ctx = wallet_context(support);
    const double lo = support == WalletSupport::Uniform0To100 ? 0.0 : 1.0;
    const double hi = ctx.s_bar();
    auto bid = [&](double s) {
        const double others[1] = {s};
        return cursed_value(ctx, chi, s, ctx.summarize(others));
    };

    WalletReport rep;
    rep.support = support;
    rep.chi = chi;
    rep.bid_slope = (bid(hi) - bid(lo)) / (hi - lo);
    rep.bid_intercept = bid(lo) - rep.bid_slope * lo;
    rep.own_signal = own_signal.value_or(support == WalletSupport::Uniform0To100 ? 30.0 : 2.5);
    rep.bid_at_own = bid(rep.own_signal);

    RunningStats utility;
    RandomStream stream(seed, 0);
    const std::size_t max_draws = samples * 10000 + 1000;
    for (std::size_t d = 0; utility.count < samples && d < max_draws; ++d) {
        const double other = draw_signal(ctx.space(), stream.uniform());
        const double other_bid = bid(other);
        if (!(rep.bid_at_own > other_bid)) continue;
        utility.add(rep.own_signal + other - other_bid);
    }
    rep.winner_utility = utility.report("wallet_winner_utility", seed);
    rep.winner_utility.chi = chi;
    rep.winner_utility.n = 2;

    const Mechanism mech = m_gva(ctx, chi);
    // the mask leaves the GVA threshold in place exactly when a sale can happen
    auto sells = [&](double loser) {
        const double others[1] = {loser};
        return critical_bid(mech.rule, others, ctx) <= loser;
    };
    if (sells(lo)) {
        rep.masked_cutoff = lo;
    } else if (!sells(hi)) {
        rep.masked_cutoff = hi;
    } else {
        double a = lo;
        double b = hi;
        for (int it = 0; it < 200 && b - a > 1e-12 * hi; ++it) {
            const double mid = 0.5 * (a + b);
            if (sells(mid)) b = mid;
            else a = mid;
        }
        rep.masked_cutoff = b;
    }
    return rep;
}

}  // namespace cursed
