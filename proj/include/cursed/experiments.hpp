#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "cursed/evaluate.hpp"
#include "cursed/mechanism.hpp"
#include "cursed/oracle.hpp"
#include "cursed/serialize.hpp"
#include "cursed/signal_model.hpp"
#include "cursed/valuation.hpp"
#include "cursed/verify.hpp"

namespace cursed::experiments {

inline const std::vector<std::string>& names() {
    static const std::vector<std::string> all{"wallet", "negative-revenue", "max-zero-welfare", "half-welfare",
                                              "rev-optimal-threshold"};
    return all;
}

// ---- wallet ----

struct WalletResult {
    std::vector<WalletReport> reports;  // [0] is U[0,100] at chi = 1, s = 30
};

inline WalletResult wallet(std::size_t samples, std::uint64_t seed, double extra_chi) {
    WalletResult r;
    r.reports.push_back(wallet_report(WalletSupport::Uniform0To100, 1.0, samples, seed, 30.0));
    for (double chi : {1.0, 0.0, extra_chi}) r.reports.push_back(wallet_report(WalletSupport::Uniform1To4, chi, samples, seed));
    return r;
}

inline json to_json(const WalletResult& r) {
    json rows = json::array();
    for (const auto& w : r.reports) rows.push_back(cursed::to_json(w));
    return {{"experiment", "wallet"}, {"reports", rows}};
}

// ---- negative revenue ----

/// Transfers out of the seller claimed for compensated GVA with beta = 1/2, chi = 1.
inline double negative_revenue_claim(std::size_t n) {
    const double nn = static_cast<double>(n);
    return nn / 4.0 * std::sqrt((nn - 1.0) / (24.0 * std::numbers::pi));
}

/// n * E[max(0, (n-1)/4 - (1/2) sum_{j != i} s_j)] under the normal approximation.
inline double negative_revenue_normal_approx(std::size_t n) { return 2.0 * negative_revenue_claim(n); }

struct NegativeRevenueRow {
    std::size_t n = 0;
    EstimateReport transfers_out;
    EstimateReport compensation;  // sum of all p_i(0, s_{-i}), winner included
    double claim = 0.0;
    double rel_error = 0.0;
    double normal_approx = 0.0;
    double rel_error_normal_approx = 0.0;
};

struct NegativeRevenueResult {
    std::vector<NegativeRevenueRow> rows;
    double fitted_exponent = 0.0;
};

/// Least-squares slope of log y against log x.
inline double fitted_exponent(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t k = x.size();
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(k);
    my /= static_cast<double>(k);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

inline NegativeRevenueResult negative_revenue(const std::vector<std::size_t>& n_list, std::size_t samples,
                                              std::uint64_t seed, std::size_t workers) {
    NegativeRevenueResult res;
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t n : n_list) {
        const AuctionContext ctx = make_context(uniform_space(n, 1.0), ValuationModel::weighted_sum(0.5));
        const auto est = estimate_all(compensated_gva(1.0), ctx, {Metric::TransfersOut, Metric::Compensation},
                                      samples, seed, workers);
        NegativeRevenueRow row;
        row.n = n;
        row.transfers_out = est[0];
        row.compensation = est[1];
        row.claim = negative_revenue_claim(n);
        row.rel_error = std::abs(row.transfers_out.mean - row.claim) / row.claim;
        row.normal_approx = negative_revenue_normal_approx(n);
        row.rel_error_normal_approx = std::abs(row.transfers_out.mean - row.normal_approx) / row.normal_approx;
        xs.push_back(static_cast<double>(n));
        ys.push_back(row.transfers_out.mean);
        res.rows.push_back(row);
    }
    if (xs.size() >= 2) res.fitted_exponent = fitted_exponent(xs, ys);
    return res;
}

inline json to_json(const NegativeRevenueResult& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"n", row.n},
                        {"transfers_out", cursed::to_json(row.transfers_out)},
                        {"compensation_all_agents", cursed::to_json(row.compensation)},
                        {"claimed_n_over_4_formula", row.claim},
                        {"rel_error_vs_claim", row.rel_error},
                        {"normal_approx_n_over_2_formula", row.normal_approx},
                        {"rel_error_vs_normal_approx", row.rel_error_normal_approx}});
    return {{"experiment", "negative-revenue"}, {"rows", rows}, {"fitted_exponent", r.fitted_exponent}};
}

// ---- max-signal collapse ----

struct MaxZeroRow {
    std::size_t n = 0;
    double chi = 0.0;
    std::size_t samples = 0;
    std::size_t allocations = 0;
    double welfare_sum = 0.0;
    double revenue_abs_sum = 0.0;
};

inline std::vector<MaxZeroRow> max_zero_welfare(const std::vector<std::size_t>& n_list,
                                                const std::vector<double>& chis, std::size_t samples,
                                                std::uint64_t seed) {
    std::vector<MaxZeroRow> rows;
    for (std::size_t n : n_list)
        for (double chi : chis) {
            const AuctionContext ctx = make_context(uniform_space(n, 1.0), ValuationModel::max_signal());
            const Mechanism mech = m_gva(ctx, chi);
            MaxZeroRow row;
            row.n = n;
            row.chi = chi;
            row.samples = samples;
            for (std::size_t k = 0; k < samples; ++k) {
                const Outcome out = run(mech, sample_profile(ctx.space(), seed, k), ctx);
                if (out.winner) ++row.allocations;
                row.welfare_sum += out.welfare;
                for (double p : out.payments) row.revenue_abs_sum += std::abs(p);
            }
            rows.push_back(row);
        }
    return rows;
}

inline json to_json(const std::vector<MaxZeroRow>& rows) {
    json out = json::array();
    for (const auto& r : rows)
        out.push_back({{"n", r.n}, {"chi", r.chi}, {"samples", r.samples}, {"allocations", r.allocations},
                       {"welfare_sum", r.welfare_sum}, {"abs_payment_sum", r.revenue_abs_sum}});
    return {{"experiment", "max-zero-welfare"}, {"rows", out}};
}

// ---- half welfare ----

struct HalfWelfareRow {
    std::size_t n = 0;
    EstimateReport m_gva_welfare;
    EstimateReport optimal_welfare;
    double ratio = 0.0;
    EstimateReport event;
};

struct HalfWelfareResult {
    std::vector<HalfWelfareRow> rows;
    EstimateReport event_large_n;  // n = event_n
};

inline HalfWelfareResult half_welfare(const std::vector<std::size_t>& n_list, std::size_t event_n, std::size_t samples,
                                      std::uint64_t seed, std::size_t workers, double beta = 0.5, double chi = 1.0) {
    HalfWelfareResult res;
    const ValuationModel model = ValuationModel::weighted_sum(beta);
    for (std::size_t n : n_list) {
        const AuctionContext ctx = make_context(uniform_space(n, 1.0), model);
        HalfWelfareRow row;
        row.n = n;
        row.m_gva_welfare = estimate(m_gva(ctx, chi), ctx, Metric::Welfare, samples, seed, workers);
        row.optimal_welfare = optimal_welfare(ctx, samples, seed, workers);
        row.ratio = row.optimal_welfare.mean > 0.0 ? row.m_gva_welfare.mean / row.optimal_welfare.mean : 0.0;
        row.event = event_probability(ctx, n, samples, seed, workers);
        res.rows.push_back(row);
    }
    const AuctionContext big = make_context(uniform_space(std::max<std::size_t>(event_n, 2), 1.0), model);
    res.event_large_n = event_probability(big, event_n, samples, seed, workers);
    return res;
}

inline json to_json(const HalfWelfareResult& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"n", row.n},
                        {"m_gva_welfare", cursed::to_json(row.m_gva_welfare)},
                        {"optimal_welfare", cursed::to_json(row.optimal_welfare)},
                        {"ratio", row.ratio},
                        {"event_probability", cursed::to_json(row.event)}});
    return {{"experiment", "half-welfare"}, {"rows", rows}, {"event_probability_large_n", cursed::to_json(r.event_large_n)}};
}

// ---- revenue-optimal thresholds ----

struct ThresholdRow {
    double chi = 0.0;
    double s_other = 0.0;
    double optimizer = 0.0;
    double closed_form = 0.0;
};

/// Two bidders, v = s_1 + s_2, U[0,1].
inline double rev_optimal_closed_form(double chi, double s_other) {
    if (chi == 1.0) return std::max(0.25, s_other);
    if (chi == 0.0) return std::max((1.0 - s_other) / 2.0, s_other);
    throw std::invalid_argument("closed form known only for chi in {0, 1}");
}

inline std::vector<ThresholdRow> rev_optimal_threshold(std::size_t points) {
    const AuctionContext ctx = make_context(uniform_space(2, 1.0), ValuationModel::weighted_sum(1.0));
    std::vector<ThresholdRow> rows;
    for (double chi : {1.0, 0.0}) {
        const ThresholdRule rule = revenue_optimal_rule(ctx, chi);
        for (std::size_t k = 0; k < points; ++k) {
            ThresholdRow row;
            row.chi = chi;
            row.s_other = static_cast<double>(k) / static_cast<double>(points - 1);
            const double others[1] = {row.s_other};
            row.optimizer = critical_bid(rule, others, ctx);
            row.closed_form = rev_optimal_closed_form(chi, row.s_other);
            rows.push_back(row);
        }
    }
    return rows;
}

inline json to_json(const std::vector<ThresholdRow>& rows) {
    json out = json::array();
    double worst = 0.0;
    for (const auto& r : rows) {
        out.push_back({{"chi", r.chi}, {"s_other", r.s_other}, {"optimizer", r.optimizer}, {"closed_form", r.closed_form}});
        worst = std::max(worst, std::abs(r.optimizer - r.closed_form));
    }
    return {{"experiment", "rev-optimal-threshold"}, {"rows", out}, {"max_abs_error", worst}};
}

// ---- oracle suite ----

struct OracleInstance {
    std::string model;
    std::size_t n = 0;
    std::size_t m = 0;
    double chi = 0.0;
    std::vector<CheckReport> checks;

    [[nodiscard]] bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const CheckReport& c) { return c.passed; });
    }
};

struct OracleSuiteOptions {
    std::vector<std::size_t> n_list{2, 3};
    std::vector<std::size_t> m_list{5, 11};
    std::vector<double> chis{0.0, 0.5, 1.0};
    bool inject_broken = false;  // mechanism pays the winner v^chi at its own report
};

inline std::vector<std::pair<std::string, ValuationModel>> oracle_models() {
    return {{"weighted_sum_0.5", ValuationModel::weighted_sum(0.5)},
            {"weighted_sum_1", ValuationModel::weighted_sum(1.0)},
            {"max_signal", ValuationModel::max_signal()}};
}

/// Payments, truthful regret and optimiser thresholds on one grid instance.
inline OracleInstance oracle_instance(const std::string& model_name, const ValuationModel& model, std::size_t n,
                                      std::size_t m, double chi, bool inject_broken) {
    const oracle::GridModel gm(n, m, model, chi);
    const AuctionContext ctx = gm.matched_context();
    OracleInstance inst{model_name, n, m, chi, {}};
    const PaymentPolicy policy = inject_broken ? PaymentPolicy{RealizedCursedValue{}} : PaymentPolicy{EpirCompensated{}};
    const double regret_tol = 1e-9 * static_cast<double>(gm.scale());

    const ThresholdRule rev_rule = revenue_optimal_rule(ctx, chi);
    const ThresholdRule rev_table = tabulate(rev_rule, ctx, gm.points());
    const Mechanism gva{gva_rule(), chi, policy};
    Mechanism mgva = m_gva(ctx, chi);
    mgva.policy = policy;
    const Mechanism rev{rev_table, chi, policy};

    inst.checks.push_back(oracle::compare_payments(gm, gva, ctx, oracle::oracle_gva(), "payments_compensated_gva"));
    inst.checks.push_back(oracle::compare_payments(gm, mgva, ctx, oracle::oracle_m_gva(), "payments_m_gva"));
    inst.checks.push_back(oracle::compare_payments(gm, rev, ctx, oracle::oracle_tabulated(rev_table),
                                                   "payments_revenue_optimal"));

    for (const auto& [label, mech] : {std::pair<std::string, const Mechanism*>{"regret_m_gva", &mgva},
                                      std::pair<std::string, const Mechanism*>{"regret_revenue_optimal", &rev}}) {
        CheckReport rep;
        rep.property = label;
        rep.tolerance = regret_tol;
        for (double s : gm.points()) {
            const oracle::BestResponse br = oracle::brute_force_best_response(gm, *mech, ctx, 0, s);
            const double regret = static_cast<double>(br.max_regret);
            rep.observe(regret);
            std::vector<double> prof{s};
            prof.insert(prof.end(), br.worst_others.begin(), br.worst_others.end());
            rep.record(regret, Witness{prof, 0, br.best_bid, 0.0});
            ++rep.samples_checked;
        }
        rep.finalize();
        inst.checks.push_back(rep);
    }

    CheckReport thr;
    thr.property = "threshold_within_one_spacing";
    thr.tolerance = gm.spacing() + 1e-9;
    for (const auto& [others, t] : std::get<TabulatedGrid>(rev_table.kind).table) {
        const double brute = oracle::brute_force_rev_optimal_threshold(gm, others);
        const double gap = std::abs(brute - t);
        thr.observe(gap);
        thr.record(gap, Witness{others, std::nullopt, t, 0.0});
        ++thr.samples_checked;
    }
    thr.finalize();
    inst.checks.push_back(thr);
    return inst;
}

inline std::vector<OracleInstance> oracle_suite(const OracleSuiteOptions& opt) {
    for (std::size_t m : opt.m_list)
        if (m < 1 || m > oracle::kMaxGridPoints) throw std::invalid_argument("oracle grid size outside [1, 21]");
    for (std::size_t n : opt.n_list)
        if (n < 2 || n > oracle::kMaxBidders) throw std::invalid_argument("oracle bidder count outside [2, 4]");
    std::vector<OracleInstance> out;
    for (const auto& [name, model] : oracle_models())
        for (std::size_t n : opt.n_list)
            for (std::size_t m : opt.m_list)
                for (double chi : opt.chis) out.push_back(oracle_instance(name, model, n, m, chi, opt.inject_broken));
    return out;
}

inline json to_json(const std::vector<OracleInstance>& insts) {
    json rows = json::array();
    bool all = true;
    for (const auto& inst : insts) {
        json checks = json::array();
        for (const auto& c : inst.checks) checks.push_back(cursed::to_json(c));
        rows.push_back({{"model", inst.model}, {"n", inst.n}, {"m", inst.m}, {"chi", inst.chi},
                        {"passed", inst.passed()}, {"checks", checks}});
        all = all && inst.passed();
    }
    return {{"suite", "oracle"}, {"passed", all}, {"instances", rows}};
}

inline ValuationModel oracle_model(const std::string& name) {
    for (const auto& [label, model] : oracle_models())
        if (label == name) return model;
    throw std::invalid_argument("unknown oracle model '" + name + "'");
}

/// Every grid profile with the oracle's outcome, in the outcomes CSV layout.
inline void write_oracle_table(std::ostream& os, const oracle::GridModel& gm, const oracle::OracleMechanism& mech) {
    const oracle::OracleMechanism resolved = oracle::resolve(gm, mech);
    write_outcome_header(os, gm.n());
    oracle::detail::for_each_profile(gm.points(), gm.n(), [&](const std::vector<double>& s) {
        const oracle::OracleOutcome out = oracle::exact_outcome(gm, resolved, s);
        for (double x : s) os << io::num(x) << ',';
        os << (out.winner ? *out.winner + 1 : 0) << ',';
        if (out.winner) os << io::num(out.thresholds[*out.winner]);
        for (oracle::Real p : out.payments) os << ',' << io::num(static_cast<double>(p));
        os << ',' << io::num(static_cast<double>(out.revenue)) << ',' << io::num(static_cast<double>(out.welfare))
           << '\n';
    });
}

}  // namespace cursed::experiments
