#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cursed/check_report.hpp"
#include "cursed/evaluate.hpp"
#include "cursed/mechanism.hpp"
#include "cursed/scalar_map.hpp"
#include "cursed/signal_model.hpp"
#include "cursed/valuation.hpp"

namespace cursed {

using json = nlohmann::ordered_json;

/// Malformed or inconsistent configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace io {

inline void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    require_object(j, where);
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& item : j.items())
        if (!ok.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    return j.contains(key) ? get<T>(j, key, where) : fallback;
}

/// Shortest round-trip decimal form.
inline std::string num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

}  // namespace io

// ---- scalar maps, models, spaces ----

inline json to_json(const ScalarMap& m) {
    return std::visit(
        [](const auto& k) -> json {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, Identity>) return {{"map", "identity"}};
            else if constexpr (std::is_same_v<K, Affine>) return {{"map", "affine"}, {"a", k.a}, {"b", k.b}};
            else if constexpr (std::is_same_v<K, Power>) return {{"map", "power"}, {"p", k.exponent}};
            else return {{"map", "log1p"}, {"scale", k.scale}};
        },
        m.kind());
}

inline ScalarMap scalar_map_from_json(const json& j, const std::string& where) {
    io::require_object(j, where);
    const auto kind = io::get<std::string>(j, "map", where);
    try {
        if (kind == "identity") {
            io::reject_unknown_keys(j, {"map"}, where);
            return ScalarMap::identity();
        }
        if (kind == "affine") {
            io::reject_unknown_keys(j, {"map", "a", "b"}, where);
            return ScalarMap::affine(io::get<double>(j, "a", where), io::get<double>(j, "b", where));
        }
        if (kind == "power") {
            io::reject_unknown_keys(j, {"map", "p"}, where);
            return ScalarMap::power(io::get<double>(j, "p", where));
        }
        if (kind == "log1p") {
            io::reject_unknown_keys(j, {"map", "scale"}, where);
            return ScalarMap::log1p_scaled(io::get<double>(j, "scale", where));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ": unknown map '" + kind + "'");
}

inline json to_json(const ValuationModel& model) {
    return std::visit(
        [](const auto& f) -> json {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, WeightedSum>) return {{"family", "weighted_sum"}, {"beta", f.beta}};
            else if constexpr (std::is_same_v<F, MaxSignal>) return {{"family", "max_signal"}};
            else return {{"family", "concave_sum"}, {"l", to_json(f.l)}, {"g", to_json(f.g)}, {"h", to_json(f.h)}};
        },
        model.family);
}

inline ValuationModel model_from_json(const json& j) {
    const std::string where = "model";
    io::require_object(j, where);
    const auto family = io::get<std::string>(j, "family", where);
    try {
        if (family == "weighted_sum") {
            io::reject_unknown_keys(j, {"family", "beta"}, where);
            return ValuationModel::weighted_sum(io::get<double>(j, "beta", where));
        }
        if (family == "max_signal") {
            io::reject_unknown_keys(j, {"family"}, where);
            return ValuationModel::max_signal();
        }
        if (family == "concave_sum") {
            io::reject_unknown_keys(j, {"family", "l", "g", "h"}, where);
            return ValuationModel::concave_sum(scalar_map_from_json(j.at("l"), "model.l"),
                                               scalar_map_from_json(j.at("g"), "model.g"),
                                               scalar_map_from_json(j.at("h"), "model.h"));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ": unknown family '" + family + "'");
}

inline json to_json(const SignalSpace& space) {
    json marginal = std::visit(
        [](const auto& m) -> json {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, UniformIID>) return {{"kind", "uniform"}};
            else if constexpr (std::is_same_v<M, DiscreteGridIID>) return {{"kind", "grid"}, {"points", m.points}};
            else return {{"kind", "generic"}, {"quantile", to_json(m.quantile)}};
        },
        space.marginal);
    return {{"n", space.n}, {"s_bar", space.s_bar}, {"marginal", marginal}};
}

inline SignalSpace space_from_json(const json& j) {
    const std::string where = "space";
    io::reject_unknown_keys(j, {"n", "s_bar", "marginal"}, where);
    SignalSpace space;
    space.n = io::get<std::size_t>(j, "n", where);
    space.s_bar = io::get<double>(j, "s_bar", where);
    const json m = j.contains("marginal") ? j.at("marginal") : json{{"kind", "uniform"}};
    const auto kind = io::get<std::string>(m, "kind", "space.marginal");
    if (kind == "uniform") {
        io::reject_unknown_keys(m, {"kind"}, "space.marginal");
        space.marginal = UniformIID{};
    } else if (kind == "grid") {
        io::reject_unknown_keys(m, {"kind", "points"}, "space.marginal");
        space.marginal = DiscreteGridIID{io::get<std::vector<double>>(m, "points", "space.marginal")};
    } else if (kind == "generic") {
        io::reject_unknown_keys(m, {"kind", "quantile"}, "space.marginal");
        space.marginal = GenericIID{scalar_map_from_json(m.at("quantile"), "space.marginal.quantile")};
    } else {
        throw ConfigError("space.marginal: unknown kind '" + kind + "'");
    }
    try {
        validate(space);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("space: ") + e.what());
    }
    return space;
}

// ---- configuration ----

/// Mechanism descriptor: rule name, payment policy and optimiser settings.
struct MechanismSpec {
    std::string rule = "m_gva";  // gva | m_gva | revenue_optimal | masked_revenue_optimal | constant_offset
    std::string policy = "epir_compensated";  // epir_compensated | zero_transfer
    std::size_t grid = 2048;
    int iterations = 60;
    double offset = 0.0;

    friend bool operator==(const MechanismSpec&, const MechanismSpec&) = default;
};

inline const std::vector<std::string>& known_rules() {
    static const std::vector<std::string> rules{"gva", "m_gva", "revenue_optimal", "masked_revenue_optimal",
                                                "constant_offset"};
    return rules;
}

inline json to_json(const MechanismSpec& m) {
    return {{"rule", m.rule}, {"policy", m.policy}, {"grid", m.grid}, {"iterations", m.iterations},
            {"offset", m.offset}};
}

inline MechanismSpec mechanism_from_json(const json& j) {
    const std::string where = "mechanism";
    io::reject_unknown_keys(j, {"rule", "policy", "grid", "iterations", "offset"}, where);
    MechanismSpec m;
    m.rule = io::get_or<std::string>(j, "rule", m.rule, where);
    m.policy = io::get_or<std::string>(j, "policy", m.policy, where);
    m.grid = io::get_or<std::size_t>(j, "grid", m.grid, where);
    m.iterations = io::get_or<int>(j, "iterations", m.iterations, where);
    m.offset = io::get_or<double>(j, "offset", m.offset, where);
    if (std::find(known_rules().begin(), known_rules().end(), m.rule) == known_rules().end())
        throw ConfigError("mechanism: unknown rule '" + m.rule + "'");
    if (m.policy != "epir_compensated" && m.policy != "zero_transfer")
        throw ConfigError("mechanism: unknown policy '" + m.policy + "'");
    if (m.grid < 2) throw ConfigError("mechanism: grid must be at least 2");
    if (m.offset < 0.0) throw ConfigError("mechanism: offset must be non-negative");
    return m;
}

/// Command-specific options.
struct ExperimentOptions {
    std::vector<std::size_t> n_list;
    std::vector<std::string> properties;
    std::vector<std::size_t> oracle_m;
    bool inject_broken = false;
    std::vector<double> eps;

    friend bool operator==(const ExperimentOptions&, const ExperimentOptions&) = default;
};

inline json to_json(const ExperimentOptions& o) {
    return {{"n_list", o.n_list}, {"properties", o.properties}, {"oracle_m", o.oracle_m},
            {"inject_broken", o.inject_broken}, {"eps", o.eps}};
}

inline ExperimentOptions options_from_json(const json& j) {
    const std::string where = "options";
    io::reject_unknown_keys(j, {"n_list", "properties", "oracle_m", "inject_broken", "eps"}, where);
    ExperimentOptions o;
    o.n_list = io::get_or<std::vector<std::size_t>>(j, "n_list", {}, where);
    o.properties = io::get_or<std::vector<std::string>>(j, "properties", {}, where);
    o.oracle_m = io::get_or<std::vector<std::size_t>>(j, "oracle_m", {}, where);
    o.inject_broken = io::get_or<bool>(j, "inject_broken", false, where);
    o.eps = io::get_or<std::vector<double>>(j, "eps", {}, where);
    return o;
}

struct ExperimentConfig {
    ValuationModel model = ValuationModel::weighted_sum(1.0);
    SignalSpace space = uniform_space(3, 1.0);
    double chi = 0.63;
    MechanismSpec mechanism;
    std::size_t samples = 100000;
    std::uint64_t seed = 2024;
    std::size_t workers = 1;
    ExperimentOptions options;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline json to_json(const ExperimentConfig& c) {
    return {{"model", to_json(c.model)}, {"space", to_json(c.space)}, {"chi", c.chi},
            {"mechanism", to_json(c.mechanism)}, {"samples", c.samples}, {"seed", c.seed},
            {"workers", c.workers}, {"options", to_json(c.options)}};
}

inline ExperimentConfig config_from_json(const json& j) {
    const std::string where = "config";
    io::reject_unknown_keys(j, {"model", "space", "chi", "mechanism", "samples", "seed", "workers", "options"}, where);
    ExperimentConfig c;
    if (j.contains("model")) c.model = model_from_json(j.at("model"));
    if (j.contains("space")) c.space = space_from_json(j.at("space"));
    c.chi = io::get_or<double>(j, "chi", c.chi, where);
    if (!(c.chi >= 0.0 && c.chi <= 1.0)) throw ConfigError("config: chi must lie in [0, 1]");
    if (j.contains("mechanism")) c.mechanism = mechanism_from_json(j.at("mechanism"));
    c.samples = io::get_or<std::size_t>(j, "samples", c.samples, where);
    c.seed = io::get_or<std::uint64_t>(j, "seed", c.seed, where);
    c.workers = io::get_or<std::size_t>(j, "workers", c.workers, where);
    if (j.contains("options")) c.options = options_from_json(j.at("options"));
    return c;
}

inline Mechanism build_mechanism(const MechanismSpec& spec, const AuctionContext& ctx, double chi) {
    const PaymentPolicy policy = spec.policy == "zero_transfer" ? PaymentPolicy{ZeroTransfer{}}
                                                                : PaymentPolicy{EpirCompensated{}};
    if (spec.rule == "m_gva") {
        Mechanism m = m_gva(ctx, chi);
        m.policy = policy;
        return m;
    }
    ThresholdRule rule;
    if (spec.rule == "gva") rule = gva_rule();
    else if (spec.rule == "revenue_optimal") rule = revenue_optimal_rule(ctx, chi, spec.grid, spec.iterations);
    else if (spec.rule == "masked_revenue_optimal") rule = mask(revenue_optimal_rule(ctx, chi, spec.grid, spec.iterations));
    else if (spec.rule == "constant_offset") rule = {ConstantOffset{spec.offset}};
    else throw ConfigError("unknown rule '" + spec.rule + "'");
    return {rule, chi, policy};
}

// ---- reports ----

inline json to_json(const CheckReport& r) {
    json witnesses = json::array();
    for (const auto& w : r.witnesses) {
        json jw{{"profile", w.profile}, {"margin", w.margin}};
        if (w.agent) jw["agent"] = *w.agent;
        if (w.deviation) jw["deviation"] = *w.deviation;
        witnesses.push_back(jw);
    }
    json metrics = json::object();
    for (const auto& [k, v] : r.metrics) metrics[k] = v;
    json out{{"property", r.property},         {"passed", r.passed},   {"samples_checked", r.samples_checked},
             {"max_violation", r.max_violation}, {"tolerance", r.tolerance}, {"witnesses", witnesses},
             {"metrics", metrics}};
    if (!r.note.empty()) out["note"] = r.note;
    return out;
}

inline json to_json(const EstimateReport& r) {
    json out{{"metric", r.metric}, {"mean", r.mean}, {"standard_error", r.standard_error},
             {"sample_count", r.sample_count}, {"seed", r.seed},
             {"confidence_interval_95", json::array({r.ci_low, r.ci_high})}};
    if (!std::isnan(r.chi)) out["chi"] = r.chi;
    if (r.n) out["n"] = r.n;
    return out;
}

inline json to_json(const WalletReport& w) {
    return {{"support", wallet_support_name(w.support)},
            {"chi", w.chi},
            {"bid_function", {{"slope", w.bid_slope}, {"intercept", w.bid_intercept}}},
            {"own_signal", w.own_signal},
            {"bid_at_own_signal", w.bid_at_own},
            {"winner_utility", to_json(w.winner_utility)},
            {"m_gva_sells_when_loser_signal_at_least", w.masked_cutoff}};
}

// ---- CSV ----

inline constexpr const char* kOutcomeCsvVersion = "# cursed-outcomes v1";
inline constexpr const char* kEstimateCsvVersion = "# cursed-estimates v1";
inline constexpr const char* kMuCsvVersion = "# cursed-interim-mu v1";

inline void write_outcome_header(std::ostream& os, std::size_t n) {
    os << kOutcomeCsvVersion << '\n';
    for (std::size_t i = 1; i <= n; ++i) os << "s_" << i << ',';
    os << "winner,threshold";
    for (std::size_t i = 1; i <= n; ++i) os << ",payment_" << i;
    os << ",revenue,welfare\n";
}

/// winner is 1-based, 0 when nobody wins; threshold is blank without a winner.
inline void write_outcome_row(std::ostream& os, const SignalProfile& s, const Outcome& out) {
    for (double x : s.values) os << io::num(x) << ',';
    os << (out.winner ? *out.winner + 1 : 0) << ',';
    if (out.threshold_used) os << io::num(*out.threshold_used);
    for (double p : out.payments) os << ',' << io::num(p);
    os << ',' << io::num(out.revenue) << ',' << io::num(out.welfare) << '\n';
}

inline void write_estimate_header(std::ostream& os) {
    os << kEstimateCsvVersion << '\n' << "metric,chi,n,mean,se,N,seed\n";
}

inline void write_estimate_row(std::ostream& os, const EstimateReport& r) {
    os << r.metric << ',' << (std::isnan(r.chi) ? std::string() : io::num(r.chi)) << ',' << r.n << ','
       << io::num(r.mean) << ',' << io::num(r.standard_error) << ',' << r.sample_count << ',' << r.seed << '\n';
}

inline void write_mu_grid(std::ostream& os, const InterimCache& cache) {
    os << kMuCsvVersion << '\n' << "s,mu\n";
    const auto& s = cache.grid_signals();
    const auto& mu = cache.grid_mu();
    for (std::size_t k = 0; k < s.size(); ++k) os << io::num(s[k]) << ',' << io::num(mu[k]) << '\n';
}

}  // namespace cursed
