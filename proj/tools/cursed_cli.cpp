// Command-line front end: simulate, verify, experiment, oracle-check.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cursed/cursed.hpp"

namespace fs = std::filesystem;
using namespace cursed;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;
    std::optional<double> chi;
    std::string n_list;
    std::optional<double> beta;
    std::string model;
    std::string rule;
    std::string policy;
    std::string out_dir = "out";
    std::optional<std::size_t> workers;
};

std::vector<std::size_t> parse_count_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t pos = 0;
        long long v = 0;
        try {
            v = std::stoll(item, &pos);
        } catch (const std::exception&) {
            throw ConfigError("--n: not an integer: " + item);
        }
        if (pos != item.size() || v < 1) throw ConfigError("--n: not a positive integer: " + item);
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::vector<std::string> parse_name_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

ValuationModel model_by_name(const std::string& name, std::optional<double> beta) {
    if (name == "weighted_sum") return ValuationModel::weighted_sum(beta.value_or(1.0));
    if (beta) throw ConfigError("--beta applies to weighted_sum only");
    if (name == "max_signal") return ValuationModel::max_signal();
    if (name == "concave_sum")
        return ValuationModel::concave_sum(ScalarMap::log1p_scaled(1.0), ScalarMap::identity(), ScalarMap::identity());
    throw ConfigError("unknown model '" + name + "'");
}

ExperimentConfig load_config(const CommonFlags& f) {
    ExperimentConfig cfg;
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) throw ConfigError("cannot open config " + f.config_path);
        json j;
        try {
            j = json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        cfg = config_from_json(j);
    }
    if (f.seed) cfg.seed = *f.seed;
    if (f.samples) cfg.samples = *f.samples;
    if (f.chi) {
        if (!(*f.chi >= 0.0 && *f.chi <= 1.0)) throw ConfigError("--chi must lie in [0, 1]");
        cfg.chi = *f.chi;
    }
    if (f.workers) cfg.workers = std::max<std::size_t>(*f.workers, 1);
    if (!f.model.empty()) {
        cfg.model = model_by_name(f.model, f.beta);
    } else if (f.beta) {
        if (!std::holds_alternative<WeightedSum>(cfg.model.family)) throw ConfigError("--beta applies to weighted_sum only");
        cfg.model = ValuationModel::weighted_sum(*f.beta);
    }
    if (!f.n_list.empty()) {
        cfg.options.n_list = parse_count_list(f.n_list);
        if (cfg.options.n_list.empty()) throw ConfigError("--n needs at least one count");
        cfg.space.n = cfg.options.n_list.front();
        validate(cfg.space);
    }
    if (!f.rule.empty()) cfg.mechanism.rule = f.rule;
    if (!f.policy.empty()) cfg.mechanism.policy = f.policy;
    cfg.mechanism = mechanism_from_json(to_json(cfg.mechanism));  // re-validate overrides
    return cfg;
}

void write_file(const fs::path& path, const std::string& body) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << body;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

int cmd_simulate(const ExperimentConfig& cfg, const fs::path& out_dir) {
    const AuctionContext ctx = make_context(cfg.space, cfg.model);
    const Mechanism mech = build_mechanism(cfg.mechanism, ctx, cfg.chi);
    std::ostringstream csv;
    write_outcome_header(csv, ctx.n());
    for (std::size_t k = 0; k < cfg.samples; ++k) {
        const SignalProfile profile = sample_profile(ctx.space(), cfg.seed, k);
        write_outcome_row(csv, profile, run(mech, profile, ctx));
    }
    json estimates = json::array();
    for (const auto& r : estimate_all(mech, ctx, {Metric::Revenue, Metric::Welfare, Metric::TransfersOut,
                                                  Metric::AllocationProb},
                                      cfg.samples, cfg.seed, cfg.workers))
        estimates.push_back(to_json(r));
    const json summary{{"command", "simulate"}, {"config", to_json(cfg)}, {"sample_count", cfg.samples},
                       {"estimates", estimates}};
    write_file(out_dir / "outcomes.csv", csv.str());
    write_file(out_dir / "summary.json", dump(summary));
    std::cout << dump(summary);
    return kExitOk;
}

CheckReport run_property(const std::string& name, const Mechanism& mech, const AuctionContext& ctx,
                         const SamplingPlan& plan, const ExperimentConfig& cfg) {
    if (name == "cepic") return check_cepic(mech, ctx, plan);
    if (name == "epir") return check_epir(mech, ctx, plan);
    if (name == "cepir") return check_cepir(mech, ctx, plan);
    if (name == "epbb") return check_epbb(mech, ctx, plan);
    if (name == "npt" || name == "no_positive_transfers") return check_no_positive_transfers(mech, ctx, plan);
    if (name == "allocation_monotone") return check_allocation_monotone(mech, ctx, plan);
    if (name == "chi_robustness") {
        std::vector<double> eps = cfg.options.eps;
        if (eps.empty())
            for (double e : {0.05, 0.1})
                if (cfg.chi + e <= 1.0) eps.push_back(e);
        return check_chi_robustness(mech, ctx, eps, plan);
    }
    if (name == "payment_chi_monotone") return check_payment_chi_monotone(mech.rule, ctx, {0.0, 0.25, 0.5, 0.75, 1.0}, plan);
    if (name == "single_crossing") return check_single_crossing(ctx.model(), ctx.space(), plan.profile_count, RandomStream(plan.seed, 0));
    if (name == "cursedness_monotonicity")
        return check_cursedness_monotonicity(ctx, cfg.chi, plan.profile_count, RandomStream(plan.seed, 0));
    throw ConfigError("unknown property '" + name + "'");
}

const std::vector<std::string>& known_properties() {
    static const std::vector<std::string> all{"cepic", "epir", "cepir", "epbb", "npt", "no_positive_transfers",
                                              "allocation_monotone", "chi_robustness", "payment_chi_monotone",
                                              "single_crossing", "cursedness_monotonicity"};
    return all;
}

int cmd_verify(const ExperimentConfig& cfg, std::vector<std::string> properties, const fs::path& out_dir) {
    if (properties.empty()) properties = cfg.options.properties;
    if (properties.empty()) properties = {"cepic", "epir", "cepir", "epbb", "npt", "allocation_monotone"};
    for (const auto& p : properties)
        if (std::find(known_properties().begin(), known_properties().end(), p) == known_properties().end())
            throw ConfigError("unknown property '" + p + "'");
    const AuctionContext ctx = make_context(cfg.space, cfg.model);
    const Mechanism mech = build_mechanism(cfg.mechanism, ctx, cfg.chi);
    SamplingPlan plan;
    plan.profile_count = cfg.samples;
    plan.seed = cfg.seed;
    json reports = json::array();
    bool all = true;
    for (const auto& p : properties) {
        const CheckReport r = run_property(p, mech, ctx, plan, cfg);
        all = all && r.passed;
        reports.push_back(to_json(r));
    }
    const json body{{"command", "verify"}, {"config", to_json(cfg)}, {"passed", all}, {"reports", reports}};
    write_file(out_dir / "verify.json", dump(body));
    std::cout << dump(body);
    return all ? kExitOk : kExitFailed;
}

int cmd_experiment(const std::string& name, const ExperimentConfig& cfg, bool samples_given, const fs::path& out_dir) {
    json body;
    std::ostringstream csv;
    write_estimate_header(csv);
    auto n_or = [&](std::vector<std::size_t> fallback) {
        return cfg.options.n_list.empty() ? fallback : cfg.options.n_list;
    };
    if (name == "wallet") {
        const auto res = experiments::wallet(samples_given ? cfg.samples : 1000000, cfg.seed, cfg.chi);
        body = experiments::to_json(res);
        for (const auto& w : res.reports) write_estimate_row(csv, w.winner_utility);
    } else if (name == "negative-revenue") {
        const auto res = experiments::negative_revenue(n_or({25, 50, 100}), cfg.samples, cfg.seed, cfg.workers);
        body = experiments::to_json(res);
        for (const auto& row : res.rows) {
            write_estimate_row(csv, row.transfers_out);
            write_estimate_row(csv, row.compensation);
        }
    } else if (name == "max-zero-welfare") {
        const auto rows = experiments::max_zero_welfare(n_or({2, 5}), {0.25, 1.0}, cfg.samples, cfg.seed);
        body = experiments::to_json(rows);
    } else if (name == "half-welfare") {
        const auto res = experiments::half_welfare(n_or({10, 50, 200}), 1000, cfg.samples, cfg.seed, cfg.workers);
        body = experiments::to_json(res);
        for (const auto& row : res.rows) {
            write_estimate_row(csv, row.m_gva_welfare);
            write_estimate_row(csv, row.optimal_welfare);
            write_estimate_row(csv, row.event);
        }
        write_estimate_row(csv, res.event_large_n);
    } else if (name == "rev-optimal-threshold") {
        body = experiments::to_json(experiments::rev_optimal_threshold(50));
    } else {
        throw ConfigError("unknown experiment '" + name + "'");
    }
    body["seed"] = cfg.seed;
    write_file(out_dir / (name + ".json"), dump(body));
    write_file(out_dir / (name + ".csv"), csv.str());
    std::cout << dump(body);
    return kExitOk;
}

int cmd_oracle_check(const ExperimentConfig& cfg, const std::string& m_list, bool inject_broken,
                     const fs::path& out_dir) {
    experiments::OracleSuiteOptions opt;
    if (!cfg.options.n_list.empty()) opt.n_list = cfg.options.n_list;
    if (!cfg.options.oracle_m.empty()) opt.m_list = cfg.options.oracle_m;
    if (!m_list.empty()) opt.m_list = parse_count_list(m_list);
    opt.inject_broken = inject_broken || cfg.options.inject_broken;
    for (std::size_t m : opt.m_list)
        if (m > oracle::kMaxGridPoints) throw ConfigError("oracle grid size exceeds 21");
    for (std::size_t n : opt.n_list)
        if (n < 2 || n > oracle::kMaxBidders) throw ConfigError("oracle bidder count outside [2, 4]");
    const auto insts = experiments::oracle_suite(opt);
    json body = experiments::to_json(insts);
    body["inject_broken"] = opt.inject_broken;
    for (const auto& inst : insts) {
        std::ostringstream csv;
        const oracle::GridModel gm(inst.n, inst.m, experiments::oracle_model(inst.model), inst.chi);
        experiments::write_oracle_table(csv, gm, oracle::oracle_m_gva());
        std::ostringstream file;
        file << "oracle_tables/" << inst.model << "_n" << inst.n << "_m" << inst.m << "_chi" << io::num(inst.chi)
             << ".csv";
        write_file(out_dir / file.str(), csv.str());
    }
    write_file(out_dir / "oracle_check.json", dump(body));
    std::cout << dump(json{{"suite", "oracle"}, {"passed", body["passed"]}, {"instances", insts.size()},
                           {"inject_broken", opt.inject_broken}});
    return body["passed"].get<bool>() ? kExitOk : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Threshold auctions for cursed bidders: simulate, verify, experiment, oracle-check"};
    app.require_subcommand(1);
    CommonFlags flags;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config_path, "JSON config file");
        sub->add_option("--seed", flags.seed, "base seed");
        sub->add_option("--samples", flags.samples, "number of sampled profiles");
        sub->add_option("--chi", flags.chi, "cursedness in [0, 1]");
        sub->add_option("--n", flags.n_list, "bidder count, or comma list for experiments");
        sub->add_option("--beta", flags.beta, "weighted-sum beta");
        sub->add_option("--model", flags.model, "weighted_sum | max_signal | concave_sum");
        sub->add_option("--rule", flags.rule, "gva | m_gva | revenue_optimal | masked_revenue_optimal | constant_offset");
        sub->add_option("--policy", flags.policy, "epir_compensated | zero_transfer");
        sub->add_option("--out", flags.out_dir, "output directory");
        sub->add_option("--workers", flags.workers, "worker threads (results do not depend on it)");
    };

    auto* simulate = app.add_subcommand("simulate", "run sampled profiles through a mechanism");
    add_common(simulate);

    std::string properties;
    auto* verify = app.add_subcommand("verify", "run property checkers");
    add_common(verify);
    verify->add_option("--properties", properties, "comma list of properties");

    std::string experiment_name;
    auto* experiment = app.add_subcommand("experiment", "run a canned experiment");
    add_common(experiment);
    experiment->add_option("name", experiment_name, "wallet | negative-revenue | max-zero-welfare | half-welfare | rev-optimal-threshold")
        ->required();

    std::string m_list;
    bool inject_broken = false;
    auto* oracle_check = app.add_subcommand("oracle-check", "grid equivalence suite against the brute-force oracle");
    add_common(oracle_check);
    oracle_check->add_option("--m", m_list, "comma list of grid sizes");
    oracle_check->add_flag("--inject-broken", inject_broken, "use a broken payment path (negative control)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        const ExperimentConfig cfg = load_config(flags);
        const fs::path out_dir(flags.out_dir);
        if (*simulate) return cmd_simulate(cfg, out_dir);
        if (*verify) return cmd_verify(cfg, parse_name_list(properties), out_dir);
        if (*experiment) return cmd_experiment(experiment_name, cfg, flags.samples.has_value() || !flags.config_path.empty(), out_dir);
        if (*oracle_check) return cmd_oracle_check(cfg, m_list, inject_broken, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ModelUnsupported& e) {
        std::cerr << "unsupported model: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::domain_error& e) {
        std::cerr << "domain error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailed;
    }
    return kExitUsage;
}
