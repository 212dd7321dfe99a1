#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "cursed/serialize.hpp"

using namespace cursed;

TEST(Config, DefaultsRoundTrip) {
    const ExperimentConfig c;
    EXPECT_EQ(config_from_json(json::parse(to_json(c).dump())), c);
    EXPECT_EQ(config_from_json(json::object()), c);
}

TEST(Config, FullRoundTrip) {
    ExperimentConfig c;
    c.model = ValuationModel::concave_sum(ScalarMap::log1p_scaled(2.0), ScalarMap::power(0.5), ScalarMap::affine(1.0, 0.0));
    c.space = grid_space(3, {0.0, 0.25, 1.0}, 1.0);
    c.chi = 0.3;
    c.mechanism.rule = "revenue_optimal";
    c.mechanism.grid = 256;
    c.mechanism.iterations = 20;
    c.samples = 77;
    c.seed = 12345678901234ULL;
    c.workers = 3;
    c.options.n_list = {2, 10};
    c.options.properties = {"cepic", "epbb"};
    c.options.oracle_m = {5};
    c.options.inject_broken = true;
    c.options.eps = {0.05};
    const std::string text = to_json(c).dump(2);
    EXPECT_EQ(config_from_json(json::parse(text)), c);
}

TEST(Config, UnknownKeysRejected) {
    EXPECT_THROW((void)config_from_json(json::parse(R"({"sample": 10})")), ConfigError);
    EXPECT_THROW((void)config_from_json(json::parse(R"({"mechanism": {"rule": "gva", "tie": 1}})")), ConfigError);
    EXPECT_THROW((void)config_from_json(json::parse(R"({"model": {"family": "max_signal", "beta": 1}})")),
                 ConfigError);
    EXPECT_THROW((void)config_from_json(json::parse(R"({"space": {"n": 2, "s_bar": 1, "kind": "uniform"}})")),
                 ConfigError);
}

TEST(Config, InvalidValuesRejected) {
    EXPECT_THROW((void)config_from_json(json::parse(R"({"chi": 1.2})")), ConfigError);
    EXPECT_THROW((void)config_from_json(json::parse(R"({"model": {"family": "weighted_sum", "beta": -1}})")),
                 ConfigError);
    EXPECT_THROW((void)config_from_json(json::parse(R"({"model": {"family": "linear"}})")), ConfigError);
    EXPECT_THROW((void)config_from_json(json::parse(R"({"space": {"n": 1, "s_bar": 1}})")), ConfigError);
    EXPECT_THROW((void)config_from_json(json::parse(R"({"mechanism": {"rule": "vcg"}})")), ConfigError);
    EXPECT_THROW((void)config_from_json(json::parse(R"({"seed": "abc"})")), ConfigError);
    EXPECT_THROW((void)config_from_json(json::parse(R"([1, 2])")), ConfigError);
}

TEST(Model, EachFamilyRoundTrips) {
    for (const ValuationModel& m :
         {ValuationModel::weighted_sum(0.5), ValuationModel::max_signal(),
          ValuationModel::concave_sum(ScalarMap::identity(), ScalarMap::identity(), ScalarMap::identity())})
        EXPECT_EQ(model_from_json(to_json(m)), m);
}

TEST(Space, EachMarginalRoundTrips) {
    for (const SignalSpace& s : {uniform_space(4, 100.0), grid_space(2, {0.0, 0.5, 1.0}, 1.0),
                                 shifted_uniform_space(2, 1.0, 4.0)})
        EXPECT_EQ(space_from_json(to_json(s)), s);
}

TEST(BuildMechanism, RulesAndPolicies) {
    const AuctionContext ctx = make_context(uniform_space(2, 1.0), ValuationModel::weighted_sum(1.0));
    MechanismSpec spec;
    spec.rule = "gva";
    spec.policy = "zero_transfer";
    const Mechanism m = build_mechanism(spec, ctx, 0.5);
    EXPECT_TRUE(std::holds_alternative<ZeroTransfer>(m.policy));
    EXPECT_EQ(m.chi, 0.5);
    spec.rule = "constant_offset";
    spec.offset = 0.2;
    const Mechanism c = build_mechanism(spec, ctx, 0.0);
    EXPECT_DOUBLE_EQ(critical_bid(c.rule, std::vector<double>{0.3}, ctx), 0.5);
}

TEST(Csv, OutcomeLayout) {
    std::ostringstream os;
    write_outcome_header(os, 2);
    Outcome out;
    out.winner = 0;
    out.threshold_used = 0.25;
    out.payments = {0.5, -0.125};
    out.revenue = 0.375;
    out.welfare = 1.0;
    write_outcome_row(os, SignalProfile{{0.75, 0.25}}, out);
    Outcome none;
    none.payments = {0.0, 0.0};
    write_outcome_row(os, SignalProfile{{0.5, 0.5}}, none);
    EXPECT_EQ(os.str(),
              "# cursed-outcomes v1\n"
              "s_1,s_2,winner,threshold,payment_1,payment_2,revenue,welfare\n"
              "0.75,0.25,1,0.25,0.5,-0.125,0.375,1\n"
              "0.5,0.5,0,,0,0,0,0\n");
}

TEST(Csv, EstimateLayout) {
    std::ostringstream os;
    write_estimate_header(os);
    EstimateReport r;
    r.metric = "revenue";
    r.mean = 0.5;
    r.standard_error = 0.01;
    r.sample_count = 100;
    r.seed = 7;
    r.chi = 1.0;
    r.n = 3;
    write_estimate_row(os, r);
    EXPECT_EQ(os.str(), "# cursed-estimates v1\nmetric,chi,n,mean,se,N,seed\nrevenue,1,3,0.5,0.01,100,7\n");
}

TEST(Csv, NumbersRoundTripExactly) {
    for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5, 123456789.125}) EXPECT_EQ(std::stod(io::num(x)), x);
    EXPECT_EQ(io::num(2.0), "2");
}

TEST(Json, ReportsCarryRequiredFields) {
    CheckReport r;
    r.property = "epbb";
    r.tolerance = 1e-9;
    r.record(0.5, Witness{{0.1, 0.2}, 1, 0.05, 0.0});
    r.finalize();
    const json j = to_json(r);
    EXPECT_EQ(j.at("property"), "epbb");
    EXPECT_FALSE(j.at("passed").get<bool>());
    EXPECT_EQ(j.at("witnesses").at(0).at("agent"), 1);
    EstimateReport e;
    e.metric = "welfare";
    const json je = to_json(e);
    EXPECT_TRUE(je.contains("confidence_interval_95"));
    EXPECT_FALSE(je.contains("chi"));
}
