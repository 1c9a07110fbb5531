#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "powersched/analysis.hpp"

using namespace powersched;

namespace {

ExperimentSpec benchmark_spec() {
    ExperimentSpec spec;
    spec.model.A = (Mat(2, 2) << 1.3, 0.0, 0.0, -1.1).finished();
    spec.model.B = (Mat(2, 1) << 0.1, 0.1).finished();
    spec.model.W = 0.001 * Mat::Identity(2, 2);
    spec.model.Q = Mat::Identity(2, 2);
    spec.model.R = Mat::Identity(1, 1);
    spec.model.Q_N = Mat::Identity(2, 2);
    spec.model.xbar0 = Vec::Zero(2);
    spec.model.X0 = 0.01 * Mat::Identity(2, 2);
    spec.model.gamma = 0.9;
    spec.ch = ChannelModel{3.0, 1.0, 3.0};
    spec.dist = UniformAttack{0.0, 1.0};
    spec.sched = GreedyKnown{};
    spec.lambda = 1.0;
    spec.horizon = 25;
    spec.trials = 150;
    spec.master_seed = 31337;
    return spec;
}

}  // namespace

TEST_CASE("exact cost of a fixed transmit power") {
    const ExperimentSpec spec = benchmark_spec();
    const struct {
        double p, cost;
    } cases[] = {
        {1.0, 10.884749601324252},
        {2.0, 20.730159094945137},
        {3.0, 30.695706550319777},
    };
    for (const auto& t : cases)
        CHECK(theoretical_cost_constant(t.p, spec.model, spec.ch, spec.dist, 1.0) ==
              Catch::Approx(t.cost).epsilon(1e-8));

    // the power price enters linearly
    const double at_01 =
        theoretical_cost_constant(3.0, spec.model, spec.ch, spec.dist, 0.1);
    CHECK(at_01 == Catch::Approx(30.695706550319777 - 0.9 * 30.0).epsilon(1e-8));

    CHECK_THROWS_AS(theoretical_cost_constant(3.5, spec.model, spec.ch, spec.dist, 1.0),
                    ConfigError);
    CHECK_THROWS_AS(theoretical_cost_constant(-0.1, spec.model, spec.ch, spec.dist, 1.0),
                    ConfigError);
    CHECK_THROWS_AS(theoretical_cost_constant(1.0, spec.model, spec.ch, spec.dist, -1.0),
                    ConfigError);
    // a power too weak to stabilize the error covariance is rejected
    CHECK_THROWS_AS(
        theoretical_cost_constant(0.05, spec.model, spec.ch, DegenerateAttack{0.5}, 1.0),
        InfeasibleError);
}

TEST_CASE("upper bound report") {
    const ExperimentSpec spec = benchmark_spec();
    const struct {
        double lam, reduced, full;
    } cases[] = {
        {0.01, 0.92263361154719847, 1.6371683173623728},
        {0.1, 1.7456314755108222, 2.4601661813259965},
        {1.0, 4.9216213458228442, 5.636156051638018},
    };
    for (const auto& t : cases) {
        const BoundReport r = upper_bound_total(spec.model, spec.ch, spec.dist, t.lam);
        CHECK(r.reduced_upper_bound == Catch::Approx(t.reduced).epsilon(1e-8));
        CHECK(r.upper_bound == Catch::Approx(t.full).epsilon(1e-8));
        CHECK(r.upper_bound > r.reduced_upper_bound);
        const ConstantOptimum opt = optimal_constant(spec.model, spec.ch, spec.dist, t.lam);
        CHECK(r.q_tilde == opt.q_tilde);
        CHECK(r.p_tilde == opt.p_tilde);
    }
}

TEST_CASE("constant-optimum bound is tight within its own family") {
    // Under a point-mass attack the fixed-power cost curve is the same
    // objective the bound minimizes, so the bound touches it at p~ and
    // lies below it everywhere else.
    const ExperimentSpec spec = benchmark_spec();
    const DegenerateAttack dist{0.5};
    const double lam = 1.0;
    const ConstantOptimum opt = optimal_constant(spec.model, spec.ch, dist, lam);
    const double at_ptilde =
        theoretical_cost_constant(opt.p_tilde, spec.model, spec.ch, dist, lam);
    CHECK(at_ptilde == Catch::Approx(opt.reduced_bound).epsilon(1e-9));
    for (double p : {0.3, 0.5, 1.0, 1.5, 2.0, 3.0})
        CHECK(theoretical_cost_constant(p, spec.model, spec.ch, dist, lam) >=
              opt.reduced_bound - 1e-8);
}

TEST_CASE("attack labels") {
    CHECK(attack_label(UniformAttack{0.0, 1.0}) == "uniform[0;1]");
    CHECK(attack_label(PoissonAttack{0.5}) == "poisson(0.5;cap=9)");
    CHECK(attack_label(PoissonAttack{1.0, 4}) == "poisson(1;cap=4)");
    CHECK(attack_label(TruncNormAttack{0.5, 0.25, 0.0, 1.0}) == "truncnorm(0.5;0.25;0;1)");
    CHECK(attack_label(DegenerateAttack{0.5}) == "degenerate(0.5)");
}

TEST_CASE("lambda sweep table") {
    ExperimentSpec tmpl = benchmark_spec();
    tmpl.horizon = 30;
    tmpl.trials = 200;
    const std::vector<double> lambdas = {0.1, 1.0};
    const auto rows = sweep_lambda_costs(lambdas, tmpl);
    REQUIRE(rows.size() == 8);

    const std::string order[] = {"greedy", "greedy_mean", "constant", "optimal_constant"};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        CHECK(rows[r].lambda == lambdas[r / 4]);
        CHECK(rows[r].scheduler == order[r % 4]);
        CHECK(std::isfinite(rows[r].cost_mean));
        CHECK(rows[r].cost_stderr > 0.0);
    }
    // greedy-style rows carry the constant-optimum bound, constant rows the
    // exact full-power cost
    CHECK(rows[0].theoretical == Catch::Approx(1.7456314755108222).epsilon(1e-8));
    CHECK(rows[1].theoretical == rows[0].theoretical);
    CHECK(rows[3].theoretical == rows[0].theoretical);
    CHECK(rows[2].theoretical == Catch::Approx(3.695706550319777).epsilon(1e-8));
    CHECK(rows[4].theoretical == Catch::Approx(4.9216213458228442).epsilon(1e-8));
    CHECK(rows[6].theoretical == Catch::Approx(30.695706550319777).epsilon(1e-8));

    CHECK_THROWS_AS(sweep_lambda_costs({0.0}, tmpl), ConfigError);
}

TEST_CASE("equal-mean attack comparison") {
    ExperimentSpec tmpl = benchmark_spec();
    const std::vector<AttackDistribution> trio = {
        UniformAttack{0.0, 1.0},
        PoissonAttack{0.5},
        TruncNormAttack{0.5, std::sqrt(1.0 / 12.0), 0.0, 1.0},
    };
    const DistComparison cmp = compare_attack_distributions(trio, tmpl);
    REQUIRE(cmp.rows.size() == 3);
    REQUIRE(cmp.pairs.size() == 3);
    for (std::size_t i = 0; i < trio.size(); ++i) {
        CHECK(cmp.rows[i].dist == attack_label(trio[i]));
        CHECK(cmp.rows[i].mean_attack == Catch::Approx(0.5).margin(1e-6));
        CHECK(std::isfinite(cmp.rows[i].cost_mean));
    }
    // the bound only depends on the attack through its mean
    CHECK(cmp.rows[1].upper_bound == Catch::Approx(cmp.rows[0].upper_bound).margin(1e-6));
    CHECK(cmp.rows[2].upper_bound == Catch::Approx(cmp.rows[0].upper_bound).margin(1e-6));
    for (const auto& pr : cmp.pairs) {
        CHECK(pr.diff == cmp.rows[pr.i].cost_mean - cmp.rows[pr.j].cost_mean);
        CHECK(pr.combined_stderr ==
              Catch::Approx(std::hypot(cmp.rows[pr.i].cost_stderr,
                                       cmp.rows[pr.j].cost_stderr)).epsilon(1e-14));
    }

    const std::vector<AttackDistribution> mixed = {UniformAttack{0.0, 1.0},
                                                   DegenerateAttack{0.7}};
    CHECK_THROWS_AS(compare_attack_distributions(mixed, tmpl), ConfigError);
    CHECK_THROWS_AS(compare_attack_distributions({}, tmpl), ConfigError);
}

TEST_CASE("power tradeoff sweep") {
    ExperimentSpec tmpl = benchmark_spec();
    tmpl.horizon = 20;
    tmpl.trials = 100;
    const auto rows = sweep_power_tradeoff({1.0}, tmpl, 0.6, 1.6, 2, 50);
    REQUIRE(rows.size() == 5);

    CHECK(rows[0].scheduler == "constant");
    CHECK(rows[0].param == 1.0);
    CHECK(rows[0].avg_power == 1.0);
    CHECK(rows[0].avg_power_stderr == 0.0);
    CHECK(rows[0].mse > 0.0);

    CHECK(rows[1].scheduler == "greedy");
    CHECK(rows[2].scheduler == "greedy");
    CHECK(rows[3].scheduler == "greedy_mean");
    CHECK(rows[4].scheduler == "greedy_mean");
    for (std::size_t r = 1; r < rows.size(); ++r) {
        CHECK(rows[r].param > 0.0);
        CHECK(rows[r].avg_power > 0.0);
        CHECK(rows[r].avg_power <= tmpl.ch.p_max);
        CHECK(std::isfinite(rows[r].mse));
    }
    // within a variant the lambda grid is ascending, so realized power falls
    CHECK(rows[1].param < rows[2].param);
    CHECK(rows[1].avg_power > rows[2].avg_power - 0.3);

    CHECK_THROWS_AS(sweep_power_tradeoff({5.0}, tmpl, 0.6, 1.6, 2, 50), ConfigError);
    CHECK_THROWS_AS(sweep_power_tradeoff({1.0}, tmpl, 1.6, 0.6, 2, 50), ConfigError);
    CHECK_THROWS_AS(sweep_power_tradeoff({1.0}, tmpl, 0.6, 1.6, 1, 50), ConfigError);
}
