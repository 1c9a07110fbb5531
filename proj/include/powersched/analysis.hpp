#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "powersched/channel.hpp"
#include "powersched/errors.hpp"
#include "powersched/linalg.hpp"
#include "powersched/model.hpp"
#include "powersched/sched.hpp"
#include "powersched/sim.hpp"

namespace powersched {

// Exact reduced cost of transmitting a fixed power every slot: the mean
// drop rate q^ feeds a discounted Lyapunov weight Theta^, giving
//   [gamma tr(Theta^ W) + lambda p] / (1 - gamma) + tr(Theta^ X0).
inline double theoretical_cost_constant(double p, const SystemModel& m,
                                        const ChannelModel& ch,
                                        const AttackDistribution& dist, double lambda) {
    m.validate(/*infinite_horizon=*/true);
    ch.validate();
    if (p < 0.0 || p > ch.p_max)
        throw ConfigError("theoretical_cost_constant: p must lie in [0, p_max]");
    if (lambda < 0.0) throw ConfigError("theoretical_cost_constant: lambda must be >= 0");
    double q_hat = 0.0;
    for (const auto& node : attack_nodes(dist, 4096))
        q_hat += node.prob * ch.drop_prob(p, node.a);
    const Mat Sigma = riccati_stationary(m).Sigma;
    const Mat Theta = dlyap_discounted(m.A, Sigma, m.gamma * q_hat);
    const double g = m.gamma;
    return (g * (Theta * m.W).trace() + lambda * p) / (1.0 - g) + (Theta * m.X0).trace();
}

struct BoundReport {
    double q_tilde = 1.0;
    double p_tilde = 0.0;
    Mat Theta_tilde;
    double upper_bound = 0.0;          // includes the policy-independent gamma tr(PW) term
    double reduced_upper_bound = 0.0;  // drops it, matching the reported reduced cost
};

inline BoundReport upper_bound_total(const SystemModel& m, const ChannelModel& ch,
                                     const AttackDistribution& dist, double lambda) {
    const ConstantOptimum opt = optimal_constant(m, ch, dist, lambda);
    BoundReport report;
    report.q_tilde = opt.q_tilde;
    report.p_tilde = opt.p_tilde;
    report.Theta_tilde = opt.Theta_tilde;
    report.upper_bound = opt.bound;
    report.reduced_upper_bound = opt.reduced_bound;
    return report;
}

inline std::string attack_label(const AttackDistribution& dist) {
    char buf[96];
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, UniformAttack>) {
                std::snprintf(buf, sizeof buf, "uniform[%g;%g]", d.lo, d.hi);
            } else if constexpr (std::is_same_v<T, PoissonAttack>) {
                std::snprintf(buf, sizeof buf, "poisson(%g;cap=%d)", d.rate, poisson_cap(d));
            } else if constexpr (std::is_same_v<T, TruncNormAttack>) {
                std::snprintf(buf, sizeof buf, "truncnorm(%g;%g;%g;%g)", d.mu, d.sigma, d.lo,
                              d.hi);
            } else {
                std::snprintf(buf, sizeof buf, "degenerate(%g)", d.value);
            }
        },
        dist);
    return buf;
}

struct PowerSweepRow {
    std::string scheduler;  // "constant", "greedy", "greedy_mean"
    double param = 0.0;     // constant power, or lambda for greedy rows
    double avg_power = 0.0;
    double avg_power_stderr = 0.0;
    double mse = 0.0;
    double mse_stderr = 0.0;
};

namespace detail {

inline AggregateReport run_variant(ExperimentSpec spec, const SchedulerSpec& sched,
                                   double lambda) {
    spec.sched = sched;
    spec.lambda = lambda;
    return run_monte_carlo(spec);
}

// Average transmitted power is monotone decreasing in lambda, so a log-
// scale bisection finds the multiplier realizing a target power.
inline double lambda_for_power(const ExperimentSpec& tmpl, const SchedulerSpec& sched,
                               double target, std::uint64_t probe_trials) {
    ExperimentSpec probe = tmpl;
    probe.trials = probe_trials;
    double lo = 1e-6, hi = 1e6;
    for (int it = 0; it < 16; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (run_variant(probe, sched, mid).power_avg.mean > target)
            lo = mid;  // too much power: raise the price
        else
            hi = mid;
    }
    return std::sqrt(lo * hi);
}

}  // namespace detail

// Power/accuracy tradeoff table: constant policies at the given powers,
// greedy variants across a lambda grid whose realized average powers span
// [power_lo, power_hi].
inline std::vector<PowerSweepRow> sweep_power_tradeoff(const std::vector<double>& powers,
                                                       const ExperimentSpec& tmpl,
                                                       double power_lo = 0.4,
                                                       double power_hi = 1.8,
                                                       int n_lambda = 16,
                                                       std::uint64_t probe_trials = 500) {
    tmpl.validate();
    if (!(power_hi > power_lo) || power_lo < 0.0)
        throw ConfigError("sweep_power_tradeoff: need 0 <= power_lo < power_hi");
    if (n_lambda < 2) throw ConfigError("sweep_power_tradeoff: n_lambda must be >= 2");
    std::vector<PowerSweepRow> rows;
    for (double p : powers) {
        if (p < 0.0 || p > tmpl.ch.p_max)
            throw ConfigError("sweep_power_tradeoff: power outside [0, p_max]");
        const AggregateReport r = detail::run_variant(tmpl, ConstantPower{p}, tmpl.lambda);
        rows.push_back({"constant", p, r.power_avg.mean, r.power_avg.std_err,
                        r.mse_avg.mean, r.mse_avg.std_err});
    }
    const std::pair<std::string, SchedulerSpec> variants[] = {
        {"greedy", SchedulerSpec{GreedyKnown{}}},
        {"greedy_mean", SchedulerSpec{GreedyMean{}}},
    };
    for (const auto& [name, sched] : variants) {
        // High lambda suppresses transmission, so it maps to the low end
        // of the power range.
        const double lam_hi = detail::lambda_for_power(tmpl, sched, power_lo, probe_trials);
        const double lam_lo = detail::lambda_for_power(tmpl, sched, power_hi, probe_trials);
        const double ratio = lam_hi / lam_lo;
        for (int i = 0; i < n_lambda; ++i) {
            const double lam =
                lam_lo * std::pow(ratio, static_cast<double>(i) / (n_lambda - 1));
            const AggregateReport r = detail::run_variant(tmpl, sched, lam);
            rows.push_back({name, lam, r.power_avg.mean, r.power_avg.std_err,
                            r.mse_avg.mean, r.mse_avg.std_err});
        }
    }
    return rows;
}

struct LambdaSweepRow {
    double lambda = 0.0;
    std::string scheduler;
    double cost_mean = 0.0;
    double cost_stderr = 0.0;
    double theoretical = 0.0;  // constant rows: exact cost; others: constant-optimum bound
};

// Reduced cost versus tradeoff multiplier for the full policy lineup; the
// theoretical column carries the matching closed-form value per row.
inline std::vector<LambdaSweepRow> sweep_lambda_costs(const std::vector<double>& lambdas,
                                                      const ExperimentSpec& tmpl) {
    tmpl.validate();
    std::vector<LambdaSweepRow> rows;
    for (double lam : lambdas) {
        if (!(lam > 0.0)) throw ConfigError("sweep_lambda_costs: lambdas must be > 0");
        const double bound =
            upper_bound_total(tmpl.model, tmpl.ch, tmpl.dist, lam).reduced_upper_bound;
        const double const_theory =
            theoretical_cost_constant(tmpl.ch.p_max, tmpl.model, tmpl.ch, tmpl.dist, lam);
        const std::tuple<std::string, SchedulerSpec, double> variants[] = {
            {"greedy", SchedulerSpec{GreedyKnown{}}, bound},
            {"greedy_mean", SchedulerSpec{GreedyMean{}}, bound},
            {"constant", SchedulerSpec{ConstantPower{tmpl.ch.p_max}}, const_theory},
            {"optimal_constant", SchedulerSpec{OptimalConstant{}}, bound},
        };
        for (const auto& [name, sched, theory] : variants) {
            const AggregateReport r = detail::run_variant(tmpl, sched, lam);
            rows.push_back({lam, name, r.reduced_cost.mean, r.reduced_cost.std_err, theory});
        }
    }
    return rows;
}

struct DistCompareRow {
    std::string dist;
    double mean_attack = 0.0;
    double cost_mean = 0.0;
    double cost_stderr = 0.0;
    double upper_bound = 0.0;
};

struct DistComparison {
    std::vector<DistCompareRow> rows;
    struct PairDiff {
        std::size_t i = 0;
        std::size_t j = 0;
        double diff = 0.0;
        double combined_stderr = 0.0;
    };
    std::vector<PairDiff> pairs;
};

// Greedy performance across attack laws sharing one mean: the policy only
// senses the interference level, so equal-mean families should land on
// statistically indistinguishable costs.
inline DistComparison compare_attack_distributions(
    const std::vector<AttackDistribution>& dists, const ExperimentSpec& tmpl) {
    tmpl.validate();
    if (dists.empty()) throw ConfigError("compare_attack_distributions: empty list");
    const double mean0 = attack_mean(dists.front());
    for (const auto& d : dists)
        if (std::abs(attack_mean(d) - mean0) > 1e-6)
            throw ConfigError(
                "compare_attack_distributions: distributions must share the same mean");
    DistComparison out;
    for (const auto& d : dists) {
        ExperimentSpec spec = tmpl;
        spec.dist = d;
        spec.sched = GreedyKnown{};
        const AggregateReport r = run_monte_carlo(spec);
        const double bound =
            upper_bound_total(spec.model, spec.ch, d, spec.lambda).reduced_upper_bound;
        out.rows.push_back({attack_label(d), attack_mean(d), r.reduced_cost.mean,
                            r.reduced_cost.std_err, bound});
    }
    for (std::size_t i = 0; i < out.rows.size(); ++i)
        for (std::size_t j = i + 1; j < out.rows.size(); ++j) {
            const double diff = out.rows[i].cost_mean - out.rows[j].cost_mean;
            const double se = std::hypot(out.rows[i].cost_stderr, out.rows[j].cost_stderr);
            out.pairs.push_back({i, j, diff, se});
        }
    return out;
}

}  // namespace powersched
