#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "powersched/channel.hpp"
#include "powersched/control.hpp"
#include "powersched/errors.hpp"
#include "powersched/linalg.hpp"
#include "powersched/model.hpp"
#include "powersched/rng.hpp"
#include "powersched/sched.hpp"

namespace powersched {

enum class GainsMode {
    stationary,       // fixed-point gains, for discounted long-run experiments
    finite_backward,  // time-varying backward recursion with terminal weight Q_N
};

struct ExperimentSpec {
    SystemModel model;
    ChannelModel ch;
    AttackDistribution dist;
    SchedulerSpec sched;
    double lambda = 1.0;
    int horizon = 100;
    std::uint64_t trials = 1;
    std::uint64_t master_seed = 0;
    GainsMode gains_mode = GainsMode::stationary;
    bool record_traces = false;

    void validate() const {
        model.validate(gains_mode == GainsMode::stationary);
        ch.validate();
        validate_attack(dist);
        if (!(lambda > 0.0)) throw ConfigError("experiment: lambda must be > 0");
        if (horizon < 1) throw ConfigError("experiment: horizon must be >= 1");
        if (trials < 1) throw ConfigError("experiment: trials must be >= 1");
    }
};

// Full closed-loop record of one trial: states and errors for slots
// 0..T, decisions and channel outcomes for slots 0..T-1.
struct SimTrace {
    std::uint64_t master_seed = 0;
    std::uint64_t trial_index = 0;
    std::vector<Vec> x;
    std::vector<Vec> xhat;
    std::vector<Vec> e;
    std::vector<Vec> u;
    std::vector<double> a;
    std::vector<double> p;
    std::vector<double> q;  // realized drop probability drop_prob(p_k, a_k)
    std::vector<int> delta;
};

struct TrialMetrics {
    double reduced_cost = 0.0;   // sum gamma^k (e'Sigma e) + lambda sum gamma^k p
    double lqg_cost = 0.0;       // discounted quadratic regulation cost
    double mse_avg = 0.0;        // (1/T) sum e'A'Sigma A e over slots 0..T
    double power_avg = 0.0;      // (1/T) sum p over slots 0..T-1
    double success_rate = 0.0;   // fraction of delivered packets
    double disc_err_cost = 0.0;  // sum gamma^k e'Sigma e alone
    double disc_qerr_cost = 0.0; // sum gamma^{k+1} q_k e'A'Sigma A e, realized q_k
};

namespace detail {

using MetricField = double TrialMetrics::*;
inline constexpr std::array<std::pair<const char*, MetricField>, 7> kMetricFields = {{
    {"reduced_cost", &TrialMetrics::reduced_cost},
    {"lqg_cost", &TrialMetrics::lqg_cost},
    {"mse_avg", &TrialMetrics::mse_avg},
    {"power_avg", &TrialMetrics::power_avg},
    {"success_rate", &TrialMetrics::success_rate},
    {"disc_err_cost", &TrialMetrics::disc_err_cost},
    {"disc_qerr_cost", &TrialMetrics::disc_qerr_cost},
}};

// Fixed-tree pairwise reduction: the result depends only on the element
// order, never on thread count, and keeps rounding error at O(log n).
inline double pairwise_sum(const double* data, std::size_t n) {
    if (n <= 8) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += data[i];
        return acc;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

[[noreturn]] inline void rethrow_trial_error(const std::exception_ptr& ep,
                                             std::uint64_t index) {
    const std::string tag = "trial " + std::to_string(index) + ": ";
    try {
        std::rethrow_exception(ep);
    } catch (const DimensionError& ex) {
        throw DimensionError(tag + ex.what());
    } catch (const InfeasibleError& ex) {
        throw InfeasibleError(tag + ex.what());
    } catch (const ConvergenceError& ex) {
        throw ConvergenceError(tag + ex.what());
    } catch (const ConfigError& ex) {
        throw ConfigError(tag + ex.what());
    } catch (const std::exception& ex) {
        throw std::runtime_error(tag + ex.what());
    }
}

inline unsigned worker_count(std::uint64_t trials) {
    unsigned n = std::thread::hardware_concurrency();
    if (const char* env = std::getenv("POWERSCHED_THREADS")) {
        const long parsed = std::strtol(env, nullptr, 10);
        if (parsed >= 1) n = static_cast<unsigned>(parsed);
    }
    if (n < 1) n = 1;
    if (trials < n) n = static_cast<unsigned>(trials);
    return n;
}

}  // namespace detail

struct MetricStats {
    double mean = 0.0;
    double std_dev = 0.0;
    double std_err = 0.0;
};

struct AggregateReport {
    std::uint64_t trials = 0;
    MetricStats reduced_cost;
    MetricStats lqg_cost;
    MetricStats mse_avg;
    MetricStats power_avg;
    MetricStats success_rate;
    MetricStats disc_err_cost;
    MetricStats disc_qerr_cost;
    ExperimentSpec spec;

    std::vector<std::pair<std::string, MetricStats>> named() const {
        return {{"reduced_cost", reduced_cost}, {"lqg_cost", lqg_cost},
                {"mse_avg", mse_avg},           {"power_avg", power_avg},
                {"success_rate", success_rate}, {"disc_err_cost", disc_err_cost},
                {"disc_qerr_cost", disc_qerr_cost}};
    }
};

// Everything trials share: gains, scheduler tables, covariance factors.
// Built once, then read concurrently.
struct SimContext {
    ExperimentSpec spec;
    GainSchedule gains;
    Mat Sigma;   // error weight used in the reported metrics
    Mat AtSA;    // A'Sigma A
    Mat sqrtW;
    Mat sqrtX0;
    std::unique_ptr<Scheduler> sched;
};

inline SimContext make_context(const ExperimentSpec& spec) {
    spec.validate();
    SimContext ctx;
    ctx.spec = spec;
    if (spec.gains_mode == GainsMode::stationary) {
        const StationaryGains st = riccati_stationary(spec.model);
        ctx.gains.stationary = true;
        ctx.gains.P = {st.P};
        ctx.gains.L = {st.L};
        ctx.gains.Sigma = {st.Sigma};
        ctx.Sigma = st.Sigma;
    } else {
        ctx.gains = riccati_backward(spec.model, spec.horizon);
        // Metrics keep a single error weight; prefer the stationary one,
        // fall back to the initial stage when no fixed point exists.
        try {
            ctx.Sigma = riccati_stationary(spec.model).Sigma;
        } catch (const ConvergenceError&) {
            ctx.Sigma = ctx.gains.Sigma.front();
        }
    }
    ctx.AtSA = spec.model.A.transpose() * ctx.Sigma * spec.model.A;
    ctx.sqrtW = psd_sqrt(spec.model.W);
    ctx.sqrtX0 = psd_sqrt(spec.model.X0);
    ctx.sched = std::make_unique<Scheduler>(spec.model, spec.ch, spec.dist, spec.sched,
                                            spec.lambda, ctx.gains, spec.horizon);
    return ctx;
}

inline TrialMetrics run_trial(const SimContext& ctx, std::uint64_t trial_index,
                              SimTrace* trace = nullptr) {
    const ExperimentSpec& spec = ctx.spec;
    const SystemModel& m = spec.model;
    const int n = m.state_dim();
    const int T = spec.horizon;
    const double g = m.gamma;

    RandomStream rs_x0(spec.master_seed, trial_index, substream::kInitialState);
    RandomStream rs_w(spec.master_seed, trial_index, substream::kProcessNoise);
    RandomStream rs_a(spec.master_seed, trial_index, substream::kAttack);
    RandomStream rs_d(spec.master_seed, trial_index, substream::kDelivery);

    auto gaussian_vec = [n](RandomStream& rs, const Mat& sqrt_cov) {
        Vec z(n);
        for (int i = 0; i < n; ++i) z(i) = rs.next_gaussian();
        return Vec(sqrt_cov * z);
    };

    Vec x = m.xbar0 + gaussian_vec(rs_x0, ctx.sqrtX0);
    Vec xhat = m.xbar0;
    Vec e = x - xhat;

    if (trace) {
        *trace = SimTrace{};
        trace->master_seed = spec.master_seed;
        trace->trial_index = trial_index;
        trace->x.reserve(T + 1);
        trace->xhat.reserve(T + 1);
        trace->e.reserve(T + 1);
        trace->u.reserve(T);
        trace->a.reserve(T);
        trace->p.reserve(T);
        trace->q.reserve(T);
        trace->delta.reserve(T);
    }

    TrialMetrics out;
    double disc = 1.0;  // gamma^k
    double mse_sum = 0.0;
    double power_sum = 0.0;
    double power_sum_disc = 0.0;
    double lqg_running = 0.0;
    int delivered = 0;

    for (int k = 0; k < T; ++k) {
        out.disc_err_cost += disc * e.dot(ctx.Sigma * e);
        mse_sum += e.dot(ctx.AtSA * e);
        if (trace) {
            trace->x.push_back(x);
            trace->xhat.push_back(xhat);
            trace->e.push_back(e);
        }

        const double a = sample_attack(spec.dist, rs_a);
        const SchedDecision d = ctx.sched->decide(e, a, k);
        const double q_real = spec.ch.drop_prob(d.p, a);
        const bool deliver = rs_d.next_uniform() >= q_real;
        const Vec u = control_input(ctx.gains.L_at(k), xhat);
        const Vec w = gaussian_vec(rs_w, ctx.sqrtW);

        out.disc_qerr_cost += disc * g * q_real * e.dot(ctx.AtSA * e);
        power_sum += d.p;
        power_sum_disc += disc * d.p;
        lqg_running += disc * (x.dot(m.Q * x) + u.dot(m.R * u));
        delivered += deliver ? 1 : 0;
        if (trace) {
            trace->u.push_back(u);
            trace->a.push_back(a);
            trace->p.push_back(d.p);
            trace->q.push_back(q_real);
            trace->delta.push_back(deliver ? 1 : 0);
        }

        const Vec x_next = plant_step(m, x, u, w);
        xhat = estimator_step(m, xhat, x, u, deliver);
        x = x_next;
        e = x - xhat;
        disc *= g;
    }
    out.disc_err_cost += disc * e.dot(ctx.Sigma * e);
    mse_sum += e.dot(ctx.AtSA * e);
    if (trace) {
        trace->x.push_back(x);
        trace->xhat.push_back(xhat);
        trace->e.push_back(e);
    }

    out.lqg_cost = lqg_running + disc * x.dot(m.Q_N * x);
    out.reduced_cost = out.disc_err_cost + spec.lambda * power_sum_disc;
    out.mse_avg = mse_sum / T;
    out.power_avg = power_sum / T;
    out.success_rate = static_cast<double>(delivered) / T;
    return out;
}

inline AggregateReport run_monte_carlo(const ExperimentSpec& spec) {
    const SimContext ctx = make_context(spec);
    const std::uint64_t trials = spec.trials;
    std::vector<TrialMetrics> results(trials);

    const unsigned workers = detail::worker_count(trials);
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::uint64_t first_error_index = 0;

    auto run_range = [&](std::uint64_t begin, std::uint64_t end) {
        for (std::uint64_t i = begin; i < end; ++i) {
            try {
                results[i] = run_trial(ctx, i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error || i < first_error_index) {
                    first_error = std::current_exception();
                    first_error_index = i;
                }
                return;
            }
        }
    };

    if (workers <= 1) {
        run_range(0, trials);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        const std::uint64_t chunk = (trials + workers - 1) / workers;
        for (unsigned t = 0; t < workers; ++t) {
            const std::uint64_t begin = t * chunk;
            const std::uint64_t end = std::min(trials, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(run_range, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    if (first_error) detail::rethrow_trial_error(first_error, first_error_index);

    AggregateReport report;
    report.trials = trials;
    report.spec = spec;
    const std::array<MetricStats*, 7> slots = {
        &report.reduced_cost, &report.lqg_cost,      &report.mse_avg,
        &report.power_avg,    &report.success_rate,  &report.disc_err_cost,
        &report.disc_qerr_cost};
    std::vector<double> column(trials);
    for (std::size_t f = 0; f < detail::kMetricFields.size(); ++f) {
        const auto field = detail::kMetricFields[f].second;
        for (std::uint64_t i = 0; i < trials; ++i) column[i] = results[i].*field;
        const double mean = detail::pairwise_sum(column.data(), trials) / trials;
        double var = 0.0;
        if (trials > 1) {
            for (auto& v : column) v = (v - mean) * (v - mean);
            var = detail::pairwise_sum(column.data(), trials) / (trials - 1);
        }
        slots[f]->mean = mean;
        slots[f]->std_dev = std::sqrt(var);
        slots[f]->std_err = slots[f]->std_dev / std::sqrt(static_cast<double>(trials));
    }
    return report;
}

// Horizon after which the discounted tail weight sum_{k>T} gamma^k drops
// below tail_tol, so truncating an infinite-horizon run is harmless.
inline int effective_horizon(double gamma, double tail_tol) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw ConfigError("effective_horizon: gamma must lie in (0,1)");
    if (!(tail_tol > 0.0)) throw ConfigError("effective_horizon: tail_tol must be > 0");
    int T = 1;
    double tail = gamma * gamma / (1.0 - gamma);  // sum_{k >= T+1} gamma^k at T = 1
    while (tail > tail_tol) {
        tail *= gamma;
        ++T;
        if (T > 100000000)
            throw ConvergenceError("effective_horizon: tolerance unreachable");
    }
    return T;
}

}  // namespace powersched
