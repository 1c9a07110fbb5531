#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <variant>
#include <vector>

#include "powersched/channel.hpp"
#include "powersched/errors.hpp"
#include "powersched/linalg.hpp"
#include "powersched/model.hpp"

namespace powersched {

// Coarse scan followed by golden-section refinement.  The scan guards
// against multiple local minima; ties resolve to the smallest argument so
// results are reproducible.
template <class F>
double minimize_scalar(F&& f, double lo, double hi, int n_scan = 64, double tol = 1e-7) {
    if (!(hi > lo)) throw ConfigError("minimize_scalar: need hi > lo");
    if (n_scan < 2) throw ConfigError("minimize_scalar: n_scan must be >= 2");
    const double h = (hi - lo) / n_scan;
    int best = 0;
    double fbest = f(lo);
    for (int i = 1; i <= n_scan; ++i) {
        const double fi = f(lo + i * h);
        if (fi < fbest) {
            fbest = fi;
            best = i;
        }
    }
    double a = lo + std::max(0, best - 1) * h;
    double b = lo + std::min(n_scan, best + 1) * h;
    const double inv_phi = 0.6180339887498949;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1);
    double f2 = f(x2);
    while (b - a > tol) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    // Endpoints can be exact optima of monotone objectives; prefer them
    // over the refined midpoint when they win, smallest argument first.
    const double xm = 0.5 * (a + b);
    double xbest = lo;
    fbest = f(lo);
    for (double x : {xm, hi}) {
        const double fx = f(x);
        if (fx < fbest) {
            fbest = fx;
            xbest = x;
        }
    }
    return xbest;
}

// Per-slot cost of choosing drop probability q: transmission energy plus
// the discounted estimation penalty q contributes through the error
// recursion,
//   g = lambda p(q,a) + gamma q e'A'Sigma A e.
inline double stage_cost_c(double c, double a, double q, double lambda, double gamma,
                           const ChannelModel& ch) {
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("stage_cost: q must lie in (0, 1]");
    const auto pr = ch.power_for(q, a);
    if (!pr.feasible)
        throw InfeasibleError("stage_cost: q below the full-power drop probability");
    return lambda * pr.power + gamma * q * c;
}

inline double stage_cost(const Mat& A, const Vec& e, double a, double q,
                         const Mat& Sigma_next, double lambda, double gamma,
                         const ChannelModel& ch) {
    const Vec Ae = A * e;
    return stage_cost_c(Ae.dot(Sigma_next * Ae), a, q, lambda, gamma, ch);
}

struct SchedDecision {
    double q = 1.0;  // drop probability the policy aims for
    double p = 0.0;  // transmitted power
};

namespace detail {

// Minimize lambda p(q,a) + slope*q over the admissible drop range at
// interference a.  All greedy-style policies and the DP node updates
// reduce to this one-dimensional problem.
inline SchedDecision argmin_drop(double slope, double a, double lambda,
                                 const ChannelModel& ch, int n_scan = 64) {
    if (slope <= 0.0 && lambda >= 0.0) return {1.0, 0.0};  // both terms favor silence
    const double q_lo = ch.min_drop_prob(a);
    if (q_lo >= 1.0 - 1e-12) return {1.0, 0.0};  // no power budget to do better
    const double scale = (a + ch.sigma2) / ch.alpha;
    auto f = [&](double q) {
        const double z = q_tail_inv(0.5 * q);
        return lambda * z * z * scale + slope * q;
    };
    const double q_star = minimize_scalar(f, std::min(q_lo + 1e-12, 1.0), 1.0, n_scan);
    const double z = q_tail_inv(0.5 * q_star);
    const double p = std::clamp(z * z * scale, 0.0, ch.p_max);
    return {q_star, p};
}

}  // namespace detail

// Greedy one-step policy: myopically minimize the stage cost given the
// observed interference a.
inline SchedDecision greedy_drop_c(double c, double a, double lambda, double gamma,
                                   const ChannelModel& ch) {
    return detail::argmin_drop(gamma * c, a, lambda, ch);
}

inline SchedDecision greedy_drop(const Mat& A, const Vec& e, double a,
                                 const Mat& Sigma_next, double lambda, double gamma,
                                 const ChannelModel& ch) {
    const Vec Ae = A * e;
    return greedy_drop_c(Ae.dot(Sigma_next * Ae), a, lambda, gamma, ch);
}

// Variant for a scheduler that cannot observe the interference: since the
// required power is linear in a, the expected power at drop level q is the
// power at the mean interference, so the surrogate problem is the greedy
// problem evaluated at a_mean.  The transmitted power is likewise the one
// computed at a_mean; the channel then applies the true interference.
inline SchedDecision greedy_mean_drop_c(double c, double a_mean, double lambda,
                                        double gamma, const ChannelModel& ch) {
    return greedy_drop_c(c, a_mean, lambda, gamma, ch);
}

inline SchedDecision greedy_mean_drop(const Mat& A, const Vec& e, double a_mean,
                                      const Mat& Sigma_next, double lambda, double gamma,
                                      const ChannelModel& ch) {
    const Vec Ae = A * e;
    return greedy_mean_drop_c(Ae.dot(Sigma_next * Ae), a_mean, lambda, gamma, ch);
}

// Best constant drop probability and the cost bound it certifies.
struct ConstantOptimum {
    double q_tilde = 1.0;
    double p_tilde = 0.0;       // expected power E_a[p(q_tilde, a)]
    Mat Theta_tilde;            // solves gamma q A'Theta A + Sigma = Theta
    double bound = 0.0;         // on the full cost, including the gamma tr(PW) term
    double reduced_bound = 0.0; // same without the policy-independent tr(PW) term
};

// Search the constant-drop family: for each q the error weight Theta(q)
// solves the discounted Lyapunov equation, and the objective is the exact
// infinite-horizon cost of holding that drop probability.  The minimizer
// upper-bounds the cost of the optimal scheduler.
inline ConstantOptimum optimal_constant(const SystemModel& m, const ChannelModel& ch,
                                        const AttackDistribution& dist, double lambda) {
    m.validate(/*infinite_horizon=*/true);
    ch.validate();
    validate_attack(dist);
    if (lambda < 0.0) throw ConfigError("optimal_constant: lambda must be >= 0");
    const double rho = spectral_radius(m.A);
    const auto stab = check_stability_assumption(ch, dist, rho);
    if (!stab.holds)
        throw InfeasibleError(
            "optimal_constant: expected full-power drop rate exceeds 1/rho(A)^2");
    const StationaryGains gains = riccati_stationary(m);
    const double g = m.gamma;
    const double a_mean = attack_mean(dist);
    const double q_lo = ch.min_drop_prob(a_mean);  // keeps E_a[p(q,a)] within p_max
    const double q_hi =
        std::min(1.0, (1.0 - 1e-6) / std::max(g * rho * rho, 1e-300));
    if (!(q_lo < q_hi))
        throw InfeasibleError("optimal_constant: empty feasible drop-probability range");
    const double scale = (a_mean + ch.sigma2) / ch.alpha;
    auto objective = [&](double q) {
        const Mat Theta = dlyap_discounted(m.A, gains.Sigma, g * q);
        const double z = q_tail_inv(0.5 * q);
        return g * (Theta * m.W).trace() / (1.0 - g) + (Theta * m.X0).trace() +
               lambda * z * z * scale / (1.0 - g);
    };
    ConstantOptimum out;
    out.q_tilde = minimize_scalar(objective, q_lo, q_hi, 512, 1e-7);
    const double z = q_tail_inv(0.5 * out.q_tilde);
    out.p_tilde = z * z * scale;
    out.Theta_tilde = dlyap_discounted(m.A, gains.Sigma, g * out.q_tilde);
    out.reduced_bound = objective(out.q_tilde);
    out.bound = out.reduced_bound + g * (gains.P * m.W).trace() / (1.0 - g);
    return out;
}

// Resolution parameters for the scalar-error dynamic program.
struct GridSpec {
    double e_max = 0.0;  // 0: pick from noise scale and contraction margin
    int n_e = 101;       // odd so the origin is a node
    std::vector<AttackNode> a_nodes;
    int n_a = 16;     // node count used when a_nodes is filled from a distribution
    int n_quad = 16;  // Gauss-Hermite order for the process-noise expectation
    int n_q = 64;     // scan size for the per-node drop-probability search

    void validate() const {
        if (e_max < 0.0) throw ConfigError("grid: e_max must be >= 0");
        if (n_e < 33 || n_e % 2 == 0) throw ConfigError("grid: n_e must be odd and >= 33");
        if (n_quad < 8) throw ConfigError("grid: n_quad must be >= 8");
        if (n_q < 2) throw ConfigError("grid: n_q must be >= 2");
        if (a_nodes.empty()) throw ConfigError("grid: attack node set is empty");
        double total = 0.0;
        for (const auto& node : a_nodes) {
            if (node.a < 0.0) throw ConfigError("grid: attack nodes must be >= 0");
            if (node.prob < 0.0) throw ConfigError("grid: node probabilities must be >= 0");
            total += node.prob;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw ConfigError("grid: node probabilities must sum to 1");
    }
};

inline GridSpec make_grid(const AttackDistribution& dist, double e_max = 0.0,
                          int n_e = 101, int n_a = 16, int n_quad = 16, int n_q = 64) {
    GridSpec grid;
    grid.e_max = e_max;
    grid.n_e = n_e;
    grid.a_nodes = attack_nodes(dist, n_a);
    grid.n_a = n_a;
    grid.n_quad = n_quad;
    grid.n_q = n_q;
    grid.validate();
    return grid;
}

// Value function and greedy policy on the (e, a) grid.  Finite-horizon
// solves keep one layer per stage; infinite-horizon solves keep a single
// fixed point plus iteration diagnostics.
struct ValueTable {
    bool finite = true;
    std::vector<double> e_grid;
    std::vector<AttackNode> a_nodes;
    std::vector<std::vector<double>> V;       // finite: stages 0..T; infinite: one layer
    std::vector<std::vector<double>> q_star;  // finite: stages 0..T-1; infinite: one layer
    std::vector<std::vector<double>> iota;    // finite only, stages 0..T-1
    int sweeps = 0;
    double final_update = 0.0;
    double bellman_residual = 0.0;
    std::vector<double> sweep_deltas;  // sup-norm update per value-iteration sweep

    std::size_t idx(std::size_t i_e, std::size_t i_a) const {
        return i_e * a_nodes.size() + i_a;
    }
};

namespace detail {

struct GaussHermite {
    std::vector<double> nodes;    // abscissae for a standard normal
    std::vector<double> weights;  // probabilities, sum to 1
};

// Golub-Welsch on the Jacobi matrix of the probabilists' Hermite
// polynomials: eigenvalues are the nodes, squared first eigenvector
// components the weights.
inline GaussHermite gauss_hermite(int n) {
    if (n < 1) throw ConfigError("gauss_hermite: order must be >= 1");
    Mat J = Mat::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        J(i, i - 1) = std::sqrt(static_cast<double>(i));
        J(i - 1, i) = J(i, i - 1);
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(J);
    if (es.info() != Eigen::Success)
        throw ConvergenceError("gauss_hermite: eigen decomposition failed");
    GaussHermite gh;
    gh.nodes.resize(n);
    gh.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        gh.nodes[i] = es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        gh.weights[i] = v0 * v0;
    }
    return gh;
}

// Piecewise-linear read of a uniformly spaced table, clamped at the ends.
inline double lerp_uniform(const std::vector<double>& grid, const std::vector<double>& vals,
                           double x) {
    const double lo = grid.front();
    const double hi = grid.back();
    if (x <= lo) return vals.front();
    if (x >= hi) return vals.back();
    const double h = (hi - lo) / (grid.size() - 1);
    const auto i = static_cast<std::size_t>((x - lo) / h);
    const auto i0 = std::min(i, grid.size() - 2);
    const double t = (x - grid[i0]) / h;
    return vals[i0] + t * (vals[i0 + 1] - vals[i0]);
}

struct DpContext {
    double a11 = 0.0;      // scalar plant coefficient
    double sigma_w = 0.0;  // process-noise standard deviation
    double c_coef = 0.0;   // Sigma * a11^2, so c(e) = c_coef * e^2
    double lambda = 0.0;
    double gamma = 0.0;
    const ChannelModel* ch = nullptr;
    const GridSpec* grid = nullptr;
    std::vector<double> e_grid;
    GaussHermite gh;
};

// One Bellman sweep over the grid.  Returns the sup-norm change and, on
// request, the per-node argmin policy and the delivery-advantage term
//   iota(e) = gamma (E[V | drop] - E[V | delivery]),
// which is independent of the current interference because the attack is
// i.i.d. across slots.
inline double dp_sweep(const DpContext& ctx, const std::vector<double>& V_in,
                       std::vector<double>& V_out, std::vector<double>* q_out,
                       std::vector<double>* iota_out) {
    const auto n_e = ctx.e_grid.size();
    const auto& a_nodes = ctx.grid->a_nodes;
    const auto n_a = a_nodes.size();

    // Collapse the i.i.d. next-slot interference first.
    std::vector<double> vbar(n_e, 0.0);
    for (std::size_t i = 0; i < n_e; ++i) {
        double acc = 0.0;
        for (std::size_t l = 0; l < n_a; ++l)
            acc += a_nodes[l].prob * V_in[i * n_a + l];
        vbar[i] = acc;
    }

    double cont_drop_0 = 0.0;  // E[vbar(w)], the post-delivery continuation
    for (std::size_t j = 0; j < ctx.gh.nodes.size(); ++j)
        cont_drop_0 +=
            ctx.gh.weights[j] * lerp_uniform(ctx.e_grid, vbar, ctx.sigma_w * ctx.gh.nodes[j]);
    const double E1 = cont_drop_0;

    double delta = 0.0;
    for (std::size_t i = 0; i < n_e; ++i) {
        const double e = ctx.e_grid[i];
        double E0 = 0.0;  // E[vbar(A e + w)], the no-delivery continuation
        for (std::size_t j = 0; j < ctx.gh.nodes.size(); ++j)
            E0 += ctx.gh.weights[j] *
                  lerp_uniform(ctx.e_grid, vbar, ctx.a11 * e + ctx.sigma_w * ctx.gh.nodes[j]);
        const double iota = ctx.gamma * (E0 - E1);
        const double c = ctx.c_coef * e * e;
        for (std::size_t l = 0; l < n_a; ++l) {
            const double slope = ctx.gamma * c + iota;
            const SchedDecision d =
                argmin_drop(slope, a_nodes[l].a, ctx.lambda, *ctx.ch, ctx.grid->n_q);
            const double z = q_tail_inv(0.5 * d.q);
            const double value = ctx.lambda * z * z * (a_nodes[l].a + ctx.ch->sigma2) /
                                     ctx.ch->alpha +
                                 slope * d.q + ctx.gamma * E1;
            const auto node = i * n_a + l;
            delta = std::max(delta, std::abs(value - V_out[node]));
            V_out[node] = value;
            if (q_out) (*q_out)[node] = d.q;
            if (iota_out) (*iota_out)[node] = iota;
        }
    }
    return delta;
}

inline DpContext make_dp_context(const SystemModel& m, const ChannelModel& ch,
                                 const GridSpec& grid, double lambda, const Mat& Sigma) {
    if (m.state_dim() != 1)
        throw DimensionError("grid DP supports scalar error state only");
    ch.validate();
    grid.validate();
    if (lambda < 0.0) throw ConfigError("grid DP: lambda must be >= 0");
    DpContext ctx;
    ctx.a11 = m.A(0, 0);
    ctx.sigma_w = std::sqrt(m.W(0, 0));
    ctx.c_coef = Sigma(0, 0) * ctx.a11 * ctx.a11;
    ctx.lambda = lambda;
    ctx.gamma = m.gamma;
    ctx.ch = &ch;
    ctx.grid = &grid;
    double e_max = grid.e_max;
    if (e_max == 0.0) {
        // Error scale heuristic: noise magnitude amplified by the expected
        // contraction |A| sqrt(E[q_m]) of the optimally powered loop.
        double qm_mean = 0.0;
        for (const auto& node : grid.a_nodes) qm_mean += node.prob * ch.min_drop_prob(node.a);
        const double margin = 1.0 - std::abs(ctx.a11) * std::sqrt(qm_mean);
        if (margin <= 0.0)
            throw InfeasibleError(
                "grid DP: error process not mean-square contracting at full power; "
                "set e_max explicitly");
        e_max = 10.0 * std::sqrt(m.W.trace()) / margin;
    }
    ctx.e_grid.resize(grid.n_e);
    for (int i = 0; i < grid.n_e; ++i)
        ctx.e_grid[i] = -e_max + 2.0 * e_max * i / (grid.n_e - 1);
    ctx.gh = gauss_hermite(grid.n_quad);
    return ctx;
}

}  // namespace detail

// Backward recursion for a fixed horizon.  Stage costs use the stationary
// error weight throughout, so a one-stage solve coincides with the greedy
// policy.
inline ValueTable finite_dp_solve(const SystemModel& m, const ChannelModel& ch,
                                  const GridSpec& grid, int T, double lambda) {
    if (T < 1) throw ConfigError("finite_dp_solve: horizon must be >= 1");
    m.validate();
    const Mat Sigma = riccati_stationary(m).Sigma;
    detail::DpContext ctx = detail::make_dp_context(m, ch, grid, lambda, Sigma);
    const auto n_nodes = ctx.e_grid.size() * grid.a_nodes.size();

    ValueTable table;
    table.finite = true;
    table.e_grid = ctx.e_grid;
    table.a_nodes = grid.a_nodes;
    table.V.assign(T + 1, std::vector<double>(n_nodes, 0.0));
    table.q_star.assign(T, std::vector<double>(n_nodes, 1.0));
    table.iota.assign(T, std::vector<double>(n_nodes, 0.0));
    for (int k = T - 1; k >= 0; --k)
        detail::dp_sweep(ctx, table.V[k + 1], table.V[k], &table.q_star[k],
                         &table.iota[k]);
    table.sweeps = T;
    return table;
}

// Value iteration for the stationary problem, stopped once the sup-norm
// update guarantees a Bellman residual within tol; the residual is then
// measured explicitly alongside the final policy extraction.
inline ValueTable infinite_dp_solve(const SystemModel& m, const ChannelModel& ch,
                                    const GridSpec& grid, double tol, double lambda,
                                    int max_sweeps = 100000) {
    m.validate(/*infinite_horizon=*/true);
    if (!(tol > 0.0)) throw ConfigError("infinite_dp_solve: tol must be > 0");
    if (m.state_dim() != 1)
        throw DimensionError("grid DP supports scalar error state only");
    const double rho = std::abs(m.A(0, 0));
    double qm_mean = 0.0;
    for (const auto& node : grid.a_nodes) qm_mean += node.prob * ch.min_drop_prob(node.a);
    if (!(qm_mean < 1.0 / (rho * rho)))
        throw InfeasibleError(
            "infinite_dp_solve: expected full-power drop rate exceeds 1/rho(A)^2");
    const Mat Sigma = riccati_stationary(m).Sigma;
    detail::DpContext ctx = detail::make_dp_context(m, ch, grid, lambda, Sigma);
    const auto n_nodes = ctx.e_grid.size() * grid.a_nodes.size();

    ValueTable table;
    table.finite = false;
    table.e_grid = ctx.e_grid;
    table.a_nodes = grid.a_nodes;
    table.V.assign(1, std::vector<double>(n_nodes, 0.0));
    table.q_star.assign(1, std::vector<double>(n_nodes, 1.0));

    const double g = m.gamma;
    const double stop = tol * (1.0 - g) / (2.0 * g);
    std::vector<double> next(n_nodes, 0.0);
    bool converged = false;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        const double delta = detail::dp_sweep(ctx, table.V[0], next, nullptr, nullptr);
        table.V[0] = next;
        table.sweep_deltas.push_back(delta);
        table.final_update = delta;
        ++table.sweeps;
        if (delta <= stop) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError("infinite_dp_solve: value iteration hit the sweep cap");
    table.bellman_residual =
        detail::dp_sweep(ctx, table.V[0], next, &table.q_star[0], nullptr);
    return table;
}

// Policy selection tags used by the simulator.
struct GreedyKnown {};
struct GreedyMean {};
struct ConstantPower {
    double p = 1.0;
};
struct OptimalConstant {};
struct GridDPFinite {
    GridSpec grid;
};
struct GridDPInfinite {
    GridSpec grid;
    double tol = 1e-6;
};

using SchedulerSpec = std::variant<GreedyKnown, GreedyMean, ConstantPower, OptimalConstant,
                                   GridDPFinite, GridDPInfinite>;

inline bool scheduler_observes_attack(const SchedulerSpec& spec) {
    return !std::holds_alternative<GreedyMean>(spec);
}

// Runtime dispatcher: precomputes whatever the chosen policy needs (gain
// schedule, constant optimum, DP tables) and then answers per-slot
// decisions.  The simulator always derives the realized drop probability
// from the returned power and the true interference.
class Scheduler {
  public:
    Scheduler(const SystemModel& m, const ChannelModel& ch, const AttackDistribution& dist,
              const SchedulerSpec& spec, double lambda, GainSchedule gains, int horizon)
        : spec_(spec),
          A_(m.A),
          ch_(ch),
          lambda_(lambda),
          gamma_(m.gamma),
          a_mean_(attack_mean(dist)),
          gains_(std::move(gains)),
          horizon_(horizon) {
        if (const auto* cp = std::get_if<ConstantPower>(&spec_)) {
            if (cp->p < 0.0 || cp->p > ch.p_max)
                throw ConfigError("scheduler: constant power must lie in [0, p_max]");
        } else if (std::holds_alternative<OptimalConstant>(spec_)) {
            q_const_ = optimal_constant(m, ch, dist, lambda).q_tilde;
        } else if (const auto* fin = std::get_if<GridDPFinite>(&spec_)) {
            GridSpec grid = fin->grid;
            if (grid.a_nodes.empty()) grid.a_nodes = attack_nodes(dist, grid.n_a);
            table_ = finite_dp_solve(m, ch, grid, horizon, lambda);
        } else if (const auto* inf = std::get_if<GridDPInfinite>(&spec_)) {
            GridSpec grid = inf->grid;
            if (grid.a_nodes.empty()) grid.a_nodes = attack_nodes(dist, grid.n_a);
            table_ = infinite_dp_solve(m, ch, grid, inf->tol, lambda);
        }
    }

    // e: current estimation error; a: observed interference (ignored by
    // policies that do not see it); k: slot index for stage-dependent gains.
    SchedDecision decide(const Vec& e, double a, int k) const {
        const Mat& Sigma = next_sigma(k);
        return std::visit(
            [&](const auto& s) -> SchedDecision {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, GreedyKnown>) {
                    return greedy_drop(A_, e, a, Sigma, lambda_, gamma_, ch_);
                } else if constexpr (std::is_same_v<T, GreedyMean>) {
                    return greedy_mean_drop(A_, e, a_mean_, Sigma, lambda_, gamma_, ch_);
                } else if constexpr (std::is_same_v<T, ConstantPower>) {
                    return {ch_.drop_prob(s.p, a), s.p};
                } else if constexpr (std::is_same_v<T, OptimalConstant>) {
                    // Hold the drop probability constant; the power tracks
                    // the interference so its mean is the certified p~.
                    const auto pr = ch_.power_for(q_const_, a);
                    return {q_const_, std::clamp(pr.power, 0.0, ch_.p_max)};
                } else {
                    const int layer = std::is_same_v<T, GridDPFinite>
                                          ? std::min(k, static_cast<int>(table_.q_star.size()) - 1)
                                          : 0;
                    const double q = std::clamp(policy_lookup(layer, e(0), a),
                                                ch_.min_drop_prob(a), 1.0);
                    const auto pr = ch_.power_for(q, a);
                    return {q, std::clamp(pr.power, 0.0, ch_.p_max)};
                }
            },
            spec_);
    }

    const ValueTable& table() const { return table_; }

  private:
    const Mat& next_sigma(int k) const {
        // Stage cost at slot k weighs the error through the next stage's
        // Sigma; with finite backward gains the last slot reuses the final
        // available weight.
        if (gains_.stationary) return gains_.Sigma.front();
        const auto last = gains_.Sigma.size() - 1;
        return gains_.Sigma[std::min(static_cast<std::size_t>(k) + 1, last)];
    }

    // Bilinear read of the stored policy: linear in e on the uniform grid,
    // linear in a across the attack nodes, clamped outside both ranges.
    double policy_lookup(int layer, double e, double a) const {
        const auto& nodes = table_.a_nodes;
        const auto n_a = nodes.size();
        auto q_at_a = [&](std::size_t l) {
            std::vector<double> col(table_.e_grid.size());
            for (std::size_t i = 0; i < col.size(); ++i)
                col[i] = table_.q_star[layer][i * n_a + l];
            return detail::lerp_uniform(table_.e_grid, col, e);
        };
        if (n_a == 1 || a <= nodes.front().a) return q_at_a(0);
        if (a >= nodes.back().a) return q_at_a(n_a - 1);
        std::size_t l = 0;
        while (l + 1 < n_a && nodes[l + 1].a < a) ++l;
        const double t = (a - nodes[l].a) / (nodes[l + 1].a - nodes[l].a);
        return (1.0 - t) * q_at_a(l) + t * q_at_a(l + 1);
    }

    SchedulerSpec spec_;
    Mat A_;
    ChannelModel ch_;
    double lambda_;
    double gamma_;
    double a_mean_;
    GainSchedule gains_;
    int horizon_;
    double q_const_ = 1.0;
    ValueTable table_;
};

}  // namespace powersched
