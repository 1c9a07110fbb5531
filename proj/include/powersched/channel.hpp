#pragma once

#include <cmath>
#include <variant>
#include <vector>

#include "powersched/errors.hpp"
#include "powersched/rng.hpp"

namespace powersched {

// Gaussian upper-tail probability Q(x) = P[N(0,1) > x].
inline double q_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

// Standard normal CDF, numerically safe in both tails.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace detail {

// Wichura's rational approximation for the standard normal quantile
// (algorithm PPND16), relative error below 1e-15 across (0,1).
inline double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw ConfigError("norm_quantile: p must lie in (0,1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                     6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                   1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
                 1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                     3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                   5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
                 4.2313330701600911252e+1) * r + 1.0);
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                  3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
                4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
                2.05319162663775882187e+0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
                5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return (q < 0.0) ? -val : val;
}

}  // namespace detail

// Inverse of q_tail on (0, 0.5]; evaluated as -Phi^{-1}(y) so tiny
// arguments keep full precision.
inline double q_tail_inv(double y) {
    if (!(y > 0.0 && y <= 0.5))
        throw ConfigError("q_tail_inv: argument must lie in (0, 0.5]");
    if (y == 0.5) return 0.0;
    return -detail::norm_quantile(y);
}

// Radio link with QPSK-style error curve: a packet survives both symbol
// decisions, so the drop probability at transmit power p under
// interference a is 2 Q(sqrt(alpha p / (a + sigma2))).
struct ChannelModel {
    double alpha = 1.0;   // channel gain over noise normalization
    double sigma2 = 1.0;  // receiver noise floor
    double p_max = 1.0;   // transmit power ceiling

    void validate() const {
        if (!(alpha > 0.0)) throw ConfigError("channel: alpha must be > 0");
        if (!(sigma2 > 0.0)) throw ConfigError("channel: sigma2 must be > 0");
        if (!(p_max >= 0.0)) throw ConfigError("channel: p_max must be >= 0");
    }

    double drop_prob(double p, double a) const {
        if (p < 0.0) throw ConfigError("drop_prob: power must be non-negative");
        if (a < 0.0) throw ConfigError("drop_prob: interference must be non-negative");
        return 2.0 * q_tail(std::sqrt(alpha * p / (a + sigma2)));
    }

    // Cheapest drop probability reachable at full power.
    double min_drop_prob(double a) const { return drop_prob(p_max, a); }

    struct PowerResult {
        double power = 0.0;
        bool feasible = false;
    };

    // Power that realizes drop probability q under interference a, with a
    // feasibility flag instead of silent clamping at p_max.
    PowerResult power_for(double q, double a) const {
        if (!(q > 0.0 && q <= 1.0))
            throw ConfigError("power_for: q must lie in (0, 1]");
        if (a < 0.0) throw ConfigError("power_for: interference must be non-negative");
        const double z = q_tail_inv(0.5 * q);
        const double p = z * z * (a + sigma2) / alpha;
        return {p, p <= p_max * (1.0 + 1e-12)};
    }

    struct DropRange {
        double lo = 0.0;
        double hi = 1.0;
    };

    // Drop probabilities reachable with powers in [0, p_max].
    DropRange admissible_drop_range(double a) const {
        return {min_drop_prob(a), 1.0};
    }
};

// Interference power injected by the attacker each slot, i.i.d. across
// time.  Poisson mass beyond the cap is folded back by resampling, so the
// distribution is the Poisson law conditioned on {0,...,cap}.
struct UniformAttack {
    double lo = 0.0;
    double hi = 1.0;
};
struct PoissonAttack {
    double rate = 1.0;
    int cap = -1;  // -1: pick smallest cap with untruncated CDF >= 1 - 1e-9
};
struct TruncNormAttack {
    double mu = 0.0;
    double sigma = 1.0;
    double lo = 0.0;
    double hi = 1.0;
};
struct DegenerateAttack {
    double value = 0.0;
};

using AttackDistribution =
    std::variant<UniformAttack, PoissonAttack, TruncNormAttack, DegenerateAttack>;

inline void validate_attack(const AttackDistribution& dist) {
    std::visit(
        [](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, UniformAttack>) {
                if (!(d.lo >= 0.0)) throw ConfigError("uniform attack: lo must be >= 0");
                if (!(d.hi > d.lo)) throw ConfigError("uniform attack: need hi > lo");
            } else if constexpr (std::is_same_v<T, PoissonAttack>) {
                if (!(d.rate > 0.0)) throw ConfigError("poisson attack: rate must be > 0");
                if (d.cap == 0 || d.cap < -1)
                    throw ConfigError("poisson attack: cap must be >= 1 (or -1 for auto)");
            } else if constexpr (std::is_same_v<T, TruncNormAttack>) {
                if (!(d.sigma > 0.0)) throw ConfigError("truncnorm attack: sigma must be > 0");
                if (!(d.lo >= 0.0)) throw ConfigError("truncnorm attack: lo must be >= 0");
                if (!(d.hi > d.lo)) throw ConfigError("truncnorm attack: need hi > lo");
            } else {
                if (!(d.value >= 0.0))
                    throw ConfigError("degenerate attack: value must be >= 0");
            }
        },
        dist);
}

inline int poisson_auto_cap(double rate, double tail_mass = 1e-9) {
    double pmf = std::exp(-rate);
    double cdf = pmf;
    int k = 0;
    while (cdf < 1.0 - tail_mass) {
        ++k;
        pmf *= rate / k;
        cdf += pmf;
        if (k > 100000)
            throw ConvergenceError("poisson_auto_cap: cap search did not terminate");
    }
    return k;
}

inline int poisson_cap(const PoissonAttack& d) {
    return d.cap >= 1 ? d.cap : poisson_auto_cap(d.rate);
}

namespace detail {

inline double truncnorm_cdf_lo(const TruncNormAttack& d) {
    return norm_cdf((d.lo - d.mu) / d.sigma);
}
inline double truncnorm_cdf_hi(const TruncNormAttack& d) {
    return norm_cdf((d.hi - d.mu) / d.sigma);
}

}  // namespace detail

inline double attack_quantile(const AttackDistribution& dist, double u) {
    return std::visit(
        [u](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, UniformAttack>) {
                return d.lo + u * (d.hi - d.lo);
            } else if constexpr (std::is_same_v<T, TruncNormAttack>) {
                const double Fa = detail::truncnorm_cdf_lo(d);
                const double Fb = detail::truncnorm_cdf_hi(d);
                const double p = Fa + u * (Fb - Fa);
                return d.mu + d.sigma * detail::norm_quantile(p);
            } else if constexpr (std::is_same_v<T, DegenerateAttack>) {
                return d.value;
            } else {
                // Discrete inversion over the truncated support.
                const int cap = poisson_cap(d);
                double pmf = std::exp(-d.rate);
                double total = pmf;
                for (int k = 1; k <= cap; ++k) {
                    pmf *= d.rate / k;
                    total += pmf;
                }
                pmf = std::exp(-d.rate);
                double cum = pmf;
                const double target = u * total;
                int k = 0;
                while (cum < target && k < cap) {
                    ++k;
                    pmf *= d.rate / k;
                    cum += pmf;
                }
                return static_cast<double>(k);
            }
        },
        dist);
}

inline double sample_attack(const AttackDistribution& dist, RandomStream& rng) {
    if (std::holds_alternative<PoissonAttack>(dist)) {
        // Inversion walk on the untruncated law; draws past the cap are
        // rejected and redrawn, which realizes the conditional law.
        const auto& d = std::get<PoissonAttack>(dist);
        const int cap = poisson_cap(d);
        for (;;) {
            const double u = rng.next_uniform();
            double pmf = std::exp(-d.rate);
            double cum = pmf;
            int k = 0;
            while (u >= cum && k <= cap) {
                ++k;
                pmf *= d.rate / k;
                cum += pmf;
            }
            if (k <= cap) return static_cast<double>(k);
        }
    }
    return attack_quantile(dist, rng.next_uniform());
}

inline double attack_mean(const AttackDistribution& dist) {
    return std::visit(
        [](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, UniformAttack>) {
                return 0.5 * (d.lo + d.hi);
            } else if constexpr (std::is_same_v<T, DegenerateAttack>) {
                return d.value;
            } else if constexpr (std::is_same_v<T, PoissonAttack>) {
                const int cap = poisson_cap(d);
                double pmf = std::exp(-d.rate);
                double total = pmf;
                double mean = 0.0;
                for (int k = 1; k <= cap; ++k) {
                    pmf *= d.rate / k;
                    total += pmf;
                    mean += k * pmf;
                }
                return mean / total;
            } else {
                // Standard truncated-normal moment formula.
                const double za = (d.lo - d.mu) / d.sigma;
                const double zb = (d.hi - d.mu) / d.sigma;
                const double Fa = norm_cdf(za);
                const double Fb = norm_cdf(zb);
                const double inv_sqrt_2pi = 0.3989422804014326779;
                const double pa = inv_sqrt_2pi * std::exp(-0.5 * za * za);
                const double pb = inv_sqrt_2pi * std::exp(-0.5 * zb * zb);
                return d.mu + d.sigma * (pa - pb) / (Fb - Fa);
            }
        },
        dist);
}

struct AttackNode {
    double a = 0.0;
    double prob = 1.0;
};

// Quadrature support for expectations over the attack law: discrete
// distributions contribute their exact support, continuous ones n
// equal-probability midpoint quantiles.
inline std::vector<AttackNode> attack_nodes(const AttackDistribution& dist, int n = 16) {
    if (n < 1) throw ConfigError("attack_nodes: n must be >= 1");
    validate_attack(dist);
    std::vector<AttackNode> nodes;
    if (std::holds_alternative<DegenerateAttack>(dist)) {
        nodes.push_back({std::get<DegenerateAttack>(dist).value, 1.0});
    } else if (std::holds_alternative<PoissonAttack>(dist)) {
        const auto& d = std::get<PoissonAttack>(dist);
        const int cap = poisson_cap(d);
        double pmf = std::exp(-d.rate);
        double total = pmf;
        nodes.push_back({0.0, pmf});
        for (int k = 1; k <= cap; ++k) {
            pmf *= d.rate / k;
            total += pmf;
            nodes.push_back({static_cast<double>(k), pmf});
        }
        for (auto& node : nodes) node.prob /= total;
    } else {
        nodes.reserve(n);
        for (int i = 0; i < n; ++i)
            nodes.push_back({attack_quantile(dist, (i + 0.5) / n), 1.0 / n});
    }
    return nodes;
}

struct StabilityCheck {
    bool holds = false;
    double lhs = 0.0;  // E_a[ drop prob at full power ]
    double rhs = 0.0;  // 1 / rho(A)^2
};

// Mean-square stabilizability of the estimator under the attack: the
// expected full-power drop rate must stay below 1/rho(A)^2.
inline StabilityCheck check_stability_assumption(const ChannelModel& ch,
                                                 const AttackDistribution& dist,
                                                 double rho_A) {
    ch.validate();
    StabilityCheck out;
    double lhs = 0.0;
    for (const auto& node : attack_nodes(dist, 4096))
        lhs += node.prob * ch.min_drop_prob(node.a);
    out.lhs = lhs;
    out.rhs = 1.0 / (rho_A * rho_A);
    out.holds = lhs < out.rhs;
    return out;
}

}  // namespace powersched
