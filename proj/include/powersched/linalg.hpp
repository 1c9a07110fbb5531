#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "powersched/errors.hpp"
#include "powersched/model.hpp"

namespace powersched {

inline double spectral_radius(const Mat& A) {
    if (A.rows() != A.cols()) throw DimensionError("spectral_radius: matrix must be square");
    if (A.size() == 0) throw DimensionError("spectral_radius: matrix is empty");
    Eigen::EigenSolver<Mat> es(A, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw ConvergenceError("spectral_radius: eigenvalue iteration failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// One backward step of the discounted Riccati recursion.  Returns the
// value matrix P_k together with the gain L_k and the induced error
// weight Sigma_k = L_k' (R + gamma B'P B) L_k.
struct RiccatiStep {
    Mat P;
    Mat L;
    Mat Sigma;
};

inline RiccatiStep riccati_step(const SystemModel& m, const Mat& P_next) {
    const double g = m.gamma;
    const Mat BtP = m.B.transpose() * P_next;
    const Mat G = m.R + g * BtP * m.B;           // R + gamma B'P_{k+1}B
    Eigen::LDLT<Mat> ldlt(0.5 * (G + G.transpose()));
    if (ldlt.info() != Eigen::Success)
        throw ConvergenceError("riccati_step: R + gamma*B'PB is not invertible");
    RiccatiStep out;
    out.L = g * ldlt.solve(BtP * m.A);
    out.P = m.Q + g * m.A.transpose() * P_next * m.A -
            g * m.A.transpose() * BtP.transpose() * out.L;
    out.P = 0.5 * (out.P + out.P.transpose());
    out.Sigma = out.L.transpose() * G * out.L;
    out.Sigma = 0.5 * (out.Sigma + out.Sigma.transpose());
    return out;
}

// Time-varying gains for a finite horizon, or a single stationary triple.
// For the finite case, P holds T+1 matrices (P_0..P_T with P_T = Q_N) and
// L, Sigma hold T entries each (indices 0..T-1).
struct GainSchedule {
    std::vector<Mat> P;
    std::vector<Mat> L;
    std::vector<Mat> Sigma;
    bool stationary = false;

    const Mat& P_at(std::size_t k) const { return stationary ? P.front() : P.at(k); }
    const Mat& L_at(std::size_t k) const { return stationary ? L.front() : L.at(k); }
    const Mat& Sigma_at(std::size_t k) const {
        return stationary ? Sigma.front() : Sigma.at(k);
    }
};

inline GainSchedule riccati_backward(const SystemModel& m, int horizon) {
    if (horizon < 1) throw ConfigError("riccati_backward: horizon must be >= 1");
    m.validate();
    GainSchedule sched;
    sched.P.resize(horizon + 1);
    sched.L.resize(horizon);
    sched.Sigma.resize(horizon);
    sched.P[horizon] = m.Q_N;
    for (int k = horizon - 1; k >= 0; --k) {
        RiccatiStep step = riccati_step(m, sched.P[k + 1]);
        sched.P[k] = step.P;
        sched.L[k] = step.L;
        sched.Sigma[k] = step.Sigma;
    }
    return sched;
}

struct StationaryGains {
    Mat P;
    Mat L;
    Mat Sigma;
    int iterations = 0;
    double residual = 0.0;
};

// Fixed-point iteration of the Riccati map starting from Q_N.  Converges
// for gamma < 1 whenever the discounted pair (sqrt(gamma) A, B) is
// stabilizable, which validate() does not certify, hence the iteration cap.
inline StationaryGains riccati_stationary(const SystemModel& m, double tol = 1e-10,
                                          int max_iter = 100000) {
    m.validate();
    StationaryGains out;
    Mat P = m.Q_N;
    RiccatiStep step;
    for (int it = 0; it < max_iter; ++it) {
        step = riccati_step(m, P);
        out.residual = (step.P - P).cwiseAbs().maxCoeff();
        P = step.P;
        if (out.residual <= tol) {
            out.P = P;
            out.L = step.L;
            out.Sigma = step.Sigma;
            out.iterations = it + 1;
            return out;
        }
    }
    throw ConvergenceError("riccati_stationary: no fixed point within iteration cap");
}

// Symmetric square root of a PSD matrix; tiny negative eigenvalues from
// rounding are clipped so singular covariances (e.g. X0 = 0) still work.
inline Mat psd_sqrt(const Mat& M) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()));
    if (es.info() != Eigen::Success)
        throw ConvergenceError("psd_sqrt: eigen decomposition failed");
    const Vec lam = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

// Solve Theta = s A'Theta A + Sigma for the discounted Lyapunov weight.
// Unique PSD solution exists iff s * rho(A)^2 < 1; otherwise the series
// sum_r s^r (A^r)' Sigma A^r diverges and we refuse.
inline Mat dlyap_discounted(const Mat& A, const Mat& Sigma, double s) {
    const auto n = A.rows();
    if (A.cols() != n) throw DimensionError("dlyap_discounted: A must be square");
    if (Sigma.rows() != n || Sigma.cols() != n)
        throw DimensionError("dlyap_discounted: Sigma must match A");
    if (s < 0.0) throw ConfigError("dlyap_discounted: s must be non-negative");
    const double rho = spectral_radius(A);
    if (s * rho * rho >= 1.0 - 1e-9)
        throw InfeasibleError("dlyap_discounted: s*rho(A)^2 >= 1, no bounded solution");
    // vec(Theta) = (I - s A' (x) A')^{-1} vec(Sigma); fine for the small
    // state dimensions this library targets.
    const Mat At = A.transpose();
    Mat K = Mat::Identity(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            K.block(i * n, j * n, n, n) -= s * At(i, j) * At;
    Eigen::Map<const Vec> rhs(Sigma.data(), n * n);
    Vec v = K.partialPivLu().solve(rhs);
    Mat Theta = Eigen::Map<const Mat>(v.data(), n, n);
    return 0.5 * (Theta + Theta.transpose());
}

}  // namespace powersched
