#pragma once

#include <Eigen/Dense>

#include "powersched/errors.hpp"

namespace powersched {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Minimum eigenvalue test with floating-point slack scaled by the trace.
inline bool is_psd(const Mat& M, double tol_scale = 1e-9) {
    if (M.rows() != M.cols()) return false;
    if (M.size() == 0) return false;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()),
                                          Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol_scale * (1.0 + M.trace());
}

inline bool is_symmetric(const Mat& M, double tol = 1e-12) {
    if (M.rows() != M.cols()) return false;
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = i + 1; j < M.cols(); ++j)
            if (std::abs(M(i, j) - M(j, i)) > tol * (1.0 + std::abs(M(i, j))))
                return false;
    return true;
}

// Plant, cost weights and noise statistics of the regulated system:
//   x_{k+1} = A x_k + B u_k + w_k,   w_k ~ N(0, W),   x_0 ~ N(xbar0, X0)
// with stage cost x'Qx + u'Ru, terminal weight Q_N and discount gamma.
struct SystemModel {
    Mat A;
    Mat B;
    Mat W;
    Mat Q;
    Mat R;
    Mat Q_N;
    Vec xbar0;
    Mat X0;
    double gamma = 1.0;

    int state_dim() const { return static_cast<int>(A.rows()); }
    int input_dim() const { return static_cast<int>(B.cols()); }

    void validate(bool infinite_horizon = false) const {
        const auto n = A.rows();
        const auto m = B.cols();
        if (A.cols() != n) throw DimensionError("A must be square");
        if (B.rows() != n) throw DimensionError("B row count must match A");
        if (W.rows() != n || W.cols() != n) throw DimensionError("W must be n x n");
        if (Q.rows() != n || Q.cols() != n) throw DimensionError("Q must be n x n");
        if (Q_N.rows() != n || Q_N.cols() != n) throw DimensionError("Q_N must be n x n");
        if (R.rows() != m || R.cols() != m) throw DimensionError("R must be m x m");
        if (xbar0.size() != n) throw DimensionError("xbar0 must have n entries");
        if (X0.rows() != n || X0.cols() != n) throw DimensionError("X0 must be n x n");
        if (!is_psd(W)) throw ConfigError("W must be positive semi-definite");
        if (!is_psd(Q)) throw ConfigError("Q must be positive semi-definite");
        if (!is_psd(Q_N)) throw ConfigError("Q_N must be positive semi-definite");
        if (!is_psd(X0)) throw ConfigError("X0 must be positive semi-definite");
        Eigen::LLT<Mat> llt(R);
        if (llt.info() != Eigen::Success)
            throw ConfigError("R must be positive definite");
        if (infinite_horizon) {
            if (!(gamma > 0.0 && gamma < 1.0))
                throw ConfigError("gamma must lie in (0,1) for infinite-horizon costs");
        } else if (!(gamma > 0.0 && gamma <= 1.0)) {
            throw ConfigError("gamma must lie in (0,1]");
        }
    }

    // Rank of the controllability matrix [B AB ... A^{n-1}B]; a heuristic
    // screen, not a certification.
    bool controllable_heuristic() const {
        const auto n = A.rows();
        Mat ctrb(n, n * B.cols());
        Mat AkB = B;
        for (Eigen::Index k = 0; k < n; ++k) {
            ctrb.middleCols(k * B.cols(), B.cols()) = AkB;
            AkB = A * AkB;
        }
        Eigen::ColPivHouseholderQR<Mat> qr(ctrb);
        qr.setThreshold(1e-10);
        return qr.rank() == n;
    }
};

}  // namespace powersched
