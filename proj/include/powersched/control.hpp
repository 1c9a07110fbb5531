#pragma once

#include "powersched/linalg.hpp"
#include "powersched/model.hpp"

namespace powersched {

// Certainty-equivalence input from the smart sensor's state estimate.
inline Vec control_input(const Mat& L, const Vec& xhat) { return -L * xhat; }

inline Vec plant_step(const SystemModel& m, const Vec& x, const Vec& u, const Vec& w) {
    return m.A * x + m.B * u + w;
}

// Remote estimator with a one-step measurement delay: a packet delivered
// in slot k carries x_k and is applied at the next prediction, so
//   xhat_{k+1} = A (delta_k ? x_k : xhat_k) + B u_k.
inline Vec estimator_step(const SystemModel& m, const Vec& xhat, const Vec& x, const Vec& u,
                          bool delivered) {
    return m.A * (delivered ? x : xhat) + m.B * u;
}

// The induced estimation error e = x - xhat collapses to the process
// noise on delivery and propagates through A otherwise:
//   e_{k+1} = delta_k w_k + (1 - delta_k)(A e_k + w_k).
inline Vec error_step(const SystemModel& m, const Vec& e, const Vec& w, bool delivered) {
    return delivered ? w : Vec(m.A * e + w);
}

struct LoopState {
    Vec x;
    Vec xhat;
    Vec e;  // kept alongside x, xhat so simulations can cross-check x - xhat
};

inline LoopState initial_state(const SystemModel& m, const Vec& x0) {
    LoopState s;
    s.x = x0;
    s.xhat = m.xbar0;
    s.e = x0 - m.xbar0;
    return s;
}

}  // namespace powersched
