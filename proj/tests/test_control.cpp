#include <catch2/catch_amalgamated.hpp>

#include "powersched/control.hpp"
#include "powersched/rng.hpp"

using namespace powersched;

namespace {

SystemModel benchmark_model() {
    SystemModel m;
    m.A = (Mat(2, 2) << 1.3, 0.0, 0.0, -1.1).finished();
    m.B = (Mat(2, 1) << 0.1, 0.1).finished();
    m.W = 0.001 * Mat::Identity(2, 2);
    m.Q = Mat::Identity(2, 2);
    m.R = Mat::Identity(1, 1);
    m.Q_N = Mat::Identity(2, 2);
    m.xbar0 = Vec::Zero(2);
    m.X0 = 0.01 * Mat::Identity(2, 2);
    m.gamma = 0.9;
    return m;
}

}  // namespace

TEST_CASE("single loop step by hand") {
    const SystemModel m = benchmark_model();
    const Vec x = (Vec(2) << 1.0, -2.0).finished();
    const Vec u = (Vec(1) << 0.5).finished();
    const Vec w = (Vec(2) << 0.01, -0.02).finished();

    const Vec xp = plant_step(m, x, u, w);
    CHECK(xp(0) == Catch::Approx(1.3 * 1.0 + 0.1 * 0.5 + 0.01).epsilon(1e-15));
    CHECK(xp(1) == Catch::Approx(-1.1 * -2.0 + 0.1 * 0.5 - 0.02).epsilon(1e-15));

    const Vec xhat = (Vec(2) << 0.8, -1.5).finished();
    const Vec h_drop = estimator_step(m, xhat, x, u, false);
    CHECK(h_drop(0) == Catch::Approx(1.3 * 0.8 + 0.05).epsilon(1e-15));
    const Vec h_ok = estimator_step(m, xhat, x, u, true);
    CHECK(h_ok(0) == Catch::Approx(1.3 * 1.0 + 0.05).epsilon(1e-15));
    CHECK(h_ok(1) == Catch::Approx(-1.1 * -2.0 + 0.05).epsilon(1e-15));
}

TEST_CASE("control input sign") {
    const Mat L = (Mat(1, 2) << 2.0, -1.0).finished();
    const Vec xhat = (Vec(2) << 0.5, 0.25).finished();
    const Vec u = control_input(L, xhat);
    CHECK(u(0) == Catch::Approx(-(2.0 * 0.5 - 1.0 * 0.25)).epsilon(1e-15));
}

TEST_CASE("error recursion tracks x - xhat") {
    const SystemModel m = benchmark_model();
    RandomStream rng(5, 0, 0);
    LoopState s = initial_state(m, (Vec(2) << 0.3, -0.1).finished());
    CHECK((s.e - (s.x - s.xhat)).cwiseAbs().maxCoeff() == 0.0);

    const Mat L = (Mat(1, 2) << 1.0, 0.5).finished();
    for (int k = 0; k < 40; ++k) {
        const bool delivered = (rng.next_u64() & 1) != 0;
        Vec w(2);
        for (int i = 0; i < 2; ++i) w(i) = 0.05 * rng.next_gaussian();
        const Vec u = control_input(L, s.xhat);
        const Vec xp = plant_step(m, s.x, u, w);
        const Vec hp = estimator_step(m, s.xhat, s.x, u, delivered);
        s.e = error_step(m, s.e, w, delivered);
        s.x = xp;
        s.xhat = hp;
        CHECK((s.e - (s.x - s.xhat)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("delivery collapses the error to fresh noise") {
    const SystemModel m = benchmark_model();
    const Vec e = (Vec(2) << 4.0, -3.0).finished();
    const Vec w = (Vec(2) << 0.1, 0.2).finished();
    CHECK((error_step(m, e, w, true) - w).cwiseAbs().maxCoeff() == 0.0);
    const Vec drop = error_step(m, e, w, false);
    CHECK(drop(0) == Catch::Approx(1.3 * 4.0 + 0.1).epsilon(1e-15));
    CHECK(drop(1) == Catch::Approx(-1.1 * -3.0 + 0.2).epsilon(1e-15));
}
