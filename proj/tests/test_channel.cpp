#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "powersched/channel.hpp"
#include "powersched/rng.hpp"

using namespace powersched;

namespace {
const ChannelModel bench{3.0, 1.0, 3.0};
}

TEST_CASE("normal cdf and tail") {
    CHECK(norm_cdf(0.0) == Catch::Approx(0.5).epsilon(1e-15));
    CHECK(norm_cdf(1.3) == Catch::Approx(0.9031995154143897).epsilon(1e-14));
    CHECK(q_tail(3.0) == Catch::Approx(0.0013498980316300933).epsilon(1e-13));
    CHECK(q_tail(0.0) == Catch::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("tail quantile against reference values") {
    // reference points computed with an independent implementation
    const struct {
        double y, x;
    } cases[] = {
        {0.025, 1.9599639845400545},  {0.25, 0.67448975019608171},
        {0.3, 0.52440051270804089},   {1e-3, 3.0902323061678132},
        {1e-10, 6.3613409024040557},  {1e-12, 7.0344838253011313},
        {1e-200, 30.205594179579641}, {1e-300, 37.047096299361201},
    };
    for (const auto& c : cases)
        CHECK(q_tail_inv(c.y) == Catch::Approx(c.x).epsilon(1e-12));
    CHECK(q_tail_inv(0.5) == 0.0);
}

TEST_CASE("tail quantile round trip") {
    for (double y = 1e-12; y <= 0.5; y *= 3.7) {
        const double x = q_tail_inv(y);
        CHECK(q_tail(x) == Catch::Approx(y).epsilon(1e-11));
    }
    CHECK_THROWS_AS(q_tail_inv(0.0), ConfigError);
    CHECK_THROWS_AS(q_tail_inv(0.6), ConfigError);
}

TEST_CASE("drop probability values") {
    CHECK(bench.drop_prob(1.0, 0.0) ==
          Catch::Approx(0.083264516663550406).epsilon(1e-13));
    CHECK(bench.drop_prob(1.0, 0.5) ==
          Catch::Approx(0.15729920705028502).epsilon(1e-13));
    CHECK(bench.drop_prob(0.0, 0.3) == 1.0);  // silence is always dropped
    CHECK(bench.min_drop_prob(0.0) ==
          Catch::Approx(0.0026997960632601866).epsilon(1e-13));
    CHECK(bench.min_drop_prob(1.0) ==
          Catch::Approx(0.033894853524689267).epsilon(1e-13));
    CHECK_THROWS_AS(bench.drop_prob(-0.1, 0.0), ConfigError);
    CHECK_THROWS_AS(bench.drop_prob(1.0, -0.1), ConfigError);
}

TEST_CASE("power for a target drop probability") {
    const auto pr = bench.power_for(0.1, 0.7);
    CHECK(pr.power == Catch::Approx(1.5331412906540685).epsilon(1e-12));
    CHECK(pr.feasible);
    CHECK(bench.power_for(1.0, 2.0).power == 0.0);
    CHECK_FALSE(bench.power_for(1e-5, 1.0).feasible);  // beyond the budget
    CHECK_THROWS_AS(bench.power_for(0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(bench.power_for(1.1, 1.0), ConfigError);
}

TEST_CASE("power/drop round trip over a dense grid") {
    double worst = 0.0;
    for (int i = 0; i < 100; ++i)
        for (int j = 0; j < 100; ++j) {
            const double p = 3.0 * i / 99.0;
            const double a = 2.0 * j / 99.0;
            const double back = bench.power_for(bench.drop_prob(p, a), a).power;
            worst = std::max(worst, std::abs(back - p) / (1.0 + p));
        }
    CHECK(worst < 1e-8);
}

TEST_CASE("channel validation") {
    const ChannelModel no_budget{3.0, 1.0, 0.0};  // zero budget is legal
    const ChannelModel no_gain{0.0, 1.0, 3.0};
    const ChannelModel no_noise{3.0, 0.0, 3.0};
    const ChannelModel negative{3.0, 1.0, -1.0};
    CHECK_NOTHROW(no_budget.validate());
    CHECK_THROWS_AS(no_gain.validate(), ConfigError);
    CHECK_THROWS_AS(no_noise.validate(), ConfigError);
    CHECK_THROWS_AS(negative.validate(), ConfigError);
    CHECK(no_budget.min_drop_prob(0.5) == 1.0);
}

TEST_CASE("stabilizability margin under the benchmark attack") {
    const auto chk = check_stability_assumption(bench, UniformAttack{0.0, 1.0}, 1.3);
    CHECK(chk.lhs == Catch::Approx(0.015645650939720035).epsilon(1e-6));
    CHECK(chk.rhs == Catch::Approx(0.59171597633136097).epsilon(1e-12));
    CHECK(chk.holds);

    const ChannelModel dead{3.0, 1.0, 0.0};
    const auto broken = check_stability_assumption(dead, UniformAttack{0.0, 1.0}, 1.3);
    CHECK(broken.lhs == 1.0);
    CHECK_FALSE(broken.holds);
}

TEST_CASE("poisson truncation") {
    CHECK(poisson_auto_cap(0.5) == 9);
    CHECK(poisson_auto_cap(1.0) == 11);
    CHECK(poisson_cap(PoissonAttack{0.5, -1}) == 9);
    CHECK(poisson_cap(PoissonAttack{0.5, 4}) == 4);
}

TEST_CASE("attack means") {
    CHECK(attack_mean(UniformAttack{0.3, 1.7}) == Catch::Approx(1.0).epsilon(1e-15));
    CHECK(attack_mean(DegenerateAttack{0.7}) == 0.7);
    CHECK(attack_mean(PoissonAttack{0.5}) ==
          Catch::Approx(0.49999999836773845).epsilon(1e-12));
    CHECK(attack_mean(PoissonAttack{1.0}) ==
          Catch::Approx(0.99999999078384449).epsilon(1e-12));
    CHECK(attack_mean(TruncNormAttack{0.5, 0.5, 0.0, 1.0}) ==
          Catch::Approx(0.5).epsilon(1e-14));
    CHECK(attack_mean(TruncNormAttack{1.0, std::sqrt(1.0 / 3.0), 0.0, 2.0}) ==
          Catch::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("attack quantiles") {
    CHECK(attack_quantile(UniformAttack{0.0, 2.0}, 0.25) ==
          Catch::Approx(0.5).epsilon(1e-15));
    CHECK(attack_quantile(DegenerateAttack{0.7}, 0.9) == 0.7);
    CHECK(attack_quantile(TruncNormAttack{0.5, 0.5, 0.0, 1.0}, 0.5) ==
          Catch::Approx(0.5).margin(1e-12));
    CHECK(attack_quantile(TruncNormAttack{0.5, 0.5, 0.0, 1.0}, 0.9) ==
          Catch::Approx(0.87450729948478478).epsilon(1e-12));
    // P(0)=0.6065, P(0..1)=0.9098, P(0..2)=0.9856 for rate 1/2
    CHECK(attack_quantile(PoissonAttack{0.5}, 0.5) == 0.0);
    CHECK(attack_quantile(PoissonAttack{0.5}, 0.7) == 1.0);
    CHECK(attack_quantile(PoissonAttack{0.5}, 0.95) == 2.0);
}

TEST_CASE("attack node sets") {
    const auto uni = attack_nodes(UniformAttack{0.0, 1.0}, 4);
    REQUIRE(uni.size() == 4);
    CHECK(uni[0].a == Catch::Approx(0.125).epsilon(1e-15));
    CHECK(uni[3].a == Catch::Approx(0.875).epsilon(1e-15));
    for (const auto& n : uni) CHECK(n.prob == Catch::Approx(0.25).epsilon(1e-15));

    const auto poi = attack_nodes(PoissonAttack{0.5}, 16);
    REQUIRE(poi.size() == 10);  // exact support 0..cap, not n quantile nodes
    double total = 0.0, mean = 0.0;
    for (const auto& n : poi) {
        total += n.prob;
        mean += n.prob * n.a;
    }
    CHECK(total == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(mean == Catch::Approx(0.49999999836773845).epsilon(1e-12));

    const auto deg = attack_nodes(DegenerateAttack{0.3}, 8);
    REQUIRE(deg.size() == 1);
    CHECK(deg[0].a == 0.3);
    CHECK(deg[0].prob == 1.0);
}

TEST_CASE("attack validation") {
    CHECK_THROWS_AS(validate_attack(UniformAttack{1.0, 0.5}), ConfigError);
    CHECK_THROWS_AS(validate_attack(UniformAttack{-0.1, 0.5}), ConfigError);
    CHECK_THROWS_AS(validate_attack(PoissonAttack{0.0}), ConfigError);
    CHECK_THROWS_AS(validate_attack(PoissonAttack{0.5, 0}), ConfigError);
    CHECK_THROWS_AS(validate_attack(TruncNormAttack{0.5, 0.0, 0.0, 1.0}), ConfigError);
    CHECK_THROWS_AS(validate_attack(DegenerateAttack{-1.0}), ConfigError);
    CHECK_NOTHROW(validate_attack(PoissonAttack{0.5, -1}));
}

TEST_CASE("attack sampling matches the law") {
    const int n = 20000;

    SECTION("uniform: mean and Kolmogorov distance") {
        RandomStream rng(99, 0, substream::kAttack);
        const UniformAttack d{0.0, 1.0};
        std::vector<double> xs(n);
        double mean = 0.0;
        for (int i = 0; i < n; ++i) {
            xs[i] = sample_attack(d, rng);
            mean += xs[i];
        }
        mean /= n;
        CHECK(std::abs(mean - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
        std::sort(xs.begin(), xs.end());
        double ks = 0.0;
        for (int i = 0; i < n; ++i) {
            const double F = xs[i];  // uniform cdf
            ks = std::max(ks, std::max(F - double(i) / n, double(i + 1) / n - F));
        }
        CHECK(ks < 1.95 / std::sqrt(double(n)));
    }

    SECTION("poisson: mean and support") {
        RandomStream rng(99, 1, substream::kAttack);
        const PoissonAttack d{0.5};
        double mean = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = sample_attack(d, rng);
            CHECK(x >= 0.0);
            CHECK(x <= 9.0);
            CHECK(x == std::floor(x));
            mean += x;
        }
        mean /= n;
        CHECK(std::abs(mean - 0.5) < 4.0 * std::sqrt(0.5 / n));
    }

    SECTION("truncnorm: mean and range") {
        RandomStream rng(99, 2, substream::kAttack);
        const TruncNormAttack d{0.5, 0.5, 0.0, 1.0};
        double mean = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = sample_attack(d, rng);
            CHECK(x >= 0.0);
            CHECK(x <= 1.0);
            mean += x;
        }
        mean /= n;
        CHECK(std::abs(mean - 0.5) < 4.0 * 0.3 / std::sqrt(double(n)));
    }

    SECTION("degenerate") {
        RandomStream rng(99, 3, substream::kAttack);
        CHECK(sample_attack(DegenerateAttack{0.25}, rng) == 0.25);
    }
}
