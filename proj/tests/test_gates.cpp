#include <cmath>
#include <vector>

#include "doctest.h"

#include "tabgns/errors.hpp"
#include "tabgns/gates.hpp"
#include "tabgns/gradcheck.hpp"

using namespace tabgns;

TEST_CASE("sigmoid is stable, monotone and matches known values") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(-3.0) == doctest::Approx(0.04742587317756678).epsilon(1e-14));
    CHECK(sigmoid(3.0) == doctest::Approx(1.0 - 0.04742587317756678).epsilon(1e-14));
    CHECK(sigmoid(-800.0) >= 0.0);
    CHECK(sigmoid(800.0) <= 1.0);
    CHECK(std::isfinite(sigmoid(-800.0)));
    CHECK(std::isfinite(sigmoid(800.0)));
    CHECK(sigmoid(-1.0) < sigmoid(0.0));
    CHECK(sigmoid(0.0) < sigmoid(1.0));
}

TEST_CASE("make_gate_bank lays out one logit per hidden neuron") {
    GateBank bank = make_gate_bank(3, 4, -3.0, 0.5);
    CHECK(bank.hidden_layers == 3);
    CHECK(bank.width == 4);
    CHECK(bank.tau == 0.5);
    REQUIRE(bank.logits.size() == 12);
    for (double g : bank.logits) CHECK(g == -3.0);
    bank.logit(2, 1) = 7.0;
    CHECK(bank.logits[2 * 4 + 1] == 7.0);
}

TEST_CASE("gate_soft_prob applies the tempered logistic with clamping") {
    // zero noise collapses to sigmoid(g / tau)
    CHECK(gate_soft_prob(0.0, 0.0, 0.0, 1.0) == 0.5);
    CHECK(gate_soft_prob(-3.0, 0.0, 0.0, 1.0) ==
          doctest::Approx(0.04742587317756678).epsilon(1e-14));
    CHECK(gate_soft_prob(-3.0, 0.0, 0.0, 2.0) == doctest::Approx(sigmoid(-1.5)).epsilon(1e-14));
    // noise shifts the argument: p = sigmoid((g + o1 - o2) / tau)
    CHECK(gate_soft_prob(1.0, 2.0, 0.5, 1.0) == doctest::Approx(sigmoid(2.5)).epsilon(1e-14));
    // saturation clamps into [1e-12, 1 - 1e-12]
    CHECK(gate_soft_prob(-4000.0, 0.0, 0.0, 1.0) == 1e-12);
    CHECK(gate_soft_prob(4000.0, 0.0, 0.0, 1.0) == 1.0 - 1e-12);
    CHECK_THROWS_AS(gate_soft_prob(0.0, 0.0, 0.0, 0.0), ConfigError);
    CHECK_THROWS_AS(gate_soft_prob(0.0, 0.0, 0.0, -1.0), ConfigError);
}

TEST_CASE("gate_hard thresholds at one half with ties open") {
    CHECK(gate_hard(0.49) == 0.0);
    CHECK(gate_hard(0.5) == 1.0);
    CHECK(gate_hard(0.51) == 1.0);
    CHECK(gate_hard(1e-12) == 0.0);
}

TEST_CASE("gate_backward is the straight-through derivative") {
    CHECK(gate_backward(2.0, 0.5, 1.0) == doctest::Approx(2.0 * 0.25));
    CHECK(gate_backward(2.0, 0.5, 2.0) == doctest::Approx(0.25));
    CHECK(gate_backward(-3.0, 0.9, 1.0) == doctest::Approx(-3.0 * 0.09));
    CHECK(gate_backward(0.0, 0.7, 1.0) == 0.0);
}

TEST_CASE("straight-through slope matches the soft path's true derivative") {
    const double o1 = 0.83, o2 = -0.41;
    for (double tau : {0.5, 1.0, 2.0}) {
        for (double g : {-2.0, -0.3, 0.0, 1.7}) {
            const double p = gate_soft_prob(g, o1, o2, tau);
            auto prob_at = [&](const std::vector<double>& v) {
                return gate_soft_prob(v[0], o1, o2, tau);
            };
            const double err =
                finite_difference_check(prob_at, {g}, {gate_backward(1.0, p, tau)}, 1e-6);
            CHECK(err < 1e-8);
        }
    }
}

TEST_CASE("deterministic_open_prob crosses one half exactly at logit zero") {
    CHECK(deterministic_open_prob(0.0) == 0.5);
    CHECK(deterministic_open_prob(-1e-9) < 0.5);
    CHECK(deterministic_open_prob(1e-9) >= 0.5);
    CHECK(deterministic_open_prob(-3.0) == doctest::Approx(0.04742587317756678).epsilon(1e-14));
}

TEST_CASE("sample_gumbel draws the requested count of finite values") {
    Rng rng(2);
    const std::vector<double> g = sample_gumbel(rng, 1000);
    REQUIRE(g.size() == 1000);
    for (double x : g) CHECK(std::isfinite(x));
}

TEST_CASE("sample_gate_layer fills soft and hard values consistently") {
    Rng rng(6);
    const std::vector<double> logits{-3.0, 0.0, 2.0, -0.5};
    GateSample s = sample_gate_layer(logits.data(), logits.size(), 1.0, rng);
    REQUIRE(s.noise_on.size() == 4);
    REQUIRE(s.noise_off.size() == 4);
    REQUIRE(s.soft.size() == 4);
    REQUIRE(s.hard.size() == 4);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(s.soft[j] ==
              doctest::Approx(gate_soft_prob(logits[j], s.noise_on[j], s.noise_off[j], 1.0))
                  .epsilon(1e-14));
        CHECK(s.hard[j] == gate_hard(s.soft[j]));
        CHECK((s.hard[j] == 0.0 || s.hard[j] == 1.0));
    }

    Rng rng2(6);
    GateSample t = sample_gate_layer(logits.data(), logits.size(), 1.0, rng2);
    CHECK(t.soft == s.soft);
    CHECK(t.hard == s.hard);
}

TEST_CASE("hard samples are temperature-invariant under shared noise") {
    Rng rng(31);
    for (int i = 0; i < 2000; ++i) {
        const double g = rng.uniform_range(-4.0, 4.0);
        const double o1 = rng.gumbel(), o2 = rng.gumbel();
        const double h_half = gate_hard(gate_soft_prob(g, o1, o2, 0.5));
        const double h_one = gate_hard(gate_soft_prob(g, o1, o2, 1.0));
        const double h_two = gate_hard(gate_soft_prob(g, o1, o2, 2.0));
        CHECK(h_half == h_one);
        CHECK(h_one == h_two);
    }
}

TEST_CASE("open frequency follows the logit's sigmoid") {
    // difference of two Gumbels is logistic, so P(open) = sigmoid(g) exactly
    const int n = 20000;
    Rng rng(77);
    for (double g : {-3.0, 0.0, 2.0}) {
        int open = 0;
        for (int i = 0; i < n; ++i) {
            const double p = gate_soft_prob(g, rng.gumbel(), rng.gumbel(), 1.0);
            open += gate_hard(p) == 1.0 ? 1 : 0;
        }
        CHECK(std::abs(open / double(n) - sigmoid(g)) < 0.02);
    }
}
