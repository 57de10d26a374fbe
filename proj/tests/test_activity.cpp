#include <catch2/catch_amalgamated.hpp>

#include "marketlab/activity.hpp"
#include "marketlab/stats.hpp"
#include "oracles.hpp"

using namespace marketlab;

TEST_CASE("market activity formula", "[activity]") {
    REQUIRE(market_activity({0.05, 0.05, 0.05}) == Catch::Approx(0.05).epsilon(1e-15));
    REQUIRE(market_activity({1.0, 4.0}) == Catch::Approx(2.25).epsilon(1e-15));
    REQUIRE(market_activity({0.37}) == Catch::Approx(0.37).epsilon(1e-15));
    REQUIRE_THROWS_AS(market_activity({0.1, -0.2}), std::invalid_argument);
}

TEST_CASE("analytic relative entropy and its decomposition", "[activity]") {
    // equal activities: level term only
    const auto equal = relative_entropy_analytic(ActivityProfile::of({0.05, 0.05, 0.05}), 2.0);
    REQUIRE(equal.analytic_value == Catch::Approx(-0.3).epsilon(1e-14));
    REQUIRE(equal.decomposition_penalty == Catch::Approx(0.0).margin(1e-16));

    // t = 0
    REQUIRE(relative_entropy_analytic(ActivityProfile::of({0.1, 0.4}), 0.0).analytic_value ==
            0.0);

    // hand example: n=2, (1,4), t=1 -> -5 = -4.5 - 0.5
    const auto hand = relative_entropy_analytic(ActivityProfile::of({1.0, 4.0}), 1.0);
    REQUIRE(hand.analytic_value == Catch::Approx(-5.0).epsilon(1e-14));
    REQUIRE(hand.decomposition_level == Catch::Approx(-4.5).epsilon(1e-14));
    REQUIRE(hand.decomposition_penalty == Catch::Approx(-0.5).epsilon(1e-14));
}

// algebraic identity sum a_j = n a + sum (sqrt(a_j) - sqrt(a))^2, expanded
// directly as an independent check
TEST_CASE("decomposition identity holds for random profiles", "[activity]") {
    RngStream rng(5, StreamId{0, 0});
    for (int i = 0; i < 2000; ++i) {
        const int n = 1 + static_cast<int>(rng.next_u64() % 8);
        std::vector<double> a(static_cast<std::size_t>(n));
        for (auto& v : a) v = rng.uniform() < 0.2 ? 0.0 : 0.3 * rng.uniform();
        const double t = 0.1 + 5.0 * rng.uniform();
        const auto rep = relative_entropy_analytic(ActivityProfile::of(a), t);
        REQUIRE(rep.analytic_value ==
                Catch::Approx(rep.decomposition_level + rep.decomposition_penalty)
                    .margin(1e-12 * std::max(1.0, std::fabs(rep.analytic_value))));

        // symbolic-expansion oracle: the cross term vanishes by construction
        const double am = market_activity(a);
        double direct = 0.0;
        for (double aj : a) direct -= aj * t;
        REQUIRE(rep.analytic_value == Catch::Approx(direct).margin(1e-13));
        double cross = 0.0;
        for (double aj : a) cross += std::sqrt(aj) - std::sqrt(am);
        REQUIRE(std::fabs(2.0 * std::sqrt(am) * cross * t) < 1e-10);
    }
}

TEST_CASE("monte carlo relative entropy brackets the analytic value", "[activity]") {
    const auto params = ModelParams::entropy_maximizing(3, 0.05, 2.0, 0.5, 21);
    const auto rep = relative_entropy_mc(params, 1.0, 20000);
    REQUIRE(rep.analytic_value == Catch::Approx(-0.15).epsilon(1e-14));
    REQUIRE(std::fabs(rep.mc_value - rep.analytic_value) < 3.0 * rep.mc_standard_error);

    // zero activities: deterministic paths, identically zero
    const auto frozen = ModelParams::entropy_maximizing(2, 0.0, 2.0, 0.5, 21);
    const auto rep0 = relative_entropy_mc(frozen, 1.0, 100);
    REQUIRE(rep0.mc_value == 0.0);
    REQUIRE(rep0.mc_standard_error == 0.0);
}

TEST_CASE("average squared volatility equals twice the activity", "[activity]") {
    const auto params = ModelParams::entropy_maximizing(2, 0.05, 2.0, 0.5, 23);
    const auto slices = simulate_slices(params, 20000, {1.0});
    std::vector<double> th2(20000);
    for (std::size_t p = 0; p < th2.size(); ++p) {
        const double th = slices.theta[slices.idx(p, 0, 0)];
        th2[p] = th * th;
    }
    const auto s = summarize(th2);
    REQUIRE(std::fabs(s.mean - 2.0 * 0.05) < 3.0 * s.se);
}

TEST_CASE("equilibrium maximizer returns the equal profile", "[activity]") {
    const auto eq = equilibrium_maximize(0.05, 4);
    for (double a : eq.profile.activities) REQUIRE(a == Catch::Approx(0.05).margin(1e-6));
    REQUIRE(eq.objective == Catch::Approx(-0.2).margin(1e-9));
    REQUIRE(eq.max_deviation < 1e-6);

    const auto single = equilibrium_maximize(0.07, 1);
    REQUIRE(single.profile.activities[0] == Catch::Approx(0.07).margin(1e-12));
}

TEST_CASE("equilibrium restarts all converge to the analytic optimum", "[activity]") {
    const auto eq = equilibrium_maximize(0.05, 5, 20, 1234);
    REQUIRE(eq.converged);
    REQUIRE(std::fabs(eq.objective - (-5.0 * 0.05)) < 1e-9);
    REQUIRE(eq.max_deviation < 1e-6);
}

TEST_CASE("equilibrium trace records iterates when requested", "[activity]") {
    const auto eq = equilibrium_maximize(0.02, 3, 2, 9, /*keep_trace=*/true);
    REQUIRE_FALSE(eq.trace.empty());
    for (const auto& row : eq.trace) REQUIRE(row.constraint_residual < 1e-9);
}

TEST_CASE("maximality: unequal profiles fall below the level term", "[activity]") {
    RngStream rng(31, StreamId{0, 0});
    for (int i = 0; i < 200; ++i) {
        const int n = 2 + static_cast<int>(rng.next_u64() % 4);
        std::vector<double> a(static_cast<std::size_t>(n));
        for (auto& v : a) v = 0.3 * rng.uniform();
        const auto profile = ActivityProfile::of(a);
        const auto rep = relative_entropy_analytic(profile, 1.0);
        double dev = 0.0;
        for (double aj : a) dev = std::max(dev, std::fabs(aj - profile.market_activity_level));
        if (dev > 1e-6) {
            REQUIRE(rep.analytic_value < rep.decomposition_level);
            REQUIRE(rep.decomposition_penalty < 0.0);
        }
    }
}
