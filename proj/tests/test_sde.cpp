#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>

#include <boost/math/special_functions/gamma.hpp>

#include "marketlab/sde.hpp"
#include "marketlab/stats.hpp"
#include "oracles.hpp"

using namespace marketlab;

namespace {
double stationary_cdf(double y, double y_bar) {
    return boost::math::gamma_p(2.0, 2.0 * y / y_bar);
}
} // namespace

TEST_CASE("exact step: zero time is the identity", "[sde]") {
    RngStream rng(1, StreamId{0, 0});
    REQUIRE(step_cir_exact(0.7, 0.0, oracles::kYBar, rng) == 0.7);
}

TEST_CASE("exact step rejects bad inputs", "[sde]") {
    RngStream rng(1, StreamId{0, 0});
    REQUIRE_THROWS_AS(step_cir_exact(0.7, -0.1, 1.0, rng), std::invalid_argument);
    REQUIRE_THROWS_AS(step_cir_exact(-0.7, 0.1, 1.0, rng), std::invalid_argument);
    REQUIRE_THROWS_AS(step_cir_exact(0.7, 0.1, 0.0, rng), std::invalid_argument);
}

// Conditional mean oracle: E[Y_{tau+d} | Y_tau = y] = ybar + (y - ybar) e^{-d},
// cross-checked by an Euler-scheme Monte Carlo oracle.
TEST_CASE("exact step reproduces the conditional mean", "[sde]") {
    const double y_bar = oracles::kYBar;
    const double d_tau = 0.5, y0 = 1.0;
    const double expected = y_bar + (y0 - y_bar) * std::exp(-d_tau); // 1.1221485636
    REQUIRE(expected == Catch::Approx(1.1221485636206325).epsilon(1e-12));

    const std::size_t n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        RngStream rng(2024, StreamId{p, 0});
        const double y = step_cir_exact(y0, d_tau, y_bar, rng);
        sum += y;
        sumsq += y * y;
    }
    const double mean = sum / static_cast<double>(n);
    const double se = std::sqrt((sumsq / static_cast<double>(n) - mean * mean) /
                                static_cast<double>(n));
    REQUIRE(std::fabs(mean - expected) < 3.0 * se);

    // Euler oracle at fine steps
    double esum = 0.0;
    const std::size_t ne = 50000, sub = 500;
    for (std::size_t p = 0; p < ne; ++p) {
        RngStream rng(2025, StreamId{p, 0});
        double y = y0;
        for (std::size_t k = 0; k < sub; ++k)
            y = step_cir_euler(y, d_tau / static_cast<double>(sub), y_bar, rng);
        esum += y;
    }
    REQUIRE(esum / static_cast<double>(ne) == Catch::Approx(expected).margin(0.01));
}

TEST_CASE("exact step preserves the stationary law", "[sde]") {
    const double y_bar = oracles::kYBar;
    const std::size_t n = 100000;
    std::vector<double> ys(n);
    parallel_for_paths(n, [&](std::size_t p) {
        RngStream rng(31, StreamId{p, 0});
        const auto init = draw_stationary_initial(
            ModelParams::entropy_maximizing(1, 0.05, 1.0, 0.5, 31), rng);
        ys[p] = step_cir_exact(init.y0, 0.7, y_bar, rng);
    });
    const double d = ks_statistic(ys, [&](double y) { return stationary_cdf(y, y_bar); });
    REQUIRE(d < ks_critical_value(n, 0.01));
}

TEST_CASE("exact step converges to the stationary law from any state", "[sde]") {
    const double y_bar = oracles::kYBar;
    const std::size_t n = 50000;
    std::vector<double> ys(n);
    parallel_for_paths(n, [&](std::size_t p) {
        RngStream rng(32, StreamId{p, 0});
        ys[p] = step_cir_exact(5.0, 20.0, y_bar, rng);
    });
    const double d = ks_statistic(ys, [&](double y) { return stationary_cdf(y, y_bar); });
    REQUIRE(d < ks_critical_value(n, 0.01));
}

TEST_CASE("euler step: identity, drift, clipping", "[sde]") {
    EulerStats stats;
    REQUIRE(step_cir_euler(1.0, 0.0, oracles::kYBar, 0.55, &stats) == 1.0);
    // deterministic drift with suppressed noise
    const double next = step_cir_euler(1.0, 0.01, oracles::kYBar, 0.0, &stats);
    REQUIRE(next == Catch::Approx(1.0 + (oracles::kYBar - 1.0) * 0.01).epsilon(1e-15));
    // a deep negative shock gets clipped to zero and counted
    const double clipped = step_cir_euler(0.001, 0.01, oracles::kYBar, -8.0, &stats);
    REQUIRE(clipped == 0.0);
    REQUIRE(stats.clips == 1);
    REQUIRE(stats.steps == 3);
    // zero state must be handled by the truncation (sqrt(0) = 0)
    REQUIRE(step_cir_euler(0.0, 0.01, oracles::kYBar, 1.0) ==
            Catch::Approx(oracles::kYBar * 0.01));
}

TEST_CASE("euler agrees with the exact law at small steps", "[sde]") {
    const double y_bar = oracles::kYBar;
    const double d_tau = 1e-3;
    const std::size_t n = 100000;
    std::vector<double> exact(n), euler(n);
    parallel_for_paths(n, [&](std::size_t p) {
        RngStream re(41, StreamId{p, 0});
        RngStream ru(42, StreamId{p, 1});
        exact[p] = step_cir_exact(1.0, d_tau, y_bar, re);
        euler[p] = step_cir_euler(1.0, d_tau, y_bar, ru);
    });
    REQUIRE(ks_statistic_two_sample(exact, euler) < 0.01);
}

TEST_CASE("stationary initialization ties tau0 to y0", "[sde]") {
    REQUIRE(stationary_initial_from(1.0).tau0 == 0.0);
    const auto forced = stationary_initial_from(oracles::kYBar);
    REQUIRE(forced.tau0 == Catch::Approx(-0.27036284546147817).epsilon(1e-14));

    const auto params = ModelParams::entropy_maximizing(1, 0.05, 1.0, 0.5, 7);
    const std::size_t n = 1000000;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        RngStream rng(7, StreamId{p, 0});
        const double y0 = draw_stationary_initial(params, rng).y0;
        sum += y0;
        sumsq += y0 * y0;
    }
    const double mean = sum / static_cast<double>(n);
    const double se = std::sqrt((sumsq / static_cast<double>(n) - mean * mean) /
                                static_cast<double>(n));
    REQUIRE(std::fabs(mean - oracles::kYBar) < 3.0 * se);
}

TEST_CASE("basis market: zero activity freezes the account", "[sde]") {
    auto params = ModelParams::entropy_maximizing(1, 0.0, 1.0, 1.0 / 252.0, 3);
    const auto paths = simulate_basis_market(params, 3);
    for (const auto& path : paths)
        for (double b : path.b_hat[0]) REQUIRE(b == Catch::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("basis market rejects zero paths", "[sde]") {
    const auto params = ModelParams::entropy_maximizing(1, 0.05, 1.0, 1.0 / 252.0, 3);
    REQUIRE_THROWS_AS(simulate_basis_market(params, 0), std::invalid_argument);
}

TEST_CASE("storage identity b_hat = 1/(e^tau y) holds everywhere", "[sde]") {
    const auto params = ModelParams::entropy_maximizing(3, 0.05, 1.0, 1.0 / 52.0, 5);
    const auto path = simulate_path(params, 0);
    for (int j = 0; j < path.n(); ++j) {
        const auto ju = static_cast<std::size_t>(j);
        for (std::size_t k = 0; k < path.grid_size(); ++k) {
            const double direct = 1.0 / (std::exp(path.tau[ju][k]) * path.y[ju][k]);
            REQUIRE(path.b_hat[ju][k] == Catch::Approx(direct).epsilon(1e-12));
        }
    }
    REQUIRE(path.b_hat[0][0] == 1.0);
}

TEST_CASE("mean log pricing density decays at rate -sum a_j", "[sde]") {
    const auto params = ModelParams::entropy_maximizing(3, 0.05, 1.0, 0.25, 11);
    const std::size_t n = 20000;
    const auto slices = simulate_slices(params, n, {1.0});
    std::vector<double> lam(n);
    for (std::size_t p = 0; p < n; ++p) lam[p] = slices.log_lambda[slices.idx_t(p, 0)];
    const auto s = summarize(lam);
    REQUIRE(std::fabs(s.mean - (-0.15)) < 3.0 * s.se);
}

TEST_CASE("slice sampling agrees with grid sampling in law", "[sde]") {
    const auto params = ModelParams::entropy_maximizing(1, 0.05, 1.0, 1.0 / 252.0, 13);
    const std::size_t n = 4000;
    const auto slices = simulate_slices(params, n, {1.0});
    std::vector<double> big_step(n), fine_grid(n);
    for (std::size_t p = 0; p < n; ++p) big_step[p] = slices.y[slices.idx(p, 0, 0)];
    parallel_for_paths(n, [&](std::size_t p) {
        auto grid_params = params;
        grid_params.seed += 1; // independent sample, same law
        fine_grid[p] = simulate_path(grid_params, p).y[0].back();
    });
    REQUIRE(ks_statistic_two_sample(big_step, fine_grid) < 0.04);
}

TEST_CASE("basis portfolio equals the single account for n = 1", "[sde]") {
    const auto params = ModelParams::entropy_maximizing(1, 0.05, 1.0, 1.0 / 252.0, 17);
    const auto path = simulate_path(params, 0);
    for (std::size_t k = 0; k < path.grid_size(); ++k)
        REQUIRE(path.s0_hat[k] == path.b_hat[0][k]); // bitwise
}

TEST_CASE("basis portfolio is constant when all volatilities vanish", "[sde]") {
    const auto params = ModelParams::entropy_maximizing(3, 0.0, 1.0, 1.0 / 252.0, 17);
    const auto path = simulate_path(params, 0);
    for (double v : path.s0_hat) REQUIRE(v == Catch::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("basis portfolio grid mismatch is rejected", "[sde]") {
    const auto params = ModelParams::entropy_maximizing(2, 0.05, 1.0, 0.25, 17);
    auto path = simulate_path(params, 0);
    path.y[1].pop_back();
    REQUIRE_THROWS_AS(simulate_basis_portfolio(path), std::invalid_argument);
}

// quadratic-variation oracle from the stored integrand
TEST_CASE("realized variation of the basis portfolio matches the stored volatility",
          "[sde]") {
    const auto params = ModelParams::entropy_maximizing(3, 0.05, 2.0, 1.0 / 252.0, 19);
    double realized = 0.0, integrated = 0.0;
    for (std::size_t p = 0; p < 30; ++p) {
        const auto path = simulate_path(params, p);
        for (std::size_t k = 0; k + 1 < path.grid_size(); ++k) {
            const double dlog = std::log(path.s0_hat[k + 1]) - std::log(path.s0_hat[k]);
            realized += dlog * dlog;
            double theta2 = 0.0;
            for (int j = 0; j < path.n(); ++j) {
                const double th = path.theta[static_cast<std::size_t>(j)][k];
                theta2 += th * th;
            }
            integrated += theta2 * params.dt;
        }
    }
    REQUIRE(realized / integrated == Catch::Approx(1.0).margin(0.1));
}

TEST_CASE("implied increments behave like Brownian increments", "[sde]") {
    const auto params = ModelParams::entropy_maximizing(1, 0.05, 4.0, 1.0 / 252.0, 23);
    double s = 0.0, ss = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < 50; ++p) {
        const auto path = simulate_path(params, p);
        const auto dw = implied_brownian_increments(path, 0, params.y_bar, 0.05);
        for (double x : dw) {
            s += x;
            ss += x * x;
            ++n;
        }
    }
    const double mean = s / static_cast<double>(n);
    const double var = ss / static_cast<double>(n) - mean * mean;
    REQUIRE(std::fabs(mean) < 5e-4);
    REQUIRE(var == Catch::Approx(params.dt).epsilon(0.05));
}

TEST_CASE("simulation is bit-identical across worker counts", "[sde]") {
    const auto params = ModelParams::entropy_maximizing(2, 0.05, 1.0, 1.0 / 52.0, 29);

    setenv("MARKETLAB_THREADS", "1", 1);
    const auto serial = simulate_basis_market(params, 16);
    setenv("MARKETLAB_THREADS", "4", 1);
    const auto parallel = simulate_basis_market(params, 16);
    unsetenv("MARKETLAB_THREADS");

    REQUIRE(serial.size() == parallel.size());
    for (std::size_t p = 0; p < serial.size(); ++p) {
        for (int j = 0; j < 2; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            REQUIRE(serial[p].y[ju] == parallel[p].y[ju]);
            REQUIRE(serial[p].b_hat[ju] == parallel[p].b_hat[ju]);
        }
        REQUIRE(serial[p].s0_hat == parallel[p].s0_hat);
        REQUIRE(serial[p].log_lambda == parallel[p].log_lambda);
    }
}
