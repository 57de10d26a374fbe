#include <catch2/catch_amalgamated.hpp>

#include "marketlab/entropy_max.hpp"
#include "marketlab/sde.hpp"
#include "marketlab/stats.hpp"
#include "oracles.hpp"

using namespace marketlab;

TEST_CASE("multipliers at the reference constraints give the 4-dof law", "[entropy_max]") {
    const auto s = solve_lagrange(oracles::kYBar, 0.0);
    REQUIRE(s.lambda2 == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(s.lambda1 == Catch::Approx(-2.0 / oracles::kYBar).margin(1e-9));
    REQUIRE(s.implied_dof() == Catch::Approx(4.0).margin(1e-8));
    REQUIRE(s.implied_mean() == Catch::Approx(oracles::kYBar).margin(1e-9));

    // the exponential-family form integrates to one (Simpson oracle)
    const double z = oracles::simpson_log(
        [&](double y) {
            return std::exp(s.lambda0 + s.lambda1 * y + s.lambda2 * std::log(y));
        },
        1e-9, 80.0, 8000);
    REQUIRE(z == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("digamma identity pins shape two at unit mean", "[entropy_max]") {
    // psi(2) - ln 2 = 1 - gamma_e - ln 2
    const double log_mean = 1.0 - oracles::kGammaE - std::log(2.0);
    REQUIRE(log_mean == Catch::Approx(-0.27036284546147817).epsilon(1e-12));
    const auto s = solve_lagrange(1.0, log_mean);
    REQUIRE(s.implied_shape() == Catch::Approx(2.0).margin(1e-9));
    REQUIRE(-s.lambda1 == Catch::Approx(2.0).margin(1e-9));

    // moments of the implied law close the loop (quadrature oracle)
    const auto law = s.law();
    const double mean = oracles::simpson_log([&](double y) { return y * law.pdf(y); }, 1e-9,
                                             80.0, 8000);
    const double lmean = oracles::simpson_log(
        [&](double y) { return std::log(y) * law.pdf(y); }, 1e-9, 80.0, 8000);
    REQUIRE(mean == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(lmean == Catch::Approx(log_mean).margin(1e-9));
}

TEST_CASE("constraints violating Jensen are inadmissible", "[entropy_max]") {
    REQUIRE_THROWS_AS(solve_lagrange(1.0, 0.0), InadmissibleConstraintsError);
    REQUIRE_THROWS_AS(solve_lagrange(2.0, std::log(2.0)), InadmissibleConstraintsError);
    REQUIRE_THROWS_AS(solve_lagrange(2.0, 1.0), InadmissibleConstraintsError);
}

TEST_CASE("first-variation residual vanishes on the working grid", "[entropy_max]") {
    const auto s = solve_lagrange(oracles::kYBar, 0.0);
    std::vector<double> ys;
    for (double y = 0.01; y <= 20.0; y += 0.01) ys.push_back(y);
    REQUIRE(frechet_residual(s, ys) < 1e-9);
}

// optimality: densities with the same (mean, log-mean) have strictly smaller
// differential entropy than the exponential-family solution
TEST_CASE("the gamma solution maximizes entropy among admissible competitors",
          "[entropy_max]") {
    const double target_mean = oracles::kYBar, target_log_mean = 0.0;
    const auto s = solve_lagrange(target_mean, target_log_mean);
    const auto law = s.law();
    const double h_star = oracles::simpson_log(
        [&](double y) {
            const double v = law.pdf(y);
            return v > 0.0 ? -v * std::log(v) : 0.0;
        },
        1e-6, 60.0);

    RngStream rng(404, StreamId{0, 0});
    int tested = 0;
    double min_margin = 1e300;
    while (tested < 50) {
        const double k = 0.5 + 4.0 * rng.uniform();
        const double phase = 6.28 * rng.uniform();
        const int kind = static_cast<int>(rng.next_u64() % 3);
        const auto g = [k, phase, kind](double y) {
            switch (kind) {
                case 0: return std::sin(k * y + phase);
                case 1: return std::cos(k * std::log(y) + phase);
                default: return y / (1.0 + y * y);
            }
        };
        const double eps = 0.1 + 0.4 * rng.uniform();
        const auto pert = oracles::perturbed_density(g, eps, target_mean, target_log_mean);
        if (!pert.converged) continue;
        ++tested;
        const double h = oracles::simpson_log(
            [&](double y) {
                const double v = pert.pdf(y);
                return v > 0.0 ? -v * std::log(v) : 0.0;
            },
            1e-6, 60.0);
        min_margin = std::min(min_margin, h_star - h);
        REQUIRE(h < h_star);
    }
    REQUIRE(min_margin > 1e-7);
}

TEST_CASE("reference-level maximization returns the closed-form optimum", "[entropy_max]") {
    const auto ref = maximize_reference_level();
    REQUIRE(ref.zeta == 0.0);
    REQUIRE(ref.y_bar == Catch::Approx(2.0 * std::exp(constants::gamma_e - 1.0)).epsilon(1e-15));
    REQUIRE(ref.entropy_level == 0.0);
    REQUIRE(ref.lagrange.implied_dof() == 4.0);

    // consistency with the density module: the entropy level by quadrature
    const auto q = make_density(ref.lagrange.law());
    REQUIRE(-q.log_mean() == Catch::Approx(0.0).margin(1e-8));
}

TEST_CASE("emitted law: coefficients, fixed point, stationary consistency", "[entropy_max]") {
    const auto params = ModelParams::entropy_maximizing(1, 0.05, 1.0, 0.5, 3);
    const auto t1 = emit_theorem1_law(params);
    REQUIRE(t1.drift(t1.y_bar) == 0.0);
    for (double y : {0.2, 1.0, 3.0})
        REQUIRE(t1.diffusion(y) * t1.diffusion(y) == Catch::Approx(y * t1.y_bar).epsilon(1e-15));
    REQUIRE(t1.phi.phi(t1.y_bar) == Catch::Approx(1.0).epsilon(1e-15));
    REQUIRE(t1.stationary.dof() == 4.0);

    // long-run simulation lands on the emitted stationary law (simulation oracle)
    const std::size_t n = 20000;
    std::vector<double> ys(n);
    parallel_for_paths(n, [&](std::size_t p) {
        RngStream rng(55, StreamId{p, 0});
        ys[p] = step_cir_exact(1.0, 25.0, t1.y_bar, rng);
    });
    const double d = ks_statistic(ys, [&](double y) { return t1.stationary.cdf(y); });
    REQUIRE(d < ks_critical_value(n, 0.01));

    auto off = params;
    off.y_bar = 1.0;
    REQUIRE_THROWS_AS(emit_theorem1_law(off), std::invalid_argument);
}

TEST_CASE("a volatility search seeded at the solution scores an immediate match",
          "[entropy_max]") {
    PhiMatchOptions opt;
    opt.restarts = 1; // only the analytic candidate start
    const auto m = match_phi_to_gamma(3, oracles::kYBar, opt);
    REQUIRE(m.objective < 1e-10);
    REQUIRE(m.matched);
}

TEST_CASE("degree-zero search fails to match", "[entropy_max]") {
    PhiMatchOptions opt;
    opt.restarts = 4;
    const auto m = match_phi_to_gamma(0, oracles::kYBar, opt);
    REQUIRE_FALSE(m.matched);
}

TEST_CASE("degree-one search recovers the slope", "[entropy_max]") {
    PhiMatchOptions opt;
    opt.restarts = 6;
    const auto m = match_phi_to_gamma(1, oracles::kYBar, opt);
    REQUIRE(m.coefficients[0] == Catch::Approx(0.0).margin(1e-6));
    REQUIRE(m.coefficients[1] == Catch::Approx(1.0 / oracles::kYBar).margin(1e-6));
    REQUIRE(m.fitted_shape == Catch::Approx(2.0).margin(1e-3));
}

TEST_CASE("theorem1 report carries the full endpoint", "[entropy_max]") {
    const auto j = theorem1_report();
    REQUIRE(j.at("zeta").get<double>() == 0.0);
    REQUIRE(j.at("dof").get<double>() == 4.0);
    REQUIRE(std::fabs(j.at("entropy").get<double>()) == 0.0);
    REQUIRE(std::fabs(j.at("entropy_level_quadrature").get<double>()) < 1e-8);
    REQUIRE(j.at("fp_sup_residual").get<double>() < 1e-6);
    REQUIRE(j.at("frechet_residual").get<double>() < 1e-9);
}
