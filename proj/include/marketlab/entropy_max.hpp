#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/polygamma.hpp>
#include <json.hpp>

#include "marketlab/density.hpp"
#include "marketlab/errors.hpp"
#include "marketlab/gamma_law.hpp"
#include "marketlab/optim.hpp"
#include "marketlab/params.hpp"
#include "marketlab/rng.hpp"

namespace marketlab {

// ---------------------------------------------------------------------------
// Constrained maximization of -int q ln q under fixed mean and log-mean.
// The maximizer has the exponential-family form exp{l0 + l1 y + l2 ln y},
// i.e. a gamma law with shape l2 + 1 and rate -l1.
// ---------------------------------------------------------------------------

struct LagrangeSolution {
    double lambda0 = 0.0;
    double lambda1 = 0.0; // negative
    double lambda2 = 0.0;

    double implied_shape() const { return lambda2 + 1.0; }
    double implied_mean() const { return (lambda2 + 1.0) / (-lambda1); }
    double implied_dof() const { return 2.0 * (lambda2 + 1.0); }
    GammaLaw law() const { return GammaLaw(implied_shape(), -lambda1); }
};

/// Solve for the multipliers matching (mean, log-mean). Admissible constraint
/// pairs satisfy log_mean < ln(mean) strictly (Jensen); the shape solves the
/// monotone equation digamma(k) - ln k = log_mean - ln(mean).
inline LagrangeSolution solve_lagrange(double target_mean, double target_log_mean) {
    if (!(target_mean > 0.0))
        throw std::invalid_argument("solve_lagrange: mean must be > 0");
    const double rhs = target_log_mean - std::log(target_mean);
    if (!(rhs < -1e-12))
        throw InadmissibleConstraintsError(
            "solve_lagrange: log-mean must lie strictly below ln(mean)");

    const auto g = [](double k) { return boost::math::digamma(k) - std::log(k); };
    double lo = 1.0, hi = 1.0;
    while (g(lo) > rhs) lo *= 0.5;
    while (g(hi) < rhs) hi *= 2.0;
    // bisection to 1e-12 relative on k; g is strictly increasing
    for (int i = 0; i < 200 && (hi - lo) > 1e-12 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) < rhs ? lo : hi) = mid;
    }
    const double k = 0.5 * (lo + hi);
    const double beta = k / target_mean;

    LagrangeSolution s;
    s.lambda2 = k - 1.0;
    s.lambda1 = -beta;
    s.lambda0 = k * std::log(beta) - std::lgamma(k);
    return s;
}

/// Sup-norm of the first-variation residual -ln q(y) + l0 + l1 y + l2 ln y
/// over the given grid; zero at the true maximizer.
inline double frechet_residual(const LagrangeSolution& s, const std::vector<double>& ys) {
    const GammaLaw law = s.law();
    double sup = 0.0;
    for (double y : ys) {
        const double r = -law.log_pdf(y) + s.lambda0 + s.lambda1 * y + s.lambda2 * std::log(y);
        sup = std::max(sup, std::fabs(r));
    }
    return sup;
}

// ---------------------------------------------------------------------------
// Reference-level selection. Along the admissible family of 4-dof laws the
// log-mean parameterizes the reference level as y_bar = 2 exp(gamma_e - 1 + z)
// and the entropy level -z is driven to zero, fixing y_bar = 2 exp(gamma_e-1).
// ---------------------------------------------------------------------------

struct ReferenceLevelResult {
    double zeta = 0.0;
    double y_bar = 0.0;
    double entropy_level = 0.0; // -zeta, the paper-level value at the optimum
    LagrangeSolution lagrange;
};

inline ReferenceLevelResult maximize_reference_level() {
    ReferenceLevelResult r;
    r.zeta = 0.0;
    r.y_bar = constants::reference_level();
    r.entropy_level = 0.0;
    // closed form at the optimum: shape 2, rate 2/y_bar (lgamma(2) = 0)
    r.lagrange.lambda2 = 1.0;
    r.lagrange.lambda1 = -2.0 / r.y_bar;
    r.lagrange.lambda0 = 2.0 * std::log(2.0 / r.y_bar);
    return r;
}

// ---------------------------------------------------------------------------
// Handoff bundle: the identified volatility law, stationary law and
// drift/diffusion pair of the normalized benchmark.
// ---------------------------------------------------------------------------

struct Theorem1Law {
    VolatilityLaw phi;
    GammaLaw stationary;
    double y_bar = 0.0;

    double drift(double y) const { return y_bar - y; }
    double diffusion(double y) const { return std::sqrt(y * y_bar); }
};

inline Theorem1Law emit_theorem1_law(const ModelParams& params) {
    params.validate();
    if (!params.entropy_maximizing_mode())
        throw std::invalid_argument("emit_theorem1_law: params must be in entropy-maximizing mode");
    const double a = params.activities.empty() ? 0.0 : params.activities.front();
    return Theorem1Law{VolatilityLaw::entropy_maximizing(params.y_bar, a),
                       GammaLaw(2.0, 2.0 / params.y_bar), params.y_bar};
}

// ---------------------------------------------------------------------------
// Polynomial search for the volatility function whose stationary density is
// a gamma law with the prescribed mean. The L2 objective vanishes only at
// phi(y) = y / y_bar.
// ---------------------------------------------------------------------------

struct PhiSearchTraceRow {
    int restart = 0;
    int iterations = 0;
    double objective = 0.0;
    std::vector<double> coefficients;
};

struct PhiMatchResult {
    std::vector<double> coefficients;
    double objective = 0.0;
    bool matched = false;
    bool converged = true;
    double fitted_shape = 0.0;
    /// restart end points with objective within 1e-3 of the optimum but
    /// separated from it in coefficient space
    std::vector<PhiSearchTraceRow> second_minima;
    std::vector<PhiSearchTraceRow> trace;
};

struct PhiMatchOptions {
    double match_tol = 1e-8;
    int restarts = 16;
    std::uint64_t seed = 20240501;
    std::size_t grid_points = 421;
    double coeff_bound = 10.0;
};

namespace detail {

struct PhiObjective {
    double y_bar;
    std::vector<double> eval_grid; // quadrature grid for the L2 distance
    SupportGrid support;

    /// L2 distance of the stationary density of phi to the best gamma law
    /// with mean pinned at y_bar (shape free). Invalid phi gets a sloped
    /// penalty so the simplex can crawl back to the feasible region.
    double operator()(std::span<const double> coeffs, double* fitted_shape = nullptr) const {
        const auto poly = [&](double y) {
            double v = 0.0;
            for (std::size_t i = coeffs.size(); i-- > 0;) v = v * y + coeffs[i];
            return v;
        };
        double violation = 0.0;
        for (double y : eval_grid)
            if (const double v = poly(y); v <= 0.0) violation += 1.0 - v;
        if (const double v0 = poly(support.y_min); v0 <= 0.0) violation += 1.0 - v0;
        if (violation > 0.0) return 1e3 * (1.0 + violation);

        std::vector<double> c(coeffs.begin(), coeffs.end());
        StationaryDensity q;
        try {
            q = stationary_from_phi(VolatilityLaw::polynomial(std::move(c)), support);
        } catch (const NonNormalizableError&) {
            return 2e3;
        } catch (const SingularAtZeroError&) {
            return 2e3;
        } catch (const std::invalid_argument&) {
            return 2e3;
        }

        std::vector<double> qv(eval_grid.size());
        for (std::size_t i = 0; i < eval_grid.size(); ++i) qv[i] = q(eval_grid[i]);
        // relative squared-L2 error against the best mean-pinned gamma; the
        // normalizer int g^2 dy = rate/4 for the 4-dof member keeps the
        // objective scale-free
        const double normalizer = 0.5 / y_bar;
        const auto dist = [&](double shape) {
            const GammaLaw g(shape, shape / y_bar);
            double acc = 0.0;
            double prev = 0.0;
            for (std::size_t i = 0; i < eval_grid.size(); ++i) {
                const double d = qv[i] - g.pdf(eval_grid[i]);
                const double sq = d * d;
                if (i > 0) acc += 0.5 * (prev + sq) * (eval_grid[i] - eval_grid[i - 1]);
                prev = sq;
            }
            return acc / normalizer;
        };
        const auto best = golden_section_min(dist, 0.1, 20.0, 1e-7);
        if (fitted_shape) *fitted_shape = best.x;
        return best.value;
    }
};

} // namespace detail

inline PhiMatchResult match_phi_to_gamma(int max_degree, double y_bar,
                                         const PhiMatchOptions& opt = {}) {
    if (max_degree < 0 || max_degree > VolatilityLaw::max_degree)
        throw std::invalid_argument("match_phi_to_gamma: bad max_degree");
    if (!(y_bar > 0.0)) throw std::invalid_argument("match_phi_to_gamma: y_bar must be > 0");

    detail::PhiObjective obj;
    obj.y_bar = y_bar;
    obj.support = SupportGrid::for_mean(y_bar, 481);
    obj.eval_grid = SupportGrid{1e-5, obj.support.y_max, opt.grid_points}.make();

    const std::size_t dim = static_cast<std::size_t>(max_degree) + 1;
    auto clipped = [&](std::vector<double> x) {
        for (double& v : x) v = std::clamp(v, -opt.coeff_bound, opt.coeff_bound);
        return x;
    };

    PhiMatchResult result;
    result.objective = std::numeric_limits<double>::infinity();

    std::vector<PhiSearchTraceRow> finals;
    RngStream rng(opt.seed, StreamId{0, 0});
    for (int r = 0; r < opt.restarts; ++r) {
        std::vector<double> x0(dim, 0.0);
        if (r == 0 && max_degree >= 1) {
            x0[1] = 1.0 / y_bar; // the analytic candidate
        } else if (max_degree >= 1) {
            x0[0] = 0.4 * rng.uniform();
            x0[1] = 0.1 + 1.5 * rng.uniform();
            for (std::size_t d = 2; d < dim; ++d) x0[d] = 0.1 * (2.0 * rng.uniform() - 1.0);
        } else {
            x0[0] = 0.05 + 0.4 * rng.uniform();
        }

        auto fn = [&](std::span<const double> x) { return obj(x); };
        auto nm = nelder_mead(fn, clipped(std::move(x0)), 0.05, 1e-13, 1200);
        nm = nelder_mead(fn, nm.x, 1e-3, 1e-15, 800); // restart tight around the basin

        // coordinatewise parabolic polish
        std::vector<double> x = nm.x;
        double fx = nm.value;
        for (double h : {1e-2, 1e-3, 1e-4, 1e-4, 1e-5, 1e-5}) {
            for (std::size_t d = 0; d < dim; ++d) {
                auto probe = x;
                probe[d] = x[d] - h;
                const double fm = obj(probe);
                probe[d] = x[d] + h;
                const double fp = obj(probe);
                const double denom = fp - 2.0 * fx + fm;
                if (denom > 0.0) {
                    probe[d] = x[d] - 0.5 * h * (fp - fm) / denom;
                    const double fv = obj(probe);
                    if (fv < fx) {
                        x = probe;
                        fx = fv;
                    }
                }
            }
        }

        PhiSearchTraceRow row{r, nm.iterations, fx, x};
        finals.push_back(row);
        result.trace.push_back(std::move(row));
        if (fx < result.objective) {
            result.objective = fx;
            result.coefficients = x;
            result.converged = nm.converged;
        }
    }

    for (const auto& row : finals) {
        if (row.objective > result.objective + 1e-3) continue;
        double dist = 0.0;
        for (std::size_t d = 0; d < dim; ++d)
            dist = std::max(dist, std::fabs(row.coefficients[d] - result.coefficients[d]));
        if (dist > 1e-2) result.second_minima.push_back(row);
    }

    obj(result.coefficients, &result.fitted_shape);
    result.matched = result.objective < opt.match_tol && result.second_minima.empty();
    return result;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

inline nlohmann::json theorem1_report() {
    const auto ref = maximize_reference_level();
    const GammaLaw law = ref.lagrange.law();
    const auto density = make_density(law);
    const auto phi = VolatilityLaw::entropy_maximizing(ref.y_bar);

    std::vector<double> ys;
    for (double y = 0.05; y <= 15.0; y += 0.05) ys.push_back(y);
    const auto fp = fp_residual(density, phi, ys);

    return nlohmann::json{
        {"lambda0", ref.lagrange.lambda0},
        {"lambda1", ref.lagrange.lambda1},
        {"lambda2", ref.lagrange.lambda2},
        {"zeta", ref.zeta},
        {"y_bar", ref.y_bar},
        {"dof", ref.lagrange.implied_dof()},
        {"entropy", ref.entropy_level},
        {"entropy_level_quadrature", -density.log_mean()},
        {"entropy_differential", entropy(density)},
        {"frechet_residual", frechet_residual(ref.lagrange, ys)},
        {"fp_sup_residual", fp.sup_norm},
    };
}

} // namespace marketlab
