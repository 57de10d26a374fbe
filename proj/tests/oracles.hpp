#pragma once

// Test-only oracles, independent of the library's computational paths:
// fixed-grid Simpson quadrature, reference samplers built on <random>, and a
// constrained-perturbation builder for entropy-optimality checks.

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracles {

// frozen reference values
inline constexpr double kGammaE = 0.57721566490153286061;
inline const double kYBar = 2.0 * std::exp(kGammaE - 1.0); // 1.3104398516322071
inline constexpr double kLogYBar = 0.27036284546147817;    // ln 2 + gamma_e - 1

/// Composite Simpson on a fixed log-spaced grid (independent of the library's
/// Gauss-Legendre/Gauss-Kronrod paths).
inline double simpson_log(const std::function<double(double)>& f, double a, double b,
                          std::size_t intervals = 4000) {
    if (intervals % 2) ++intervals;
    const double la = std::log(a), lb = std::log(b);
    const double h = (lb - la) / static_cast<double>(intervals);
    // integrate f(e^v) e^v dv
    const auto g = [&](double v) {
        const double y = std::exp(v);
        return f(y) * y;
    };
    double acc = g(la) + g(lb);
    for (std::size_t i = 1; i < intervals; ++i)
        acc += g(la + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

/// Reference gamma sampler on std::mt19937_64 (independent of the library's
/// xoshiro + Marsaglia-Tsang path).
inline std::vector<double> gamma_sample(double shape, double rate, std::size_t n,
                                        std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::gamma_distribution<double> dist(shape, 1.0 / rate);
    std::vector<double> out(n);
    for (auto& x : out) x = dist(eng);
    return out;
}

/// Reference Student-t sampler (location 0, scale 1).
inline std::vector<double> student_t_sample(double dof, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::student_t_distribution<double> dist(dof);
    std::vector<double> out(n);
    for (auto& x : out) x = dist(eng);
    return out;
}

inline std::vector<double> normal_sample(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> dist;
    std::vector<double> out(n);
    for (auto& x : out) x = dist(eng);
    return out;
}

/// Density exp{l0 + l1 y + l2 ln y + eps g(y)} with (l1, l2) solved so the
/// mean and log-mean match the given targets; used to generate admissible
/// competitors for the entropy maximizer. Returns a normalized evaluator.
struct PerturbedDensity {
    std::function<double(double)> pdf;
    double mean = 0.0;
    double log_mean = 0.0;
    bool converged = false;
};

inline PerturbedDensity perturbed_density(const std::function<double(double)>& g, double eps,
                                          double target_mean, double target_log_mean,
                                          double y_lo = 1e-6, double y_hi = 60.0) {
    double l1 = -2.0 / target_mean, l2 = 1.0;
    PerturbedDensity out;
    for (int it = 0; it < 60; ++it) {
        const auto kernel = [l1, l2, eps, g](double y) {
            return std::exp(l1 * y + l2 * std::log(y) + eps * g(y));
        };
        const double z = simpson_log(kernel, y_lo, y_hi);
        const auto mom = [&](const std::function<double(double)>& w) {
            return simpson_log([&](double y) { return w(y) * kernel(y); }, y_lo, y_hi) / z;
        };
        const double m1 = mom([](double y) { return y; });
        const double ml = mom([](double y) { return std::log(y); });
        const double r1 = m1 - target_mean, r2 = ml - target_log_mean;
        if (std::fabs(r1) < 1e-11 && std::fabs(r2) < 1e-11) {
            const double zf = z;
            out.pdf = [kernel, zf](double y) { return kernel(y) / zf; };
            out.mean = m1;
            out.log_mean = ml;
            out.converged = true;
            return out;
        }
        // Newton step with the covariance matrix of (y, ln y)
        const double myy = mom([](double y) { return y * y; });
        const double mll = mom([](double y) { return std::log(y) * std::log(y); });
        const double myl = mom([](double y) { return y * std::log(y); });
        const double a = myy - m1 * m1;  // d m1 / d l1
        const double b = myl - m1 * ml;  // d m1 / d l2 and d ml / d l1
        const double d = mll - ml * ml;  // d ml / d l2
        const double det = a * d - b * b;
        if (!(std::fabs(det) > 1e-14)) break;
        l1 -= (d * r1 - b * r2) / det;
        l2 -= (-b * r1 + a * r2) / det;
        if (l1 > -1e-3) l1 = -1e-3; // keep the tail integrable
    }
    return out;
}

} // namespace oracles
