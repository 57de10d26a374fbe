#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

namespace marketlab {

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Plain Nelder-Mead simplex minimizer. Deterministic given the start point.
inline NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                                    std::vector<double> x0, double step, double tol,
                                    int max_iter = 2000) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> pts(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step;
    std::vector<double> vals(n + 1);
    for (std::size_t i = 0; i <= n; ++i) vals[i] = f(pts[i]);

    NelderMeadResult out;
    int it = 0;
    for (; it < max_iter; ++it) {
        // order
        std::vector<std::size_t> ord(n + 1);
        std::iota(ord.begin(), ord.end(), std::size_t{0});
        std::sort(ord.begin(), ord.end(),
                  [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t best = ord[0], worst = ord[n], second = ord[n - 1];
        if (std::fabs(vals[worst] - vals[best]) <=
            tol * (std::fabs(vals[best]) + std::fabs(vals[worst]) + 1e-300) + tol) {
            out.converged = true;
            break;
        }
        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t d = 0; d < n; ++d) centroid[d] += pts[i][d];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        auto blend = [&](double alpha) {
            std::vector<double> p(n);
            for (std::size_t d = 0; d < n; ++d)
                p[d] = centroid[d] + alpha * (pts[worst][d] - centroid[d]);
            return p;
        };
        auto reflected = blend(-1.0);
        const double fr = f(reflected);
        if (fr < vals[best]) {
            auto expanded = blend(-2.0);
            const double fe = f(expanded);
            if (fe < fr) {
                pts[worst] = std::move(expanded);
                vals[worst] = fe;
            } else {
                pts[worst] = std::move(reflected);
                vals[worst] = fr;
            }
        } else if (fr < vals[second]) {
            pts[worst] = std::move(reflected);
            vals[worst] = fr;
        } else {
            auto contracted = blend(fr < vals[worst] ? -0.5 : 0.5);
            const double fc = f(contracted);
            if (fc < std::min(fr, vals[worst])) {
                pts[worst] = std::move(contracted);
                vals[worst] = fc;
            } else {
                // shrink toward best
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t d = 0; d < n; ++d)
                        pts[i][d] = pts[best][d] + 0.5 * (pts[i][d] - pts[best][d]);
                    vals[i] = f(pts[i]);
                }
            }
        }
    }
    const auto bi = static_cast<std::size_t>(
        std::min_element(vals.begin(), vals.end()) - vals.begin());
    out.x = pts[bi];
    out.value = vals[bi];
    out.iterations = it;
    return out;
}

struct ScalarMin {
    double x = 0.0;
    double value = 0.0;
};

inline ScalarMin golden_section_min(const std::function<double(double)>& f, double a, double b,
                                    double tol = 1e-10, int max_iter = 200) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < max_iter && (b - a) > tol * (1.0 + std::fabs(a) + std::fabs(b)); ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    const double xm = 0.5 * (a + b);
    return {xm, f(xm)};
}

/// Euclidean projection onto the scaled simplex {x >= 0, sum x = total}.
inline std::vector<double> project_to_simplex(std::vector<double> v, double total) {
    const std::size_t n = v.size();
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0.0, theta = 0.0;
    std::size_t rho = 0;
    for (std::size_t i = 0; i < n; ++i) {
        css += u[i];
        const double t = (css - total) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) {
            rho = i + 1;
            theta = t;
        }
    }
    (void)rho;
    for (double& x : v) x = std::max(0.0, x - theta);
    return v;
}

} // namespace marketlab
