#pragma once

#include <array>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "marketlab/gamma_law.hpp"
#include "marketlab/params.hpp"
#include "marketlab/rng.hpp"

namespace marketlab {

// ---------------------------------------------------------------------------
// Transition sampling for the square-root process
//   dY = (y_bar - Y) d_tau + sqrt(Y * y_bar) dW,
// a mean-reverting diffusion of dimension 4*1*y_bar/y_bar = 4. The transition
// law is a scaled noncentral chi-square with 4 degrees of freedom, which for
// integer dof is sampled exactly as (Z0 + sqrt(lambda))^2 + Z1^2 + Z2^2 + Z3^2.
// ---------------------------------------------------------------------------

/// One exact-in-distribution step of length d_tau, consuming four standard
/// normal variates.
inline double step_cir_exact(double y, double d_tau, double y_bar,
                             const std::array<double, 4>& z) {
    if (!(y > 0.0)) throw std::invalid_argument("step_cir_exact: y must be > 0");
    if (!(y_bar > 0.0)) throw std::invalid_argument("step_cir_exact: y_bar must be > 0");
    if (d_tau < 0.0) throw std::invalid_argument("step_cir_exact: d_tau must be >= 0");
    if (d_tau == 0.0) return y;

    const double decay = std::exp(-d_tau);
    const double c = y_bar * (-std::expm1(-d_tau)) / 4.0;
    const double ncp = y * decay / c;
    const double z0 = z[0] + std::sqrt(ncp);
    const double chi = z0 * z0 + z[1] * z[1] + z[2] * z[2] + z[3] * z[3];
    return c * chi;
}

inline double step_cir_exact(double y, double d_tau, double y_bar, RngStream& rng) {
    const std::array<double, 4> z{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    return step_cir_exact(y, d_tau, y_bar, z);
}

struct EulerStats {
    std::uint64_t steps = 0;
    std::uint64_t clips = 0;
};

/// One Euler-Maruyama step with the full-truncation fix: a negative proposal
/// is clipped to zero before it can reach the square root on the next step.
inline double step_cir_euler(double y, double d_tau, double y_bar, double z,
                             EulerStats* stats = nullptr) {
    if (!(y >= 0.0)) throw std::invalid_argument("step_cir_euler: y must be >= 0");
    if (!(y_bar > 0.0)) throw std::invalid_argument("step_cir_euler: y_bar must be > 0");
    if (d_tau < 0.0) throw std::invalid_argument("step_cir_euler: d_tau must be >= 0");
    double next = y + (y_bar - y) * d_tau + std::sqrt(y * y_bar * d_tau) * z;
    if (stats) ++stats->steps;
    if (next < 0.0) {
        if (stats) ++stats->clips;
        next = 0.0;
    }
    return next;
}

inline double step_cir_euler(double y, double d_tau, double y_bar, RngStream& rng,
                             EulerStats* stats = nullptr) {
    return step_cir_euler(y, d_tau, y_bar, rng.normal(), stats);
}

// ---------------------------------------------------------------------------
// Stationary initialization
// ---------------------------------------------------------------------------

struct StationaryInitial {
    double y0 = 1.0;
    double tau0 = 0.0;
};

/// Initial activity time is tied to the initial state, tau0 = -ln(y0), so the
/// benchmarked account starts at exactly 1.
inline StationaryInitial stationary_initial_from(double y0) {
    if (!(y0 > 0.0)) throw std::invalid_argument("stationary_initial_from: y0 must be > 0");
    return {y0, -std::log(y0)};
}

/// Draw y0 from the stationary gamma law (4 dof, mean y_bar).
inline StationaryInitial draw_stationary_initial(const ModelParams& params, RngStream& rng) {
    params.validate();
    const GammaLaw law(2.0, 2.0 / params.y_bar);
    return stationary_initial_from(law.sample(rng));
}

// ---------------------------------------------------------------------------
// Full-grid path simulation
// ---------------------------------------------------------------------------

/// One simulated basis-market path on a uniform calendar grid. Per component:
/// normalized benchmark y, activity time tau, volatility theta, benchmarked
/// account b_hat = 1/(e^tau * y) (the storage identity). log_lambda is the log
/// of the product of the benchmarked accounts; s0_hat the benchmarked basis
/// portfolio.
struct MarketPath {
    std::vector<double> times;
    std::vector<std::vector<double>> y;      // [component][step]
    std::vector<std::vector<double>> tau;
    std::vector<std::vector<double>> theta;
    std::vector<std::vector<double>> b_hat;
    std::vector<double> log_lambda;
    std::vector<double> s0_hat;
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;

    int n() const { return static_cast<int>(y.size()); }
    std::size_t grid_size() const { return times.size(); }
};

/// The basis portfolio satisfies d(s0)/s0 = sum_j d(b_hat_j)/b_hat_j. With
/// independent drivers the cross-variations vanish, so d ln(s0) equals
/// sum_j d ln(b_hat_j) and the portfolio is the product of the accounts;
/// integrating the per-component log increments is exact at the grid points.
/// For n = 1 this reproduces b_hat of the single component bit-for-bit.
inline std::vector<double> simulate_basis_portfolio(const MarketPath& path) {
    const int n = path.n();
    if (n == 0) throw std::invalid_argument("simulate_basis_portfolio: empty path");
    const std::size_t m = path.grid_size();
    for (int j = 0; j < n; ++j)
        if (path.y[static_cast<std::size_t>(j)].size() != m ||
            path.tau[static_cast<std::size_t>(j)].size() != m)
            throw std::invalid_argument("simulate_basis_portfolio: component grids disagree");
    std::vector<double> s0(m);
    for (std::size_t k = 0; k < m; ++k) {
        double log_s0 = 0.0;
        for (int j = 0; j < n; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            log_s0 += -path.tau[ju][k] - std::log(path.y[ju][k]);
        }
        s0[k] = std::exp(log_s0);
    }
    return s0;
}

inline MarketPath simulate_path(const ModelParams& params, std::uint64_t path_index) {
    params.validate();
    const std::size_t steps = params.steps();
    const std::size_t m = steps + 1;
    const int n = params.n;

    MarketPath path;
    path.seed = params.seed;
    path.path_index = path_index;
    path.times.resize(m);
    for (std::size_t k = 0; k < m; ++k) path.times[k] = static_cast<double>(k) * params.dt;
    path.y.assign(static_cast<std::size_t>(n), std::vector<double>(m));
    path.tau = path.y;
    path.theta = path.y;
    path.b_hat = path.y;
    path.log_lambda.assign(m, 0.0);

    for (int j = 0; j < n; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const double a = params.activities[ju];
        RngStream rng(params.seed, StreamId{path_index, ju});
        const auto init = draw_stationary_initial(params, rng);
        double yv = init.y0;
        for (std::size_t k = 0; k < m; ++k) {
            if (k > 0) yv = step_cir_exact(yv, a * params.dt, params.y_bar, rng);
            const double tauv = init.tau0 + a * path.times[k];
            const double log_b = -tauv - std::log(yv);
            path.y[ju][k] = yv;
            path.tau[ju][k] = tauv;
            path.theta[ju][k] = std::sqrt(a * params.y_bar / yv);
            path.b_hat[ju][k] = std::exp(log_b);
            path.log_lambda[k] += log_b;
        }
    }
    path.s0_hat = simulate_basis_portfolio(path);
    return path;
}

// ---------------------------------------------------------------------------
// Parallel ensemble machinery: pure per-path work fans out across workers,
// results land in preassigned slots, so the assembly is order-independent and
// bit-identical for any worker count.
// ---------------------------------------------------------------------------

inline int worker_count() {
    if (const char* env = std::getenv("MARKETLAB_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

template <class Fn>
void parallel_for_paths(std::size_t paths, Fn&& fn) {
    const int workers = worker_count();
    if (workers <= 1 || paths < 2) {
        for (std::size_t p = 0; p < paths; ++p) fn(p);
        return;
    }
    const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(workers), paths);
    std::vector<std::thread> pool;
    pool.reserve(nw);
    for (std::size_t w = 0; w < nw; ++w) {
        pool.emplace_back([w, nw, paths, &fn] {
            for (std::size_t p = w; p < paths; p += nw) fn(p);
        });
    }
    for (auto& t : pool) t.join();
}

inline std::vector<MarketPath> simulate_basis_market(const ModelParams& params,
                                                     std::size_t paths) {
    params.validate();
    if (paths == 0) throw std::invalid_argument("simulate_basis_market: paths must be >= 1");
    std::vector<MarketPath> out(paths);
    parallel_for_paths(paths, [&](std::size_t p) { out[p] = simulate_path(params, p); });
    return out;
}

inline std::vector<MarketPath> simulate_basis_market(ModelParams params, std::size_t paths,
                                                     std::uint64_t seed) {
    params.seed = seed;
    return simulate_basis_market(params, paths);
}

/// Calendar Brownian increments implied by the stored exact transitions of one
/// component, dW = (dY - (y_bar - Y) d_tau) / (sqrt(Y * y_bar) * sqrt(a)).
/// They match the driving increments in law to first order in d_tau and are
/// the increments consistent with the stored b_hat identity. Zero-activity
/// components get zero increments.
inline std::vector<double> implied_brownian_increments(const MarketPath& path, int component,
                                                       double y_bar, double a) {
    const auto ju = static_cast<std::size_t>(component);
    if (component < 0 || component >= path.n())
        throw std::invalid_argument("implied_brownian_increments: bad component");
    const auto& y = path.y[ju];
    const auto& tau = path.tau[ju];
    std::vector<double> dw(path.grid_size() - 1, 0.0);
    if (a == 0.0) return dw;
    for (std::size_t k = 0; k + 1 < path.grid_size(); ++k) {
        const double d_tau = tau[k + 1] - tau[k];
        const double dy = y[k + 1] - y[k];
        dw[k] = (dy - (y_bar - y[k]) * d_tau) / (std::sqrt(y[k] * y_bar) * std::sqrt(a));
    }
    return dw;
}

// ---------------------------------------------------------------------------
// Observation-time slices. The exact transition law makes interior grid points
// statistically redundant for slice statistics, so ensembles step directly
// between observation times.
// ---------------------------------------------------------------------------

struct EnsembleSlices {
    std::vector<double> times;
    std::size_t paths = 0;
    int n = 0;
    std::vector<double> y0;         // [path*n + j]
    std::vector<double> y;          // [path*times*n + t*n + j]
    std::vector<double> theta;      // same layout as y
    std::vector<double> b_hat;      // same layout as y
    std::vector<double> log_lambda; // [path*times + t]

    std::size_t idx(std::size_t p, std::size_t t, int j) const {
        return (p * times.size() + t) * static_cast<std::size_t>(n) +
               static_cast<std::size_t>(j);
    }
    std::size_t idx_t(std::size_t p, std::size_t t) const { return p * times.size() + t; }
};

inline EnsembleSlices simulate_slices(const ModelParams& params, std::size_t paths,
                                      std::vector<double> times) {
    params.validate();
    if (paths == 0) throw std::invalid_argument("simulate_slices: paths must be >= 1");
    if (times.empty()) throw std::invalid_argument("simulate_slices: no observation times");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < 0.0 || (i > 0 && times[i] <= times[i - 1]))
            throw std::invalid_argument("simulate_slices: times must be increasing and >= 0");
    }

    EnsembleSlices s;
    s.times = std::move(times);
    s.paths = paths;
    s.n = params.n;
    const std::size_t nt = s.times.size();
    const auto nn = static_cast<std::size_t>(params.n);
    s.y0.resize(paths * nn);
    s.y.resize(paths * nt * nn);
    s.theta.resize(paths * nt * nn);
    s.b_hat.resize(paths * nt * nn);
    s.log_lambda.assign(paths * nt, 0.0);

    parallel_for_paths(paths, [&](std::size_t p) {
        for (int j = 0; j < params.n; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            const double a = params.activities[ju];
            RngStream rng(params.seed, StreamId{p, ju});
            const auto init = draw_stationary_initial(params, rng);
            s.y0[p * nn + ju] = init.y0;
            double yv = init.y0;
            double prev_t = 0.0;
            for (std::size_t t = 0; t < nt; ++t) {
                yv = step_cir_exact(yv, a * (s.times[t] - prev_t), params.y_bar, rng);
                prev_t = s.times[t];
                const double tauv = init.tau0 + a * s.times[t];
                const double log_b = -tauv - std::log(yv);
                s.y[s.idx(p, t, j)] = yv;
                s.theta[s.idx(p, t, j)] = std::sqrt(a * params.y_bar / yv);
                s.b_hat[s.idx(p, t, j)] = std::exp(log_b);
                s.log_lambda[s.idx_t(p, t)] += log_b;
            }
        }
    });
    return s;
}

} // namespace marketlab
