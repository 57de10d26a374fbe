#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "marketlab/errors.hpp"
#include "marketlab/params.hpp"
#include "marketlab/rng.hpp"
#include "marketlab/sde.hpp"

namespace marketlab {

/// A continuous market of n+1 primary security accounts driven by n Brownian
/// motions: appreciation rates mu (n+1) and volatility matrix sigma (n+1 x n).
struct GeneralMarketSpec {
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;

    int securities() const { return static_cast<int>(mu.size()); }
    int drivers() const { return static_cast<int>(sigma.cols()); }

    void validate() const {
        if (mu.size() < 2 || sigma.rows() != mu.size() || sigma.cols() + 1 != mu.size())
            throw std::invalid_argument("GeneralMarketSpec: need (n+1) mu rows and (n+1) x n sigma");
        if (!mu.allFinite() || !sigma.allFinite())
            throw std::invalid_argument("GeneralMarketSpec: entries must be finite");
    }

    static GeneralMarketSpec from_json(const nlohmann::json& j) {
        GeneralMarketSpec s;
        const auto mu = j.at("mu").get<std::vector<double>>();
        const auto rows = j.at("sigma").get<std::vector<std::vector<double>>>();
        s.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<long>(mu.size()));
        s.sigma.resize(static_cast<long>(rows.size()),
                       rows.empty() ? 0 : static_cast<long>(rows.front().size()));
        for (long r = 0; r < s.sigma.rows(); ++r) {
            if (static_cast<long>(rows[static_cast<std::size_t>(r)].size()) != s.sigma.cols())
                throw std::invalid_argument("GeneralMarketSpec: ragged sigma");
            for (long c = 0; c < s.sigma.cols(); ++c)
                s.sigma(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
        s.validate();
        return s;
    }

    nlohmann::json to_json() const {
        std::vector<std::vector<double>> rows(static_cast<std::size_t>(sigma.rows()));
        for (long r = 0; r < sigma.rows(); ++r)
            for (long c = 0; c < sigma.cols(); ++c)
                rows[static_cast<std::size_t>(r)].push_back(sigma(r, c));
        return nlohmann::json{
            {"mu", std::vector<double>(mu.data(), mu.data() + mu.size())},
            {"sigma", rows}};
    }
};

struct GopSolution {
    Eigen::VectorXd weights;  // pi*, sums to 1
    Eigen::VectorXd v;        // sigma^T pi*, the volatility components
    double lambda_star = 0.0; // pi*^T mu - v^T v
    double image_residual = 0.0;
    bool weights_unique = true;

    nlohmann::json to_json() const {
        return nlohmann::json{
            {"weights", std::vector<double>(weights.data(), weights.data() + weights.size())},
            {"v", std::vector<double>(v.data(), v.data() + v.size())},
            {"lambda_star", lambda_star},
            {"image_residual", image_residual},
            {"weights_unique", weights_unique}};
    }
};

/// Instantaneous growth rate pi^T mu - 1/2 pi^T sigma sigma^T pi of a
/// self-financing portfolio with weights summing to one.
inline double growth_rate(const GeneralMarketSpec& spec, const Eigen::VectorXd& weights) {
    spec.validate();
    if (weights.size() != spec.mu.size())
        throw std::invalid_argument("growth_rate: weight dimension mismatch");
    if (std::fabs(weights.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("growth_rate: weights must sum to 1");
    const Eigen::VectorXd sv = spec.sigma.transpose() * weights;
    return weights.dot(spec.mu) - 0.5 * sv.squaredNorm();
}

/// Solve the growth-rate maximization through its stationarity system
///   [ sigma sigma^T  1 ] [ pi     ]   [ mu ]
///   [ 1^T            0 ] [ lambda ] = [ 1  ].
/// A solution exists iff the right-hand side lies in the image of the matrix;
/// the minimum-norm least-squares solution is returned, with the weights
/// flagged non-unique when the matrix is rank-deficient but consistent.
inline GopSolution gop_solve(const GeneralMarketSpec& spec, double tol = -1.0) {
    spec.validate();
    const long m = spec.mu.size();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m + 1, m + 1);
    M.topLeftCorner(m, m) = spec.sigma * spec.sigma.transpose();
    M.topRightCorner(m, 1).setOnes();
    M.bottomLeftCorner(1, m).setOnes();
    Eigen::VectorXd rhs(m + 1);
    rhs.head(m) = spec.mu;
    rhs(m) = 1.0;

    if (tol < 0.0) tol = 1e-10 * rhs.norm();

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(M);
    const Eigen::VectorXd x = cod.solve(rhs);
    const double residual = (M * x - rhs).norm();
    if (residual > tol)
        throw NoGopError("gop_solve: (mu;1) is not in the image of the stationarity matrix",
                         residual);

    GopSolution sol;
    sol.weights = x.head(m);
    sol.v = spec.sigma.transpose() * sol.weights;
    sol.lambda_star = sol.weights.dot(spec.mu) - sol.v.squaredNorm();
    sol.image_residual = residual;
    sol.weights_unique = cod.rank() == m + 1;
    return sol;
}

// ---------------------------------------------------------------------------
// Benchmarked-portfolio drift diagnostics: the value of any self-financing
// portfolio divided by the growth-optimal one is driftless. Two independent
// routes are simulated with shared increments and the drift is estimated.
// ---------------------------------------------------------------------------

struct DriftEstimate {
    double direct = 0.0;          // from the benchmarked SDE route
    double direct_se = 0.0;
    double ratio = 0.0;           // from the ratio of the two simulated values
    double ratio_se = 0.0;
    double mean_terminal = 0.0;   // mean of the benchmarked terminal value
    double mean_terminal_se = 0.0;
    std::size_t paths = 0;
};

inline DriftEstimate benchmarked_drift_test(const GeneralMarketSpec& spec,
                                            const Eigen::VectorXd& weights, std::size_t paths,
                                            double horizon, std::uint64_t seed = 0) {
    spec.validate();
    if (paths == 0) throw std::invalid_argument("benchmarked_drift_test: paths must be >= 1");
    const auto sol = gop_solve(spec);
    const long n = spec.sigma.cols();

    const Eigen::VectorXd u = spec.sigma.transpose() * weights - sol.v;
    const double g_pi = growth_rate(spec, weights);
    const double g_star = growth_rate(spec, sol.weights);
    const Eigen::VectorXd vol_pi = spec.sigma.transpose() * weights;

    double s1 = 0.0, s2 = 0.0, r1 = 0.0, r2 = 0.0;
    for (std::size_t p = 0; p < paths; ++p) {
        RngStream rng(seed, StreamId{p, 0});
        Eigen::VectorXd w(n);
        for (long k = 0; k < n; ++k) w(k) = rng.normal() * std::sqrt(horizon);
        // exact lognormal terminal values under constant coefficients
        const double hat_direct = std::exp(-0.5 * u.squaredNorm() * horizon + u.dot(w));
        const double log_pi = g_pi * horizon + vol_pi.dot(w);
        const double log_star = g_star * horizon + sol.v.dot(w);
        const double hat_ratio = std::exp(log_pi - log_star);
        s1 += hat_direct;
        s2 += hat_direct * hat_direct;
        r1 += hat_ratio;
        r2 += hat_ratio * hat_ratio;
    }
    const auto np = static_cast<double>(paths);
    DriftEstimate est;
    est.paths = paths;
    est.mean_terminal = s1 / np;
    est.mean_terminal_se = std::sqrt(std::max(0.0, s2 / np - est.mean_terminal * est.mean_terminal) / np);
    est.direct = (est.mean_terminal - 1.0) / horizon;
    est.direct_se = est.mean_terminal_se / horizon;
    const double rm = r1 / np;
    est.ratio = (rm - 1.0) / horizon;
    est.ratio_se = std::sqrt(std::max(0.0, r2 / np - rm * rm) / np) / horizon;
    return est;
}

// ---------------------------------------------------------------------------
// Market of reference: invertible self-financing recombinations of the basis
// accounts, presented in basis-portfolio denomination so that the recovered
// volatility components equal the market prices of risk theta.
// ---------------------------------------------------------------------------

struct ReferenceWeights {
    Eigen::MatrixXd tilde_pi; // (n+1) x (n+1), rows sum to 1

    void validate(int n) const {
        if (tilde_pi.rows() != n + 1 || tilde_pi.cols() != n + 1)
            throw std::invalid_argument("ReferenceWeights: need (n+1) x (n+1) weights");
        for (long r = 0; r < tilde_pi.rows(); ++r)
            if (std::fabs(tilde_pi.row(r).sum() - 1.0) > 1e-9)
                throw std::invalid_argument("ReferenceWeights: rows must sum to 1");
    }

    /// Volatility bookkeeping matrix u with u[j][k] = -pi[j][k] theta[k] and a
    /// final column of ones.
    Eigen::MatrixXd u_matrix(const Eigen::VectorXd& theta) const {
        const long n = theta.size();
        Eigen::MatrixXd u(n + 1, n + 1);
        for (long j = 0; j <= n; ++j) {
            for (long k = 0; k < n; ++k) u(j, k) = -tilde_pi(j, k) * theta(k);
            u(j, n) = 1.0;
        }
        return u;
    }
};

struct ReferenceMarketPoint {
    double t = 0.0;
    GeneralMarketSpec spec;
    double u_condition = 0.0;
    bool singular = false;
};

struct ReferenceMarket {
    std::vector<ReferenceMarketPoint> points;
    std::vector<std::vector<double>> s_hat; // benchmarked primary accounts [j][step]
    std::size_t singular_count = 0;
};

/// Transform a simulated basis path into a market of reference. At each grid
/// point the returned (mu, sigma) describe the recombined accounts denominated
/// in the basis portfolio:
///   sigma[j][k] = theta[k] - tilde_pi[j][k] theta[k],
///   mu[j]       = |theta|^2 - sum_k tilde_pi[j][k] theta[k]^2 ... assembled
/// from the bookkeeping matrix u. Grid points where u is numerically singular
/// (condition number above the threshold) are flagged and excluded from
/// downstream recovery checks.
inline ReferenceMarket market_of_reference(const ModelParams& params,
                                           const ReferenceWeights& weights,
                                           const MarketPath& path,
                                           double condition_threshold = 1e12) {
    params.validate();
    weights.validate(params.n);
    const long n = params.n;
    const std::size_t m = path.grid_size();
    if (path.n() != params.n)
        throw std::invalid_argument("market_of_reference: path/params mismatch");

    ReferenceMarket out;
    out.points.resize(m);
    out.s_hat.assign(static_cast<std::size_t>(n + 1), std::vector<double>(m, 1.0));

    // per-component implied driving increments for the recombination SDE
    std::vector<std::vector<double>> dw(static_cast<std::size_t>(n));
    for (long k = 0; k < n; ++k)
        dw[static_cast<std::size_t>(k)] = implied_brownian_increments(
            path, static_cast<int>(k), params.y_bar, params.activities[static_cast<std::size_t>(k)]);

    std::vector<double> log_s(static_cast<std::size_t>(n + 1), 0.0);
    for (std::size_t step = 0; step < m; ++step) {
        Eigen::VectorXd theta(n);
        for (long k = 0; k < n; ++k)
            theta(k) = path.theta[static_cast<std::size_t>(k)][step];

        const Eigen::MatrixXd u = weights.u_matrix(theta);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(u);
        const double smin = svd.singularValues().tail(1)(0);
        const double smax = svd.singularValues()(0);

        ReferenceMarketPoint& pt = out.points[step];
        pt.t = path.times[step];
        pt.u_condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
        pt.singular = !(pt.u_condition < condition_threshold);
        if (pt.singular) ++out.singular_count;

        const double theta2 = theta.squaredNorm();
        pt.spec.mu.resize(n + 1);
        pt.spec.sigma.resize(n + 1, n);
        for (long j = 0; j <= n; ++j) {
            double drift = theta2;
            for (long k = 0; k < n; ++k) {
                pt.spec.sigma(j, k) = u(j, k) + theta(k);
                drift += u(j, k) * theta(k);
            }
            pt.spec.mu(j) = drift;
        }

        if (step + 1 < m) {
            const double dt = path.times[step + 1] - path.times[step];
            for (long j = 0; j <= n; ++j) {
                double inc = 0.0, q = 0.0;
                for (long k = 0; k < n; ++k) {
                    const double ujk = -weights.tilde_pi(j, k) * theta(k);
                    inc += ujk * dw[static_cast<std::size_t>(k)][step];
                    q += ujk * ujk;
                }
                log_s[static_cast<std::size_t>(j)] += inc - 0.5 * q * dt;
                out.s_hat[static_cast<std::size_t>(j)][step + 1] =
                    std::exp(log_s[static_cast<std::size_t>(j)]);
            }
        }
    }
    return out;
}

} // namespace marketlab
