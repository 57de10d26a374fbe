#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "marketlab/errors.hpp"
#include "marketlab/optim.hpp"
#include "marketlab/params.hpp"
#include "marketlab/rng.hpp"
#include "marketlab/sde.hpp"

namespace marketlab {

// ---------------------------------------------------------------------------
// Summary statistics and test reports
// ---------------------------------------------------------------------------

struct SummaryStat {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;

    double ci_lo(double z = 2.5758293035489004) const { return mean - z * se; } // 99%
    double ci_hi(double z = 2.5758293035489004) const { return mean + z * se; }
};

inline SummaryStat summarize(std::span<const double> xs) {
    SummaryStat s;
    s.n = xs.size();
    if (s.n == 0) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(s.n);
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    if (s.n > 1) s.se = std::sqrt(ss / static_cast<double>(s.n - 1) / static_cast<double>(s.n));
    return s;
}

struct TestReport {
    std::string name;
    double estimate = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    bool pass = false;
    std::size_t sample_size = 0;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const {
        return nlohmann::json{{"name", name},         {"estimate", estimate},
                              {"ci_lo", ci_lo},       {"ci_hi", ci_hi},
                              {"pass", pass},         {"sample_size", sample_size},
                              {"seed", seed}};
    }
};

/// |estimate - target| < 3 SE check.
inline TestReport three_se_report(const std::string& name, const SummaryStat& s, double target,
                                  std::uint64_t seed) {
    TestReport r;
    r.name = name;
    r.estimate = s.mean;
    r.ci_lo = s.mean - 3.0 * s.se;
    r.ci_hi = s.mean + 3.0 * s.se;
    r.pass = std::fabs(s.mean - target) < 3.0 * s.se;
    r.sample_size = s.n;
    r.seed = seed;
    return r;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov statistics
// ---------------------------------------------------------------------------

inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    std::sort(sample.begin(), sample.end());
    const auto n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double c = cdf(sample[i]);
        d = std::max(d, std::fabs(c - static_cast<double>(i) / n));
        d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - c));
    }
    return d;
}

inline double ks_statistic_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic_two_sample: empty");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const auto na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

/// Asymptotic critical value of the one-sample statistic at level alpha.
inline double ks_critical_value(std::size_t n, double alpha) {
    return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Student-t maximum likelihood (location-scale-dof), profile likelihood in dof
// ---------------------------------------------------------------------------

struct StudentTFit {
    double dof = 0.0;
    double dof_ci_lo = 0.0;
    double dof_ci_hi = 0.0;
    double location = 0.0;
    double scale = 0.0;
    double log_likelihood = 0.0;
    bool converged = false;
    bool effectively_normal = false; // profile optimum at the upper dof bound region
};

namespace detail {

struct TLoc {
    double mu, sigma, loglik;
};

/// EM for (mu, sigma) at fixed dof.
inline TLoc student_t_em(std::span<const double> xs, double dof, double mu0, double sigma0) {
    double mu = mu0, sigma = sigma0;
    const auto n = static_cast<double>(xs.size());
    for (int it = 0; it < 400; ++it) {
        double sw = 0.0, swx = 0.0;
        for (double x : xs) {
            const double z = (x - mu) / sigma;
            const double w = (dof + 1.0) / (dof + z * z);
            sw += w;
            swx += w * x;
        }
        const double mu_new = swx / sw;
        double s2 = 0.0;
        for (double x : xs) {
            const double z = (x - mu) / sigma;
            const double w = (dof + 1.0) / (dof + z * z);
            s2 += w * (x - mu_new) * (x - mu_new);
        }
        const double sigma_new = std::sqrt(s2 / n);
        const bool done = std::fabs(mu_new - mu) < 1e-12 * (1.0 + std::fabs(mu)) &&
                          std::fabs(sigma_new - sigma) < 1e-12 * sigma;
        mu = mu_new;
        sigma = sigma_new;
        if (done) break;
    }
    const double c = std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
                     0.5 * std::log(dof * M_PI) - std::log(sigma);
    double ll = 0.0;
    for (double x : xs) {
        const double z = (x - mu) / sigma;
        ll += c - 0.5 * (dof + 1.0) * std::log1p(z * z / dof);
    }
    return {mu, sigma, ll};
}

} // namespace detail

/// Fit a location-scale Student-t by profile likelihood over dof in [1, 100].
/// The profile is flat for large dof, so fits beyond 20 are flagged as
/// effectively normal.
inline StudentTFit student_t_fit(std::span<const double> xs) {
    if (xs.size() < 10000)
        throw std::invalid_argument("student_t_fit: need at least 10^4 samples");

    double m0 = 0.0;
    for (double x : xs) m0 += x;
    m0 /= static_cast<double>(xs.size());
    double v0 = 0.0;
    for (double x : xs) v0 += (x - m0) * (x - m0);
    v0 /= static_cast<double>(xs.size());
    if (!(v0 > 0.0)) throw DegenerateSampleError("student_t_fit: zero-variance sample");
    const double s0 = std::sqrt(v0);

    const auto profile = [&](double log_dof) {
        const double dof = std::exp(log_dof);
        return -detail::student_t_em(xs, dof, m0, s0).loglik;
    };
    const auto opt = golden_section_min(profile, std::log(1.0), std::log(100.0), 1e-6);

    StudentTFit fit;
    fit.dof = std::exp(opt.x);
    const auto at_opt = detail::student_t_em(xs, fit.dof, m0, s0);
    fit.location = at_opt.mu;
    fit.scale = at_opt.sigma;
    fit.log_likelihood = at_opt.loglik;
    fit.converged = true;
    fit.effectively_normal = fit.dof > 20.0;

    // profile-likelihood 95% interval: drop of 1.9207 (chi-square_1 / 2)
    const double drop = 1.9207;
    const auto bound = [&](double lo, double hi, bool left) {
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double ll = -profile(std::log(mid));
            const bool inside = ll > fit.log_likelihood - drop;
            if (left) {
                (inside ? hi : lo) = mid;
            } else {
                (inside ? lo : hi) = mid;
            }
            if (hi - lo < 1e-4 * mid) break;
        }
        return 0.5 * (lo + hi);
    };
    fit.dof_ci_lo = bound(1.0, fit.dof, true);
    fit.dof_ci_hi = fit.dof >= 99.0 ? 100.0 : bound(fit.dof, 100.0, false);
    return fit;
}

/// Unit-interval log-returns of the account-denominated benchmark under
/// stationary volatility draws: each return comes from an independent path,
/// r = a + ln(Y_{tau+a} / Y_tau) with Y_tau drawn from the stationary law.
inline std::vector<double> sample_unit_log_returns(const ModelParams& params, std::size_t count,
                                                   std::uint64_t seed) {
    params.validate();
    const double a = params.activities.front();
    std::vector<double> out(count);
    parallel_for_paths(count, [&](std::size_t p) {
        RngStream rng(seed, StreamId{p, 0});
        const auto init = draw_stationary_initial(params, rng);
        const double y1 = step_cir_exact(init.y0, a, params.y_bar, rng);
        out[p] = a + std::log(y1 / init.y0);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Supermartingale defect of the benchmarked accounts
// ---------------------------------------------------------------------------

struct DefectCurve {
    std::vector<double> times;
    std::vector<SummaryStat> b_hat;
    std::vector<double> defect; // 1 - mean
    bool strictly_decreasing = false;
    bool nonoverlap_first_last_99 = false;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < times.size(); ++i)
            rows.push_back({{"t", times[i]},
                            {"mean", b_hat[i].mean},
                            {"se", b_hat[i].se},
                            {"ci99_lo", b_hat[i].ci_lo()},
                            {"ci99_hi", b_hat[i].ci_hi()},
                            {"defect", defect[i]}});
        return nlohmann::json{{"curve", rows},
                              {"strictly_decreasing", strictly_decreasing},
                              {"nonoverlap_first_last_99", nonoverlap_first_last_99}};
    }
};

inline DefectCurve supermartingale_defect(const ModelParams& params,
                                          const std::vector<double>& times, std::size_t paths,
                                          int component = 0) {
    const auto slices = simulate_slices(params, paths, times);
    DefectCurve curve;
    curve.times = times;
    curve.seed = params.seed;
    std::vector<double> buf(paths);
    for (std::size_t t = 0; t < times.size(); ++t) {
        for (std::size_t p = 0; p < paths; ++p) buf[p] = slices.b_hat[slices.idx(p, t, component)];
        curve.b_hat.push_back(summarize(buf));
        curve.defect.push_back(1.0 - curve.b_hat.back().mean);
    }
    curve.strictly_decreasing = true;
    for (std::size_t t = 1; t < times.size(); ++t)
        if (!(curve.b_hat[t].mean < curve.b_hat[t - 1].mean)) curve.strictly_decreasing = false;
    if (times.size() >= 2)
        curve.nonoverlap_first_last_99 = curve.b_hat.back().ci_hi() < curve.b_hat.front().ci_lo();
    return curve;
}

// ---------------------------------------------------------------------------
// Leverage: correlation between benchmark log-increments and volatility
// increments, expected strictly negative in the entropy-maximizing model.
// ---------------------------------------------------------------------------

struct LeverageEstimate {
    double correlation = 0.0;
    double se = 0.0;
    std::size_t pairs = 0;
};

inline LeverageEstimate leverage_correlation_series(std::span<const double> dx,
                                                    std::span<const double> dy) {
    if (dx.size() != dy.size() || dx.size() < 3)
        throw std::invalid_argument("leverage_correlation_series: bad series");
    const auto n = static_cast<double>(dx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < dx.size(); ++i) {
        mx += dx[i];
        my += dy[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < dx.size(); ++i) {
        sxx += (dx[i] - mx) * (dx[i] - mx);
        syy += (dy[i] - my) * (dy[i] - my);
        sxy += (dx[i] - mx) * (dy[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0))
        throw DegenerateSampleError("leverage_correlation: zero-variance increments");
    LeverageEstimate est;
    est.correlation = sxy / std::sqrt(sxx * syy);
    est.se = (1.0 - est.correlation * est.correlation) / std::sqrt(n);
    est.pairs = dx.size();
    return est;
}

/// Pool increments of Delta ln(1/b_hat) against Delta theta across paths and
/// components.
inline LeverageEstimate leverage_correlation(const std::vector<MarketPath>& paths) {
    std::vector<double> dx, dy;
    for (const auto& path : paths) {
        for (int j = 0; j < path.n(); ++j) {
            const auto ju = static_cast<std::size_t>(j);
            for (std::size_t k = 0; k + 1 < path.grid_size(); ++k) {
                const double dlog_gop = -std::log(path.b_hat[ju][k + 1]) +
                                        std::log(path.b_hat[ju][k]);
                dx.push_back(dlog_gop);
                dy.push_back(path.theta[ju][k + 1] - path.theta[ju][k]);
            }
        }
    }
    return leverage_correlation_series(dx, dy);
}

// ---------------------------------------------------------------------------
// Aggregate-portfolio diagnostics. The normalized aggregate
// Y_t = (s0_hat_t)^{-1} e^{-tau_t}, with aggregate activity time
// tau_t = tau_0 + n a t and tau_0 the sum of the component initial activity
// times, is checked against the dimension-four dynamics: stationary moments,
// quadratic-variation regression against Y y_bar dtau, and the aggregate
// squared-volatility identity |theta|^2 = sum_k theta_k^2.
// ---------------------------------------------------------------------------

struct Theorem3Report {
    std::vector<TestReport> checks;
    double qv_slope_median = 0.0;
    double theta2_identity_gap = 0.0;
    bool all_pass = false;
    std::size_t paths = 0;

    nlohmann::json to_json() const {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& c : checks) rows.push_back(c.to_json());
        return nlohmann::json{{"checks", rows},
                              {"qv_slope_median", qv_slope_median},
                              {"theta2_identity_gap", theta2_identity_gap},
                              {"all_pass", all_pass},
                              {"paths", paths}};
    }
};

inline Theorem3Report theorem3_verify(const ModelParams& params, std::size_t paths,
                                      const std::vector<double>& moment_times,
                                      double qv_slope_lo = 0.97, double qv_slope_hi = 1.03) {
    params.validate();
    if (paths == 0) throw std::invalid_argument("theorem3_verify: paths must be >= 1");
    const double a = params.activities.front();
    for (double aj : params.activities)
        if (std::fabs(aj - a) > 1e-15)
            throw NonEquilibriumError("theorem3_verify: activities must be equal");

    const std::size_t m = params.steps() + 1;
    const double dtau_agg = static_cast<double>(params.n) * a * params.dt;

    std::vector<std::size_t> moment_idx;
    for (double t : moment_times) {
        const auto k = static_cast<std::size_t>(std::llround(t / params.dt));
        if (k >= m) throw std::invalid_argument("theorem3_verify: moment time beyond horizon");
        moment_idx.push_back(k);
    }

    std::vector<double> slopes(paths);
    std::vector<double> theta_gap(paths);
    std::vector<std::vector<double>> y_slice(moment_idx.size(), std::vector<double>(paths));
    std::vector<std::vector<double>> log_y_slice = y_slice;
    std::vector<std::vector<double>> inv_y_slice = y_slice;

    parallel_for_paths(paths, [&](std::size_t p) {
        const MarketPath path = simulate_path(params, p);
        double tau0 = 0.0;
        for (int j = 0; j < params.n; ++j) tau0 += path.tau[static_cast<std::size_t>(j)][0];

        double num = 0.0, den = 0.0, gap = 0.0;
        double y_prev = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double tau_agg = tau0 + dtau_agg * static_cast<double>(k);
            const double y_agg = std::exp(-path.log_lambda[k] - tau_agg);
            if (k > 0) {
                num += (y_agg - y_prev) * (y_agg - y_prev);
                den += y_prev * params.y_bar * dtau_agg;
            }
            y_prev = y_agg;

            double sum_sq = 0.0, sum_stored = 0.0;
            for (int j = 0; j < params.n; ++j) {
                const auto ju = static_cast<std::size_t>(j);
                sum_stored += path.theta[ju][k] * path.theta[ju][k];
                sum_sq += a * params.y_bar / path.y[ju][k];
            }
            gap = std::max(gap, std::fabs(sum_stored - sum_sq));
        }
        slopes[p] = num / den;
        theta_gap[p] = gap;
        for (std::size_t i = 0; i < moment_idx.size(); ++i) {
            const double tau_agg = tau0 + dtau_agg * static_cast<double>(moment_idx[i]);
            const double y_agg = std::exp(-path.log_lambda[moment_idx[i]] - tau_agg);
            y_slice[i][p] = y_agg;
            log_y_slice[i][p] = std::log(y_agg);
            inv_y_slice[i][p] = 1.0 / y_agg;
        }
    });

    Theorem3Report report;
    report.paths = paths;

    std::vector<double> sorted = slopes;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(paths / 2), sorted.end());
    report.qv_slope_median = sorted[paths / 2];
    for (double g : theta_gap) report.theta2_identity_gap = std::max(report.theta2_identity_gap, g);

    TestReport slope_check;
    slope_check.name = "qv_regression_slope";
    slope_check.estimate = report.qv_slope_median;
    const auto slope_stats = summarize(slopes);
    slope_check.ci_lo = slope_stats.mean - 3.0 * slope_stats.se;
    slope_check.ci_hi = slope_stats.mean + 3.0 * slope_stats.se;
    slope_check.pass = report.qv_slope_median >= qv_slope_lo && report.qv_slope_median <= qv_slope_hi;
    slope_check.sample_size = paths;
    slope_check.seed = params.seed;
    report.checks.push_back(slope_check);

    TestReport id_check;
    id_check.name = "aggregate_theta2_identity";
    id_check.estimate = report.theta2_identity_gap;
    id_check.pass = report.theta2_identity_gap < 1e-12;
    id_check.sample_size = paths;
    id_check.seed = params.seed;
    report.checks.push_back(id_check);

    for (std::size_t i = 0; i < moment_idx.size(); ++i) {
        const double t = moment_times[i];
        report.checks.push_back(three_se_report("aggregate_mean_t=" + std::to_string(t),
                                                summarize(y_slice[i]), params.y_bar, params.seed));
        report.checks.push_back(three_se_report("aggregate_log_mean_t=" + std::to_string(t),
                                                summarize(log_y_slice[i]), 0.0, params.seed));
        report.checks.push_back(three_se_report("aggregate_inverse_mean_t=" + std::to_string(t),
                                                summarize(inv_y_slice[i]), 2.0 / params.y_bar,
                                                params.seed));
    }

    report.all_pass = true;
    for (const auto& c : report.checks) report.all_pass = report.all_pass && c.pass;
    return report;
}

} // namespace marketlab
