#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "marketlab/optim.hpp"
#include "marketlab/params.hpp"
#include "marketlab/rng.hpp"
#include "marketlab/sde.hpp"

namespace marketlab {

/// Market activity ((1/n) sum sqrt(a_j))^2 of a nonnegative activity profile.
inline double market_activity(const std::vector<double>& activities) {
    if (activities.empty()) throw std::invalid_argument("market_activity: empty profile");
    double s = 0.0;
    for (double a : activities) {
        if (!(a >= 0.0)) throw std::invalid_argument("market_activity: negative activity");
        s += std::sqrt(a);
    }
    s /= static_cast<double>(activities.size());
    return s * s;
}

struct ActivityProfile {
    std::vector<double> activities;
    double market_activity_level = 0.0;

    static ActivityProfile of(std::vector<double> activities) {
        ActivityProfile p;
        p.market_activity_level = market_activity(activities);
        p.activities = std::move(activities);
        return p;
    }
};

/// Relative entropy of the candidate pricing density at horizon t, in closed
/// form: -sum_j a_j t, split as -n*a*t minus the nonnegative dispersion
/// penalty sum_j (sqrt(a_j) - sqrt(a))^2 t. The two parts always recombine
/// exactly because sum_j sqrt(a_j) = n sqrt(a) kills the cross term.
struct RelativeEntropyReport {
    double t = 0.0;
    double analytic_value = 0.0;
    double mc_value = 0.0;
    double mc_standard_error = 0.0;
    std::size_t mc_paths = 0;
    double decomposition_level = 0.0;   // -n a t
    double decomposition_penalty = 0.0; // -sum (sqrt(a_j) - sqrt(a))^2 t

    nlohmann::json to_json() const {
        return nlohmann::json{{"t", t},
                              {"analytic_value", analytic_value},
                              {"mc_value", mc_value},
                              {"mc_standard_error", mc_standard_error},
                              {"mc_paths", mc_paths},
                              {"decomposition_level", decomposition_level},
                              {"decomposition_penalty", decomposition_penalty}};
    }
};

inline RelativeEntropyReport relative_entropy_analytic(const ActivityProfile& profile,
                                                       double t) {
    if (!(t >= 0.0)) throw std::invalid_argument("relative_entropy_analytic: t must be >= 0");
    RelativeEntropyReport r;
    r.t = t;
    const double a = profile.market_activity_level;
    const auto n = static_cast<double>(profile.activities.size());
    double sum = 0.0, penalty = 0.0;
    for (double aj : profile.activities) {
        sum += aj;
        const double d = std::sqrt(aj) - std::sqrt(a);
        penalty += d * d;
    }
    r.analytic_value = -sum * t;
    r.decomposition_level = -n * a * t;
    r.decomposition_penalty = -penalty * t;
    return r;
}

/// Monte Carlo estimate of E[ln Lambda_t] from stationary-initialized paths.
inline RelativeEntropyReport relative_entropy_mc(const ModelParams& params, double t,
                                                 std::size_t paths) {
    params.validate();
    if (!(t >= 0.0)) throw std::invalid_argument("relative_entropy_mc: t must be >= 0");
    auto r = relative_entropy_analytic(ActivityProfile::of(params.activities), t);
    if (t == 0.0) {
        r.mc_paths = paths;
        return r;
    }
    const auto slices = simulate_slices(params, paths, {t});
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t p = 0; p < paths; ++p) {
        const double v = slices.log_lambda[slices.idx_t(p, 0)];
        sum += v;
        sumsq += v * v;
    }
    const auto np = static_cast<double>(paths);
    r.mc_value = sum / np;
    r.mc_standard_error = std::sqrt(std::max(0.0, sumsq / np - r.mc_value * r.mc_value) / np);
    r.mc_paths = paths;
    return r;
}

// ---------------------------------------------------------------------------
// Equilibrium: maximize -sum a_j t over profiles with fixed market activity.
// In s = sqrt(a) coordinates the constraint is the simplex slice
// {s >= 0, sum s = n sqrt(a)} and the objective -sum s^2 t is concave, so
// projected gradient descent reaches the global optimum (the equal profile).
// ---------------------------------------------------------------------------

struct EquilibriumTraceRow {
    int restart = 0;
    int iteration = 0;
    double objective = 0.0;
    double constraint_residual = 0.0;
    std::vector<double> activities;
};

struct EquilibriumResult {
    ActivityProfile profile;
    double objective = 0.0; // -sum a_j (t = 1 scale)
    double max_deviation = 0.0;
    bool converged = false;
    std::vector<EquilibriumTraceRow> trace;
};

inline EquilibriumResult equilibrium_maximize(double market_activity_target, int n,
                                              int restarts = 20,
                                              std::uint64_t seed = 77,
                                              bool keep_trace = false) {
    if (!(market_activity_target >= 0.0))
        throw std::invalid_argument("equilibrium_maximize: target must be >= 0");
    if (n < 1) throw std::invalid_argument("equilibrium_maximize: n must be >= 1");

    const auto nn = static_cast<std::size_t>(n);
    const double total = static_cast<double>(n) * std::sqrt(market_activity_target);

    EquilibriumResult best;
    best.objective = -std::numeric_limits<double>::infinity();

    for (int r = 0; r < restarts; ++r) {
        RngStream rng(seed, StreamId{static_cast<std::uint64_t>(r), 0});
        std::vector<double> s(nn);
        double sum = 0.0;
        for (auto& v : s) {
            v = rng.exponential();
            sum += v;
        }
        for (auto& v : s) v *= (sum > 0.0 ? total / sum : 0.0);

        double step = 0.25;
        double prev = std::numeric_limits<double>::infinity();
        int it = 0;
        EquilibriumResult cand;
        for (; it < 500; ++it) {
            // minimize sum s^2: gradient 2s
            std::vector<double> next(nn);
            for (std::size_t j = 0; j < nn; ++j) next[j] = s[j] - step * 2.0 * s[j];
            next = project_to_simplex(std::move(next), total);
            double f = 0.0;
            for (double v : next) f += v * v;
            if (keep_trace) {
                double cres = -total;
                std::vector<double> acts(nn);
                for (std::size_t j = 0; j < nn; ++j) {
                    cres += next[j];
                    acts[j] = next[j] * next[j];
                }
                cand.trace.push_back({r, it, -f, std::fabs(cres), std::move(acts)});
            }
            if (f > prev - 1e-16) {
                step *= 0.5;
                if (step < 1e-12) break;
            }
            prev = std::min(prev, f);
            s = std::move(next);
        }

        std::vector<double> activities(nn);
        double obj = 0.0;
        for (std::size_t j = 0; j < nn; ++j) {
            activities[j] = s[j] * s[j];
            obj -= activities[j];
        }
        if (obj > best.objective) {
            auto trace = std::move(best.trace);
            best.profile = ActivityProfile::of(activities);
            best.objective = obj;
            best.converged = true;
            best.trace = std::move(trace);
        }
        if (keep_trace)
            best.trace.insert(best.trace.end(), cand.trace.begin(), cand.trace.end());
    }

    for (double a : best.profile.activities)
        best.max_deviation =
            std::max(best.max_deviation, std::fabs(a - market_activity_target));
    return best;
}

} // namespace marketlab
