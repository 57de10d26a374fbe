#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <json.hpp>

#include "marketlab/detail/spline.hpp"
#include "marketlab/errors.hpp"
#include "marketlab/gamma_law.hpp"

namespace marketlab {

/// Adaptive Gauss-Kronrod integral on a finite interval.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-11) {
    if (!(b > a)) throw std::invalid_argument("integrate: need b > a");
    double error = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 15, tol,
                                                                         &error);
}

namespace detail {

inline constexpr double g7_nodes[7] = {
    -0.9491079123427585, -0.7415311855993945, -0.4058451513773972, 0.0,
    0.4058451513773972,  0.7415311855993945,  0.9491079123427585};
inline constexpr double g7_weights[7] = {
    0.1294849661688697, 0.2797053914892766, 0.3818300505051189, 0.4179591836734694,
    0.3818300505051189, 0.2797053914892766, 0.1294849661688697};

/// Composite 7-point Gauss-Legendre over consecutive intervals of `x`.
template <class F>
double composite_gauss7(const F& f, const std::vector<double>& x) {
    double acc = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double mid = 0.5 * (x[i] + x[i - 1]);
        const double half = 0.5 * (x[i] - x[i - 1]);
        double part = 0.0;
        for (int k = 0; k < 7; ++k) part += g7_weights[k] * f(mid + half * g7_nodes[k]);
        acc += part * half;
    }
    return acc;
}

/// integral of g(y) dy over the support of a log-spaced grid, computed in
/// v = ln y coordinates (integrand g(e^v) e^v is smooth on ratio-spaced grids).
template <class F>
double composite_log_integral(const F& g, const std::vector<double>& log_grid) {
    return composite_gauss7(
        [&](double v) {
            const double y = std::exp(v);
            return g(y) * y;
        },
        log_grid);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Local volatility law: theta(y) = sqrt(activity / phi(y)).
// phi is a polynomial in y or a tabulated positive function.
// ---------------------------------------------------------------------------

class VolatilityLaw {
public:
    static constexpr int max_degree = 16;

    static VolatilityLaw polynomial(std::vector<double> coeffs, double activity = 0.0) {
        if (coeffs.empty() || static_cast<int>(coeffs.size()) - 1 > max_degree)
            throw std::invalid_argument("VolatilityLaw: polynomial degree out of range");
        VolatilityLaw law;
        law.coeffs_ = std::move(coeffs);
        law.activity_ = check_activity(activity);
        return law;
    }

    /// Tabulated positive values on an increasing grid; cubic interpolation.
    /// Smoothness at zero cannot be verified for tabulated input and is the
    /// caller's obligation.
    static VolatilityLaw tabulated(std::vector<double> y, std::vector<double> values,
                                   double activity = 0.0) {
        for (double v : values)
            if (!(v > 0.0)) throw std::invalid_argument("VolatilityLaw: tabulated values must be > 0");
        VolatilityLaw law;
        law.table_ = detail::CubicSpline(std::move(y), std::move(values));
        law.activity_ = check_activity(activity);
        return law;
    }

    /// The entropy-maximizing specialization phi(y) = y / y_bar.
    static VolatilityLaw entropy_maximizing(double y_bar, double activity = 0.0) {
        return polynomial({0.0, 1.0 / y_bar}, activity);
    }

    bool is_polynomial() const { return !coeffs_.empty(); }
    const std::vector<double>& coefficients() const { return coeffs_; }
    double activity() const { return activity_; }

    double phi(double y) const {
        if (is_polynomial()) {
            double v = 0.0;
            for (std::size_t i = coeffs_.size(); i-- > 0;) v = v * y + coeffs_[i];
            return v;
        }
        return (*table_)(clamp_table(y));
    }

    double dphi(double y) const {
        if (is_polynomial()) {
            double v = 0.0;
            for (std::size_t i = coeffs_.size(); i-- > 1;)
                v = v * y + coeffs_[i] * static_cast<double>(i);
            return v;
        }
        return table_->derivative(clamp_table(y));
    }

    double d2phi(double y) const {
        if (is_polynomial()) {
            double v = 0.0;
            for (std::size_t i = coeffs_.size(); i-- > 2;)
                v = v * y + coeffs_[i] * static_cast<double>(i * (i - 1));
            return v;
        }
        return table_->second_derivative(clamp_table(y));
    }

    double theta(double y) const { return std::sqrt(activity_ / phi(y)); }

    static VolatilityLaw from_json(const nlohmann::json& j) {
        return polynomial(j.at("coeffs").get<std::vector<double>>(), j.value("activity", 0.0));
    }

    nlohmann::json to_json() const {
        if (!is_polynomial()) throw std::invalid_argument("VolatilityLaw: tabulated law has no JSON form");
        return nlohmann::json{{"coeffs", coeffs_}, {"activity", activity_}};
    }

private:
    static double check_activity(double a) {
        if (!(a >= 0.0)) throw std::invalid_argument("VolatilityLaw: activity must be >= 0");
        return a;
    }
    double clamp_table(double y) const {
        return std::clamp(y, table_->x_min(), table_->x_max());
    }

    std::vector<double> coeffs_;
    std::optional<detail::CubicSpline> table_;
    double activity_ = 0.0;
};

// ---------------------------------------------------------------------------
// Working support and densities
// ---------------------------------------------------------------------------

/// Log-spaced working support (0, y_max] truncated at y_min.
struct SupportGrid {
    double y_min = 1e-6;
    double y_max = 25.0;
    std::size_t points = 801;

    std::vector<double> make() const {
        if (!(y_min > 0.0) || !(y_max > y_min) || points < 8)
            throw std::invalid_argument("SupportGrid: invalid support");
        std::vector<double> g(points);
        const double l0 = std::log(y_min), l1 = std::log(y_max);
        for (std::size_t i = 0; i < points; ++i)
            g[i] = std::exp(l0 + (l1 - l0) * static_cast<double>(i) /
                                     static_cast<double>(points - 1));
        g.front() = y_min;
        g.back() = y_max;
        return g;
    }

    /// Support sized so a gamma-like tail with the given mean holds < 1e-12 mass.
    static SupportGrid for_mean(double mean, std::size_t points = 801) {
        SupportGrid g;
        g.y_max = std::max(25.0, 20.0 * mean);
        g.points = points;
        return g;
    }
};

/// Value plus optional analytic first/second derivatives of a density.
struct DensityModel {
    std::function<double(double)> f;
    std::function<double(double)> df;  // null: finite differences
    std::function<double(double)> d2f; // null: finite differences
    double y_min = 0.0;
    double y_max = 0.0;
};

struct Moments {
    double mean = 0.0;
    double log_mean = 0.0;
    double inverse_mean = 0.0;
    bool inverse_mean_divergent = false;
};

/// Normalized density on a truncated working support, held as log-spaced grid
/// samples with a smooth evaluator (analytic when available, cubic spline in
/// log-log coordinates otherwise).
class StationaryDensity {
public:
    StationaryDensity() = default;

    /// Wrap an (already normalized) analytic density.
    StationaryDensity(std::function<double(double)> pdf, SupportGrid grid,
                      std::function<double(double)> dpdf = nullptr,
                      std::function<double(double)> d2pdf = nullptr)
        : grid_(grid.make()), eval_(std::move(pdf)), deval_(std::move(dpdf)),
          d2eval_(std::move(d2pdf)), norm_const_(1.0) {
        values_.resize(grid_.size());
        for (std::size_t i = 0; i < grid_.size(); ++i) values_[i] = eval_(grid_[i]);
        finalize_moments();
    }

    double operator()(double y) const { return eval_(y); }

    double y_min() const { return grid_.front(); }
    double y_max() const { return grid_.back(); }
    const std::vector<double>& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }
    double norm_const() const { return norm_const_; }
    double mean() const { return mean_; }
    double log_mean() const { return log_mean_; }

    DensityModel model() const { return {eval_, deval_, d2eval_, y_min(), y_max()}; }

    bool has_analytic_derivatives() const { return static_cast<bool>(deval_); }

private:
    friend StationaryDensity stationary_from_phi(const VolatilityLaw&, const SupportGrid&);
    friend StationaryDensity make_density(const GammaLaw&, const SupportGrid&);

    void finalize_moments() {
        log_grid_.resize(grid_.size());
        for (std::size_t i = 0; i < grid_.size(); ++i) log_grid_[i] = std::log(grid_[i]);
        const auto& f = eval_;
        mean_ = detail::composite_log_integral([&](double y) { return y * f(y); }, log_grid_);
        log_mean_ =
            detail::composite_log_integral([&](double y) { return std::log(y) * f(y); }, log_grid_);
    }

    std::vector<double> grid_;
    std::vector<double> log_grid_;
    std::vector<double> values_;
    std::function<double(double)> eval_;
    std::function<double(double)> deval_;
    std::function<double(double)> d2eval_;
    double norm_const_ = 1.0;
    double mean_ = 0.0;
    double log_mean_ = 0.0;

public:
    const std::vector<double>& log_grid() const { return log_grid_; }
};

inline StationaryDensity make_density(const GammaLaw& law, const SupportGrid& grid) {
    StationaryDensity d(
        [law](double y) { return law.pdf(y); }, grid,
        [law](double y) { return law.dpdf(y); }, [law](double y) { return law.d2pdf(y); });
    return d;
}

inline StationaryDensity make_density(const GammaLaw& law) {
    return make_density(law, SupportGrid::for_mean(law.mean()));
}

// ---------------------------------------------------------------------------
// Stationary solution of the forward equation
//   d/dy [ q y (1/phi - 1) ] - 1/2 d^2/dy^2 [ q y^2 / phi ] = 0,
// given by  q(y) = C phi(y) / y^2 * exp{ 2 int (1 - phi(u))/u du }.
// The lower integration limit is formal; anchoring the inner integral at an
// interior reference point only changes C.
// ---------------------------------------------------------------------------

inline StationaryDensity stationary_from_phi(const VolatilityLaw& law, const SupportGrid& grid) {
    const std::vector<double> ys = grid.make();
    const std::size_t m = ys.size();

    for (double y : ys)
        if (!(law.phi(y) > 0.0))
            throw std::invalid_argument("stationary_from_phi: phi must be positive on the grid");

    std::vector<double> log_ys(m);
    for (std::size_t i = 0; i < m; ++i) log_ys[i] = std::log(ys[i]);

    // cumulative inner integral, anchored mid-support; the substitution
    // u = e^v cancels the 1/u factor, leaving the smooth integrand 1 - phi(e^v)
    std::size_t anchor = 0;
    const double y_ref = std::clamp(1.0, ys.front(), ys.back());
    while (anchor + 1 < m && ys[anchor + 1] <= y_ref) ++anchor;
    const auto seg = [&](std::size_t i) {
        const double mid = 0.5 * (log_ys[i + 1] + log_ys[i]);
        const double half = 0.5 * (log_ys[i + 1] - log_ys[i]);
        double part = 0.0;
        for (int k = 0; k < 7; ++k) {
            const double v = mid + half * detail::g7_nodes[k];
            part += detail::g7_weights[k] * (1.0 - law.phi(std::exp(v)));
        }
        return part * half;
    };
    std::vector<double> inner(m, 0.0);
    for (std::size_t i = anchor; i + 1 < m; ++i) inner[i + 1] = inner[i] + seg(i);
    for (std::size_t i = anchor; i-- > 0;) inner[i] = inner[i + 1] - seg(i);

    std::vector<double> log_q(m);
    for (std::size_t i = 0; i < m; ++i)
        log_q[i] = std::log(law.phi(ys[i])) - 2.0 * std::log(ys[i]) + 2.0 * inner[i];

    // integrability diagnostics from the local power exponent d log q / d log y
    const auto power_at = [&](std::size_t i) {
        return (log_q[i + 1] - log_q[i]) / (std::log(ys[i + 1]) - std::log(ys[i]));
    };
    const double p_lo = power_at(0);
    if (p_lo < -40.0)
        throw SingularAtZeroError("stationary_from_phi: inner integral diverges at the origin");
    if (p_lo <= -1.0 + 1e-3)
        throw NonNormalizableError("stationary_from_phi: density mass diverges at the origin");
    // a tail integrable on (y_max, inf) needs d log q / d log y < -1 there;
    // exponential decay drives this slope to -infinity, power tails keep it flat
    const double p_hi = power_at(m - 2);
    if (p_hi >= -1.0 - 1e-3)
        throw NonNormalizableError("stationary_from_phi: density tail is not integrable");

    // smooth evaluator: spline the inner integral, exponentiate on demand
    auto inner_spline = std::make_shared<detail::CubicSpline>(log_ys, inner);
    auto kernel = [law, inner_spline, lo = ys.front(), hi = ys.back()](double y) {
        y = std::clamp(y, lo, hi);
        return std::exp(std::log(law.phi(y)) - 2.0 * std::log(y) +
                        2.0 * (*inner_spline)(std::log(y)));
    };
    const double z = detail::composite_log_integral(kernel, log_ys);
    if (!std::isfinite(z) || !(z > 0.0))
        throw NonNormalizableError("stationary_from_phi: normalization integral failed");

    StationaryDensity d;
    d.grid_ = ys;
    d.norm_const_ = 1.0 / z;
    d.values_.resize(m);
    for (std::size_t i = 0; i < m; ++i) d.values_[i] = std::exp(log_q[i]) / z;
    d.eval_ = [kernel, z](double y) { return kernel(y) / z; };
    // the construction fixes the log-derivative analytically:
    //   q'/q = phi'/phi - 2/y + 2 (1 - phi)/y
    auto logd = [law](double y) {
        return law.dphi(y) / law.phi(y) - 2.0 / y + 2.0 * (1.0 - law.phi(y)) / y;
    };
    auto dlogd = [law](double y) {
        const double p = law.phi(y), dp = law.dphi(y);
        return (law.d2phi(y) * p - dp * dp) / (p * p) + 2.0 / (y * y) -
               2.0 * dp / y - 2.0 * (1.0 - p) / (y * y);
    };
    auto f = d.eval_;
    d.deval_ = [f, logd](double y) { return f(y) * logd(y); };
    d.d2eval_ = [f, logd, dlogd](double y) {
        const double l = logd(y);
        return f(y) * (l * l + dlogd(y));
    };
    d.finalize_moments();
    return d;
}

inline StationaryDensity stationary_from_phi(const VolatilityLaw& law) {
    return stationary_from_phi(law, SupportGrid{});
}

// ---------------------------------------------------------------------------
// Functionals
// ---------------------------------------------------------------------------

struct QuadratureDiagnostics {
    double truncation_estimate = 0.0;
    bool precise = true;
};

/// Differential entropy -int q ln q on the working support.
inline double entropy(const StationaryDensity& q, QuadratureDiagnostics* diag = nullptr) {
    const auto f = [&q](double y) {
        const double v = q(y);
        return v > 0.0 ? -v * std::log(v) : 0.0;
    };
    const double h = integrate(f, q.y_min(), q.y_max());
    if (diag) {
        const double lo = std::fabs(f(q.y_min())) * q.y_min();
        const double hi = std::fabs(f(q.y_max())) * q.y_max();
        diag->truncation_estimate = lo + hi;
        diag->precise = diag->truncation_estimate <= 1e-10;
    }
    return h;
}

/// Kullback-Leibler divergence int p ln(p/q) >= 0.
inline double kl_divergence(const StationaryDensity& p, const StationaryDensity& q) {
    const double lo = std::max(p.y_min(), q.y_min());
    const double hi = std::min(p.y_max(), q.y_max());
    if (!(hi > lo)) throw SupportMismatchError("kl_divergence: disjoint supports");
    const double outside =
        1.0 - integrate([&p](double y) { return p(y); }, lo, hi, 1e-11);
    if (outside > 1e-8)
        throw SupportMismatchError("kl_divergence: p carries mass outside q's support");
    const auto f = [&](double y) {
        const double pv = p(y);
        if (pv <= 0.0) return 0.0;
        const double qv = q(y);
        if (!(qv > 0.0))
            throw SupportMismatchError("kl_divergence: q vanishes where p is positive");
        return pv * std::log(pv / qv);
    };
    return integrate(f, lo, hi);
}

/// Cross-entropy -int p ln q; equals entropy(p) + kl_divergence(p, q).
inline double cross_entropy(const StationaryDensity& p, const StationaryDensity& q) {
    const double lo = std::max(p.y_min(), q.y_min());
    const double hi = std::min(p.y_max(), q.y_max());
    if (!(hi > lo)) throw SupportMismatchError("cross_entropy: disjoint supports");
    const auto f = [&](double y) {
        const double pv = p(y);
        if (pv <= 0.0) return 0.0;
        const double qv = q(y);
        if (!(qv > 0.0))
            throw SupportMismatchError("cross_entropy: q vanishes where p is positive");
        return -pv * std::log(qv);
    };
    return integrate(f, lo, hi);
}

/// (E[Y], E[ln Y], E[1/Y]) by quadrature; E[1/Y] is flagged divergent when the
/// density does not vanish at the origin.
inline Moments density_moments(const StationaryDensity& q) {
    Moments mo;
    mo.mean = q.mean();
    mo.log_mean = q.log_mean();
    const auto& g = q.grid();
    const auto& v = q.values();
    const double p_lo = (std::log(v[1]) - std::log(v[0])) / (std::log(g[1]) - std::log(g[0]));
    if (p_lo <= 1e-3) {
        mo.inverse_mean_divergent = true;
        mo.inverse_mean = std::numeric_limits<double>::infinity();
    } else {
        mo.inverse_mean =
            detail::composite_log_integral([&q](double y) { return q(y) / y; }, q.log_grid());
    }
    return mo;
}

// ---------------------------------------------------------------------------
// Residual of the stationary forward equation
// ---------------------------------------------------------------------------

struct FpResidual {
    std::vector<double> y;
    std::vector<double> residual;
    double sup_norm = 0.0;
};

/// Pointwise residual d/dy[q A] - 1/2 d^2/dy^2[q B] with A = y(1/phi - 1),
/// B = y^2/phi, expanded through analytic derivatives of the density when the
/// model provides them and fourth-order central differences otherwise.
inline FpResidual fp_residual(const DensityModel& q, const VolatilityLaw& law,
                              const std::vector<double>& ys) {
    if (ys.size() < 5) throw std::invalid_argument("fp_residual: need at least 5 points");
    FpResidual out;
    out.y = ys;
    out.residual.resize(ys.size());

    const auto value = q.f;
    const bool analytic = static_cast<bool>(q.df) && static_cast<bool>(q.d2f);
    if (!analytic) {
        // fourth-order central differences; the step must resolve the grid
        for (std::size_t i = 1; i < ys.size(); ++i)
            if (ys[i] - ys[i - 1] > 0.05 * ys[i])
                throw GridTooCoarseError("fp_residual: grid too coarse for second differences");
    }

    for (std::size_t i = 0; i < ys.size(); ++i) {
        const double y = ys[i];
        const double p = law.phi(y), dp = law.dphi(y), d2p = law.d2phi(y);
        const double A = y * (1.0 / p - 1.0);
        const double dA = (1.0 / p - 1.0) - y * dp / (p * p);
        const double B = y * y / p;
        const double dB = 2.0 * y / p - y * y * dp / (p * p);
        const double d2B = 2.0 / p - 4.0 * y * dp / (p * p) -
                           y * y * d2p / (p * p) + 2.0 * y * y * dp * dp / (p * p * p);
        const double qv = value(y);
        double q1, q2;
        if (analytic) {
            q1 = q.df(y);
            q2 = q.d2f(y);
        } else {
            const double h = 1.2e-4 * y;
            q1 = (value(y - 2 * h) - 8 * value(y - h) + 8 * value(y + h) - value(y + 2 * h)) /
                 (12 * h);
            q2 = (-value(y - 2 * h) + 16 * value(y - h) - 30 * value(y) + 16 * value(y + h) -
                  value(y + 2 * h)) /
                 (12 * h * h);
        }
        const double r = q1 * A + qv * dA - 0.5 * (q2 * B + 2.0 * q1 * dB + qv * d2B);
        out.residual[i] = r;
        out.sup_norm = std::max(out.sup_norm, std::fabs(r));
    }
    return out;
}

inline FpResidual fp_residual(const StationaryDensity& q, const VolatilityLaw& law,
                              const std::vector<double>& ys) {
    return fp_residual(q.model(), law, ys);
}

} // namespace marketlab
