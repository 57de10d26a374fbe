#pragma once

#include <cmath>
#include <stdexcept>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "marketlab/rng.hpp"

namespace marketlab {

/// Gamma law parameterized by shape and rate. Degrees of freedom = 2*shape,
/// mean = shape/rate. Shape 2 with rate 2/y_bar is the stationary law of the
/// dimension-four square-root process with reference level y_bar.
struct GammaLaw {
    double shape = 1.0;
    double rate = 1.0;

    GammaLaw() = default;
    GammaLaw(double shape_, double rate_) : shape(shape_), rate(rate_) {
        if (!(shape > 0.0) || !(rate > 0.0))
            throw std::invalid_argument("GammaLaw: shape and rate must be > 0");
    }

    static GammaLaw from_dof_mean(double dof, double mean) {
        return GammaLaw(dof / 2.0, dof / (2.0 * mean));
    }

    double dof() const { return 2.0 * shape; }
    double mean() const { return shape / rate; }
    double log_mean() const { return boost::math::digamma(shape) - std::log(rate); }

    /// E[1/Y], finite only for shape > 1.
    double inverse_mean() const {
        if (shape <= 1.0) throw std::domain_error("GammaLaw: E[1/Y] diverges for shape <= 1");
        return rate / (shape - 1.0);
    }

    double log_pdf(double y) const {
        return shape * std::log(rate) - std::lgamma(shape) +
               (shape - 1.0) * std::log(y) - rate * y;
    }

    double pdf(double y) const { return y > 0.0 ? std::exp(log_pdf(y)) : 0.0; }

    // d/dy and d2/dy2 of the pdf, used by the stationary-equation residual.
    double dpdf(double y) const {
        return pdf(y) * ((shape - 1.0) / y - rate);
    }
    double d2pdf(double y) const {
        const double s = (shape - 1.0) / y - rate;
        return pdf(y) * (s * s - (shape - 1.0) / (y * y));
    }

    double cdf(double y) const {
        return y <= 0.0 ? 0.0 : boost::math::gamma_p(shape, rate * y);
    }

    /// Quantile such that the upper tail mass beyond it is `tail`.
    double upper_quantile(double tail) const {
        return boost::math::gamma_p_inv(shape, 1.0 - tail) / rate;
    }

    double sample(RngStream& rng) const {
        if (shape == 2.0) {
            // sum of two unit exponentials, exact and branch-free
            return (rng.exponential() + rng.exponential()) / rate;
        }
        return rng.gamma(shape) / rate;
    }
};

} // namespace marketlab
