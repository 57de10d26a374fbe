#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace marketlab::detail {

/// Natural cubic spline on a strictly increasing abscissa.
class CubicSpline {
public:
    CubicSpline() = default;

    CubicSpline(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 3 || y_.size() != n)
            throw std::invalid_argument("CubicSpline: need >= 3 matching points");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1]))
                throw std::invalid_argument("CubicSpline: abscissa must increase");

        // second derivatives via the standard tridiagonal sweep
        m_.assign(n, 0.0);
        std::vector<double> u(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double sig = (x_[i] - x_[i - 1]) / (x_[i + 1] - x_[i - 1]);
            const double p = sig * m_[i - 1] + 2.0;
            m_[i] = (sig - 1.0) / p;
            const double d1 = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
            const double d0 = (y_[i] - y_[i - 1]) / (x_[i] - x_[i - 1]);
            u[i] = (6.0 * (d1 - d0) / (x_[i + 1] - x_[i - 1]) - sig * u[i - 1]) / p;
        }
        for (std::size_t k = n - 1; k-- > 1;) m_[k] = m_[k] * m_[k + 1] + u[k];
        m_.front() = m_.back() = 0.0;
    }

    double operator()(double x) const {
        const auto [i, h, a, b] = locate(x);
        return a * y_[i] + b * y_[i + 1] +
               ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
    }

    double derivative(double x) const {
        const auto [i, h, a, b] = locate(x);
        return (y_[i + 1] - y_[i]) / h +
               h * ((3.0 * b * b - 1.0) * m_[i + 1] - (3.0 * a * a - 1.0) * m_[i]) / 6.0;
    }

    double second_derivative(double x) const {
        const auto [i, h, a, b] = locate(x);
        return a * m_[i] + b * m_[i + 1];
    }

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }

private:
    struct Loc {
        std::size_t i;
        double h, a, b;
    };

    Loc locate(double x) const {
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = (it == x_.begin()) ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
        i = std::min(i, x_.size() - 2);
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - x) / h;
        return {i, h, a, 1.0 - a};
    }

    std::vector<double> x_, y_, m_;
};

} // namespace marketlab::detail
