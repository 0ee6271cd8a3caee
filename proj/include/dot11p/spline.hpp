#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace dot11p {

/// Natural cubic spline (second derivative zero at both ends). Evaluation
/// outside the knot hull clamps to the boundary value. Value type may be
/// real or complex; knots must be strictly increasing.
template <typename V>
class CubicSpline {
public:
    CubicSpline(std::vector<double> x, std::vector<V> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n)
            throw std::invalid_argument("CubicSpline: need >= 2 matching knots");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1]))
                throw std::invalid_argument("CubicSpline: knots not increasing");

        m_.assign(n, V{});
        if (n > 2) {
            // Thomas algorithm on the interior second-derivative system
            std::vector<double> diag(n - 2), upper(n - 2);
            std::vector<V> rhs(n - 2);
            for (std::size_t i = 1; i + 1 < n; ++i) {
                double h0 = x_[i] - x_[i - 1];
                double h1 = x_[i + 1] - x_[i];
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
            }
            for (std::size_t i = 1; i < n - 2; ++i) {
                double lower = x_[i + 1] - x_[i];  // h_i, sub-diagonal entry
                double w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] = rhs[i] - w * rhs[i - 1];
            }
            m_[n - 2] = rhs[n - 3] / diag[n - 3];
            for (std::size_t i = n - 3; i >= 1; --i) {
                m_[i] = (rhs[i - 1] - upper[i - 1] * m_[i + 1]) / diag[i - 1];
                if (i == 1) break;
            }
        }
    }

    V operator()(double x) const {
        if (x <= x_.front()) return y_.front();
        if (x >= x_.back()) return y_.back();
        std::size_t i = static_cast<std::size_t>(
                            std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) - 1;
        double h = x_[i + 1] - x_[i];
        double a = (x_[i + 1] - x) / h;
        double b = (x - x_[i]) / h;
        return a * y_[i] + b * y_[i + 1] +
               ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * (h * h / 6.0);
    }

private:
    std::vector<double> x_;
    std::vector<V> y_;
    std::vector<V> m_;  // second derivatives at the knots
};

}  // namespace dot11p
