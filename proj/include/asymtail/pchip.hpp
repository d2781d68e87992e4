#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "asymtail/errors.hpp"

namespace asymtail {

// Monotone piecewise-cubic interpolant (Fritsch-Carlson slope limiting).
// Requires strictly increasing x; preserves monotonicity of y.
class MonotoneCubic {
public:
    MonotoneCubic() = default;

    MonotoneCubic(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n)
            throw config_error("MonotoneCubic: need >= 2 points with matching sizes");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1]))
                throw config_error("MonotoneCubic: x not strictly increasing");
        slopes_.resize(n);
        std::vector<double> d(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i)
            d[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
        slopes_[0] = d[0];
        slopes_[n - 1] = d[n - 2];
        for (std::size_t i = 1; i + 1 < n; ++i)
            slopes_[i] = (d[i - 1] * d[i] <= 0.0) ? 0.0 : 0.5 * (d[i - 1] + d[i]);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (d[i] == 0.0) { slopes_[i] = slopes_[i + 1] = 0.0; continue; }
            const double a = slopes_[i] / d[i];
            const double b = slopes_[i + 1] / d[i];
            const double s = a * a + b * b;
            if (s > 9.0) {
                const double t = 3.0 / std::sqrt(s);
                slopes_[i] = t * a * d[i];
                slopes_[i + 1] = t * b * d[i];
            }
        }
    }

    double operator()(double xq) const {
        if (xq <= x_.front()) return y_.front() + slopes_.front() * (xq - x_.front());
        if (xq >= x_.back()) return y_.back() + slopes_.back() * (xq - x_.back());
        const auto it = std::upper_bound(x_.begin(), x_.end(), xq);
        const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
        const double h = x_[i + 1] - x_[i];
        const double t = (xq - x_[i]) / h;
        const double t2 = t * t, t3 = t2 * t;
        const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
        const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
        return h00 * y_[i] + h10 * h * slopes_[i] + h01 * y_[i + 1] + h11 * h * slopes_[i + 1];
    }

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }

private:
    std::vector<double> x_, y_, slopes_;
};

}  // namespace asymtail
