#pragma once

#include <cmath>
#include <limits>
#include <utility>

#include "asymtail/errors.hpp"

namespace asymtail {

namespace detail {

// continued fraction for the upper tail, modified Lentz
inline double gamma_cf_h(double s, double z) {
    const double tiny = 1e-300;
    double b = z + 1.0 - s;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - s);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) return h;
    }
    throw numeric_error("incomplete gamma continued fraction did not converge");
}

inline double gamma_series_p(double s, double z) {
    double ap = s;
    double sum = 1.0 / s;
    double del = sum;
    for (int i = 0; i < 1000; ++i) {
        ap += 1.0;
        del *= z / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-17)
            return sum * std::exp(-z + s * std::log(z) - std::lgamma(s));
    }
    throw numeric_error("incomplete gamma series did not converge");
}

}  // namespace detail

// log of the (unnormalized) upper incomplete gamma Gamma(s, z), z >= 0, s > 0.
// Stable arbitrarily deep in the tail.
inline double log_upper_gamma(double s, double z) {
    if (z <= 0.0) return std::lgamma(s);
    if (z < s + 1.0) {
        const double p = detail::gamma_series_p(s, z);  // P(s,z) in (0,1), not near 1
        return std::lgamma(s) + std::log1p(-p);
    }
    return -z + s * std::log(z) + std::log(detail::gamma_cf_h(s, z));
}

// regularized incomplete beta I_x(a, b)
inline double reg_inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    auto betacf = [](double a, double b, double x) {
        const double tiny = 1e-300;
        const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
        double c = 1.0, d = 1.0 - qab * x / qap;
        if (std::abs(d) < tiny) d = tiny;
        d = 1.0 / d;
        double h = d;
        for (int m = 1; m <= 500; ++m) {
            const int m2 = 2 * m;
            double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
            d = 1.0 + aa * d;
            if (std::abs(d) < tiny) d = tiny;
            c = 1.0 + aa / c;
            if (std::abs(c) < tiny) c = tiny;
            d = 1.0 / d;
            h *= d * c;
            aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
            d = 1.0 + aa * d;
            if (std::abs(d) < tiny) d = tiny;
            c = 1.0 + aa / c;
            if (std::abs(c) < tiny) c = tiny;
            d = 1.0 / d;
            const double del = d * c;
            h *= del;
            if (std::abs(del - 1.0) < 1e-15) return h;
        }
        throw numeric_error("incomplete beta continued fraction did not converge");
    };
    const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                               a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

// quantile of Beta(a,b) by bisection on the regularized incomplete beta
inline double beta_quantile(double p, double a, double b) {
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (reg_inc_beta(a, b, mid) < p) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

// exact binomial (Clopper-Pearson) two-sided interval at confidence `conf`
inline std::pair<double, double> clopper_pearson(long k, long n, double conf = 0.95) {
    const double alpha = 1.0 - conf;
    double lo = 0.0, hi = 1.0;
    if (k > 0) lo = beta_quantile(alpha / 2.0, static_cast<double>(k), static_cast<double>(n - k + 1));
    if (k < n) hi = beta_quantile(1.0 - alpha / 2.0, static_cast<double>(k + 1), static_cast<double>(n - k));
    return {lo, hi};
}

}  // namespace asymtail
