#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "asymtail/errors.hpp"
#include "asymtail/pchip.hpp"
#include "asymtail/philox.hpp"
#include "asymtail/quadrature.hpp"
#include "asymtail/special.hpp"

namespace asymtail {

enum class Family { Pareto, RegVarying, LognormalType, Weibull, Semiexponential, CustomG };
enum class TailClass { SlowGrowth, FastGrowth };

// slowly varying factor menu for RegVarying / Semiexponential
enum class SlowlyVarying { One, Log, LogPow, LogLog };

struct FamilyParams {
    double r = 0.0;        // Pareto / RegVarying index, LognormalType scale
    double beta = 0.0;     // LognormalType exponent (> 1)
    double gamma = 0.0;    // Weibull / Semiexponential exponent in (0,1)
    double log_pow = 1.0;  // p for SlowlyVarying::LogPow
    SlowlyVarying l1 = SlowlyVarying::One;
    // CustomG piecewise powers: g(w) = coefficients[i] * w^exponents[i] on
    // [breakpoints[i], breakpoints[i+1])
    std::vector<double> breakpoints, exponents, coefficients;
};

struct GammaStarViolation {
    double x_lo = 0.0, x_hi = 0.0;
    double ratio_lo = 0.0, ratio_hi = 0.0;
    std::string which;  // "upper" (gamma*+delta decreasing) or "lower"
};

struct GammaStarReport {
    bool pass = true;
    double delta = 0.0;
    std::optional<GammaStarViolation> first_violation;
};

// Increment-distribution model. X = W - E[W] where W is the nonnegative
// family variable; the right tail of W equals e^{-g} exactly beyond the
// match point x0. Immutable after construction; concurrent reads are safe.
class TailModel {
public:
    Family family = Family::Pareto;
    FamilyParams params;

    double x0 = 1.0;       // match point (W coordinate)
    double xc = 1.0;       // start of the concavity / gamma* grid checks
    double p0 = 1.0;       // tail at x0; mass 1-p0 is uniform on [0, x0)
    double m = 0.0;        // E[W], the centering constant
    double sigma2 = 0.0;   // Var X
    double gamma_star = 0.0;
    TailClass tail_class = TailClass::SlowGrowth;
    double moment_order = std::numeric_limits<double>::infinity();

    // ---- hazard exponent g and friends (W coordinate, w >= x0 when x0>0) ----

    double g(double w) const {
        switch (family) {
            case Family::Pareto: return params.r * std::log(w);
            case Family::RegVarying: return params.r * std::log(w) - log_l1(w);
            case Family::LognormalType: return params.r * std::pow(std::log(w), params.beta);
            case Family::Weibull: return std::pow(w, params.gamma);
            case Family::Semiexponential:
                return std::pow(w, params.gamma) * l1(w);
            case Family::CustomG: {
                const std::size_t i = segment(w);
                return params.coefficients[i] * std::pow(w, params.exponents[i]);
            }
        }
        return 0.0;
    }

    double g_prime(double w) const {
        switch (family) {
            case Family::Pareto: return params.r / w;
            case Family::RegVarying: return params.r / w - dlog_l1(w);
            case Family::LognormalType: {
                const double lw = std::log(w);
                return params.r * params.beta * std::pow(lw, params.beta - 1.0) / w;
            }
            case Family::Weibull:
                return params.gamma * std::pow(w, params.gamma - 1.0);
            case Family::Semiexponential:
                return std::pow(w, params.gamma - 1.0) * (params.gamma * l1(w) + w * dl1(w));
            case Family::CustomG: {
                const std::size_t i = segment(w);
                return params.coefficients[i] * params.exponents[i] *
                       std::pow(w, params.exponents[i] - 1.0);
            }
        }
        return 0.0;
    }

    double g_second(double w) const {
        switch (family) {
            case Family::Pareto: return -params.r / (w * w);
            case Family::LognormalType: {
                const double lw = std::log(w);
                const double b = params.beta;
                return params.r * b * std::pow(lw, b - 2.0) * ((b - 1.0) - lw) / (w * w);
            }
            case Family::Weibull: {
                const double gm = params.gamma;
                return gm * (gm - 1.0) * std::pow(w, gm - 2.0);
            }
            default: {
                const double h = 1e-5 * w;
                return (g_prime(w + h) - g_prime(w - h)) / (2.0 * h);
            }
        }
    }

    // inverse of g on [x0, inf); closed form where the family allows,
    // else Newton seeded from the construction-time table
    double g_inverse(double y) const {
        switch (family) {
            case Family::Pareto: return std::exp(y / params.r);
            case Family::Weibull: return std::pow(y, 1.0 / params.gamma);
            case Family::LognormalType:
                return std::exp(std::pow(y / params.r, 1.0 / params.beta));
            case Family::CustomG: {
                std::size_t i = 0;
                while (i + 1 < seg_g_.size() && y >= seg_g_[i + 1]) ++i;
                return std::pow(y / params.coefficients[i], 1.0 / params.exponents[i]);
            }
            default: break;
        }
        if (y <= g(x0)) return x0;
        double w = ginv_init_ ? std::exp((*ginv_init_)(y)) : x0;
        if (!(w > x0)) w = x0 * (1.0 + 1e-12);
        for (int it = 0; it < 60; ++it) {
            const double gy = g(w) - y;
            const double step = gy / g_prime(w);
            double wn = w - step;
            if (!(wn > x0)) wn = 0.5 * (w + x0);
            w = wn;
            if (std::abs(step) <= 1e-15 * w) break;
        }
        return w;
    }

    // ---- survival / density / integrated tail, W coordinate, log space ----

    double log_tail_w(double w) const {
        if (w <= 0.0) return 0.0;
        if (w < x0) return std::log1p(-(1.0 - p0) * w / x0);
        return -g(w);
    }
    double tail_w(double w) const { return std::exp(log_tail_w(w)); }

    double density_w(double w) const {
        if (w <= 0.0) return 0.0;
        if (w < x0) return p0 < 1.0 ? (1.0 - p0) / x0 : 0.0;
        return g_prime(w) * std::exp(-g(w));
    }
    double log_density_w(double w) const {
        if (w <= 0.0 || (w < x0 && p0 >= 1.0)) return -std::numeric_limits<double>::infinity();
        if (w < x0) return std::log((1.0 - p0) / x0);
        return std::log(g_prime(w)) - g(w);
    }

    // ln integral_w^inf tail_w(u) du
    double log_integrated_tail_w(double w) const {
        if (w >= x0) return log_itail_deep(w);
        // exact head piece over the uniform zone plus the x0 value
        const double wl = std::max(w, 0.0);
        double head = (x0 - wl) - 0.5 * (1.0 - p0) * (x0 * x0 - wl * wl) / x0;
        if (w < 0.0) head += -w;
        return std::log(head + std::exp(log_itail_deep(x0)));
    }
    double integrated_tail_w(double w) const { return std::exp(log_integrated_tail_w(w)); }

    // ---- centered X = W - m ----

    double support_lo_x() const { return (p0 < 1.0 ? 0.0 : x0) - m; }
    double log_tail(double x) const { return log_tail_w(x + m); }
    double tail(double x) const { return std::exp(log_tail_w(x + m)); }
    double cdf(double x) const { return -std::expm1(log_tail_w(x + m)); }
    double density(double x) const { return density_w(x + m); }
    double log_integrated_tail(double x) const { return log_integrated_tail_w(x + m); }
    double integrated_tail(double x) const { return std::exp(log_integrated_tail_w(x + m)); }

    // ---- quantiles & sampling ----

    // survival inversion: returns w with tail_w(w) = u, u in (0, 1]
    double quantile_w(double u) const {
        if (!(u > 0.0 && u <= 1.0)) throw config_error("quantile_w: u outside (0,1]");
        if (u >= p0) {
            if (p0 >= 1.0) return x0;
            return x0 * (1.0 - u) / (1.0 - p0);
        }
        return g_inverse(-std::log(u));
    }
    double quantile_x(double u) const { return quantile_w(u) - m; }

    double sample(PhiloxStream& stream) const { return quantile_w(stream.next_uniform()) - m; }

    std::vector<double> sample(std::size_t count, PhiloxStream& stream) const {
        if (count < 1) throw config_error("sample: count must be >= 1");
        std::vector<double> out(count);
        for (auto& v : out) v = sample(stream);
        return out;
    }

    // ---- expectation of h(W) restricted to W in [w_lo, w_hi] ----
    // Tail part integrates in z = g(w) space (integrand h(w(z)) e^{-z}),
    // which removes the density singularity and any stiffness from g.
    template <typename H>
    QuadResult expectation_w(const H& h, double w_lo, double w_hi,
                             std::vector<double> w_kinks = {},
                             double abs_tol = 1e-14, double rel_tol = 1e-12) const {
        QuadResult out;
        const double ulo = std::max(w_lo, 0.0);
        if (p0 < 1.0 && ulo < x0) {
            const double uhi = std::min(w_hi, x0);
            if (uhi > ulo) {
                const double dens = (1.0 - p0) / x0;
                out += integrate_adaptive_split([&](double w) { return h(w) * dens; },
                                                ulo, uhi, w_kinks, abs_tol, rel_tol);
            }
        }
        const double tlo = std::max(w_lo, x0);
        if (w_hi > tlo) {
            if (family == Family::CustomG)
                for (double b : params.breakpoints) w_kinks.push_back(b);
            std::vector<double> z_kinks;
            for (double k : w_kinks)
                if (k > tlo && k < w_hi) z_kinks.push_back(g(k));
            auto integ = [&](double z) {
                const double ez = std::exp(-z);
                if (ez == 0.0) return 0.0;  // h here is at most polynomial in w
                return h(g_inverse(z)) * ez;
            };
            const double z_lo = g(tlo);
            // infinite upper limit: e^{-z} has fully underflowed by
            // z_lo + 1500 for any polynomially-bounded h, so cap there
            const double z_hi = std::isfinite(w_hi) ? g(w_hi) : z_lo + 1500.0;
            out += integrate_adaptive_split(integ, z_lo, z_hi, z_kinks, abs_tol, rel_tol);
        }
        return out;
    }

    // expectation of h(X) over X in [x_lo, x_hi]
    template <typename H>
    QuadResult expectation_x(const H& h, double x_lo, double x_hi,
                             std::vector<double> x_kinks = {},
                             double abs_tol = 1e-14, double rel_tol = 1e-12) const {
        for (auto& k : x_kinks) k += m;
        return expectation_w([&](double w) { return h(w - m); },
                             x_lo + m, x_hi + m, std::move(x_kinks), abs_tol, rel_tol);
    }

    // ---- structural checks ----

    // Eq.-style monotonicity of g(x)/x^{gamma*+delta} (down) and, for
    // FastGrowth, g(x)/x^{gamma*-delta} (up) on the given W-coordinate grid.
    GammaStarReport gamma_star_check(double delta, const std::vector<double>& grid) const {
        GammaStarReport rep;
        rep.delta = delta;
        if (!(delta > 0.0)) throw config_error("gamma_star_check: delta must be > 0");
        auto ratio = [&](double w, double e) { return g(w) / std::pow(w, e); };
        const double eu = gamma_star + delta;
        const double el = gamma_star - delta;
        for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
            const double a = grid[i], b = grid[i + 1];
            if (!(b > a) || a < xc) continue;
            const double ru0 = ratio(a, eu), ru1 = ratio(b, eu);
            if (ru1 > ru0 * (1.0 + 1e-12)) {
                rep.pass = false;
                rep.first_violation = GammaStarViolation{a, b, ru0, ru1, "upper"};
                return rep;
            }
            if (tail_class == TailClass::FastGrowth && el > 0.0) {
                const double rl0 = ratio(a, el), rl1 = ratio(b, el);
                if (rl1 < rl0 * (1.0 - 1e-12)) {
                    rep.pass = false;
                    rep.first_violation = GammaStarViolation{a, b, rl0, rl1, "lower"};
                    return rep;
                }
            }
        }
        return rep;
    }

    // g(w)/w^{gamma0} nonincreasing on the grid from xc (Eq. g_concave style)
    bool concavity_check(double gamma0, const std::vector<double>& grid) const {
        for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
            if (grid[i] < xc) continue;
            if (g(grid[i + 1]) / std::pow(grid[i + 1], gamma0) >
                g(grid[i]) / std::pow(grid[i], gamma0) * (1.0 + 1e-12))
                return false;
        }
        return true;
    }

    // ---- construction ----
    friend TailModel make_model(Family family, FamilyParams params);

private:
    double l1(double w) const {
        switch (params.l1) {
            case SlowlyVarying::One: return 1.0;
            case SlowlyVarying::Log: return std::log(w);
            case SlowlyVarying::LogPow: return std::pow(std::log(w), params.log_pow);
            case SlowlyVarying::LogLog: return std::log(std::log(w));
        }
        return 1.0;
    }
    double log_l1(double w) const {
        const double v = l1(w);
        if (!(v > 0.0)) throw numeric_error("slowly varying factor nonpositive at w=" + std::to_string(w));
        return std::log(v);
    }
    double dl1(double w) const {
        switch (params.l1) {
            case SlowlyVarying::One: return 0.0;
            case SlowlyVarying::Log: return 1.0 / w;
            case SlowlyVarying::LogPow:
                return params.log_pow * std::pow(std::log(w), params.log_pow - 1.0) / w;
            case SlowlyVarying::LogLog: return 1.0 / (w * std::log(w));
        }
        return 0.0;
    }
    double dlog_l1(double w) const { return dl1(w) / l1(w); }

    std::size_t segment(double w) const {
        const auto& b = params.breakpoints;
        std::size_t i = 0;
        while (i + 1 < b.size() && w >= b[i + 1]) ++i;
        return i;
    }

    // deep integrated tail: closed form (Pareto, Weibull-like) or the
    // slowly-varying-part table, with a Watson-expansion continuation
    double log_itail_deep(double w) const {
        switch (family) {
            case Family::Pareto:
                return (1.0 - params.r) * std::log(w) - std::log(params.r - 1.0);
            case Family::Weibull: {
                const double gm = params.gamma;
                return -std::log(gm) + log_upper_gamma(1.0 / gm, std::pow(w, gm));
            }
            case Family::Semiexponential:
                if (params.l1 == SlowlyVarying::One) {
                    const double gm = params.gamma;
                    return -std::log(gm) + log_upper_gamma(1.0 / gm, std::pow(w, gm));
                }
                break;
            case Family::RegVarying:
                if (params.l1 == SlowlyVarying::One)
                    return (1.0 - params.r) * std::log(w) - std::log(params.r - 1.0);
                break;
            default: break;
        }
        if (itail_shape_ && w <= itail_wmax_) return -g(w) + (*itail_shape_)(std::log(w));
        // Watson 2-term continuation: itail ~ e^{-g}/g' (1 - g''/g'^2)
        const double gp = g_prime(w);
        const double corr = -g_second(w) / (gp * gp);
        return -g(w) - std::log(gp) + std::log1p(std::max(corr, -0.9));
    }

    std::shared_ptr<const MonotoneCubic> ginv_init_;   // y=g(w) -> ln w
    std::shared_ptr<const MonotoneCubic> itail_shape_; // ln w -> ln(itail) + g(w)
    double itail_wmax_ = 0.0;
    std::vector<double> seg_g_;                        // CustomG: g at breakpoints
};

namespace detail {

inline void validate_custom_g(const FamilyParams& p) {
    const auto n = p.breakpoints.size();
    if (n == 0 || p.exponents.size() != n || p.coefficients.size() != n)
        throw config_error("custom_g: breakpoints/exponents/coefficients must be same nonzero length");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(p.breakpoints[i] > 0.0)) throw config_error("custom_g: breakpoints must be positive");
        if (i > 0 && !(p.breakpoints[i] > p.breakpoints[i - 1]))
            throw config_error("custom_g: breakpoints must be strictly increasing");
        if (!(p.exponents[i] > 0.0 && p.exponents[i] < 1.0))
            throw config_error("custom_g: exponents must lie in (0,1)");
        if (!(p.coefficients[i] > 0.0)) throw config_error("custom_g: coefficients must be positive");
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double b = p.breakpoints[i + 1];
        const double gl = p.coefficients[i] * std::pow(b, p.exponents[i]);
        const double gr = p.coefficients[i + 1] * std::pow(b, p.exponents[i + 1]);
        if (std::abs(gl - gr) > 1e-9 * std::max(gl, gr))
            throw config_error("custom_g: g discontinuous at breakpoint " + std::to_string(b));
        const double sl = p.coefficients[i] * p.exponents[i] * std::pow(b, p.exponents[i] - 1.0);
        const double sr = p.coefficients[i + 1] * p.exponents[i + 1] * std::pow(b, p.exponents[i + 1] - 1.0);
        if (sr > sl * (1.0 + 1e-9))
            throw config_error("custom_g: slope must not increase across breakpoint " + std::to_string(b));
    }
}

}  // namespace detail

inline TailModel make_model(Family family, FamilyParams params) {
    TailModel mdl;
    mdl.family = family;
    mdl.params = params;
    const double inf = std::numeric_limits<double>::infinity();

    switch (family) {
        case Family::Pareto:
            if (!(params.r > 2.0)) throw config_error("pareto: need r > 2 for finite variance");
            mdl.x0 = 1.0;
            mdl.xc = std::max(8.0, std::exp(2.02 / params.r));
            mdl.p0 = 1.0;
            mdl.gamma_star = 0.0;
            mdl.tail_class = TailClass::SlowGrowth;
            mdl.moment_order = params.r;
            break;
        case Family::RegVarying: {
            if (!(params.r > 2.0)) throw config_error("regvarying: need r > 2 for finite variance");
            if (params.l1 == SlowlyVarying::LogPow && !(params.log_pow > 0.0))
                throw config_error("regvarying: log_pow must be > 0");
            if (params.l1 == SlowlyVarying::One) {
                mdl.x0 = 1.0;
                mdl.p0 = 1.0;
            } else if (params.l1 == SlowlyVarying::LogLog) {
                // scan for the first point with g > 0 and g' staying positive
                double w = std::exp(1.0) + 0.05;
                int it = 0;
                for (; it < 8000; ++it, w *= 1.01)
                    if (mdl.g(w) > 0.02 && mdl.g_prime(w) > 0.0 && mdl.g_prime(w * 1.5) > 0.0) break;
                if (it == 8000) throw config_error("regvarying: no valid match point found");
                mdl.x0 = w;
            } else {
                const double p = params.l1 == SlowlyVarying::LogPow ? std::max(params.log_pow, 1.0) : 1.0;
                mdl.x0 = std::exp(2.0 * p / params.r);
                if (!(mdl.g(mdl.x0) > 0.0))
                    throw config_error("regvarying: log_pow too large for this r");
            }
            mdl.xc = std::max({8.0, mdl.x0 * 1.5, std::exp(3.0 / params.r)});
            mdl.gamma_star = 0.0;
            mdl.tail_class = TailClass::SlowGrowth;
            mdl.moment_order = params.r;
            break;
        }
        case Family::LognormalType:
            if (!(params.r > 0.0)) throw config_error("lognormal_type: need r > 0");
            if (!(params.beta > 1.0)) throw config_error("lognormal_type: need beta > 1");
            mdl.x0 = 1.0;
            mdl.xc = 8.0;
            mdl.p0 = 1.0;
            mdl.gamma_star = 0.0;
            mdl.tail_class = TailClass::SlowGrowth;
            mdl.moment_order = inf;
            break;
        case Family::Weibull:
            if (!(params.gamma > 0.0 && params.gamma < 1.0))
                throw config_error("weibull: need gamma in (0,1)");
            mdl.x0 = 0.0;
            mdl.xc = 1e-8;
            mdl.p0 = 1.0;
            mdl.gamma_star = params.gamma;
            mdl.tail_class = TailClass::FastGrowth;
            mdl.moment_order = inf;
            break;
        case Family::Semiexponential:
            if (!(params.gamma > 0.0 && params.gamma < 1.0))
                throw config_error("semiexp: need gamma in (0,1)");
            if (params.l1 == SlowlyVarying::LogPow && !(params.log_pow > 0.0))
                throw config_error("semiexp: log_pow must be > 0");
            switch (params.l1) {
                case SlowlyVarying::One: mdl.x0 = 0.0; mdl.xc = 1e-8; break;
                case SlowlyVarying::Log:
                case SlowlyVarying::LogPow: mdl.x0 = 1.0; break;
                case SlowlyVarying::LogLog: mdl.x0 = std::exp(1.0); break;
            }
            mdl.p0 = 1.0;
            mdl.gamma_star = params.gamma;
            mdl.tail_class = TailClass::FastGrowth;
            mdl.moment_order = inf;
            if (params.l1 != SlowlyVarying::One)
                mdl.xc = std::max(mdl.x0 * 1.5,
                                  std::exp(2.0 / std::max(1e-3, 0.9 - params.gamma)));
            break;
        case Family::CustomG:
            detail::validate_custom_g(params);
            mdl.x0 = params.breakpoints.front();
            mdl.xc = mdl.x0;
            mdl.gamma_star = params.exponents.back();
            mdl.tail_class = TailClass::FastGrowth;
            mdl.moment_order = inf;
            mdl.seg_g_.resize(params.breakpoints.size());
            for (std::size_t i = 0; i < params.breakpoints.size(); ++i)
                mdl.seg_g_[i] = params.coefficients[i] * std::pow(params.breakpoints[i], params.exponents[i]);
            break;
    }

    // p0 for families with a uniform head
    if (mdl.x0 > 0.0) {
        const double gx0 = mdl.g(mdl.x0);
        if (gx0 < -1e-12) throw config_error("model: g(x0) < 0, tail would exceed 1");
        mdl.p0 = std::exp(-std::max(gx0, 0.0));
        if (std::abs(gx0) < 1e-12) mdl.p0 = 1.0;
    }
    if (mdl.x0 > 0.0 && !(mdl.g_prime(mdl.x0 * (1.0 + 1e-9)) > 0.0))
        throw config_error("model: g not increasing at the match point");

    // numeric inversion table (Newton initializer) for families without a
    // closed-form g-inverse
    const bool needs_ginv_table =
        (family == Family::Semiexponential && params.l1 != SlowlyVarying::One) ||
        (family == Family::RegVarying && params.l1 != SlowlyVarying::One);
    const bool needs_itail_table =
        family == Family::LognormalType || family == Family::CustomG ||
        (family == Family::RegVarying && params.l1 != SlowlyVarying::One) ||
        (family == Family::Semiexponential && params.l1 != SlowlyVarying::One);
    double w_hi_table = mdl.x0;
    if (needs_ginv_table || needs_itail_table) {
        // range out to g = 720 (tail e^{-720}, below double underflow)
        double w = std::max(mdl.x0, 1e-6) * 2.0;
        while (mdl.g(w) < 720.0 && w < 1e300) w *= 2.0;
        w_hi_table = w;
    }
    if (needs_ginv_table) {
        constexpr int kKnots = 4096;
        std::vector<double> ys, lws;
        ys.reserve(kKnots);
        lws.reserve(kKnots);
        const double l0 = std::log(mdl.x0 * (1.0 + 1e-9)), l1v = std::log(w_hi_table);
        double prev_y = -inf;
        for (int i = 0; i < kKnots; ++i) {
            const double lw = l0 + (l1v - l0) * i / (kKnots - 1.0);
            const double y = mdl.g(std::exp(lw));
            if (y > prev_y * (1.0 + 1e-14) + 1e-300) {
                ys.push_back(y);
                lws.push_back(lw);
                prev_y = y;
            }
        }
        mdl.ginv_init_ = std::make_shared<const MonotoneCubic>(std::move(ys), std::move(lws));
    }

    // integrated-tail shape table for families without closed forms:
    // stores phi(ln w) = ln itail(w) + g(w) (slowly varying), so the
    // returned ln itail = -g + phi is exact in its fast part
    if (needs_itail_table) {
        const double l0 = std::log(std::max(mdl.x0, 1e-6) * (1.0 + 1e-9));
        const double l1v = std::log(w_hi_table);
        // knot spacing <= 0.006 in ln w keeps the interpolated slowly-varying
        // part accurate enough for the 1e-6-relative derivative invariant
        const int kKnots = static_cast<int>(
            std::clamp((l1v - l0) / 0.006, 4096.0, 40000.0));
        std::vector<double> lws(kKnots), phis(kKnots);
        // backward accumulation; segments integrated in the e^{+g(w_j)} frame
        double lI_next;  // ln itail at knot j+1
        {
            const double wN = std::exp(l1v);
            const double gp = mdl.g_prime(wN);
            lI_next = -mdl.g(wN) - std::log(gp) +
                      std::log1p(std::max(-mdl.g_second(wN) / (gp * gp), -0.9));
        }
        lws[kKnots - 1] = l1v;
        phis[kKnots - 1] = lI_next + mdl.g(std::exp(l1v));
        for (int j = kKnots - 2; j >= 0; --j) {
            const double lw = l0 + (l1v - l0) * j / (kKnots - 1.0);
            const double lw1 = l0 + (l1v - l0) * (j + 1) / (kKnots - 1.0);
            const double wj = std::exp(lw), wj1 = std::exp(lw1);
            const double gj = mdl.g(wj);
            // integral_wj^wj1 e^{gj - g(u)} du has exponent in [-(g(wj1)-gj), 0]
            const QuadResult seg = integrate_adaptive(
                [&](double u) { return std::exp(gj - mdl.g(u)); }, wj, wj1, 1e-300, 1e-13);
            lI_next = -gj + std::log(seg.value + std::exp(gj + lI_next));
            lws[j] = lw;
            phis[j] = lI_next + gj;
        }
        mdl.itail_shape_ = std::make_shared<const MonotoneCubic>(lws, phis);
        mdl.itail_wmax_ = std::exp(l1v);
    }

    // moments: closed forms where available, z-substituted quadrature otherwise
    switch (family) {
        case Family::Pareto:
            mdl.m = params.r / (params.r - 1.0);
            mdl.sigma2 = params.r / (params.r - 2.0) - mdl.m * mdl.m;
            break;
        case Family::Weibull:
            mdl.m = std::tgamma(1.0 + 1.0 / params.gamma);
            mdl.sigma2 = std::tgamma(1.0 + 2.0 / params.gamma) - mdl.m * mdl.m;
            break;
        default: {
            if (family == Family::Semiexponential && params.l1 == SlowlyVarying::One) {
                mdl.m = std::tgamma(1.0 + 1.0 / params.gamma);
                mdl.sigma2 = std::tgamma(1.0 + 2.0 / params.gamma) - mdl.m * mdl.m;
                break;
            }
            const QuadResult ew = mdl.expectation_w([](double w) { return w; }, 0.0, inf);
            const QuadResult ew2 = mdl.expectation_w([](double w) { return w * w; }, 0.0, inf);
            mdl.m = ew.value;
            mdl.sigma2 = ew2.value - ew.value * ew.value;
            break;
        }
    }
    if (!(mdl.sigma2 > 0.0) || !std::isfinite(mdl.sigma2))
        throw config_error("model: variance not finite/positive");
    return mdl;
}

// Negative-drift increment X^(a) = X - a.
struct DriftedIncrement {
    TailModel model;
    double a = 0.0;

    DriftedIncrement(TailModel mdl, double drift) : model(std::move(mdl)), a(drift) {
        if (!(a > 0.0)) throw config_error("drifted increment: need a > 0");
    }

    double support_lo() const { return model.support_lo_x() - a; }
    // survival/density of X^(a)
    double tail_a(double t) const { return model.tail(t + a); }
    double log_tail_a(double t) const { return model.log_tail(t + a); }
    double density_a(double t) const { return model.density(t + a); }

    template <typename H>
    QuadResult expectation_a(const H& h, double lo, double hi,
                             std::vector<double> kinks = {},
                             double abs_tol = 1e-14, double rel_tol = 1e-12) const {
        for (auto& k : kinks) k += a;
        return model.expectation_x([&](double x) { return h(x - a); },
                                   lo + a, hi + a, std::move(kinks), abs_tol, rel_tol);
    }
};

}  // namespace asymtail
