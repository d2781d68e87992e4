#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "asymtail/errors.hpp"
#include "asymtail/quadrature.hpp"
#include "asymtail/roots.hpp"
#include "asymtail/tail_models.hpp"

namespace asymtail {

struct ThetaSolution {
    double a = 0.0;
    double theta = 0.0;
    double residual = 0.0;        // truncated MGF minus 1 at theta
    double asymptotic_ref = 0.0;  // 2a / sigma^2
    std::vector<double> expansion;
    std::pair<double, double> bracket{0.0, 0.0};
    int iterations = 0;
};

struct BoundarySolution {
    double a = 0.0;
    double theta = 0.0;
    double x_a = 0.0;
    double residual = 0.0;    // theta*x - g(x) - ln(a*theta) at x_a
    double c_a = 0.0;         // 1 / (ln(1/a) * x_a)
    double kappa_a = 0.0;     // theta - c_a
    double lambda_a = 0.0;    // theta + c_a
    double mono_ratio = 0.0;  // a e^{-theta x_a} / FbarI(x_a)
};

enum class LVariant { ProofSquared, ExampleFirstPower };

// E[e^{theta X^(a)}; X^(a) <= 1/a] - 1 in difference form, so residuals far
// below machine epsilon around 1 stay resolvable.
inline double truncated_mgf_minus_one(const DriftedIncrement& inc, double theta,
                                      double abs_tol = 1e-20) {
    if (theta < 0.0) throw config_error("truncated_mgf: theta must be >= 0");
    const double cut = inc.a + 1.0 / inc.a;  // X <= a + 1/a
    const QuadResult q = inc.model.expectation_x(
        [&](double x) { return std::expm1(theta * (x - inc.a)); },
        inc.model.support_lo_x(), cut, {0.0, inc.a}, abs_tol, 1e-13);
    if (!q.converged)
        throw numeric_error("truncated_mgf: quadrature budget exhausted, err=" +
                            std::to_string(q.error));
    return q.value - inc.model.tail(cut);
}

inline double truncated_mgf(const DriftedIncrement& inc, double theta) {
    return 1.0 + truncated_mgf_minus_one(inc, theta);
}

// Root of E[e^{theta X^(a)}; X^(a) <= 1/a] = 1. Bracket starts at
// [a/sigma^2, 8a/sigma^2] and expands geometrically.
inline ThetaSolution solve_theta(const DriftedIncrement& inc, double tol = 1e-12) {
    if (!(tol > 0.0)) throw config_error("solve_theta: tol must be > 0");
    const double ref = 2.0 * inc.a / inc.model.sigma2;
    const double quad_tol = std::max(1e-20, 1e-3 * tol);
    auto f = [&](double th) { return truncated_mgf_minus_one(inc, th, quad_tol); };

    double lo = 0.5 * ref, hi = 4.0 * ref;
    // f(0) = -P(X^(a) > 1/a) < 0; walk lo down until negative
    int guard = 0;
    while (f(lo) > 0.0) {
        lo *= 0.25;
        if (++guard > 60) throw numeric_error("solve_theta: no negative bracket end");
    }
    guard = 0;
    while (f(hi) < 0.0) {
        hi *= 2.0;
        if (++guard > 60 || hi > 1e9)
            throw numeric_error("solve_theta: no sign change in maximal bracket (a=" +
                                std::to_string(inc.a) + ")");
    }
    const RootResult r = find_root_bracketed(f, lo, hi, tol);
    ThetaSolution sol;
    sol.a = inc.a;
    sol.theta = r.x;
    sol.residual = r.residual;
    sol.asymptotic_ref = ref;
    sol.bracket = {r.bracket_lo, r.bracket_hi};
    sol.iterations = r.iterations;
    if (!(sol.theta > 0.0)) throw numeric_error("solve_theta: nonpositive root");
    return sol;
}

// Power-series coefficients of theta_a = C1 a + C2 a^2 + ... from moment
// matching of the exponential-moment expansion:
//   a = (theta/2) E X^2 + (theta^2/6) E X^3 + O(theta^3)
// gives C1 = 2/sigma^2 and C2 = -4 E[X^3] / (3 sigma^6).
inline std::vector<double> theta_expansion(const DriftedIncrement& inc, int order) {
    if (order < 1) throw config_error("theta_expansion: order must be >= 1");
    if (order > 2)
        throw config_error("theta_expansion: orders beyond 2 are not supported");
    if (!(inc.model.moment_order > order + 2))
        throw config_error("theta_expansion: model does not certify E|X|^" +
                           std::to_string(order + 2) + " < inf");
    const double s2 = inc.model.sigma2;
    std::vector<double> coef{2.0 / s2};
    if (order >= 2) {
        const double mean = inc.model.m;
        const QuadResult mu3 = inc.model.expectation_w(
            [&](double w) { const double d = w - mean; return d * d * d; },
            0.0, std::numeric_limits<double>::infinity());
        coef.push_back(-4.0 * mu3.value / (3.0 * s2 * s2 * s2));
    }
    return coef;
}

namespace detail {

// x where the boundary LHS theta*x - g(x) - ln(a theta) is minimal
// (g concave => g' decreasing => unique dip where g'(x+m) = theta)
inline double boundary_dip(const DriftedIncrement& inc, double theta) {
    const TailModel& M = inc.model;
    const double w_lo = std::max(M.x0, 1e-12) * (1.0 + 1e-9);
    if (M.g_prime(w_lo) <= theta) return w_lo - M.m;
    double w_hi = std::max(2.0 * w_lo, 2.0);
    int guard = 0;
    while (M.g_prime(w_hi) > theta) {
        w_hi *= 4.0;
        if (++guard > 300) throw numeric_error("boundary_dip: g' never drops to theta");
    }
    const RootResult r = find_root_bracketed(
        [&](double w) { return M.g_prime(w) - theta; }, w_lo, w_hi, 0.0, 1e-12 * w_hi);
    return r.x - M.m;
}

}  // namespace detail

// Solves theta*x - g(x) - ln(a*theta) = 0 with g the exact hazard exponent
// of the centered increment (g(x) = -ln P(X > x)). Returns the root >= 1/a;
// reports "a not small enough" when no such root exists.
inline BoundarySolution solve_boundary(const DriftedIncrement& inc,
                                       const ThetaSolution& theta,
                                       double tol = 1e-10) {
    if (theta.a != inc.a)
        throw config_error("solve_boundary: theta solved for a different a");
    const double th = theta.theta;
    const double log_atheta = std::log(inc.a * th);
    auto phi = [&](double x) { return th * x + inc.model.log_tail(x) - log_atheta; };

    const double inv_a = 1.0 / inc.a;
    double lo = inv_a;
    double phi_lo = phi(lo);
    if (phi_lo > 0.0) {
        const double x_dip = detail::boundary_dip(inc, th);
        const double phi_dip = x_dip > lo ? phi(x_dip) : phi_lo;
        if (!(x_dip > lo) || phi_dip > 0.0)
            throw numeric_error(
                "solve_boundary: no root with x >= 1/a (a not small enough); "
                "phi(1/a)=" + std::to_string(phi_lo) +
                ", phi(dip)=" + std::to_string(phi_dip));
        lo = x_dip;
        phi_lo = phi_dip;
    }
    double hi = std::max(2.0 * lo, 2.0 / th);
    int guard = 0;
    while (phi(hi) < 0.0) {
        hi *= 2.0;
        if (++guard > 400) throw numeric_error("solve_boundary: upper bracket exhausted");
    }
    const RootResult r = find_root_bracketed(phi, lo, hi, tol);

    BoundarySolution b;
    b.a = inc.a;
    b.theta = th;
    b.x_a = r.x;
    b.residual = r.residual;
    b.c_a = 1.0 / (std::log(1.0 / inc.a) * b.x_a);
    b.kappa_a = th - b.c_a;
    b.lambda_a = th + b.c_a;
    b.mono_ratio = std::exp(std::log(inc.a) - th * b.x_a - inc.model.log_integrated_tail(b.x_a));
    if (!(b.kappa_a > 0.0))
        throw numeric_error("solve_boundary: kappa_a = theta - c_a not positive");
    return b;
}

// rho = gamma* g(x) / (theta x); the FastGrowth constant is a function of it
inline double l_rho(const DriftedIncrement& inc, double theta, double x) {
    if (inc.model.tail_class == TailClass::SlowGrowth) return 0.0;
    return inc.model.gamma_star * (-inc.model.log_tail(x)) / (theta * x);
}

// Limit constant L of the unified approximation. SlowGrowth tails get 1;
// FastGrowth tails get the chosen functional of rho, 1 deep in the tail
// (rho <= 0.01), and a hard error where the formula is singular.
inline double compute_L(const DriftedIncrement& inc, double x, double theta,
                        LVariant variant) {
    if (!(x > 0.0)) throw config_error("compute_L: x must be > 0");
    if (inc.model.tail_class == TailClass::SlowGrowth) return 1.0;
    const double rho = l_rho(inc, theta, x);
    if (rho <= 0.01) return 1.0;
    if (rho >= 1.0)
        throw numeric_error("compute_L: rho = gamma* g(x)/(theta x) = " +
                            std::to_string(rho) + " >= 1; constant undefined at x=" +
                            std::to_string(x));
    const double base = 1.0 / (1.0 - rho);
    return variant == LVariant::ProofSquared ? base * base : base;
}

inline double compute_L(const DriftedIncrement& inc, double x,
                        const BoundarySolution& boundary, LVariant variant) {
    return compute_L(inc, x, boundary.theta, variant);
}

// theta and boundary with the coupled tolerance min(1e-12, 0.01 a c_a):
// one refinement pass once c_a is known.
inline std::pair<ThetaSolution, BoundarySolution> solve_theta_boundary(
    const DriftedIncrement& inc) {
    ThetaSolution th = solve_theta(inc, 1e-12);
    BoundarySolution b = solve_boundary(inc, th, 1e-10);
    const double coupled = std::min(1e-12, 0.01 * inc.a * b.c_a);
    if (coupled < 1e-12) {
        th = solve_theta(inc, coupled);
        b = solve_boundary(inc, th, 1e-10);
    }
    return {th, b};
}

}  // namespace asymtail
