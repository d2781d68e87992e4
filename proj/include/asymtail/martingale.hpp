#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "asymtail/solvers.hpp"

namespace asymtail {

struct TestFunctionParams {
    double a = 0.0;
    double theta = 0.0;
    double c = 0.0;      // signed: -c_a in the supermartingale G, +c_a in G~
    double delta = 0.25;
    double eps = 0.1;
    double alpha = 1.0;
    double L = 1.0;
    double x_a = 0.0;
};

// G_c: 1 on x<=0, exp(-(theta+c)x) beyond
inline double G(const TestFunctionParams& p, double x) {
    return x <= 0.0 ? 1.0 : std::exp(-(p.theta + p.c) * x);
}

// Ghat_c: (1/(a c)) FbarI(x) for x >= delta x(a), 0 below (c = 1 -/+ eps)
inline double G_hat(const DriftedIncrement& inc, const TestFunctionParams& p,
                    double x, double c_factor) {
    if (x < p.delta * p.x_a) return 0.0;
    return inc.model.integrated_tail(x) / (p.a * c_factor);
}

// Gtilde_c: e^alpha on x<=0, exp(-(theta+c)x) beyond
inline double G_tilde(const TestFunctionParams& p, double x) {
    return x <= 0.0 ? std::exp(p.alpha) : std::exp(-(p.theta + p.c) * x);
}

namespace detail {

// integral over the law of X^(a) of exp(E(u)) f_a(u) du on [u_lo, u_hi];
// the tail of the law is integrated in z = g(w) coordinates so the combined
// exponent E(u(z)) - z stays the only exponential
template <typename EFn>
double law_integral_exp(const DriftedIncrement& inc, double u_lo, double u_hi,
                        const EFn& E, double abs_tol, double rel_tol) {
    const TailModel& M = inc.model;
    const double shift = M.m + inc.a;  // u = w - shift
    double total = 0.0;
    const double head_hi = std::min(u_hi, M.x0 - shift);
    if (M.p0 < 1.0 && head_hi > u_lo) {
        const double dens = (1.0 - M.p0) / M.x0;
        total += integrate_adaptive([&](double u) { return std::exp(E(u)) * dens; },
                                    std::max(u_lo, -shift), head_hi, abs_tol, rel_tol)
                     .value;
    }
    const double t_lo = std::max(u_lo, M.x0 - shift);
    if (u_hi > t_lo) {
        std::vector<double> z_kinks;
        if (M.family == Family::CustomG)
            for (double b : M.params.breakpoints) {
                const double zu = b - shift;
                if (zu > t_lo && zu < u_hi) z_kinks.push_back(M.g(b));
            }
        auto integ = [&](double z) {
            const double u = M.g_inverse(z) - shift;
            return std::exp(E(u) - z);
        };
        total += integrate_adaptive_split(integ, M.g(t_lo + shift), M.g(u_hi + shift),
                                          z_kinks, abs_tol, rel_tol)
                     .value;
    }
    return total;
}

// same but with expm1(E(u)); caller must keep E bounded on the range
template <typename EFn>
double law_integral_expm1(const DriftedIncrement& inc, double u_lo, double u_hi,
                          const EFn& E, double abs_tol, double rel_tol) {
    const QuadResult q = inc.expectation_a(
        [&](double u) { return std::expm1(E(u)); }, u_lo, u_hi, {0.0}, abs_tol, rel_tol);
    return q.value;
}

}  // namespace detail

// One-step drift of the exponential part, scaled by e^{theta t - R} with
// R = max(0, theta t + ln Fbar_a(t)). alpha_floor is 0 for G (floor 1) and
// p.alpha for G~ (floor e^alpha).
inline double drift_exp_part_scaled(const DriftedIncrement& inc, const TestFunctionParams& p,
                                    double t, double nu, double alpha_floor, double R) {
    const double lo = inc.support_lo();
    const double lft = inc.log_tail_a(t);
    const double B = (p.theta - nu) * t;  // -+ c_a t, always small
    const double abs_tol = std::max(1e-19, 1e-6 * p.a * std::abs(p.c));
    const double rel_tol = 5e-14;
    double v;
    if (nu * t <= 600.0) {
        // light form: e^{B-R} * int expm1(nu u) f + capped-tail pieces
        const double I = detail::law_integral_expm1(
            inc, lo, t, [&](double u) { return nu * u; }, abs_tol, rel_tol);
        v = std::exp(B - R) * I + std::exp(alpha_floor + p.theta * t + lft - R) -
            std::exp(B + lft - R);
    } else {
        // deep form: single-exponential integrand; the -1 mass cancels the
        // floor-zone term analytically
        const double T = detail::law_integral_exp(
            inc, lo, t, [&](double u) { return B + nu * u - R; }, abs_tol, rel_tol);
        v = T - std::exp(B - R) + std::exp(alpha_floor + p.theta * t + lft - R);
    }
    return v;
}

// One-step drift of the Ghat part (times a*c_factor / FbarI(t) handled
// inside), scaled by e^{theta t - R}.
inline double drift_ghat_part_scaled(const DriftedIncrement& inc, const TestFunctionParams& p,
                                     double t, double c_factor, double R) {
    const TailModel& M = inc.model;
    const double lo = inc.support_lo();
    const double cut = t - p.delta * p.x_a;  // Ghat(t-u) lives on u <= cut
    const double lFI_t = M.log_integrated_tail(t);
    const double indicator = t >= p.delta * p.x_a ? 1.0 : 0.0;
    const double abs_tol = std::max(1e-19, 1e-6 * p.a * std::abs(p.c));
    const double rel_tol = 5e-14;

    // Atilde_minus = A(t)/FbarI(t) - 1{t >= delta x_a}
    double Atilde_minus;
    if (cut <= lo) {
        Atilde_minus = -indicator;  // no mass reaches the Ghat support
    } else {
        auto dFI = [&](double u) { return M.log_integrated_tail(t - u) - lFI_t; };
        // dFI increases in u; switch to single-exponential form past 500
        double u_star = cut;
        if (dFI(cut) > 500.0) {
            double a_ = lo, b_ = cut;
            for (int i = 0; i < 200; ++i) {
                const double mid = 0.5 * (a_ + b_);
                (dFI(mid) > 500.0 ? b_ : a_) = mid;
            }
            u_star = a_;
        }
        if (indicator > 0.0) {
            // difference form: int expm1(dFI) f - P(X^(a) > u*) carries the
            // -Ghat(t) subtraction without catastrophic cancellation
            Atilde_minus = detail::law_integral_expm1(inc, lo, u_star, dFI, abs_tol, rel_tol) -
                           inc.tail_a(u_star);
        } else {
            // below the cutoff Ghat(t) = 0: plain positive integral
            Atilde_minus = detail::law_integral_exp(inc, lo, u_star, dFI, abs_tol, rel_tol);
        }
        if (u_star < cut)
            Atilde_minus += detail::law_integral_exp(inc, u_star, cut, dFI, abs_tol, rel_tol);
    }
    const double scale = std::exp(p.theta * t + lFI_t - R);
    return scale * Atilde_minus / (p.a * c_factor);
}

// raw one-step drifts (representable only at moderate t; the report works in
// the scaled frame)
inline double drift_super(const DriftedIncrement& inc, const TestFunctionParams& p, double t) {
    if (t < 0.0) throw config_error("drift_super: t must be >= 0");
    const double R = std::max(0.0, p.theta * t + inc.log_tail_a(t));
    const double kappa = p.theta - std::abs(p.c);
    double d = drift_exp_part_scaled(inc, p, t, kappa, 0.0, R);
    if (t >= p.delta * p.x_a)
        d += p.L * drift_ghat_part_scaled(inc, p, t, 1.0 - p.eps, R);
    return d * std::exp(R - p.theta * t);
}

inline double drift_sub(const DriftedIncrement& inc, const TestFunctionParams& p, double t) {
    if (t < 0.0) throw config_error("drift_sub: t must be >= 0");
    const double R = std::max(0.0, p.theta * t + inc.log_tail_a(t));
    const double lambda = p.theta + std::abs(p.c);
    double d = drift_exp_part_scaled(inc, p, t, lambda, p.alpha, R);
    if (t >= p.delta * p.x_a)
        d += p.L * drift_ghat_part_scaled(inc, p, t, 1.0 + p.eps, R);
    return d * std::exp(R - p.theta * t);
}

struct DriftPoint {
    double t = 0.0;
    double super_margin = 0.0;  // drift / max(a c_a e^{-theta t}, Fbar(t))
    double sub_margin = 0.0;
    double super_drift = 0.0;   // raw (may underflow deep in the tail)
    double sub_drift = 0.0;
    bool light_super_applicable = false, light_super_ok = true;
    bool light_sub_applicable = false, light_sub_ok = true;
};

struct DriftReport {
    TestFunctionParams params;
    double slack_factor = 1e-3;
    std::vector<DriftPoint> points;
    bool pass = false;
    std::optional<std::pair<double, double>> first_violation;  // (t, margin)
    bool delta_cutoff_ok = true;  // delta x(a) >= 1/a
    bool light_zones_ok = true;
    int n_super_violations = 0, n_sub_violations = 0;
    LVariant variant = LVariant::ExampleFirstPower;
};

struct GridSpec {
    int n_points = 400;
    double span = 3.0;  // grid covers [1e-3/theta, span * x_a]
};

inline DriftReport verify_proposition(const DriftedIncrement& inc,
                                      const ThetaSolution& theta,
                                      const BoundarySolution& boundary,
                                      TestFunctionParams p,
                                      const GridSpec& grid = {},
                                      double slack_factor = 1e-3,
                                      LVariant variant = LVariant::ExampleFirstPower,
                                      int threads = 0) {
    p.a = inc.a;
    p.theta = theta.theta;
    p.c = boundary.c_a;
    p.x_a = boundary.x_a;
    if (inc.model.tail_class == TailClass::FastGrowth)
        p.L = compute_L(inc, boundary.x_a, theta.theta, variant);
    else
        p.L = 1.0;

    DriftReport rep;
    rep.params = p;
    rep.slack_factor = slack_factor;
    rep.variant = variant;
    rep.delta_cutoff_ok = p.delta * p.x_a >= 1.0 / inc.a;

    const double kappa = boundary.kappa_a, lambda = boundary.lambda_a;
    const double ca = boundary.c_a;
    const double th = theta.theta;

    std::vector<double> ts;
    const double t_lo = 1e-3 / th, t_hi = grid.span * boundary.x_a;
    for (int i = 0; i < grid.n_points; ++i)
        ts.push_back(t_lo * std::pow(t_hi / t_lo, i / (grid.n_points - 1.0)));
    for (double k : {1.0 / kappa, 1.0 / inc.a, p.delta * p.x_a,
                     boundary.x_a - 2.0 * std::log(1.0 / inc.a) / th, boundary.x_a})
        if (k > t_lo && k < t_hi) ts.push_back(k);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

    rep.points.resize(ts.size());
    auto eval_point = [&](std::size_t i) {
        const double t = ts[i];
        DriftPoint pt;
        pt.t = t;
        const double lft = inc.model.log_tail(t);
        const double R = std::max(0.0, th * t + inc.log_tail_a(t));
        const double denom_scaled =
            std::max(inc.a * ca * std::exp(-R), std::exp(th * t + lft - R));
        double dsup = drift_exp_part_scaled(inc, p, t, kappa, 0.0, R);
        double dsub = drift_exp_part_scaled(inc, p, t, lambda, p.alpha, R);
        if (t >= p.delta * p.x_a) {
            dsup += p.L * drift_ghat_part_scaled(inc, p, t, 1.0 - p.eps, R);
            dsub += p.L * drift_ghat_part_scaled(inc, p, t, 1.0 + p.eps, R);
        }
        pt.super_margin = dsup / denom_scaled;
        pt.sub_margin = dsub / denom_scaled;
        pt.super_drift = dsup * std::exp(R - th * t);
        pt.sub_drift = dsub * std::exp(R - th * t);
        // strengthened light-zone bounds
        if (t <= 1.0 / kappa) {
            pt.light_super_applicable = true;
            const double bound = -0.5 * inc.a * ca * std::exp(ca * t - R);
            pt.light_super_ok = dsup <= bound;
        }
        if (t >= 1.0 / inc.a && t <= p.delta * p.x_a) {
            pt.light_sub_applicable = true;
            const double bound = 0.5 * inc.a * ca * std::exp(-ca * t - R);
            pt.light_sub_ok = dsub >= bound;
        }
        rep.points[i] = pt;
    };

    int n_threads = threads > 0 ? threads
                                : static_cast<int>(std::min(8u, std::thread::hardware_concurrency()));
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < ts.size(); ++i) eval_point(i);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_threads; ++w)
            pool.emplace_back([&, w]() {
                for (std::size_t i = w; i < ts.size(); i += n_threads) eval_point(i);
            });
        for (auto& th_ : pool) th_.join();
    }

    rep.pass = true;
    for (const auto& pt : rep.points) {
        const bool sup_ok = pt.super_margin <= slack_factor;
        const bool sub_ok = pt.sub_margin >= -slack_factor;
        if (!sup_ok) ++rep.n_super_violations;
        if (!sub_ok) ++rep.n_sub_violations;
        if ((!sup_ok || !sub_ok) && rep.pass) {
            rep.pass = false;
            rep.first_violation = {pt.t, !sup_ok ? pt.super_margin : pt.sub_margin};
        }
        if ((pt.light_super_applicable && !pt.light_super_ok) ||
            (pt.light_sub_applicable && !pt.light_sub_ok))
            rep.light_zones_ok = false;
    }
    return rep;
}

// spec'd delta fallback: halve delta (down to 1/16) until the cutoff
// invariant delta x(a) >= 1/a fails or a pass is achieved
inline DriftReport verify_proposition_with_fallback(const DriftedIncrement& inc,
                                                    const ThetaSolution& theta,
                                                    const BoundarySolution& boundary,
                                                    TestFunctionParams p,
                                                    const GridSpec& grid = {},
                                                    double slack_factor = 1e-3,
                                                    LVariant variant = LVariant::ExampleFirstPower) {
    DriftReport best;
    for (double delta = p.delta; delta >= 1.0 / 16.0 - 1e-12; delta *= 0.5) {
        TestFunctionParams q = p;
        q.delta = delta;
        DriftReport rep = verify_proposition(inc, theta, boundary, q, grid, slack_factor, variant);
        if (rep.pass) return rep;
        if (best.points.empty()) best = rep;
        if (delta * boundary.x_a * 0.5 < 1.0 / inc.a) break;  // next halving breaks the cutoff
    }
    return best;
}

}  // namespace asymtail
