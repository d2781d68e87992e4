#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "asymtail/solvers.hpp"

namespace asymtail {

enum class Regime { ExpDominant, TailDominant, Mixed };

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::ExpDominant: return "exp-dominant";
        case Regime::TailDominant: return "tail-dominant";
        case Regime::Mixed: return "mixed";
    }
    return "?";
}

struct AsymptoticEstimate {
    double a = 0.0, x = 0.0;
    double exp_term = 0.0;   // e^{-theta x}
    double tail_term = 0.0;  // (L/a) FbarI(x)
    double L = 1.0;
    double total = 0.0;
    Regime regime = Regime::Mixed;
    double ratio = 0.0;  // tail_term / exp_term
    // log-space copies; the linear fields underflow deep in either regime
    double log_exp_term = 0.0, log_tail_term = 0.0;
};

// Theorem-style two-term approximation of P(M > x).
inline AsymptoticEstimate approx_max_tail(const DriftedIncrement& inc, double x,
                                          const ThetaSolution& theta,
                                          LVariant variant = LVariant::ExampleFirstPower,
                                          double regime_threshold = 10.0) {
    if (!(x > 0.0)) throw config_error("approx_max_tail: x must be > 0");
    AsymptoticEstimate est;
    est.a = inc.a;
    est.x = x;
    est.L = compute_L(inc, x, theta.theta, variant);
    est.log_exp_term = -theta.theta * x;
    est.log_tail_term = std::log(est.L) - std::log(inc.a) + inc.model.log_integrated_tail(x);
    est.exp_term = std::exp(est.log_exp_term);
    est.tail_term = std::exp(est.log_tail_term);
    est.total = est.exp_term + est.tail_term;
    est.ratio = std::exp(est.log_tail_term - est.log_exp_term);
    if (est.ratio > regime_threshold) est.regime = Regime::TailDominant;
    else if (est.ratio < 1.0 / regime_threshold) est.regime = Regime::ExpDominant;
    else est.regime = Regime::Mixed;
    return est;
}

struct TransitionPoint {
    Family family = Family::Pareto;
    double a = 0.0;
    double x_star = std::numeric_limits<double>::quiet_NaN();  // closed form
    std::vector<std::pair<std::string, double>> formula_terms;
    double numeric_cross = 0.0;  // where exp_term == tail_term
};

namespace detail {

// log(tail_term / exp_term) with the L factor clamped away from its pole so
// the bracketing search can pass through the light zone
inline double log_term_ratio(const DriftedIncrement& inc, double theta, double x,
                             LVariant variant) {
    double L = 1.0;
    if (inc.model.tail_class == TailClass::FastGrowth) {
        const double rho = std::min(l_rho(inc, theta, x), 0.98);
        const double base = 1.0 / (1.0 - rho);
        L = rho <= 0.01 ? 1.0 : (variant == LVariant::ProofSquared ? base * base : base);
    }
    return std::log(L) - std::log(inc.a) + inc.model.log_integrated_tail(x) + theta * x;
}

}  // namespace detail

// x where the two approximation terms cross, by root-finding on the
// log-ratio; takes the upper root when the light zone starts tail-heavy.
inline double numeric_crossing(const DriftedIncrement& inc, const ThetaSolution& theta,
                               LVariant variant = LVariant::ExampleFirstPower) {
    const double th = theta.theta;
    auto h = [&](double x) { return detail::log_term_ratio(inc, th, x, variant); };
    double lo = 1.0 / inc.a;
    double h_lo = h(lo);
    if (h_lo > 0.0) {
        // descend to the dip of the log-ratio (where hazard rate matches theta-ish)
        const double x_dip = detail::boundary_dip(inc, th);
        const double h_dip = x_dip > lo ? h(x_dip) : h_lo;
        if (!(x_dip > lo) || h_dip > 0.0)
            throw numeric_error("numeric_crossing: no crossing beyond 1/a (a not small enough)");
        lo = x_dip;
        h_lo = h_dip;
    }
    double hi = std::max(2.0 * lo, 2.0 / th);
    int guard = 0;
    while (h(hi) < 0.0) {
        hi *= 2.0;
        if (++guard > 400) throw numeric_error("numeric_crossing: no sign change upward");
    }
    const RootResult r = find_root_bracketed(h, lo, hi, 1e-11);
    if (inc.model.tail_class == TailClass::FastGrowth &&
        l_rho(inc, th, r.x) >= 0.98)
        throw numeric_error("numeric_crossing: crossing sits in the singular-L zone");
    return r.x;
}

// Closed-form transition point per family plus the numeric crossing.
inline TransitionPoint transition_point(const DriftedIncrement& inc,
                                        const ThetaSolution& theta,
                                        LVariant variant = LVariant::ExampleFirstPower) {
    TransitionPoint tp;
    tp.family = inc.model.family;
    tp.a = inc.a;
    const double a = inc.a;
    const double th = theta.theta;
    const double s2 = inc.model.sigma2;
    switch (inc.model.family) {
        case Family::Pareto: {
            const double r = inc.model.params.r;
            const double t1 = (r - 2.0) * s2 / (2.0 * a) * std::log(1.0 / a);
            const double t2 = (r - 1.0) * s2 / (2.0 * a) * std::log(std::log(1.0 / a));
            tp.formula_terms = {{"t_P1", t1}, {"t_P2", t2}};
            tp.x_star = t1 + t2;
            break;
        }
        case Family::RegVarying: {
            const double r = inc.model.params.r;
            tp.x_star = (r - 2.0) * s2 / (2.0 * a) * std::log(1.0 / a);
            tp.formula_terms = {{"x_RV", tp.x_star}};
            break;
        }
        case Family::LognormalType: {
            const double r = inc.model.params.r, b = inc.model.params.beta;
            tp.x_star = r / th * std::pow(std::log(1.0 / th), b);
            tp.formula_terms = {{"x_LN", tp.x_star}};
            break;
        }
        case Family::Weibull: {
            const double gm = inc.model.params.gamma;
            const double main = std::pow(1.0 / th, 1.0 / (1.0 - gm));
            const double corr = -2.0 / (th * (1.0 - gm)) *
                                std::log(std::sqrt(2.0 / (gm * s2)) / th);
            tp.formula_terms = {{"main", main}, {"correction", corr}};
            tp.x_star = main + corr;
            break;
        }
        case Family::Semiexponential: {
            const double gm = inc.model.params.gamma;
            tp.x_star = std::pow(1.0 / th, 1.0 / (1.0 - gm));
            tp.formula_terms = {{"critical", tp.x_star}};
            break;
        }
        case Family::CustomG:
            break;  // numeric crossing only
    }
    tp.numeric_cross = numeric_crossing(inc, theta, variant);
    return tp;
}

struct RegimeLabel {
    Regime regime = Regime::Mixed;
    std::string case_label;
    std::string dominant_expression;
    double position = 0.0;  // the ratio used for classification
};

// Maps (a, x) onto the per-family piecewise case. Pareto uses the refined
// (x - t_P1)/t_P2 position, Semiexponential its exponent bands, others x/x_star.
inline RegimeLabel classify_regime(const DriftedIncrement& inc,
                                   const ThetaSolution& theta, double x,
                                   double semi_delta = 0.4, double band = 0.1) {
    if (!(x > 0.0)) throw config_error("classify_regime: x must be > 0");
    RegimeLabel out;
    const double th = theta.theta;
    const Family fam = inc.model.family;
    const char* exp_expr =
        (fam == Family::Pareto || fam == Family::RegVarying) ? "exp(-2 a x / sigma^2)"
                                                             : "exp(-theta_a x)";
    auto finish = [&](double q, const std::string& zone) {
        out.position = q;
        if (q < 1.0 - band) {
            out.regime = Regime::ExpDominant;
            out.case_label = "exp:" + zone;
            out.dominant_expression = exp_expr;
        } else if (q > 1.0 + band) {
            out.regime = Regime::TailDominant;
            out.case_label = "tail:" + zone;
            out.dominant_expression = "(L/a) integrated_tail(x)";
        } else {
            out.regime = Regime::Mixed;
            out.case_label = "mixed:" + zone;
            out.dominant_expression = std::string(exp_expr) + " + (L/a) integrated_tail(x)";
        }
    };
    switch (fam) {
        case Family::Pareto: {
            const double r = inc.model.params.r;
            const double t1 = (r - 2.0) * inc.model.sigma2 / (2.0 * inc.a) * std::log(1.0 / inc.a);
            const double t2 = (r - 1.0) * inc.model.sigma2 / (2.0 * inc.a) *
                              std::log(std::log(1.0 / inc.a));
            finish((x - t1) / t2, "(x - t_P1)/t_P2");
            break;
        }
        case Family::Semiexponential: {
            const double gm = inc.model.params.gamma;
            const double e_crit = 1.0 / (1.0 - gm);
            const double e_x = std::log(x) / std::log(1.0 / th);
            out.position = e_x / e_crit;
            if (x <= 2.0 * std::pow(1.0 / th, e_crit)) {
                out.regime = Regime::ExpDominant;
                out.case_label = "exp:x = O((1/theta)^{1/(1-gamma)})";
                out.dominant_expression = "exp(-theta_a x)";
            } else if (e_x >= e_crit + semi_delta) {
                out.regime = Regime::TailDominant;
                out.case_label = "tail:x >> (1/theta)^{delta+1/(1-gamma)}";
                out.dominant_expression = "(1/a) integrated_tail(x)";
            } else {
                out.regime = Regime::Mixed;
                out.case_label = "mixed:between exponent bands";
                out.dominant_expression = "exp(-theta_a x) + (1/a) integrated_tail(x)";
            }
            break;
        }
        case Family::LognormalType: {
            const double r = inc.model.params.r, b = inc.model.params.beta;
            const double xs = r / th * std::pow(std::log(1.0 / th), b);
            const double q = x / xs;
            if (q >= 1.0 - band && q <= 1.0 + band) {
                // at the critical scale the dominant term is decided by beta
                out.position = q;
                if (b < 2.0) {
                    out.regime = Regime::TailDominant;
                    out.case_label = "tail:x ~ x_LN, beta in (1,2)";
                    out.dominant_expression = "(1/a) integrated_tail(x)";
                } else {
                    out.regime = Regime::ExpDominant;
                    out.case_label = "exp:x ~ x_LN, beta >= 2";
                    out.dominant_expression = "exp(-theta_a x)";
                }
            } else {
                finish(q, "x/x_LN");
            }
            break;
        }
        default: {
            const TransitionPoint tp = transition_point(inc, theta);
            const double xs = std::isnan(tp.x_star) ? tp.numeric_cross : tp.x_star;
            finish(x / xs, "x/x_star");
            break;
        }
    }
    return out;
}

struct WeibullPiecewise {
    std::string case_label;
    double coefficient = 1.0;
    bool on_tail_term = false;  // coefficient multiplies FbarI(x)/a vs e^{-theta x}
    double K = 0.0;             // theta_a |x - x(a)| actually used
};

// The five-case piecewise constant for Weibull tails around the boundary.
inline WeibullPiecewise weibull_piecewise(const DriftedIncrement& inc,
                                          const BoundarySolution& boundary,
                                          double x, double K) {
    if (inc.model.family != Family::Weibull &&
        !(inc.model.family == Family::Semiexponential &&
          inc.model.params.l1 == SlowlyVarying::One))
        throw config_error("weibull_piecewise: family mismatch");
    if (K < 0.0) throw config_error("weibull_piecewise: K must be >= 0");
    const double gm = inc.model.params.gamma;
    const double th = boundary.theta;
    const double xa = boundary.x_a;
    WeibullPiecewise out;
    const double k_hat = th * std::abs(x - xa);
    out.K = k_hat;
    // caller-supplied K must agree with the x actually passed (middle cases)
    const double k_far = std::log(200.0 / (1.0 - gm)) / (1.0 - gm);
    if (x >= 5.0 * xa) {
        out.case_label = "x >> x(a)";
        out.coefficient = 1.0;
        out.on_tail_term = true;
        return out;
    }
    if (x < xa && k_hat > k_far) {
        out.case_label = "x << x(a) - 1/theta";
        out.coefficient = 1.0;
        out.on_tail_term = false;
        return out;
    }
    if (K > 0.0 && std::abs(k_hat - K) > 0.05 * std::max(K, 1.0))
        throw config_error("weibull_piecewise: supplied K inconsistent with x and x(a)");
    const double e = std::exp(-k_hat * (1.0 - gm));
    if (x <= xa) {
        out.case_label = "x = x(a) - K/theta";
        out.coefficient = 1.0 + e / (1.0 - gm);
        out.on_tail_term = false;
    } else if (k_hat <= k_far) {
        out.case_label = "x = x(a) + K/theta";
        out.coefficient = e + 1.0 / (1.0 - gm);
        out.on_tail_term = true;
    } else {
        out.case_label = "x >> x(a) - 1/theta, x !>> x(a)";
        out.coefficient = e + 1.0 / (1.0 - gm);  // -> L = 1/(1-gamma)
        out.on_tail_term = true;
    }
    return out;
}

// Blanchet-Lam style evaluation: e^{-theta x} plus, for x >= 1/a, the
// integrated-tail term and the convolution integral with the positive-density
// reading of dF^I. Internally scaled so deep-tail x stays representable.
inline double blanchet_lam(const DriftedIncrement& inc, const ThetaSolution& theta,
                           double x, double* log_value = nullptr) {
    const double th = theta.theta;
    const double a = inc.a;
    if (x < 1.0 / a) {
        if (log_value) *log_value = -th * x;
        return std::exp(-th * x);
    }
    // exponent of the convolution integrand is convex in y: max at the ends
    auto expo = [&](double y) { return th * y + inc.model.log_tail(y); };
    const double R = std::max({0.0, expo(1.0 / a), expo(x)});
    auto integ = [&](double y) {
        return (1.0 / a + 2.0 * (x - y)) * std::exp(expo(y) - R);
    };
    const QuadResult conv = integrate_adaptive(integ, 1.0 / a, x, 1e-300, 1e-11);
    if (!conv.converged)
        throw numeric_error("blanchet_lam: quadrature budget exhausted");
    // log-sum-exp of the three scaled terms, then shift back by e^{-theta x}
    const double lt0 = 0.0;
    const double lt1 = th * x + inc.model.log_integrated_tail(x) - std::log(a);
    const double lt2 = conv.value <= 0.0 ? -std::numeric_limits<double>::infinity()
                                         : R + std::log(conv.value);
    const double mx = std::max({lt0, lt1, lt2});
    const double lv = mx + std::log(std::exp(lt0 - mx) + std::exp(lt1 - mx) +
                                    std::exp(lt2 - mx)) - th * x;
    if (log_value) *log_value = lv;
    return std::exp(lv);
}

}  // namespace asymtail
