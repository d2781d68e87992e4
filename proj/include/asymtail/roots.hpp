#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "asymtail/errors.hpp"

namespace asymtail {

struct RootResult {
    double x = 0.0;
    double residual = 0.0;
    int iterations = 0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
};

// Bracketed bisection with secant acceleration. f(lo) and f(hi) must differ
// in sign. Stops when |f| <= f_tol or the bracket collapses; hard cap 200
// iterations (guaranteed convergence path is the bisection fallback).
template <typename F>
RootResult find_root_bracketed(const F& f, double lo, double hi,
                               double f_tol, double x_tol = 0.0,
                               int max_iter = 200) {
    double flo = f(lo), fhi = f(hi);
    RootResult res;
    res.bracket_lo = lo;
    res.bracket_hi = hi;
    if (flo == 0.0) { res.x = lo; return res; }
    if (fhi == 0.0) { res.x = hi; return res; }
    if ((flo > 0) == (fhi > 0))
        throw numeric_error("find_root_bracketed: no sign change in [" +
                            std::to_string(lo) + ", " + std::to_string(hi) +
                            "], f = " + std::to_string(flo) + " / " + std::to_string(fhi));
    double x = lo, fx = flo;
    for (int it = 0; it < max_iter; ++it) {
        // secant through the bracket endpoints, guarded to the interior third
        double xs = hi - fhi * (hi - lo) / (fhi - flo);
        const double mid = 0.5 * (lo + hi);
        if (!(xs > lo && xs < hi)) xs = mid;
        // avoid stagnating at an endpoint
        const double w = hi - lo;
        if (xs - lo < 0.01 * w) xs = lo + 0.01 * w;
        if (hi - xs < 0.01 * w) xs = hi - 0.01 * w;
        x = xs;
        fx = f(x);
        res.iterations = it + 1;
        if (fx == 0.0 || std::abs(fx) <= f_tol) break;
        if ((fx > 0) == (fhi > 0)) { hi = x; fhi = fx; }
        else { lo = x; flo = fx; }
        if (hi - lo <= x_tol || hi - lo <= 4.0 * std::abs(x) * 2.220446049250313e-16) {
            // bracket at resolution limit: pick the endpoint with smaller |f|
            if (std::abs(flo) < std::abs(fx)) { x = lo; fx = flo; }
            if (std::abs(fhi) < std::abs(fx)) { x = hi; fx = fhi; }
            break;
        }
    }
    res.x = x;
    res.residual = fx;
    return res;
}

// Expand [lo, hi] geometrically upward until f changes sign against f(lo).
// Returns the final hi. Throws numeric_error when hi_max is reached.
template <typename F>
double expand_bracket_up(const F& f, double lo, double hi, double hi_max,
                         double grow = 2.0) {
    const double flo = f(lo);
    while (f(hi) * flo > 0) {
        hi *= grow;
        if (hi > hi_max)
            throw numeric_error("bracket expansion exhausted at hi = " + std::to_string(hi));
    }
    return hi;
}

}  // namespace asymtail
