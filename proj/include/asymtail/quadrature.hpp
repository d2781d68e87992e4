#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <initializer_list>
#include <limits>
#include <queue>
#include <vector>

#include "asymtail/errors.hpp"

namespace asymtail {

struct QuadResult {
    double value = 0.0;
    double error = 0.0;   // embedded error estimate
    bool converged = true;
    long panels = 0;

    QuadResult& operator+=(const QuadResult& o) {
        value += o.value;
        error += o.error;
        converged = converged && o.converged;
        panels += o.panels;
        return *this;
    }
};

namespace detail {

// Gauss-Kronrod 7/15 on [-1,1]
inline constexpr double kGK15Nodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kGK15WK[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGK15WG[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename F>
inline void gk15(const F& f, double a, double b, double& result, double& err) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fk = 0.0, fg = 0.0;
    const double f0 = f(c);
    fk += kGK15WK[7] * f0;
    fg += kGK15WG[3] * f0;
    for (int i = 0; i < 7; ++i) {
        const double dx = h * kGK15Nodes[i];
        const double fv = f(c - dx) + f(c + dx);
        fk += kGK15WK[i] * fv;
        if (i % 2 == 1) fg += kGK15WG[i / 2] * fv;
    }
    result = fk * h;
    // QUADPACK-style sharpened estimate would need the resasc machinery;
    // the plain |K-G| difference is adequate for the tolerances used here.
    err = std::abs((fk - fg) * h);
}

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const {
        if (error != o.error) return error < o.error;
        return a < o.a;  // deterministic tie-break
    }
};

}  // namespace detail

inline long quad_panel_budget() {
    if (const char* env = std::getenv("ASYMTAIL_QUAD_BUDGET")) {
        const long v = std::atol(env);
        if (v > 0) return v;
    }
    return 1000000;
}

// Adaptive Gauss-Kronrod on a finite interval. Returns best value with an
// honest error estimate; converged=false when the panel budget ran out.
template <typename F>
QuadResult integrate_adaptive(const F& f, double a, double b,
                              double abs_tol = 1e-12, double rel_tol = 1e-10,
                              long budget = -1) {
    QuadResult out;
    if (a == b) return out;
    double sign = 1.0;
    if (a > b) { std::swap(a, b); sign = -1.0; }
    if (budget < 0) budget = quad_panel_budget();

    std::priority_queue<detail::Panel> heap;
    detail::Panel p{a, b, 0.0, 0.0};
    detail::gk15(f, a, b, p.value, p.error);
    long panels = 1;
    double total = p.value, total_err = p.error;
    heap.push(p);

    while (total_err > std::max(abs_tol, rel_tol * std::abs(total))) {
        if (panels >= budget) {
            out.converged = false;
            break;
        }
        detail::Panel worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b) {
            // interval at machine resolution; keep its estimate as-is
            if (heap.empty()) break;
            detail::Panel rest = heap.top();
            if (rest.error <= std::max(abs_tol, rel_tol * std::abs(total)) - worst.error) break;
            // cannot improve further
            out.converged = total_err <= 10 * std::max(abs_tol, rel_tol * std::abs(total));
            heap.push(worst);
            break;
        }
        detail::Panel left{worst.a, mid, 0.0, 0.0}, right{mid, worst.b, 0.0, 0.0};
        detail::gk15(f, left.a, left.b, left.value, left.error);
        detail::gk15(f, right.a, right.b, right.value, right.error);
        panels += 2;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    out.value = sign * total;
    out.error = total_err;
    out.panels = panels;
    return out;
}

// Split at interior breakpoints (integrand kinks), then integrate each piece.
template <typename F>
QuadResult integrate_adaptive_split(const F& f, double a, double b,
                                    std::vector<double> pts,
                                    double abs_tol = 1e-12, double rel_tol = 1e-10,
                                    long budget = -1) {
    if (a > b) {
        QuadResult r = integrate_adaptive_split(f, b, a, std::move(pts), abs_tol, rel_tol, budget);
        r.value = -r.value;
        return r;
    }
    pts.erase(std::remove_if(pts.begin(), pts.end(),
                             [&](double p) { return !(p > a && p < b); }),
              pts.end());
    std::sort(pts.begin(), pts.end());
    pts.push_back(b);
    QuadResult out;
    double prev = a;
    const double piece_abs = abs_tol / static_cast<double>(pts.size());
    for (double p : pts) {
        out += integrate_adaptive(f, prev, p, piece_abs, rel_tol, budget);
        prev = p;
    }
    return out;
}

// integral over [x, +inf) via u = x + s/(1-s)
template <typename F>
QuadResult integrate_to_inf(const F& f, double x,
                            double abs_tol = 1e-12, double rel_tol = 1e-10,
                            long budget = -1) {
    auto g = [&](double s) {
        const double om = 1.0 - s;
        const double u = x + s / om;
        const double v = f(u);
        return v == 0.0 ? 0.0 : v / (om * om);
    };
    return integrate_adaptive(g, 0.0, 1.0, abs_tol, rel_tol, budget);
}

// integral over (-inf, x] via u = x - s/(1-s)
template <typename F>
QuadResult integrate_from_neg_inf(const F& f, double x,
                                  double abs_tol = 1e-12, double rel_tol = 1e-10,
                                  long budget = -1) {
    auto g = [&](double s) {
        const double om = 1.0 - s;
        const double u = x - s / om;
        const double v = f(u);
        return v == 0.0 ? 0.0 : v / (om * om);
    };
    return integrate_adaptive(g, 0.0, 1.0, abs_tol, rel_tol, budget);
}

}  // namespace asymtail
