#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "asymtail/philox.hpp"
#include "asymtail/solvers.hpp"
#include "asymtail/special.hpp"

namespace asymtail {

struct StopParams {
    double eps_stop = 1e-8;  // tolerated up-crossing probability after stopping
    double barrier = 0.0;    // drawdown B; walk stops when S <= max - B
    long step_budget = 1000000000;
};

// conservative L for barrier sizing: max over both variants at the
// boundary-limit rho = gamma*, usable even when no boundary exists at this a
inline double barrier_l_max(const TailModel& model) {
    if (model.tail_class == TailClass::SlowGrowth) return 1.0;
    const double base = 1.0 / (1.0 - model.gamma_star);
    return std::max(base, base * base);
}

// residual up-crossing bound after a drawdown of B: both decay channels,
// with the exponential rate floored at the heavy-traffic value 2a/sigma^2
// (theta_a overshoots it at finite a, which would understate the bias)
inline double stop_bias_bound(const DriftedIncrement& inc, double theta, double B) {
    const double rate = std::min(theta, 2.0 * inc.a / inc.model.sigma2);
    const double lmax = barrier_l_max(inc.model);
    return std::exp(-rate * B) +
           lmax * std::exp(inc.model.log_integrated_tail(B) - std::log(inc.a));
}

inline StopParams make_stop_params(const DriftedIncrement& inc, double theta,
                                   double eps_stop) {
    if (!(eps_stop > 0.0)) throw config_error("make_stop_params: eps_stop must be > 0");
    StopParams sp;
    sp.eps_stop = eps_stop;
    double lo = 1.0, hi = 2.0;
    while (stop_bias_bound(inc, theta, hi) > eps_stop) {
        hi *= 2.0;
        if (hi > 1e12) throw numeric_error("make_stop_params: barrier diverged");
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (stop_bias_bound(inc, theta, mid) > eps_stop ? lo : hi) = mid;
    }
    sp.barrier = hi;
    return sp;
}

// Runs one walk until the drawdown from the running maximum reaches the
// barrier; returns the maximum. Sampler draws one increment X^(a).
template <typename Sampler>
double simulate_max_generic(Sampler&& draw, const StopParams& stop, PhiloxStream& stream) {
    double s = 0.0, m = 0.0;
    const double barrier = stop.barrier;
    for (long k = 0; k < stop.step_budget; ++k) {
        s += draw(stream);
        if (s > m) m = s;
        else if (m - s >= barrier) return m;
    }
    throw numeric_error("simulate_max: step budget exceeded (drift mis-set?)");
}

inline double simulate_max(const DriftedIncrement& inc, const StopParams& stop,
                           PhiloxStream& stream) {
    const TailModel& model = inc.model;
    const double shift = model.m + inc.a;
    return simulate_max_generic(
        [&](PhiloxStream& st) { return model.quantile_w(st.next_uniform()) - shift; },
        stop, stream);
}

struct McEstimate {
    double p_hat = 0.0;
    long n = 0;
    double ci_low = 0.0, ci_high = 0.0;  // 95% unless stated otherwise
    std::uint64_t seed = 0;
    int workers = 1;
    double stop_barrier = 0.0;
    double truncation_bias_bound = 0.0;
};

// Crude Monte Carlo for P(M > x) at several thresholds from one common set
// of replications (common random numbers make p_hat monotone in x exactly).
// Replication i uses the Philox substream (seed, i): results are
// bit-identical for any worker count.
inline std::vector<McEstimate> estimate_tail_probs(const DriftedIncrement& inc,
                                                   const std::vector<double>& xs,
                                                   long n, std::uint64_t seed,
                                                   int workers,
                                                   const StopParams& stop) {
    if (n < 1000) throw config_error("estimate_tail_prob: need n >= 1e3");
    for (double x : xs)
        if (!(x > -1e300)) throw config_error("estimate_tail_prob: bad threshold");
    if (workers < 1) workers = 1;

    std::vector<std::vector<long>> counts(workers, std::vector<long>(xs.size(), 0));
    auto run = [&](int w) {
        const TailModel& model = inc.model;
        const double shift = model.m + inc.a;
        auto& mine = counts[w];
        for (long i = w; i < n; i += workers) {
            PhiloxStream st(seed, static_cast<std::uint64_t>(i));
            const double m = simulate_max_generic(
                [&](PhiloxStream& s2) { return model.quantile_w(s2.next_uniform()) - shift; },
                stop, st);
            for (std::size_t j = 0; j < xs.size(); ++j)
                if (m > xs[j]) ++mine[j];
        }
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& th : pool) th.join();
    }
    std::vector<McEstimate> out;
    for (std::size_t j = 0; j < xs.size(); ++j) {
        long k = 0;
        for (int w = 0; w < workers; ++w) k += counts[w][j];
        McEstimate e;
        e.p_hat = static_cast<double>(k) / static_cast<double>(n);
        e.n = n;
        const auto ci = clopper_pearson(k, n, 0.95);
        e.ci_low = ci.first;
        e.ci_high = ci.second;
        e.seed = seed;
        e.workers = workers;
        e.stop_barrier = stop.barrier;
        e.truncation_bias_bound = stop.eps_stop;
        out.push_back(e);
    }
    return out;
}

inline McEstimate estimate_tail_prob(const DriftedIncrement& inc, double x, long n,
                                     std::uint64_t seed, int workers,
                                     const StopParams& stop) {
    return estimate_tail_probs(inc, {x}, n, seed, workers, stop)[0];
}

// default stop rule: eps_stop = 1e-4 * max(rough p(x), 1/n), barrier from the
// two-channel bound
inline StopParams default_stop_params(const DriftedIncrement& inc, double theta,
                                      double x, long n) {
    const double rate = std::min(theta, 2.0 * inc.a / inc.model.sigma2);
    const double p_rough =
        std::exp(-rate * x) + barrier_l_max(inc.model) *
                                  std::exp(inc.model.log_integrated_tail(x) - std::log(inc.a));
    const double scale = std::max(std::min(p_rough, 1.0), 1.0 / static_cast<double>(n));
    return make_stop_params(inc, theta, 1e-4 * scale);
}

// ---------------- exponentially tilted importance sampling ----------------

// Proposal: increments tilted by theta on {X^(a) <= 1/a} (normalized exactly
// by the defining equation of theta) plus the untilted remainder beyond 1/a.
// First-passage estimator of P(M > x) for the exp-dominant regime.
class TiltedSampler {
public:
    TiltedSampler(const DriftedIncrement& inc, double theta)
        : model_(&inc.model), shift_(inc.model.m + inc.a), theta_(theta) {
        const TailModel& M = *model_;
        cut_w_ = shift_ + 1.0 / inc.a;  // X^(a) <= 1/a in W coordinates
        tail_mass_ = M.tail_w(cut_w_);
        // cumulative of e^{theta u} f_a(u) du up to the cutoff (W coordinate)
        const int kn = 8192;
        std::vector<double> ws(kn), cum(kn);
        for (int i = 0; i < kn; ++i)
            ws[i] = cut_w_ * (static_cast<double>(i) / (kn - 1));
        cum[0] = 0.0;
        for (int i = 1; i < kn; ++i) {
            const QuadResult q = M.expectation_w(
                [&](double w) { return std::exp(theta_ * (w - shift_)); }, ws[i - 1], ws[i],
                {}, 1e-15, 1e-11);
            cum[i] = cum[i - 1] + q.value;
        }
        z1_ = cum[kn - 1];
        z_ = z1_ + tail_mass_;
        std::vector<double> cu, wu;  // strictly increasing knots only
        double prev = -1.0;
        for (int i = 0; i < kn; ++i) {
            if (cum[i] > prev + 1e-300) {
                cu.push_back(cum[i]);
                wu.push_back(ws[i]);
                prev = cum[i];
            }
        }
        inv_ = MonotoneCubic(std::move(cu), std::move(wu));
    }

    double z_total() const { return z_; }
    double z_tilted() const { return z1_; }

    // draws an increment and accumulates the log likelihood-ratio
    double draw(PhiloxStream& st, double& log_lr) const {
        const double u = st.next_uniform() * z_;
        if (u <= z1_) {
            const double w = std::clamp(inv_(u), 0.0, cut_w_);
            log_lr += std::log(z_) - theta_ * (w - shift_);
            return w - shift_;
        }
        // untilted tail branch: survival inversion beyond the cutoff
        const double v = (u - z1_) / tail_mass_;  // in (0,1]
        const double w = model_->quantile_w(v * tail_mass_);
        log_lr += std::log(z_);
        return w - shift_;
    }

private:
    const TailModel* model_;
    double shift_, theta_, tail_mass_ = 0.0, z1_ = 0.0, z_ = 0.0, cut_w_ = 0.0;
    MonotoneCubic inv_;
};

// Tilted first-passage estimate of P(M > x). Refuses outside the
// exp-dominant regime (tilting is inconsistent for heavy tails beyond x(a)).
inline McEstimate estimate_tail_prob_tilted(const DriftedIncrement& inc,
                                            const ThetaSolution& theta,
                                            const BoundarySolution& boundary,
                                            double x, long n, std::uint64_t seed,
                                            int batches = 32) {
    if (x > boundary.x_a)
        throw config_error("tilted estimator: x beyond the boundary x(a); "
                           "use crude MC in the tail-dominant regime");
    const double log_ratio =
        std::log(barrier_l_max(inc.model)) - std::log(inc.a) +
        inc.model.log_integrated_tail(x) + theta.theta * x;
    if (log_ratio > 0.0)
        throw config_error("tilted estimator: regime not exp-dominant at this x");
    if (n < 1000) throw config_error("tilted estimator: need n >= 1e3");

    TiltedSampler sampler(inc, theta.theta);
    // abandon barrier: residual contribution bounded by the two-channel decay
    const double kill = x + make_stop_params(inc, theta.theta, 1e-3 * std::exp(-theta.theta * x))
                                .barrier;

    std::vector<double> batch_sum(batches, 0.0);
    std::vector<long> batch_n(batches, 0);
    for (long i = 0; i < n; ++i) {
        PhiloxStream st(seed ^ 0x74696c74ULL, static_cast<std::uint64_t>(i));
        double s = 0.0, log_lr = 0.0, contrib = 0.0;
        for (long k = 0; k < 100000000; ++k) {
            s += sampler.draw(st, log_lr);
            if (s >= x) { contrib = std::exp(log_lr); break; }
            if (s <= -kill) break;
        }
        const int b = static_cast<int>(i % batches);
        batch_sum[b] += contrib;
        batch_n[b] += 1;
    }
    McEstimate e;
    e.n = n;
    e.seed = seed;
    e.workers = 1;
    e.stop_barrier = kill;
    double mean = 0.0;
    for (int b = 0; b < batches; ++b) mean += batch_sum[b];
    mean /= static_cast<double>(n);
    e.p_hat = mean;
    double var_b = 0.0;
    for (int b = 0; b < batches; ++b) {
        const double mb = batch_sum[b] / std::max<long>(batch_n[b], 1);
        var_b += (mb - mean) * (mb - mean);
    }
    var_b /= (batches - 1.0);
    const double half = 2.04 * std::sqrt(var_b / batches);  // t_{31, 0.975}
    e.ci_low = std::max(0.0, mean - half);
    e.ci_high = mean + half;
    e.truncation_bias_bound = 1e-3 * std::exp(-theta.theta * x);
    return e;
}

}  // namespace asymtail
