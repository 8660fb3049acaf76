#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "heatpath/common.hpp"
#include "heatpath/numeric.hpp"

namespace heatpath {

/// Dambis-Dubins-Schwarz model class: a nonnegative continuous local
/// martingale started at m is a Brownian motion m + beta_t absorbed at 0.
/// Discrete hitting is corrected with the Brownian-bridge crossing
/// probability per step, otherwise P[hit] is biased by O(sqrt(dt)).

struct StoppedPath {
    double m = 0.0;
    double dt = 0.0;
    std::vector<double> values;   // stored only when requested
    long stopping_index = -1;     // -1 while alive (censored at the cap)
    double running_max = 0.0;     // sup M over the path (bridge-sampled)
    double elapsed = 0.0;         // tau estimate (= <M>_infty when absorbed)
    bool censored = false;
};

namespace detail {
struct CounterRng {
    std::uint64_t state;
    explicit CounterRng(std::uint64_t seed) : state(split_mix(seed)) {}
    double uniform() { return uniform_from_bits(split_mix(state += 0x9e3779b97f4a7c15ULL)); }
    double gaussian() {
        const double u1 = uniform(), u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }
};

// Sample the maximum of a Brownian bridge from a to b over a step of length h.
inline double bridge_max(double a, double b, double h, double u) {
    const double d = a - b;
    return 0.5 * (a + b + std::sqrt(d * d - 2.0 * h * std::log(u)));
}
}  // namespace detail

/// Euler path of m + beta_t absorbed at 0, capped at T_cap.
inline StoppedPath simulate_stopped_bm(double m, double dt, double t_cap, std::uint64_t seed,
                                       bool store_values = false, bool adaptive = false) {
    if (!(m > 0.0) || !(dt > 0.0))
        throw std::invalid_argument("simulate_stopped_bm: need m > 0 and dt > 0");
    detail::CounterRng rng(seed);
    StoppedPath path;
    path.m = m;
    path.dt = dt;
    path.running_max = m;
    double cur = m;
    long idx = 0;
    if (store_values) path.values.push_back(cur);
    while (path.elapsed < t_cap) {
        // far from the barrier the walk may take exact coarse steps
        double h = dt;
        if (adaptive) {
            const double scale = cur / (4.0 * m);
            h = dt * std::clamp(scale * scale, 1.0, 1e6);
        }
        h = std::min(h, t_cap - path.elapsed);
        const double nxt = cur + std::sqrt(h) * rng.gaussian();
        path.elapsed += h;
        ++idx;
        if (nxt <= 0.0) {
            path.running_max = std::max(path.running_max,
                                        detail::bridge_max(cur, nxt, h, rng.uniform()));
            path.stopping_index = idx;
            cur = 0.0;
            if (store_values) path.values.push_back(0.0);
            return path;
        }
        const double step_max = detail::bridge_max(cur, nxt, h, rng.uniform());
        path.running_max = std::max(path.running_max, step_max);
        // bridge crossing of 0 between two positive endpoints
        if (rng.uniform() < std::exp(-2.0 * cur * nxt / h)) {
            path.stopping_index = idx;
            cur = 0.0;
            if (store_values) path.values.push_back(0.0);
            return path;
        }
        cur = nxt;
        if (store_values) path.values.push_back(cur);
    }
    path.censored = true;
    return path;
}

struct HittingEstimate {
    double estimate = 0.0;
    double analytic = 0.0;  // m / (m + x)
    WilsonInterval interval;
    long replicas = 0;
};

/// Monte Carlo estimate of P[S_m >= x] = P[tau_x <= tau_{-m}] for the
/// Brownian motion behind the DDS representation.
inline HittingEstimate hitting_prob(double m, double x, long replicas, std::uint64_t seed,
                                    double dt = 1e-3) {
    if (!(m > 0.0) || x < 0.0)
        throw std::invalid_argument("hitting_prob: need m > 0 and x >= 0");
    HittingEstimate est;
    est.replicas = replicas;
    est.analytic = m / (m + x);
    if (x == 0.0) {
        est.estimate = 1.0;
        est.interval = {1.0, 1.0, 1.0};
        return est;
    }
    const double upper = x;  // barriers for beta: -m and +x
    long hits = 0;
    for (long r = 0; r < replicas; ++r) {
        detail::CounterRng rng(split_mix(seed) ^ static_cast<std::uint64_t>(r));
        double cur = 0.0;
        for (;;) {
            const double d_lo = cur + m, d_up = upper - cur;
            const double near = std::min(d_lo, d_up);
            const double h = dt * std::clamp(near * near / (16.0 * dt), 1.0, 1e6);
            const double nxt = cur + std::sqrt(h) * rng.gaussian();
            if (nxt <= -m) break;
            if (nxt >= upper) {
                ++hits;
                break;
            }
            // bridge crossings of either barrier between interior endpoints
            const double p_lo = std::exp(-2.0 * (cur + m) * (nxt + m) / h);
            const double p_up = std::exp(-2.0 * (upper - cur) * (upper - nxt) / h);
            const double u = rng.uniform();
            if (u < p_lo) break;
            if (rng.uniform() < p_up) {
                ++hits;
                break;
            }
            (void)u;
            cur = nxt;
        }
    }
    est.estimate = static_cast<double>(hits) / replicas;
    est.interval = wilson_interval(hits, replicas, 2.5758);  // 99%
    return est;
}

/// c1 = int_0^infty dy / (1 + y^{1/gamma}), via two smooth integrals
/// (the tail is mapped back to [0,1]); closed form gamma*pi/sin(pi*gamma)
/// is kept out of the implementation path and used only as a cross-check.
inline double lemma_c1(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("lemma_c1: gamma must lie in (0,1)");
    const double head =
        integrate([&](double y) { return 1.0 / (1.0 + std::pow(y, 1.0 / gamma)); }, 0.0, 1.0,
                  1e-11);
    const double q = 1.0 / (1.0 - gamma);
    const double tail =
        gamma / (1.0 - gamma) *
        integrate([&](double w) { return 1.0 / (1.0 + std::pow(w, q)); }, 0.0, 1.0, 1e-11);
    return head + tail;
}

/// c2 = E[|beta_1|^{-gamma}], with the integrable singularity absorbed by the
/// substitution q = x^{1-gamma}.
inline double lemma_c2(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("lemma_c2: gamma must lie in (0,1)");
    const double expo = 2.0 / (1.0 - gamma);
    const double upper = std::pow(80.0, 1.0 / expo);
    const double integral =
        integrate([&](double q) { return std::exp(-0.5 * std::pow(q, expo)); }, 0.0, upper,
                  1e-11);
    return std::sqrt(2.0 / kPi) / (1.0 - gamma) * integral;
}

struct LemmaConstants {
    double c1 = 0.0;
    double c2 = 0.0;
};

inline LemmaConstants lemma_constants(double gamma) { return {lemma_c1(gamma), lemma_c2(gamma)}; }

struct LemmaCheckReport {
    double gamma = 0.0;
    double m = 0.0;
    double e_sup_m_gamma = 0.0;     // MC mean of (sup M)^gamma
    double e_s_gamma = 0.0;         // MC mean of S^gamma, S = sup M - m
    double e_tau_gamma_half = 0.0;  // tail-integral estimate of E[tau^{gamma/2}]
    double analytic_s = 0.0;        // m^gamma c1
    double analytic_tau = 0.0;      // m^gamma c2
    double bound = 0.0;             // (1 + c1 + c2) m^gamma
    double stderr_s = 0.0;
    double censored_fraction = 0.0;
    bool heavy_tail_warning = false;
    long replicas = 0;
};

/// Monte Carlo verification of the moment lemma: E[sup M^gamma + tau^{gamma/2}]
/// against the candidate constant 1 + c1 + c2. tau has infinite mean, so its
/// fractional moment combines the empirical part below the cap with the
/// analytic tail P[tau >= t] = P[|beta_1| < m / sqrt(t)].
inline LemmaCheckReport lemma_check(double gamma, double m, long replicas, std::uint64_t seed,
                                    double dt = 1e-3, double t_cap_scale = 1e3) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("lemma_check: gamma must lie in (0,1)");
    const double t_cap = t_cap_scale * m * m;
    LemmaCheckReport rep;
    rep.gamma = gamma;
    rep.m = m;
    rep.replicas = replicas;
    rep.heavy_tail_warning = gamma > 0.4;  // 2*gamma >= 1: S^gamma no longer square-integrable

    std::vector<double> sup_gammas, s_gammas, tau_capped;
    sup_gammas.reserve(replicas);
    s_gammas.reserve(replicas);
    tau_capped.reserve(replicas);
    long censored = 0;
    for (long r = 0; r < replicas; ++r) {
        const StoppedPath p = simulate_stopped_bm(
            m, dt, t_cap, split_mix(seed ^ 0x51ed270b9ULL) + static_cast<std::uint64_t>(r),
            false, true);
        if (p.censored) ++censored;
        sup_gammas.push_back(std::pow(p.running_max, gamma));
        s_gammas.push_back(std::pow(p.running_max - m, gamma));
        tau_capped.push_back(std::min(p.elapsed, t_cap));
    }
    rep.censored_fraction = static_cast<double>(censored) / replicas;

    if (rep.heavy_tail_warning) {
        rep.e_sup_m_gamma = median_of_means(sup_gammas).estimate;
        const MedianOfMeans ms = median_of_means(s_gammas);
        rep.e_s_gamma = ms.estimate;
        rep.stderr_s = ms.stderr_;
    } else {
        rep.e_sup_m_gamma = mean_of(sup_gammas);
        rep.e_s_gamma = mean_of(s_gammas);
        rep.stderr_s = std::sqrt(variance_of(s_gammas) / static_cast<double>(replicas));
    }

    // E[tau^{g/2}] = E[min(tau, cap)^{g/2}] + int_cap^infty (g/2) s^{g/2-1} P[tau > s] ds
    double emp = 0.0;
    for (double t : tau_capped) emp += std::pow(t, gamma / 2.0);
    emp /= static_cast<double>(replicas);
    const double g2 = gamma / 2.0;
    const double tail = integrate(
        [&](double w) {
            // s = cap / w^2, ds = -2 cap / w^3 dw maps (0,1] to [cap, infty)
            if (w <= 0.0) return 0.0;
            const double s = t_cap / (w * w);
            const double p_tail = 2.0 * std_normal_cdf(m / std::sqrt(s)) - 1.0;
            return g2 * std::pow(s, g2 - 1.0) * p_tail * 2.0 * t_cap / (w * w * w);
        },
        1e-12, 1.0, 1e-10);
    rep.e_tau_gamma_half = emp + tail;

    const LemmaConstants c = lemma_constants(gamma);
    rep.analytic_s = std::pow(m, gamma) * c.c1;
    rep.analytic_tau = std::pow(m, gamma) * c.c2;
    rep.bound = (1.0 + c.c1 + c.c2) * std::pow(m, gamma);
    return rep;
}

}  // namespace heatpath
