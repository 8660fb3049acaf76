#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "heatpath/common.hpp"

namespace heatpath {

// SplitMix64 finalizer; the basis of all counter-derived randomness here.
inline std::uint64_t split_mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline double uniform_from_bits(std::uint64_t bits) {
    // strictly inside (0,1)
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard Gaussian attached to a 64-bit counter key (Box-Muller).
inline double gaussian_at(std::uint64_t key) {
    const double u1 = uniform_from_bits(split_mix(key));
    const double u2 = uniform_from_bits(split_mix(key ^ 0xda3e39cb94b95bdbULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

inline double uniform_at(std::uint64_t key) { return uniform_from_bits(split_mix(key)); }

/// Halton low-discrepancy sequence (deterministic sampling for checkers).
inline double halton(int index, int base) {
    double f = 1.0, r = 0.0;
    int i = index + 1;
    while (i > 0) {
        f /= base;
        r += f * (i % base);
        i /= base;
    }
    return r;
}

namespace detail {
template <class Fn>
double simpson(Fn&& f, double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class Fn>
double adapt(Fn&& f, double a, double b, double fa, double fm, double fb, double whole,
             double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(f, a, m, fa, flm, fm);
    const double right = simpson(f, m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

/// Adaptive Simpson quadrature on [a,b].
template <class Fn>
double integrate(Fn&& f, double a, double b, double tol = 1e-10) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = detail::simpson(f, a, b, fa, fm, fb);
    return detail::adapt(f, a, b, fa, fm, fb, whole, tol, 50);
}

struct MedianOfMeans {
    double estimate = 0.0;
    double stderr_ = 0.0;
    int blocks = 0;
};

/// Median-of-means over a fixed replica order; robust to heavy tails.
inline MedianOfMeans median_of_means(std::span<const double> xs, int blocks = 20) {
    if (xs.empty()) throw std::invalid_argument("median_of_means: empty sample");
    blocks = std::min<int>(blocks, static_cast<int>(xs.size()));
    std::vector<double> means(blocks, 0.0);
    std::vector<int> counts(blocks, 0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const int b = static_cast<int>(i % blocks);
        means[b] += xs[i];
        counts[b] += 1;
    }
    for (int b = 0; b < blocks; ++b) means[b] /= counts[b];
    std::vector<double> sorted = means;
    std::sort(sorted.begin(), sorted.end());
    const double med = (blocks % 2 == 1)
                           ? sorted[blocks / 2]
                           : 0.5 * (sorted[blocks / 2 - 1] + sorted[blocks / 2]);
    double var = 0.0;
    double mean = 0.0;
    for (double m : means) mean += m;
    mean /= blocks;
    for (double m : means) var += (m - mean) * (m - mean);
    var = blocks > 1 ? var / (blocks - 1) : 0.0;
    return {med, std::sqrt(var / blocks), blocks};
}

inline double mean_of(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double variance_of(std::span<const double> xs) {
    const double m = mean_of(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// One-sample Kolmogorov-Smirnov distance against the standard Gaussian.
inline double ks_distance_std_normal(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double cdf = std_normal_cdf(xs[i]);
        d = std::max(d, std::abs(cdf - (i + 1) / n));
        d = std::max(d, std::abs(cdf - i / n));
    }
    return d;
}

/// Two-sample KS distance.
inline double ks_distance_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                                 static_cast<double>(j) / b.size()));
    }
    return d;
}

struct WilsonInterval {
    double center = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

inline WilsonInterval wilson_interval(long successes, long trials, double z) {
    const double n = static_cast<double>(trials);
    const double p = successes / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    return {center, center - half, center + half};
}

// 64-bit FNV-1a, used for config hashing.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace heatpath
