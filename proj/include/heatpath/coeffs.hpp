#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "heatpath/common.hpp"
#include "heatpath/numeric.hpp"

namespace heatpath {

/// Sign convention used throughout the L1 arguments: sg(0) = +1.
inline int sg(double z) { return z >= 0.0 ? 1 : -1; }

enum class CoeffKind {
    linear,           // slope * z
    linear_plus_sine, // slope * z + amplitude * sin(z)
    signed_min_power, // slope * sg(z) * min(|z|, |z|^p)
    compact_bump,     // amplitude * (1 - z^2) on |z| <= 1, zero outside
    zero,
    custom_table,     // piecewise linear, clamped extrapolation
};

/// Drift/diffusion descriptor. Lipschitz constants are declared, not inferred;
/// the checkers below only validate them.
struct CoefficientFn {
    CoeffKind kind = CoeffKind::zero;
    double slope = 0.0;
    double power = 1.0;
    double amplitude = 0.0;
    double declared_lipschitz = 0.0;
    std::vector<double> table_x;  // strictly increasing breakpoints
    std::vector<double> table_y;

    static CoefficientFn linear(double slope) {
        CoefficientFn f;
        f.kind = CoeffKind::linear;
        f.slope = slope;
        f.declared_lipschitz = std::abs(slope);
        return f;
    }
    static CoefficientFn linear_plus_sine(double slope, double amplitude) {
        CoefficientFn f;
        f.kind = CoeffKind::linear_plus_sine;
        f.slope = slope;
        f.amplitude = amplitude;
        f.declared_lipschitz = std::abs(slope) + std::abs(amplitude);
        return f;
    }
    static CoefficientFn signed_min_power(double slope, double p) {
        if (p < 1.0) throw std::invalid_argument("signed_min_power: p must be >= 1");
        CoefficientFn f;
        f.kind = CoeffKind::signed_min_power;
        f.slope = slope;
        f.power = p;
        f.declared_lipschitz = std::abs(slope) * p;
        return f;
    }
    static CoefficientFn compact_bump(double amplitude = 1.0) {
        CoefficientFn f;
        f.kind = CoeffKind::compact_bump;
        f.amplitude = amplitude;
        f.declared_lipschitz = 2.0 * std::abs(amplitude);
        return f;
    }
    static CoefficientFn zero_fn() { return CoefficientFn{}; }
    static CoefficientFn custom_table(std::vector<double> xs, std::vector<double> ys) {
        if (xs.size() != ys.size() || xs.size() < 2)
            throw std::invalid_argument("custom_table: need matching xs/ys, at least 2 points");
        for (std::size_t i = 1; i < xs.size(); ++i)
            if (!(xs[i] > xs[i - 1]))
                throw std::invalid_argument("custom_table: breakpoints must increase");
        CoefficientFn f;
        f.kind = CoeffKind::custom_table;
        f.table_x = std::move(xs);
        f.table_y = std::move(ys);
        double lip = 0.0;
        for (std::size_t i = 1; i < f.table_x.size(); ++i)
            lip = std::max(lip, std::abs((f.table_y[i] - f.table_y[i - 1]) /
                                         (f.table_x[i] - f.table_x[i - 1])));
        f.declared_lipschitz = lip;
        return f;
    }
};

/// Pointwise evaluation; total on R for every catalog kind.
inline double eval(const CoefficientFn& f, double z) {
    switch (f.kind) {
        case CoeffKind::linear:
            return f.slope * z;
        case CoeffKind::linear_plus_sine:
            return f.slope * z + f.amplitude * std::sin(z);
        case CoeffKind::signed_min_power: {
            const double az = std::abs(z);
            return f.slope * sg(z) * std::min(az, std::pow(az, f.power));
        }
        case CoeffKind::compact_bump:
            return std::abs(z) <= 1.0 ? f.amplitude * (1.0 - z * z) : 0.0;
        case CoeffKind::zero:
            return 0.0;
        case CoeffKind::custom_table: {
            // clamped extrapolation keeps the table globally Lipschitz
            if (z <= f.table_x.front()) return f.table_y.front();
            if (z >= f.table_x.back()) return f.table_y.back();
            auto it = std::upper_bound(f.table_x.begin(), f.table_x.end(), z);
            const std::size_t i = static_cast<std::size_t>(it - f.table_x.begin());
            const double w = (z - f.table_x[i - 1]) / (f.table_x[i] - f.table_x[i - 1]);
            return f.table_y[i - 1] + w * (f.table_y[i] - f.table_y[i - 1]);
        }
    }
    return 0.0;
}

enum class RhoKind { linear, rho_p, custom };

/// The coercivity gauge of condition (I): rho(z) = epsilon * base(z).
struct RhoSpec {
    RhoKind kind = RhoKind::linear;
    double epsilon = 1.0;
    double p = 1.0;

    static RhoSpec linear_rho(double epsilon) { return {RhoKind::linear, epsilon, 1.0}; }
    static RhoSpec power_rho(double epsilon, double p) {
        if (p < 1.0) throw std::invalid_argument("rho_p: p must be >= 1");
        return {RhoKind::rho_p, epsilon, p};
    }
};

inline double eval_rho(const RhoSpec& r, double z) {
    if (z < 0.0) throw std::domain_error("eval_rho: z must be nonnegative");
    switch (r.kind) {
        case RhoKind::linear:
            return r.epsilon * z;
        case RhoKind::rho_p:
            // z^p on [0,1], tangent continuation p*z - p + 1 beyond
            return r.epsilon * (z <= 1.0 ? std::pow(z, r.p) : r.p * z - r.p + 1.0);
        case RhoKind::custom:
            return r.epsilon * z;
    }
    return 0.0;
}

struct CoefficientPair {
    CoefficientFn b;
    CoefficientFn sigma;
    bool b_nonincreasing = false;
    std::optional<RhoSpec> rho;
    std::string name;
};

/// sg(u-v) * (b(u) - b(v)); the drift integrand of the coupled L1 inequality.
inline double sg_drift(const CoefficientPair& pair, double u, double v) {
    return sg(u - v) * (eval(pair.b, u) - eval(pair.b, v));
}

struct HypothesisReport {
    double max_ratio = 0.0;
    long violations = 0;
    long pairs_checked = 0;
};

namespace detail {
inline std::vector<double> checker_points(const CoefficientPair& pair, double lo, double hi,
                                          int samples) {
    std::vector<double> pts;
    pts.reserve(samples + 16);
    for (int i = 0; i < samples; ++i) pts.push_back(lo + (hi - lo) * halton(i, 2));
    // breakpoints: kinks of the catalog formulas
    for (double z : {-1.0, 0.0, 1.0})
        if (z >= lo && z <= hi) pts.push_back(z);
    for (const CoefficientFn* f : {&pair.b, &pair.sigma})
        for (double z : f->table_x)
            if (z >= lo && z <= hi) pts.push_back(z);
    return pts;
}
}  // namespace detail

/// Scans sampled pairs (r,z) for (H): |b(r)-b(z)| + |sigma(r)-sigma(z)| <= C |r-z|,
/// with C the sum of the declared constants.
inline HypothesisReport verify_hypothesis_H(const CoefficientPair& pair, double lo, double hi,
                                            int samples) {
    if (samples < 2) throw std::invalid_argument("verify_hypothesis_H: samples must be >= 2");
    if (!(hi > lo)) throw std::invalid_argument("verify_hypothesis_H: degenerate range");
    const double declared = pair.b.declared_lipschitz + pair.sigma.declared_lipschitz;
    const auto pts = detail::checker_points(pair, lo, hi, samples);
    HypothesisReport rep;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const double dr = std::abs(pts[i] - pts[j]);
            if (dr < 1e-14) continue;
            const double num = std::abs(eval(pair.b, pts[i]) - eval(pair.b, pts[j])) +
                               std::abs(eval(pair.sigma, pts[i]) - eval(pair.sigma, pts[j]));
            const double ratio = num / dr;
            rep.max_ratio = std::max(rep.max_ratio, ratio);
            if (ratio > declared * (1.0 + 1e-12) + 1e-12) ++rep.violations;
            ++rep.pairs_checked;
        }
    }
    return rep;
}

struct ConditionIReport {
    double min_slack = std::numeric_limits<double>::infinity();
    double feasible_epsilon = std::numeric_limits<double>::infinity();
    long pairs_checked = 0;
};

/// Scans (I): |b(r)-b(z)| + |sigma(r)-sigma(z)|^2 >= rho(|r-z|).
/// min_slack uses the pair's own rho (with its epsilon); feasible_epsilon is the
/// largest scale for which epsilon * base_rho stays below the left-hand side.
inline ConditionIReport verify_condition_I(const CoefficientPair& pair, double lo, double hi,
                                           int samples) {
    if (!pair.rho) throw std::invalid_argument("verify_condition_I: pair has no rho");
    const auto pts = detail::checker_points(pair, lo, hi, samples);
    RhoSpec unit = *pair.rho;
    unit.epsilon = 1.0;
    ConditionIReport rep;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const double gap = std::abs(pts[i] - pts[j]);
            if (gap < 1e-14) continue;
            const double ds = std::abs(eval(pair.sigma, pts[i]) - eval(pair.sigma, pts[j]));
            const double lhs = std::abs(eval(pair.b, pts[i]) - eval(pair.b, pts[j])) + ds * ds;
            rep.min_slack = std::min(rep.min_slack, lhs - eval_rho(*pair.rho, gap));
            const double base = eval_rho(unit, gap);
            if (base > 0.0) rep.feasible_epsilon = std::min(rep.feasible_epsilon, lhs / base);
            ++rep.pairs_checked;
        }
    }
    return rep;
}

struct SgLipschitzReport {
    double max_excess = -std::numeric_limits<double>::infinity();
    long violations = 0;
};

/// Random-quadruple scan of the signed-difference Lipschitz inequality:
/// |sg(r1-z1)[f(r1)-f(z1)] - sg(r2-z2)[f(r2)-f(z2)]| <= C (|r1-r2| + |z1-z2|)
/// for f in {b, sigma}, each against its declared constant.
inline SgLipschitzReport check_sg_lipschitz(const CoefficientPair& pair, long quadruples,
                                            double range = 10.0, std::uint64_t seed = 0x5317ab1eULL,
                                            double tol = 1e-12) {
    SgLipschitzReport rep;
    auto draw = [&](long q, int slot) {
        const std::uint64_t key = split_mix(seed ^ (static_cast<std::uint64_t>(q) * 6364136223846793005ULL + slot));
        return (2.0 * uniform_at(key) - 1.0) * range;
    };
    for (long q = 0; q < quadruples; ++q) {
        const double r1 = draw(q, 1), z1 = draw(q, 2), r2 = draw(q, 3), z2 = draw(q, 4);
        const double scale = std::abs(r1 - r2) + std::abs(z1 - z2);
        for (const CoefficientFn* f : {&pair.b, &pair.sigma}) {
            const double lhs =
                std::abs(sg(r1 - z1) * (eval(*f, r1) - eval(*f, z1)) -
                         sg(r2 - z2) * (eval(*f, r2) - eval(*f, z2)));
            const double excess = lhs - f->declared_lipschitz * scale;
            rep.max_excess = std::max(rep.max_excess, excess);
            if (excess > tol) ++rep.violations;
        }
    }
    return rep;
}

/// The coefficient pairs exercised throughout the test batteries.
inline std::vector<CoefficientPair> catalog_pairs() {
    std::vector<CoefficientPair> out;
    {
        CoefficientPair p;
        p.name = "linear";
        p.b = CoefficientFn::linear(-1.0);
        p.sigma = CoefficientFn::linear(0.5);
        p.b_nonincreasing = true;
        p.rho = RhoSpec::linear_rho(1.0);
        out.push_back(p);
    }
    {
        CoefficientPair p;
        p.name = "linear-plus-sine";
        p.b = CoefficientFn::linear_plus_sine(-1.0, -1.0);  // -z - sin z
        p.sigma = CoefficientFn::linear_plus_sine(1.0, 1.0);  // z + sin z
        p.b_nonincreasing = true;
        p.rho = RhoSpec::power_rho(0.03, 3.0);
        out.push_back(p);
    }
    {
        CoefficientPair p;
        p.name = "signed-min-power";
        p.b = CoefficientFn::signed_min_power(-1.0, 2.0);
        p.sigma = CoefficientFn::signed_min_power(1.0, 2.0);
        p.b_nonincreasing = true;
        p.rho = RhoSpec::power_rho(0.05, 2.0);
        out.push_back(p);
    }
    {
        CoefficientPair p;
        p.name = "compact-bump";
        p.b = CoefficientFn::linear(-1.0);
        p.sigma = CoefficientFn::compact_bump(1.0);
        p.b_nonincreasing = true;
        p.rho = RhoSpec::linear_rho(1.0);
        out.push_back(p);
    }
    {
        CoefficientPair p;
        p.name = "zero";
        p.b = CoefficientFn::zero_fn();
        p.sigma = CoefficientFn::zero_fn();
        p.b_nonincreasing = true;
        out.push_back(p);
    }
    return out;
}

}  // namespace heatpath
