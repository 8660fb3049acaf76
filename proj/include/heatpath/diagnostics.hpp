#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "heatpath/coeffs.hpp"
#include "heatpath/common.hpp"
#include "heatpath/kernel.hpp"
#include "heatpath/noise.hpp"
#include "heatpath/numeric.hpp"
#include "heatpath/solver.hpp"

namespace heatpath {

/// Midpoint-rule L^p norm, p in {1,2}.
inline double lp_norm(const Field& f, int p) {
    if (p != 1 && p != 2) throw std::invalid_argument("lp_norm: p must be 1 or 2");
    double s = 0.0;
    for (double v : f.values) s += (p == 1) ? std::abs(v) : v * v;
    s *= f.dx;
    return p == 1 ? s : std::sqrt(s);
}

/// Per-step series of every term in the coupled L1 inequality. All integrals
/// are cumulative Riemann/Ito sums; index m corresponds to t = m dt.
struct CoupledDiagnostics {
    double dt = 0.0;
    double dx = 0.0;
    std::vector<double> d1;       // ||u(t)-v(t)||_L1
    std::vector<double> drift;    // int_0^t int sg(u-v)(b(u)-b(v)) dx ds
    std::vector<double> bracket;  // int_0^t ||sigma(u)-sigma(v)||_L2^2 ds
    std::vector<double> mart;     // discrete Ito sum of sg(u-v)(sigma(u)-sigma(v)) dW
    std::vector<double> b_l1;     // int_0^t ||b(u)-b(v)||_L1 ds

    int steps() const { return static_cast<int>(d1.size()) - 1; }
};

/// Folds two full path records (store_full) and the shared noise into the
/// five coupled series.
inline CoupledDiagnostics coupled_series(const PathRecord& u_path, const PathRecord& v_path,
                                         const CoefficientPair& pair, const NoiseGrid& noise) {
    if (u_path.grid.cells != v_path.grid.cells ||
        std::abs(u_path.grid.dt - v_path.grid.dt) > 1e-15)
        throw std::invalid_argument("coupled_series: mismatched grids");
    if (u_path.full.empty() || v_path.full.empty())
        throw std::invalid_argument("coupled_series: paths must be recorded with store_full");
    const GridSpec& g = u_path.grid;
    const int steps = static_cast<int>(u_path.full.size()) - 1;
    const double dx = g.dx(), dt = g.dt;

    CoupledDiagnostics diag;
    diag.dt = dt;
    diag.dx = dx;
    auto push_d1 = [&](int m) {
        double s = 0.0;
        for (int i = 0; i < g.cells; ++i) s += std::abs(u_path.full[m][i] - v_path.full[m][i]);
        diag.d1.push_back(dx * s);
    };

    push_d1(0);
    diag.drift.push_back(0.0);
    diag.bracket.push_back(0.0);
    diag.mart.push_back(0.0);
    diag.b_l1.push_back(0.0);

    std::vector<double> slice(g.cells);
    double acc_drift = 0.0, acc_bracket = 0.0, acc_mart = 0.0, acc_bl1 = 0.0;
    for (int m = 0; m < steps; ++m) {
        noise.slice(m, slice);
        double inc_drift = 0.0, inc_bracket = 0.0, inc_mart = 0.0, inc_bl1 = 0.0;
        for (int i = 0; i < g.cells; ++i) {
            const double ui = u_path.full[m][i], vi = v_path.full[m][i];
            const int s = sg(ui - vi);
            const double db = eval(pair.b, ui) - eval(pair.b, vi);
            const double ds = eval(pair.sigma, ui) - eval(pair.sigma, vi);
            inc_drift += s * db;
            inc_bl1 += std::abs(db);
            inc_bracket += ds * ds;
            inc_mart += s * ds * slice[i];
        }
        acc_drift += dt * dx * inc_drift;
        acc_bl1 += dt * dx * inc_bl1;
        acc_bracket += dt * dx * inc_bracket;
        acc_mart += inc_mart;
        diag.drift.push_back(acc_drift);
        diag.b_l1.push_back(acc_bl1);
        diag.bracket.push_back(acc_bracket);
        diag.mart.push_back(acc_mart);
        push_d1(m + 1);
    }
    return diag;
}

/// Pathwise defect of the pre-representation inequality:
/// R(t) = d1(0) + mart(t) + drift(t) - d1(t). Nonnegative up to the
/// discretization tolerance.
inline std::vector<double> inequality_residual(const CoupledDiagnostics& diag, double d1_0) {
    std::vector<double> r(diag.d1.size());
    for (std::size_t m = 0; m < r.size(); ++m)
        r[m] = d1_0 + diag.mart[m] + diag.drift[m] - diag.d1[m];
    return r;
}

/// Scalar summary of one coupled run, enough for the fractional-moment bounds.
struct CoupledSummary {
    double d1_0 = 0.0;
    double sup_d1 = 0.0;
    double bracket_T = 0.0;
    double b_l1_T = 0.0;
    double mart_T = 0.0;
};

inline CoupledSummary summarize(const CoupledDiagnostics& diag) {
    CoupledSummary s;
    s.d1_0 = diag.d1.front();
    for (double v : diag.d1) s.sup_d1 = std::max(s.sup_d1, v);
    s.bracket_T = diag.bracket.back();
    s.b_l1_T = diag.b_l1.back();
    s.mart_T = diag.mart.back();
    return s;
}

enum class MomentVariant { general, nonincreasing };  // (iii) vs (iv)

struct MomentReport {
    double gamma = 0.0;
    MomentVariant variant = MomentVariant::general;
    double lhs = 0.0;        // median-of-means of the per-replica functional
    double rhs_scale = 0.0;  // ||u0 - v0||_L1^gamma
    double ratio = 0.0;
    double stderr_ = 0.0;
    int replicas = 0;
};

/// Fractional-moment estimator. The per-replica functional is
///   sup_t d1^gamma + bracket(T)^{gamma/2}  (+ b_l1(T)^gamma for (iv)),
/// aggregated with median-of-means: the underlying suprema are heavy tailed.
inline MomentReport moment_bound(std::span<const CoupledSummary> ensemble, double gamma,
                                 MomentVariant variant, int blocks = 20) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("moment_bound: gamma must lie in (0,1)");
    if (ensemble.empty()) throw std::invalid_argument("moment_bound: empty ensemble");
    std::vector<double> vals;
    vals.reserve(ensemble.size());
    double rhs = 0.0;
    for (const auto& s : ensemble) {
        double v = std::pow(s.sup_d1, gamma) + std::pow(s.bracket_T, gamma / 2.0);
        if (variant == MomentVariant::nonincreasing) v += std::pow(s.b_l1_T, gamma);
        vals.push_back(v);
        rhs += std::pow(s.d1_0, gamma);
    }
    rhs /= static_cast<double>(ensemble.size());
    const MedianOfMeans mom = median_of_means(vals, blocks);
    MomentReport rep;
    rep.gamma = gamma;
    rep.variant = variant;
    rep.lhs = mom.estimate;
    rep.rhs_scale = rhs;
    rep.ratio = rhs > 0.0 ? mom.estimate / rhs : 0.0;
    rep.stderr_ = mom.stderr_;
    rep.replicas = static_cast<int>(ensemble.size());
    return rep;
}

/// Running backward maximum: Delta(t) = sup_{[t,T]} d1(s).
inline std::vector<double> confluence_tail(std::span<const double> d1) {
    std::vector<double> out(d1.size());
    double running = 0.0;
    for (std::size_t i = d1.size(); i-- > 0;) {
        running = std::max(running, d1[i]);
        out[i] = running;
    }
    return out;
}

/// K(u, v) = ||b(u)-b(v)||_L1 + ||sigma(u)-sigma(v)||_L1^2; vanishes iff the
/// fields agree when (sigma, b) is injective.
inline double k_stat(const Field& u, const Field& v, const CoefficientPair& pair) {
    if (u.size() != v.size()) throw std::invalid_argument("k_stat: mismatched grids");
    double sb = 0.0, ss = 0.0;
    for (int i = 0; i < u.size(); ++i) {
        sb += std::abs(eval(pair.b, u[i]) - eval(pair.b, v[i]));
        ss += std::abs(eval(pair.sigma, u[i]) - eval(pair.sigma, v[i]));
    }
    sb *= u.dx;
    ss *= u.dx;
    return sb + ss * ss;
}

struct SubsequenceReport {
    std::vector<int> indices;     // selected time indices, strictly increasing
    std::vector<double> k_values; // K at those indices
    double integral = 0.0;        // int_0^T K dt (trapezoid)
    bool non_integrable = false;  // running integral still growing linearly
};

/// Picks, in each of n geometrically growing windows of [0,T], the time index
/// minimizing K; the selected values witness K(t_n) -> 0 when int K converges.
inline SubsequenceReport select_subsequence(std::span<const double> k_series, double dt,
                                            int count) {
    if (count < 1) throw std::invalid_argument("select_subsequence: count must be >= 1");
    const int n = static_cast<int>(k_series.size());
    if (n < 2) throw std::invalid_argument("select_subsequence: series too short");
    SubsequenceReport rep;
    double total = 0.0, second_half = 0.0;
    for (int i = 1; i < n; ++i) {
        const double inc = 0.5 * (k_series[i - 1] + k_series[i]) * dt;
        total += inc;
        if (i >= n / 2) second_half += inc;
    }
    rep.integral = total;
    rep.non_integrable = total > 0.0 && second_half > 0.35 * total;

    int lo = 0;
    for (int w = 0; w < count; ++w) {
        // window upper edge grows geometrically toward the horizon
        const int hi = std::max(lo + 1,
                                static_cast<int>(std::ceil((n - 1) * std::pow(2.0, w + 1 - count))));
        int best = lo;
        for (int i = lo; i <= std::min(hi, n - 1); ++i)
            if (k_series[i] < k_series[best]) best = i;
        rep.indices.push_back(best);
        rep.k_values.push_back(k_series[best]);
        lo = std::min(hi, n - 1);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Weak and mild residuals
// ---------------------------------------------------------------------------

/// Neumann-compatible test function: phi = cos(k pi x), k >= 0.
struct TestFn {
    int cosine_mode = 0;
    bool neumann = true;

    static TestFn cosine(int k) { return TestFn{k, true}; }
    /// For completeness: a tag for non-Neumann choices, which are rejected.
    static TestFn sine(int k) { return TestFn{k, false}; }

    double value(double x) const { return std::cos(cosine_mode * kPi * x); }
    double second_derivative(double x) const {
        const double w = cosine_mode * kPi;
        return -w * w * std::cos(w * x);
    }
};

/// LHS - RHS of the test-function identity per step, using the same noise
/// increments the path was driven with.
inline std::vector<double> weak_form_residual(const PathRecord& path, const NoiseGrid& noise,
                                              const CoefficientPair& pair, const TestFn& phi) {
    if (!phi.neumann)
        throw std::invalid_argument("weak_form_residual: test function must satisfy phi'(0)=phi'(1)=0");
    if (path.full.empty())
        throw std::invalid_argument("weak_form_residual: path must be recorded with store_full");
    const GridSpec& g = path.grid;
    const int steps = static_cast<int>(path.full.size()) - 1;
    const double dx = g.dx(), dt = g.dt;

    std::vector<double> phi_v(g.cells), phi_dd(g.cells);
    for (int i = 0; i < g.cells; ++i) {
        phi_v[i] = phi.value(g.midpoint(i));
        phi_dd[i] = phi.second_derivative(g.midpoint(i));
    }
    auto pairing = [&](const Field& f) {
        double s = 0.0;
        for (int i = 0; i < g.cells; ++i) s += f[i] * phi_v[i];
        return dx * s;
    };

    std::vector<double> res;
    res.reserve(steps + 1);
    const double a0 = pairing(path.full[0]);
    res.push_back(0.0);
    std::vector<double> slice(g.cells);
    double stoch = 0.0, det = 0.0;
    for (int m = 0; m < steps; ++m) {
        noise.slice(m, slice);
        double inc_s = 0.0, inc_d = 0.0;
        for (int i = 0; i < g.cells; ++i) {
            const double ui = path.full[m][i];
            inc_s += eval(pair.sigma, ui) * phi_v[i] * slice[i];
            inc_d += ui * phi_dd[i] + eval(pair.b, ui) * phi_v[i];
        }
        stoch += inc_s;
        det += dt * dx * inc_d;
        res.push_back(pairing(path.full[m + 1]) - a0 - stoch - det);
    }
    return res;
}

/// Discrete stochastic convolution sum over cells with s_m < t:
/// sum G_{t - s_m}(x, y_i) integrand(m, i) dW(i, m).
template <class Integrand>
double stochastic_convolution(const KernelSpec& spec, const NoiseGrid& noise,
                              Integrand&& integrand, int target_step, double x) {
    const GridSpec& g = noise.grid();
    if (target_step < 0 || target_step > g.steps())
        throw std::invalid_argument("stochastic_convolution: time off the grid");
    std::vector<double> slice(g.cells);
    double acc = 0.0;
    for (int m = 0; m < target_step; ++m) {
        const double tau = (target_step - m) * g.dt;
        noise.slice(m, slice);
        for (int i = 0; i < g.cells; ++i)
            acc += green_eval(spec, tau, x, g.midpoint(i)) * integrand(m, i) * slice[i];
    }
    return acc;
}

/// Kernel reconstruction of u(t,x) from a recorded path; the green table is
/// precomputed once so ensembles of residuals share it.
class MildReconstructor {
  public:
    MildReconstructor(const KernelSpec& spec, const GridSpec& grid, int target_step,
                      int target_cell)
        : spec_(spec), grid_(grid), step_(target_step), cell_(target_cell),
          green_(static_cast<std::size_t>(target_step) * grid.cells) {
        if (target_step < 0 || target_step > grid.steps() || target_cell < 0 ||
            target_cell >= grid.cells)
            throw std::invalid_argument("MildReconstructor: point off the grid");
        const double x = grid.midpoint(target_cell);
        for (int m = 0; m < target_step; ++m) {
            const double tau = (target_step - m) * grid.dt;
            for (int i = 0; i < grid.cells; ++i)
                green_[static_cast<std::size_t>(m) * grid_.cells + i] =
                    green_eval(spec_, tau, x, grid.midpoint(i));
        }
    }

    double residual(const PathRecord& path, const NoiseGrid& noise,
                    const CoefficientPair& pair) const {
        if (path.full.empty())
            throw std::invalid_argument("mild_residual: path must be recorded with store_full");
        const double t = step_ * grid_.dt;
        double recon = 0.0;
        if (step_ == 0) {
            recon = path.full[0][cell_];
        } else {
            const Field smoothed = semigroup_apply(spec_, path.full[0], t);
            recon = smoothed[cell_];
            std::vector<double> slice(grid_.cells);
            const double cell_area = grid_.dx() * grid_.dt;
            for (int m = 0; m < step_; ++m) {
                noise.slice(m, slice);
                const double* row = &green_[static_cast<std::size_t>(m) * grid_.cells];
                for (int i = 0; i < grid_.cells; ++i) {
                    const double ui = path.full[m][i];
                    recon += row[i] * (eval(pair.sigma, ui) * slice[i] +
                                       eval(pair.b, ui) * cell_area);
                }
            }
        }
        return path.full[step_][cell_] - recon;
    }

  private:
    KernelSpec spec_;
    GridSpec grid_;
    int step_;
    int cell_;
    std::vector<double> green_;
};

inline double mild_residual(const PathRecord& path, const NoiseGrid& noise,
                            const CoefficientPair& pair, const KernelSpec& spec, int target_step,
                            int target_cell) {
    return MildReconstructor(spec, path.grid, target_step, target_cell)
        .residual(path, noise, pair);
}

/// C^2 mollifier of |z|: quadratic cap of height eps/2 below |z| < eps.
struct PhiEps {
    double eps;

    explicit PhiEps(double eps_) : eps(eps_) {
        if (!(eps > 0.0)) throw std::invalid_argument("phi_eps: eps must be > 0");
    }
    double value(double z) const {
        return std::abs(z) >= eps ? std::abs(z) : z * z / (2.0 * eps) + eps / 2.0;
    }
    double derivative(double z) const {
        return std::abs(z) >= eps ? static_cast<double>(sg(z)) : z / eps;
    }
    double second_derivative(double z) const { return std::abs(z) < eps ? 1.0 / eps : 0.0; }
};

}  // namespace heatpath
