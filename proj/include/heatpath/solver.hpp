#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "heatpath/coeffs.hpp"
#include "heatpath/common.hpp"
#include "heatpath/noise.hpp"

namespace heatpath {

enum class Scheme {
    explicit_euler,  // requires cfl <= 1/2
    semi_implicit,   // Laplacian implicit (tridiagonal), drift and noise explicit
};

struct SchemeConfig {
    Scheme scheme = Scheme::explicit_euler;
    int checkpoint_stride = 0;  // 0 -> max(1, steps/200)
    bool store_full = false;    // keep every step's field (mild/weak residual checks)

    int effective_stride(const GridSpec& grid) const {
        if (checkpoint_stride > 0) return checkpoint_stride;
        return std::max(1, grid.steps() / 200);
    }

    void validate(const GridSpec& grid) const {
        if (scheme == Scheme::explicit_euler && grid.cfl() > 0.5 + 1e-12)
            throw std::invalid_argument("explicit scheme requires cfl = dt/dx^2 <= 0.5");
    }
};

/// Trajectory record: checkpointed fields plus per-step norm series. Norms are
/// recorded at every step (index 0 is the initial field) so running suprema
/// over [0,T] never miss a step.
struct PathRecord {
    GridSpec grid;
    SeedSpec seed;
    std::vector<int> checkpoint_steps;
    std::vector<Field> checkpoints;
    std::vector<double> l1;                    // length steps()+1
    std::vector<double> l2;
    std::vector<double> sigma_l2_sq_integral;  // running int_0^t ||sigma(u)||_L2^2
    std::vector<Field> full;                   // populated iff store_full
    Field terminal;

    double time_of(int step) const { return step * grid.dt; }
    double sup_l1() const {
        double s = 0.0;
        for (double v : l1) s = std::max(s, v);
        return s;
    }
};

namespace detail {

inline void check_finite(std::span<const double> u, int step) {
    for (double v : u)
        if (!std::isfinite(v)) throw PathBlowupError(step);
}

// One explicit step, mirrored ghost cells (u_{-1}=u_0, u_N=u_{N-1}).
// noise_term[i] is added verbatim; callers premultiply by sigma and scaling.
inline void explicit_step(std::vector<double>& u, std::vector<double>& scratch,
                          std::span<const double> drift_plus_noise, double cfl) {
    const int n = static_cast<int>(u.size());
    scratch.resize(n);
    for (int i = 0; i < n; ++i) {
        const double left = u[i > 0 ? i - 1 : 0];
        const double right = u[i < n - 1 ? i + 1 : n - 1];
        scratch[i] = u[i] + cfl * (left - 2.0 * u[i] + right) + drift_plus_noise[i];
    }
    u.swap(scratch);
}

// (I - dt Laplacian) u' = u + drift_plus_noise, Neumann rows, Thomas solve.
inline void semi_implicit_step(std::vector<double>& u, std::vector<double>& cp,
                               std::vector<double>& dp, std::span<const double> drift_plus_noise,
                               double r) {
    const int n = static_cast<int>(u.size());
    cp.resize(n);
    dp.resize(n);
    auto diag = [&](int i) { return (i == 0 || i == n - 1) ? 1.0 + r : 1.0 + 2.0 * r; };
    cp[0] = -r / diag(0);
    dp[0] = (u[0] + drift_plus_noise[0]) / diag(0);
    for (int i = 1; i < n; ++i) {
        const double m = diag(i) + r * cp[i - 1];
        cp[i] = -r / m;
        dp[i] = (u[i] + drift_plus_noise[i] + r * dp[i - 1]) / m;
    }
    u[n - 1] = dp[n - 1];
    for (int i = n - 2; i >= 0; --i) u[i] = dp[i] - cp[i] * u[i + 1];
}

struct Stepper {
    const GridSpec& grid;
    const CoefficientPair& pair;
    const SchemeConfig& scheme;
    std::vector<double> rhs, scratch, cp, dp;

    Stepper(const GridSpec& g, const CoefficientPair& p, const SchemeConfig& s)
        : grid(g), pair(p), scheme(s), rhs(g.cells) {}

    // noise_field[i] multiplies sigma(u_i) directly (already scaled).
    void advance(std::vector<double>& u, std::span<const double> noise_field, int step) {
        const int n = grid.cells;
        for (int i = 0; i < n; ++i)
            rhs[i] = grid.dt * eval(pair.b, u[i]) + eval(pair.sigma, u[i]) * noise_field[i];
        if (scheme.scheme == Scheme::explicit_euler)
            explicit_step(u, scratch, rhs, grid.cfl());
        else
            semi_implicit_step(u, cp, dp, rhs, grid.cfl());
        check_finite(u, step);
    }
};

inline void record_norms(PathRecord& rec, const std::vector<double>& u,
                         const CoefficientPair& pair, double dx, double running_sigma) {
    double s1 = 0.0, s2 = 0.0;
    for (double v : u) {
        s1 += std::abs(v);
        s2 += v * v;
    }
    rec.l1.push_back(dx * s1);
    rec.l2.push_back(std::sqrt(dx * s2));
    rec.sigma_l2_sq_integral.push_back(running_sigma);
    (void)pair;
}

inline double sigma_l2_sq(const std::vector<double>& u, const CoefficientPair& pair, double dx) {
    double s = 0.0;
    for (double v : u) {
        const double sv = eval(pair.sigma, v);
        s += sv * sv;
    }
    return dx * s;
}

}  // namespace detail

/// Single explicit/semi-implicit update of a field against one noise slice.
inline Field fd_step(const Field& state, std::span<const double> noise_slice,
                     const CoefficientPair& pair, const GridSpec& grid,
                     const SchemeConfig& scheme) {
    scheme.validate(grid);
    detail::Stepper st(grid, pair, scheme);
    std::vector<double> u = state.values;
    std::vector<double> noise_field(grid.cells);
    for (int i = 0; i < grid.cells; ++i) noise_field[i] = noise_slice[i] / grid.dx();
    st.advance(u, noise_field, 0);
    Field out(grid.cells, grid.dx());
    out.values = std::move(u);
    return out;
}

namespace detail {

template <class NoiseFieldFn>
PathRecord run_path(const Field& u0, const CoefficientPair& pair, const GridSpec& grid,
                    const SchemeConfig& scheme, const SeedSpec& seed, NoiseFieldFn&& noise_field) {
    scheme.validate(grid);
    if (!u0.all_finite()) throw std::invalid_argument("simulate: non-finite initial field");
    const int steps = grid.steps();
    const int stride = scheme.effective_stride(grid);

    PathRecord rec;
    rec.grid = grid;
    rec.seed = seed;
    rec.l1.reserve(steps + 1);
    rec.l2.reserve(steps + 1);
    rec.sigma_l2_sq_integral.reserve(steps + 1);

    std::vector<double> u = u0.values;
    Stepper st(grid, pair, scheme);
    std::vector<double> nf(grid.cells);
    double running_sigma = 0.0;

    auto snapshot = [&](int m) {
        if (m % stride == 0 || m == steps) {
            Field f(grid.cells, grid.dx());
            f.values = u;
            rec.checkpoint_steps.push_back(m);
            rec.checkpoints.push_back(std::move(f));
        }
        if (scheme.store_full) {
            Field f(grid.cells, grid.dx());
            f.values = u;
            rec.full.push_back(std::move(f));
        }
    };

    record_norms(rec, u, pair, grid.dx(), running_sigma);
    snapshot(0);
    for (int m = 0; m < steps; ++m) {
        running_sigma += grid.dt * sigma_l2_sq(u, pair, grid.dx());
        noise_field(m, nf);
        st.advance(u, nf, m + 1);
        record_norms(rec, u, pair, grid.dx(), running_sigma);
        snapshot(m + 1);
    }
    rec.terminal = Field(grid.cells, grid.dx());
    rec.terminal.values = std::move(u);
    return rec;
}

}  // namespace detail

/// Full finite-difference path driven by cell-integrated white noise.
inline PathRecord simulate_path(const Field& u0, const CoefficientPair& pair,
                                const GridSpec& grid, const SchemeConfig& scheme,
                                const NoiseGrid& noise) {
    std::vector<double> slice(grid.cells);
    const double inv_dx = 1.0 / grid.dx();
    return detail::run_path(u0, pair, grid, scheme, noise.seed(),
                            [&](int m, std::vector<double>& nf) {
                                noise.slice(m, slice);
                                for (int i = 0; i < grid.cells; ++i) nf[i] = slice[i] * inv_dx;
                            });
}

/// Deterministic path (sigma term absent regardless of the pair's sigma).
inline PathRecord simulate_deterministic(const Field& u0, const CoefficientPair& pair,
                                         const GridSpec& grid, const SchemeConfig& scheme) {
    return detail::run_path(u0, pair, grid, scheme, SeedSpec{},
                            [&](int, std::vector<double>& nf) {
                                std::fill(nf.begin(), nf.end(), 0.0);
                            });
}

/// Two paths advanced with the identical noise slice at every step: the
/// coupling construction behind every pathwise statement here.
inline std::pair<PathRecord, PathRecord> simulate_coupled(const Field& u0, const Field& v0,
                                                          const CoefficientPair& pair,
                                                          const GridSpec& grid,
                                                          const SchemeConfig& scheme,
                                                          const NoiseGrid& noise) {
    if (u0.size() != v0.size())
        throw std::invalid_argument("simulate_coupled: fields must share the grid");
    PathRecord a = simulate_path(u0, pair, grid, scheme, noise);
    PathRecord b = simulate_path(v0, pair, grid, scheme, noise);
    return {std::move(a), std::move(b)};
}

/// Galerkin system of the mode-truncated equation: the noise term is
/// sum_{k=1..n} sigma(u_i) e_k(x_i) dB^k(m) with dB^k projected from the same
/// shared noise grid. n = 0 gives the deterministic PDE path.
inline PathRecord galerkin_simulate(const Field& u0, int n_modes, const CoefficientPair& pair,
                                    const GridSpec& grid, const SchemeConfig& scheme,
                                    const NoiseGrid& noise) {
    if (n_modes < 0 || n_modes >= grid.cells)
        throw std::invalid_argument("galerkin_simulate: need 0 <= n < grid cells");
    // e_k(x_i) table, k = 1..n
    std::vector<std::vector<double>> ek(n_modes, std::vector<double>(grid.cells));
    for (int k = 1; k <= n_modes; ++k)
        for (int i = 0; i < grid.cells; ++i) ek[k - 1][i] = basis_ek(k, grid.midpoint(i));

    std::vector<double> slice(grid.cells);
    return detail::run_path(u0, pair, grid, scheme, noise.seed(),
                            [&](int m, std::vector<double>& nf) {
                                noise.slice(m, slice);
                                std::fill(nf.begin(), nf.end(), 0.0);
                                for (int k = 0; k < n_modes; ++k) {
                                    double db = 0.0;
                                    for (int i = 0; i < grid.cells; ++i)
                                        db += ek[k][i] * slice[i];
                                    for (int i = 0; i < grid.cells; ++i)
                                        nf[i] += ek[k][i] * db;
                                }
                            });
}

// ---------------------------------------------------------------------------
// Initial conditions
// ---------------------------------------------------------------------------

enum class InitKind { constant, cosine, step, singular, table };

struct InitialCondition {
    InitKind kind = InitKind::constant;
    double value = 0.0;      // constant / cosine offset / step left value
    double amplitude = 0.0;  // cosine amplitude, singular scale
    int mode = 1;            // cosine mode
    double right = 0.0;      // step right value
    double split = 0.5;      // step split point
    std::vector<double> table_x, table_y;

    double operator()(double x) const {
        switch (kind) {
            case InitKind::constant:
                return value;
            case InitKind::cosine:
                return value + amplitude * std::cos(mode * kPi * x);
            case InitKind::step:
                return x < split ? value : right;
            case InitKind::singular:
                return amplitude / std::sqrt(x);
            case InitKind::table: {
                if (x <= table_x.front()) return table_y.front();
                if (x >= table_x.back()) return table_y.back();
                auto it = std::upper_bound(table_x.begin(), table_x.end(), x);
                const std::size_t i = static_cast<std::size_t>(it - table_x.begin());
                const double w = (x - table_x[i - 1]) / (table_x[i] - table_x[i - 1]);
                return table_y[i - 1] + w * (table_y[i] - table_y[i - 1]);
            }
        }
        return 0.0;
    }
};

struct TruncatedInitial {
    Field field;
    double l1_error = 0.0;  // ||u0 - clamp(u0)||_L1, graded quadrature
};

/// Level-M truncation of an integrable initial condition, the summable-gap
/// approximation ladder used for L1 initial data.
inline TruncatedInitial truncate_initial(const InitialCondition& u0, double level,
                                         const GridSpec& grid) {
    if (!(level > 0.0)) throw std::invalid_argument("truncate_initial: level must be > 0");
    auto clamp = [&](double v) { return std::max(-level, std::min(level, v)); };
    TruncatedInitial out;
    out.field = sample_field(grid, [&](double x) { return clamp(u0(x)); });
    // graded mesh toward 0 to capture integrable singularities
    const int segments = 200000;
    double err = 0.0;
    for (int j = 0; j < segments; ++j) {
        const double a = std::pow(static_cast<double>(j) / segments, 2.0);
        const double b = std::pow((j + 1.0) / segments, 2.0);
        const double mid = 0.5 * (a + b);
        const double v = u0(mid);
        if (!std::isfinite(v))
            throw std::invalid_argument("truncate_initial: non-integrable descriptor");
        err += std::abs(v - clamp(v)) * (b - a);
    }
    out.l1_error = err;
    return out;
}

}  // namespace heatpath
