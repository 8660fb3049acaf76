#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace heatpath {

inline constexpr double kPi = 3.14159265358979323846;

/// Space-time discretization of [0,T] x [0,1].
/// Cells are indexed by midpoints x_i = (i + 1/2) * dx, steps by t_m = m * dt.
struct GridSpec {
    int cells = 64;        // N
    double dt = 1e-4;
    double horizon = 1.0;  // T

    double dx() const { return 1.0 / cells; }
    int steps() const { return static_cast<int>(std::ceil(horizon / dt - 1e-12)); }
    double cfl() const { return dt / (dx() * dx()); }
    double midpoint(int i) const { return (i + 0.5) * dx(); }

    void validate() const {
        if (cells < 2) throw std::invalid_argument("grid: cells must be >= 2");
        if (!(dt > 0.0)) throw std::invalid_argument("grid: dt must be > 0");
        if (!(horizon > 0.0)) throw std::invalid_argument("grid: horizon must be > 0");
    }
};

/// Spatial profile u(t, .) sampled at cell midpoints.
struct Field {
    std::vector<double> values;
    double dx = 0.0;

    Field() = default;
    Field(int n, double dx_, double fill = 0.0) : values(n, fill), dx(dx_) {}

    int size() const { return static_cast<int>(values.size()); }
    double& operator[](int i) { return values[i]; }
    double operator[](int i) const { return values[i]; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline Field make_field(const GridSpec& grid, double fill = 0.0) {
    return Field(grid.cells, grid.dx(), fill);
}

template <class Fn>
Field sample_field(const GridSpec& grid, Fn&& fn) {
    Field f = make_field(grid);
    for (int i = 0; i < grid.cells; ++i) f[i] = fn(grid.midpoint(i));
    if (!f.all_finite()) throw std::invalid_argument("initial field has non-finite samples");
    return f;
}

struct PathBlowupError : std::runtime_error {
    int step;
    explicit PathBlowupError(int step_)
        : std::runtime_error("path blow-up at step " + std::to_string(step_)), step(step_) {}
};

}  // namespace heatpath
