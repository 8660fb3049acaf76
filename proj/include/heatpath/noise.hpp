#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "heatpath/common.hpp"
#include "heatpath/numeric.hpp"

namespace heatpath {

/// Counter-based seed derivation: any replica of any ensemble is reproducible
/// from (master, replica) without storing noise.
struct SeedSpec {
    std::uint64_t master = 0;
    std::uint64_t replica = 0;

    std::uint64_t stream() const {
        return split_mix(master ^ split_mix(replica ^ 0x6a09e667f3bcc909ULL));
    }
};

inline SeedSpec derive_seed(std::uint64_t master, std::uint64_t replica) {
    return SeedSpec{master, replica};
}

/// Cell-integrated space-time white noise on the grid: independent centered
/// Gaussians with variance dt*dx, attached to cell midpoints. Increments are
/// recomputed from the counter key on demand; a NoiseGrid is immutable and
/// freely shared between the two solvers of a coupled pair.
class NoiseGrid {
  public:
    NoiseGrid(const GridSpec& grid, const SeedSpec& seed)
        : grid_(grid), seed_(seed), stream_(seed.stream()),
          sd_(std::sqrt(grid.dt * grid.dx())) {
        grid.validate();
    }

    const GridSpec& grid() const { return grid_; }
    const SeedSpec& seed() const { return seed_; }
    double cell_std() const { return sd_; }

    double increment(int cell, int step) const {
        const std::uint64_t counter =
            static_cast<std::uint64_t>(step) * 0x9e3779b97f4a7c15ULL +
            static_cast<std::uint64_t>(cell);
        return sd_ * gaussian_at(stream_ ^ split_mix(counter));
    }

    void slice(int step, std::span<double> out) const {
        for (int i = 0; i < grid_.cells; ++i) out[i] = increment(i, step);
    }

    std::vector<double> slice(int step) const {
        std::vector<double> out(grid_.cells);
        slice(step, out);
        return out;
    }

  private:
    GridSpec grid_;
    SeedSpec seed_;
    std::uint64_t stream_;
    double sd_;
};

/// Neumann cosine basis evaluated at a cell midpoint: e_0 = 1,
/// e_k(x) = sqrt(2) cos(k pi x).
inline double basis_ek(int k, double x) {
    return k == 0 ? 1.0 : std::sqrt(2.0) * std::cos(k * kPi * x);
}

/// Spectral increments dB^k(m) = sum_i e_k(x_i) dW(i,m); the discrete analogue
/// of B^k_t = int int e_k(x) W(ds,dx).
inline std::vector<double> project_mode(const NoiseGrid& noise, int k) {
    const GridSpec& g = noise.grid();
    if (k < 0) throw std::invalid_argument("project_mode: k must be >= 0");
    if (k >= g.cells) throw std::invalid_argument("project_mode: mode not resolvable on grid");
    std::vector<double> out(g.steps(), 0.0);
    for (int m = 0; m < g.steps(); ++m) {
        double s = 0.0;
        for (int i = 0; i < g.cells; ++i) s += basis_ek(k, g.midpoint(i)) * noise.increment(i, m);
        out[m] = s;
    }
    return out;
}

/// Single-step projection from an already generated slice.
inline double project_mode_slice(std::span<const double> slice, int k, const GridSpec& grid) {
    double s = 0.0;
    for (int i = 0; i < grid.cells; ++i) s += basis_ek(k, grid.midpoint(i)) * slice[i];
    return s;
}

}  // namespace heatpath
