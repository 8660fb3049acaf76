#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "heatpath/diagnostics.hpp"

using namespace heatpath;

namespace {

CoefficientPair linear_pair(double b_slope, double s_slope) {
    CoefficientPair p;
    p.b = CoefficientFn::linear(b_slope);
    p.sigma = CoefficientFn::linear(s_slope);
    p.b_nonincreasing = b_slope <= 0.0;
    return p;
}

struct CoupledRun {
    GridSpec grid;
    NoiseGrid noise;
    CoupledDiagnostics diag;
};

CoupledRun make_run(const CoefficientPair& pair, const Field& u0, const Field& v0,
                    GridSpec grid, std::uint64_t seed) {
    SchemeConfig sc;
    sc.store_full = true;
    NoiseGrid noise(grid, derive_seed(seed, 0));
    auto [up, vp] = simulate_coupled(u0, v0, pair, grid, sc, noise);
    CoupledDiagnostics d = coupled_series(up, vp, pair, noise);
    return CoupledRun{grid, std::move(noise), std::move(d)};
}

}  // namespace

TEST_CASE("Lp norms") {
    GridSpec grid{64, 1e-4, 1.0};
    const Field c = sample_field(grid, [](double) { return -0.4; });
    CHECK(lp_norm(c, 1) == Catch::Approx(0.4).margin(1e-14));
    CHECK(lp_norm(c, 2) == Catch::Approx(0.4).margin(1e-14));

    const Field half = sample_field(grid, [](double x) { return x < 0.5 ? 1.0 : 0.0; });
    CHECK(lp_norm(half, 1) == Catch::Approx(0.5).margin(1e-14));

    GridSpec fine{256, 1e-4, 1.0};
    const Field cosf = sample_field(fine, [](double x) { return std::cos(kPi * x); });
    CHECK(lp_norm(cosf, 2) == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-6));

    CHECK_THROWS(lp_norm(c, 3));
}

TEST_CASE("coupled series") {
    GridSpec grid{32, 1e-4, 0.05};

    SECTION("identical paths give null series") {
        const Field u0 = sample_field(grid, [](double x) { return std::cos(kPi * x); });
        const auto run = make_run(linear_pair(-1.0, 0.5), u0, u0, grid, 5);
        for (double v : run.diag.d1) CHECK(v == 0.0);
        for (double v : run.diag.mart) CHECK(v == 0.0);
        for (double v : run.diag.bracket) CHECK(v == 0.0);
        for (double v : run.diag.drift) CHECK(v == 0.0);
    }

    SECTION("linear decreasing drift integrand is minus the gap") {
        const Field u0 = sample_field(grid, [](double) { return 0.5; });
        const Field v0 = sample_field(grid, [](double) { return -0.3; });
        const auto run = make_run(linear_pair(-1.0, 0.5), u0, v0, grid, 6);
        const auto& d = run.diag;
        for (int m = 0; m < d.steps(); ++m) {
            const double inc = d.drift[m + 1] - d.drift[m];
            CHECK(inc == Catch::Approx(-grid.dt * d.d1[m]).margin(1e-13));
        }
        // and b_l1 increments are the same magnitudes
        for (int m = 0; m < d.steps(); ++m)
            CHECK(d.b_l1[m + 1] - d.b_l1[m] ==
                  Catch::Approx(grid.dt * d.d1[m]).margin(1e-13));
    }

    SECTION("bracket recomputation agrees to rounding") {
        const Field u0 = sample_field(grid, [](double x) { return x; });
        const Field v0 = sample_field(grid, [](double x) { return -x; });
        const CoefficientPair pair = linear_pair(-1.0, 0.5);
        SchemeConfig sc;
        sc.store_full = true;
        NoiseGrid noise(grid, derive_seed(7, 0));
        auto [up, vp] = simulate_coupled(u0, v0, pair, grid, sc, noise);
        const auto d = coupled_series(up, vp, pair, noise);
        double acc = 0.0;
        for (int m = 0; m < d.steps(); ++m) {
            double inner = 0.0;
            for (int i = 0; i < grid.cells; ++i) {
                const double ds =
                    eval(pair.sigma, up.full[m][i]) - eval(pair.sigma, vp.full[m][i]);
                inner += ds * ds;
            }
            acc += grid.dt * grid.dx() * inner;
            CHECK(d.bracket[m + 1] == Catch::Approx(acc).margin(1e-12));
        }
        // bracket is non-decreasing by construction
        for (int m = 0; m < d.steps(); ++m) CHECK(d.bracket[m + 1] >= d.bracket[m]);
    }
}

TEST_CASE("inequality residual") {
    GridSpec grid{32, 1e-4, 0.05};

    SECTION("null for identical data") {
        const Field u0 = sample_field(grid, [](double x) { return x; });
        const auto run = make_run(linear_pair(-1.0, 0.5), u0, u0, grid, 8);
        for (double r : inequality_residual(run.diag, run.diag.d1.front())) CHECK(r == 0.0);
    }

    SECTION("nonnegative for the noiseless non-increasing case") {
        const Field u0 = sample_field(grid, [](double) { return 1.0; });
        const Field v0 = sample_field(grid, [](double x) { return x < 0.5 ? -1.0 : 0.5; });
        const auto run = make_run(linear_pair(-1.0, 0.0), u0, v0, grid, 9);
        for (double r : inequality_residual(run.diag, run.diag.d1.front()))
            CHECK(r >= -1e-12);
    }
}

TEST_CASE("fractional moment estimator") {
    GridSpec grid{16, 1e-4, 0.02};
    const Field u0 = sample_field(grid, [](double) { return 0.5; });
    const Field v0 = sample_field(grid, [](double) { return 0.1; });

    SECTION("identical data gives zero lhs") {
        std::vector<CoupledSummary> ens;
        for (std::uint64_t s = 0; s < 24; ++s)
            ens.push_back(summarize(make_run(linear_pair(-1.0, 0.5), u0, u0, grid, s).diag));
        const auto rep = moment_bound(ens, 0.5, MomentVariant::general);
        CHECK(rep.lhs == 0.0);
        CHECK(rep.rhs_scale == 0.0);
    }

    SECTION("deterministic contraction has unit ratio") {
        std::vector<CoupledSummary> ens;
        CoefficientPair silent;
        silent.b = CoefficientFn::zero_fn();
        silent.sigma = CoefficientFn::zero_fn();
        silent.b_nonincreasing = true;
        for (std::uint64_t s = 0; s < 24; ++s)
            ens.push_back(summarize(make_run(silent, u0, v0, grid, s).diag));
        const auto rep = moment_bound(ens, 0.5, MomentVariant::general);
        CHECK(rep.ratio == Catch::Approx(1.0).margin(1e-12));
    }

    SECTION("gamma domain") {
        std::vector<CoupledSummary> ens(4);
        CHECK_THROWS(moment_bound(ens, 1.5, MomentVariant::general));
        CHECK_THROWS(moment_bound(ens, 0.0, MomentVariant::general));
    }
}

TEST_CASE("confluence tail") {
    SECTION("backward maximum is non-increasing") {
        std::vector<double> d1;
        for (int i = 0; i < 500; ++i) d1.push_back(std::abs(std::sin(0.3 * i)) / (1.0 + i));
        const auto tail = confluence_tail(d1);
        for (std::size_t i = 1; i < tail.size(); ++i) CHECK(tail[i] <= tail[i - 1]);
        for (std::size_t i = 0; i < tail.size(); ++i) CHECK(tail[i] >= d1[i]);
    }

    SECTION("noiseless linear damping decays geometrically") {
        GridSpec grid{16, 1e-3, 0.5};
        const Field u0 = sample_field(grid, [](double) { return 1.0; });
        const Field v0 = sample_field(grid, [](double) { return 0.0; });
        const auto run = make_run(linear_pair(-1.0, 0.0), u0, v0, grid, 10);
        const auto tail = confluence_tail(run.diag.d1);
        for (int m = 0; m <= run.diag.steps(); ++m)
            CHECK(tail[m] ==
                  Catch::Approx(std::pow(1.0 - grid.dt, m) * tail[0]).epsilon(1e-10));
    }
}

TEST_CASE("K statistic") {
    GridSpec grid{32, 1e-4, 1.0};
    const CoefficientPair pair = linear_pair(-1.0, 0.0);
    const Field u = sample_field(grid, [](double x) { return x; });
    const Field v = sample_field(grid, [](double x) { return x * x; });
    CHECK(k_stat(u, u, pair) == 0.0);

    double l1 = 0.0;
    for (int i = 0; i < grid.cells; ++i) l1 += std::abs(u[i] - v[i]);
    l1 *= grid.dx();
    CHECK(k_stat(u, v, pair) == Catch::Approx(l1).margin(1e-14));

    // injectivity: K = 0 forces pointwise equality for an injective (sigma, b)
    CoefficientPair inj = linear_pair(-1.0, 0.5);
    if (k_stat(u, v, inj) == 0.0)
        for (int i = 0; i < grid.cells; ++i) CHECK(u[i] == v[i]);
    CHECK(k_stat(u, v, inj) > 0.0);
}

TEST_CASE("subsequence extraction") {
    SECTION("exponential K") {
        const double dt = 0.01, T = 10.0;
        std::vector<double> k;
        for (int i = 0; i * dt <= T; ++i) k.push_back(std::exp(-i * dt));
        const auto rep = select_subsequence(k, dt, 6);
        CHECK_FALSE(rep.non_integrable);
        for (std::size_t j = 1; j < rep.k_values.size(); ++j)
            CHECK(rep.k_values[j] < rep.k_values[j - 1]);
        CHECK(rep.k_values.back() < std::exp(-T / 2.0));
        CHECK(rep.integral == Catch::Approx(1.0).epsilon(0.01));
    }

    SECTION("constant K is flagged non-integrable") {
        std::vector<double> k(1000, 1.0);
        CHECK(select_subsequence(k, 0.01, 4).non_integrable);
    }
}

TEST_CASE("weak form residual") {
    GridSpec grid{64, 0.0, 0.05};
    grid.dt = 0.25 * grid.dx() * grid.dx();
    CoefficientPair silent;
    silent.b = CoefficientFn::zero_fn();
    silent.sigma = CoefficientFn::zero_fn();
    SchemeConfig sc;
    sc.store_full = true;
    const NoiseGrid noise(grid, derive_seed(12, 0));

    SECTION("mass pairing is conserved exactly") {
        const Field u0 = sample_field(grid, [](double x) { return std::sin(5 * x); });
        const PathRecord p = simulate_path(u0, silent, grid, sc, noise);
        const auto res = weak_form_residual(p, noise, silent, TestFn::cosine(0));
        for (double r : res) CHECK(std::abs(r) <= 1e-12);
    }

    SECTION("cosine residual shrinks under refinement") {
        auto rms_residual = [&](int cells) {
            GridSpec g{cells, 0.0, 0.05};
            g.dt = 0.25 * g.dx() * g.dx();
            const NoiseGrid n(g, derive_seed(12, 0));
            const Field u0 = sample_field(g, [](double x) { return std::cos(kPi * x); });
            const PathRecord p = simulate_path(u0, silent, g, sc, n);
            const auto res = weak_form_residual(p, n, silent, TestFn::cosine(1));
            return std::abs(res.back());
        };
        const double coarse = rms_residual(32);
        const double fine = rms_residual(64);
        CHECK(fine < coarse);
        CHECK(coarse < 1e-3);
    }

    SECTION("non-Neumann test functions are rejected") {
        const Field u0 = sample_field(grid, [](double) { return 0.0; });
        const PathRecord p = simulate_path(u0, silent, grid, sc, noise);
        CHECK_THROWS(weak_form_residual(p, noise, silent, TestFn::sine(1)));
    }
}

TEST_CASE("mild residual") {
    const KernelSpec kspec;
    GridSpec grid{64, 0.0, 0.1};
    grid.dt = 0.25 * grid.dx() * grid.dx();
    CoefficientPair silent;
    silent.b = CoefficientFn::zero_fn();
    silent.sigma = CoefficientFn::zero_fn();
    SchemeConfig sc;
    sc.store_full = true;
    const NoiseGrid noise(grid, derive_seed(13, 0));
    const Field u0 = sample_field(grid, [](double x) { return std::cos(kPi * x); });
    const PathRecord p = simulate_path(u0, silent, grid, sc, noise);

    SECTION("time zero reconstructs the initial field") {
        CHECK(mild_residual(p, noise, silent, kspec, 0, 32) == 0.0);
    }

    SECTION("deterministic case matches the semigroup") {
        const double r = mild_residual(p, noise, silent, kspec, grid.steps(), 32);
        CHECK(std::abs(r) <= 1e-3);
    }
}

TEST_CASE("stochastic convolution") {
    const KernelSpec kspec;
    const GridSpec grid{32, 1e-4, 0.2};
    const NoiseGrid noise(grid, derive_seed(14, 0));

    SECTION("zero integrand") {
        CHECK(stochastic_convolution(kspec, noise, [](int, int) { return 0.0; },
                                     grid.steps(), 0.5) == 0.0);
    }

    SECTION("determinism") {
        auto once = stochastic_convolution(kspec, noise, [](int, int) { return 1.0; }, 200, 0.5);
        auto twice = stochastic_convolution(kspec, noise, [](int, int) { return 1.0; }, 200, 0.5);
        CHECK(once == twice);
    }

    SECTION("unit integrand variance matches the series oracle") {
        const double x = 0.5;
        const int target = grid.steps();
        const double t = target * grid.dt;
        // independent oracle: Var = t + sum_k (1 - e^{-2 k^2 pi^2 t}) 2 cos^2(k pi x)/(2 k^2 pi^2)
        double oracle = t;
        for (int k = 1; k <= 4000; ++k)
            oracle += (1.0 - std::exp(-2.0 * k * k * kPi * kPi * t)) * 2.0 *
                      std::cos(k * kPi * x) * std::cos(k * kPi * x) / (2.0 * k * k * kPi * kPi);

        // precompute the kernel row once; spot-check it against the operation
        std::vector<double> green(static_cast<std::size_t>(target) * grid.cells);
        for (int m = 0; m < target; ++m)
            for (int i = 0; i < grid.cells; ++i)
                green[static_cast<std::size_t>(m) * grid.cells + i] =
                    green_eval(kspec, (target - m) * grid.dt, x, grid.midpoint(i));

        const int seeds = 5000;
        std::vector<double> vals;
        vals.reserve(seeds);
        std::vector<double> slice(grid.cells);
        for (int s = 0; s < seeds; ++s) {
            const NoiseGrid ns(grid, derive_seed(909, s));
            double acc = 0.0;
            for (int m = 0; m < target; ++m) {
                ns.slice(m, slice);
                const double* row = &green[static_cast<std::size_t>(m) * grid.cells];
                for (int i = 0; i < grid.cells; ++i) acc += row[i] * slice[i];
            }
            vals.push_back(acc);
            if (s < 3)
                CHECK(stochastic_convolution(kspec, ns, [](int, int) { return 1.0; }, target, x)
                      == Catch::Approx(acc).margin(1e-12));
        }
        CHECK(variance_of(vals) == Catch::Approx(oracle).epsilon(0.05));
    }
}
