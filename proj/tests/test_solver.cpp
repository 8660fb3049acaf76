#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "heatpath/solver.hpp"

using namespace heatpath;

namespace {

CoefficientPair silent_pair() {
    CoefficientPair p;
    p.b = CoefficientFn::zero_fn();
    p.sigma = CoefficientFn::zero_fn();
    return p;
}

CoefficientPair constant_drift(double c) {
    CoefficientPair p;
    p.b = CoefficientFn::custom_table({-1e6, 1e6}, {c, c});
    p.sigma = CoefficientFn::zero_fn();
    return p;
}

}  // namespace

TEST_CASE("single step fixed points and mass") {
    const GridSpec grid{32, 1e-4, 1.0};
    const SchemeConfig scheme;
    std::vector<double> zero_slice(grid.cells, 0.0);

    const Field c = sample_field(grid, [](double) { return 0.7; });
    const Field c1 = fd_step(c, zero_slice, silent_pair(), grid, scheme);
    for (int i = 0; i < grid.cells; ++i) CHECK(c1[i] == 0.7);

    const Field z = make_field(grid);
    const Field z1 = fd_step(z, zero_slice, constant_drift(1.0), grid, scheme);
    for (int i = 0; i < grid.cells; ++i) CHECK(z1[i] == Catch::Approx(grid.dt).margin(1e-18));

    const Field bumpy = sample_field(grid, [](double x) { return std::sin(7 * x) + x; });
    const Field bumpy1 = fd_step(bumpy, zero_slice, silent_pair(), grid, scheme);
    const double mass0 = std::accumulate(bumpy.values.begin(), bumpy.values.end(), 0.0);
    const double mass1 = std::accumulate(bumpy1.values.begin(), bumpy1.values.end(), 0.0);
    CHECK(mass1 == Catch::Approx(mass0).margin(1e-12));
}

TEST_CASE("cfl guard") {
    GridSpec grid{64, 1e-3, 1.0};  // cfl = 4.096
    SchemeConfig scheme;
    CHECK_THROWS(scheme.validate(grid));
    scheme.scheme = Scheme::semi_implicit;
    CHECK_NOTHROW(scheme.validate(grid));
}

TEST_CASE("deterministic eigenfunction decay") {
    GridSpec grid{128, 0.0, 0.1};
    grid.dt = 0.25 * grid.dx() * grid.dx();
    const SchemeConfig scheme;
    const Field u0 = sample_field(grid, [](double x) { return std::cos(kPi * x); });
    const PathRecord rec = simulate_deterministic(u0, silent_pair(), grid, scheme);
    const double decay = std::exp(-kPi * kPi * 0.1);
    double err = 0.0;
    for (int i = 0; i < grid.cells; ++i)
        err = std::max(err, std::abs(rec.terminal[i] - decay * std::cos(kPi * grid.midpoint(i))));
    CHECK(err <= 1e-3);
}

TEST_CASE("constant field follows the drift ODE") {
    const GridSpec grid{16, 1e-4, 1.0};
    CoefficientPair p;
    p.b = CoefficientFn::linear(-1.0);
    p.sigma = CoefficientFn::zero_fn();
    const Field u0 = sample_field(grid, [](double) { return 1.0; });
    const PathRecord rec = simulate_deterministic(u0, p, grid, SchemeConfig{});
    for (int i = 0; i < grid.cells; ++i)
        CHECK(rec.terminal[i] == Catch::Approx(std::exp(-1.0)).margin(1e-3));
}

TEST_CASE("path records norms at every step") {
    const GridSpec grid{16, 1e-3, 0.05};
    const NoiseGrid noise(grid, derive_seed(3, 0));
    CoefficientPair p;
    p.b = CoefficientFn::linear(-1.0);
    p.sigma = CoefficientFn::linear(0.5);
    const Field u0 = sample_field(grid, [](double x) { return std::cos(2 * kPi * x); });
    const PathRecord rec = simulate_path(u0, p, grid, SchemeConfig{}, noise);
    CHECK(static_cast<int>(rec.l1.size()) == grid.steps() + 1);
    CHECK(static_cast<int>(rec.l2.size()) == grid.steps() + 1);
    CHECK(rec.sigma_l2_sq_integral.front() == 0.0);
    for (std::size_t m = 1; m < rec.sigma_l2_sq_integral.size(); ++m)
        CHECK(rec.sigma_l2_sq_integral[m] >= rec.sigma_l2_sq_integral[m - 1]);
    CHECK(rec.sup_l1() >= rec.l1.back());
    CHECK(rec.checkpoints.size() == rec.checkpoint_steps.size());
    CHECK(rec.checkpoint_steps.back() == grid.steps());

    // determinism: the same seed reproduces the record bit for bit
    const PathRecord rec2 = simulate_path(u0, p, grid, SchemeConfig{}, noise);
    for (std::size_t m = 0; m < rec.l1.size(); ++m) CHECK(rec.l1[m] == rec2.l1[m]);
    for (int i = 0; i < grid.cells; ++i) CHECK(rec.terminal[i] == rec2.terminal[i]);
}

TEST_CASE("coupled runs share noise") {
    const GridSpec grid{32, 1e-4, 0.05};
    const NoiseGrid noise(grid, derive_seed(17, 0));
    CoefficientPair p;
    p.b = CoefficientFn::linear(-1.0);
    p.sigma = CoefficientFn::linear_plus_sine(0.0, 0.5);

    SECTION("identical initial data gives identical paths") {
        const Field u0 = sample_field(grid, [](double x) { return x; });
        auto [a, b] = simulate_coupled(u0, u0, p, grid, SchemeConfig{}, noise);
        for (int i = 0; i < grid.cells; ++i) CHECK(a.terminal[i] == b.terminal[i]);
    }

    SECTION("noiseless coupled gap contracts in L1 at every step") {
        const Field u0 = sample_field(grid, [](double x) { return std::cos(3 * kPi * x); });
        const Field v0 = sample_field(grid, [](double x) { return x < 0.5 ? 1.0 : -1.0; });
        // recompute the gap per step from full records
        SchemeConfig full;
        full.store_full = true;
        auto [af, bf] = simulate_coupled(u0, v0, silent_pair(), grid, full, noise);
        double prev = -1.0;
        for (std::size_t m = 0; m < af.full.size(); ++m) {
            double d1 = 0.0;
            for (int i = 0; i < grid.cells; ++i) d1 += std::abs(af.full[m][i] - bf.full[m][i]);
            d1 *= grid.dx();
            if (prev >= 0.0) CHECK(d1 <= prev + 1e-15);
            prev = d1;
        }
    }
}

TEST_CASE("semi-implicit scheme tracks the explicit one") {
    GridSpec grid{32, 0.0, 0.1};
    grid.dt = 0.25 * grid.dx() * grid.dx();
    const Field u0 = sample_field(grid, [](double x) { return std::cos(kPi * x); });
    SchemeConfig imp;
    imp.scheme = Scheme::semi_implicit;
    const PathRecord re = simulate_deterministic(u0, silent_pair(), grid, SchemeConfig{});
    const PathRecord ri = simulate_deterministic(u0, silent_pair(), grid, imp);
    for (int i = 0; i < grid.cells; ++i)
        // the two Euler time discretizations differ by O(dt lambda^2 T u),
        // about 9e-4 for this grid
        CHECK(ri.terminal[i] == Catch::Approx(re.terminal[i]).margin(2e-3));

    // implicit mass conservation is exact too (row sums of the inverse are 1)
    const Field bumpy = sample_field(grid, [](double x) { return x * x; });
    const PathRecord rm = simulate_deterministic(bumpy, silent_pair(), grid, imp);
    const double mass0 = std::accumulate(bumpy.values.begin(), bumpy.values.end(), 0.0);
    const double mass1 =
        std::accumulate(rm.terminal.values.begin(), rm.terminal.values.end(), 0.0);
    CHECK(mass1 == Catch::Approx(mass0).margin(1e-9));
}

TEST_CASE("galerkin truncation") {
    const GridSpec grid{32, 1e-4, 0.02};
    const NoiseGrid noise(grid, derive_seed(23, 0));
    CoefficientPair p;
    p.b = CoefficientFn::linear(-1.0);
    p.sigma = CoefficientFn::linear(0.5);
    const Field u0 = sample_field(grid, [](double x) { return std::cos(kPi * x); });

    SECTION("zero modes is the deterministic path") {
        const PathRecord g0 = galerkin_simulate(u0, 0, p, grid, SchemeConfig{}, noise);
        const PathRecord det = simulate_deterministic(u0, p, grid, SchemeConfig{});
        for (int i = 0; i < grid.cells; ++i) CHECK(g0.terminal[i] == det.terminal[i]);
    }

    SECTION("full mode count equals the mean-filtered FD path") {
        const int n = grid.cells - 1;
        const PathRecord gp = galerkin_simulate(u0, n, p, grid, SchemeConfig{}, noise);
        // oracle: step the FD recursion by hand with the mode-0 component of
        // each slice removed (the only mode the truncation drops)
        Field state = u0;
        for (int m = 0; m < grid.steps(); ++m) {
            auto slice = noise.slice(m);
            double mean = 0.0;
            for (double w : slice) mean += w;
            mean /= grid.cells;
            for (double& w : slice) w -= mean;
            state = fd_step(state, slice, p, grid, SchemeConfig{});
        }
        for (int i = 0; i < grid.cells; ++i)
            CHECK(gp.terminal[i] == Catch::Approx(state[i]).margin(1e-8));
    }

    SECTION("mode count bounds") {
        CHECK_THROWS(galerkin_simulate(u0, -1, p, grid, SchemeConfig{}, noise));
        CHECK_THROWS(galerkin_simulate(u0, grid.cells, p, grid, SchemeConfig{}, noise));
    }

    SECTION("determinism") {
        const PathRecord a = galerkin_simulate(u0, 4, p, grid, SchemeConfig{}, noise);
        const PathRecord b = galerkin_simulate(u0, 4, p, grid, SchemeConfig{}, noise);
        for (int i = 0; i < grid.cells; ++i) CHECK(a.terminal[i] == b.terminal[i]);
    }
}

TEST_CASE("blowup is reported with its step") {
    const GridSpec grid{8, 1e-2, 10.0};  // wildly unstable drift
    CoefficientPair p;
    p.b = CoefficientFn::linear(1e3);  // expanding drift
    p.sigma = CoefficientFn::zero_fn();
    SchemeConfig imp;
    imp.scheme = Scheme::semi_implicit;
    const Field u0 = sample_field(grid, [](double) { return 1.0; });
    CHECK_THROWS_AS(simulate_deterministic(u0, p, grid, imp), PathBlowupError);
}

TEST_CASE("initial-data truncation") {
    const GridSpec grid{64, 1e-4, 1.0};

    SECTION("inverse square root has error 1/M") {
        InitialCondition ic;
        ic.kind = InitKind::singular;
        ic.amplitude = 1.0;
        for (double level : {4.0, 8.0, 16.0}) {
            const auto tr = truncate_initial(ic, level, grid);
            CHECK(tr.l1_error == Catch::Approx(1.0 / level).epsilon(1e-3));
            for (int i = 0; i < grid.cells; ++i) CHECK(tr.field[i] <= level);
        }
    }

    SECTION("dyadic ladder matches the summable-gap construction") {
        InitialCondition ic;
        ic.kind = InitKind::singular;
        ic.amplitude = 1.0;
        for (int n = 2; n <= 6; ++n) {
            const auto tr = truncate_initial(ic, std::pow(2.0, n), grid);
            CHECK(tr.l1_error == Catch::Approx(std::pow(2.0, -n)).epsilon(1e-3));
        }
    }

    SECTION("bounded data is untouched") {
        InitialCondition ic;
        ic.kind = InitKind::cosine;
        ic.value = 0.2;
        ic.amplitude = 0.5;
        ic.mode = 2;
        const auto tr = truncate_initial(ic, 1.0, grid);
        CHECK(tr.l1_error == 0.0);
        for (int i = 0; i < grid.cells; ++i)
            CHECK(tr.field[i] == Catch::Approx(ic(grid.midpoint(i))).margin(1e-15));
    }
}
