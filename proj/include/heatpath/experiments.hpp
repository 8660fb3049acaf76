#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "heatpath/config.hpp"
#include "heatpath/coeffs.hpp"
#include "heatpath/diagnostics.hpp"
#include "heatpath/kernel.hpp"
#include "heatpath/martingale.hpp"
#include "heatpath/noise.hpp"
#include "heatpath/solver.hpp"

namespace heatpath {

struct ExperimentResult {
    int exit_code = 0;
    std::vector<std::string> files;
    std::vector<std::string> failures;  // failed assertions, machine-readable one-liners
    nlohmann::json report;
};

namespace detail {

inline std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// One CSV artifact: comma, '.' decimal, LF, header row. Every data row is
/// prefixed with (config_hash, master_seed) by the caller's header choice.
class CsvFile {
  public:
    CsvFile(const std::filesystem::path& path, const std::string& header) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open " + path.string());
        out_ << header << "\n";
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << "\n";
    }

  private:
    std::ofstream out_;
};

/// Replica-level fan-out. Results are indexed by replica, so the output is a
/// pure function of (config, seed) regardless of the worker count.
template <class T, class Fn>
std::vector<T> run_replicas(int replicas, int workers, Fn&& fn) {
    std::vector<T> out(static_cast<std::size_t>(replicas));
    if (workers <= 1 || replicas <= 1) {
        for (int r = 0; r < replicas; ++r) out[r] = fn(r);
        return out;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex err_mu;
    const int n_threads = std::min(workers, replicas);
    for (int w = 0; w < n_threads; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const int r = next.fetch_add(1);
                if (r >= replicas) return;
                try {
                    out[r] = fn(r);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(err_mu);
                    if (!err) err = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
    return out;
}

/// d1(t) = ||u(t)-v(t)||_L1 per step for a coupled pair, without retaining the
/// full trajectories (long-horizon runs).
inline std::vector<double> coupled_d1_series(const Field& u0, const Field& v0,
                                             const CoefficientPair& pair, const GridSpec& grid,
                                             const SchemeConfig& scheme, const NoiseGrid& noise) {
    scheme.validate(grid);
    const int steps = grid.steps();
    std::vector<double> u = u0.values, v = v0.values;
    Stepper su(grid, pair, scheme), sv(grid, pair, scheme);
    std::vector<double> slice(grid.cells), nf(grid.cells);
    const double inv_dx = 1.0 / grid.dx();
    std::vector<double> d1;
    d1.reserve(steps + 1);
    auto push = [&] {
        double s = 0.0;
        for (int i = 0; i < grid.cells; ++i) s += std::abs(u[i] - v[i]);
        d1.push_back(grid.dx() * s);
    };
    push();
    for (int m = 0; m < steps; ++m) {
        noise.slice(m, slice);
        for (int i = 0; i < grid.cells; ++i) nf[i] = slice[i] * inv_dx;
        su.advance(u, nf, m + 1);
        sv.advance(v, nf, m + 1);
        push();
    }
    return d1;
}

struct ObservableSample {
    double mean = 0.0;     // int u dx
    double second = 0.0;   // int u^2 dx
    double maximum = 0.0;  // max_i u_i
};

inline ObservableSample observe(const Field& f) {
    ObservableSample o;
    o.maximum = f.values.front();
    for (double v : f.values) {
        o.mean += v;
        o.second += v * v;
        o.maximum = std::max(o.maximum, v);
    }
    o.mean *= f.dx;
    o.second *= f.dx;
    return o;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Experiment kinds
// ---------------------------------------------------------------------------

namespace detail {

struct Runner {
    const ExperimentConfig& cfg;
    std::filesystem::path out;
    int workers;
    ExperimentResult& result;
    std::string hash_str;
    std::string seed_str;

    Runner(const ExperimentConfig& c, const std::filesystem::path& o, int w, ExperimentResult& res)
        : cfg(c), out(o), workers(w), result(res), hash_str(hash_hex(c.config_hash)),
          seed_str(std::to_string(c.master_seed)) {}

    std::filesystem::path artifact(const std::string& name) {
        result.files.push_back(name);
        return out / name;
    }

    void require(bool ok, const std::string& what) {
        if (!ok) result.failures.push_back(what);
    }

    void simulate() {
        struct Rep {
            PathRecord path;
        };
        auto reps = run_replicas<Rep>(cfg.replicas, workers, [&](int r) {
            const NoiseGrid noise(cfg.grid, derive_seed(cfg.master_seed, r));
            const Field u0 = build_initial(cfg.u0, cfg.u0_clamp, cfg.grid);
            return Rep{simulate_path(u0, cfg.pair, cfg.grid, cfg.scheme, noise)};
        });
        CsvFile series(artifact("series.csv"), "config_hash,master_seed,replica,t,l1,l2");
        CsvFile terminal(artifact("terminal.csv"), "config_hash,master_seed,replica,x,u");
        for (int r = 0; r < cfg.replicas; ++r) {
            const PathRecord& p = reps[r].path;
            for (int c : p.checkpoint_steps)
                series.row({hash_str, seed_str, std::to_string(r), fmt_num(p.time_of(c)),
                            fmt_num(p.l1[c]), fmt_num(p.l2[c])});
            for (int i = 0; i < cfg.grid.cells; ++i)
                terminal.row({hash_str, seed_str, std::to_string(r),
                              fmt_num(cfg.grid.midpoint(i)), fmt_num(p.terminal[i])});
        }
        double mean_l1 = 0.0;
        for (const auto& rp : reps) mean_l1 += rp.path.l1.back();
        mean_l1 /= cfg.replicas;
        result.report["terminal_mean_l1"] = mean_l1;
    }

    void couple() {
        struct Rep {
            CoupledDiagnostics diag;
            CoupledSummary summary;
            long bad_steps = 0;
            long steps = 0;
        };
        SchemeConfig sc = cfg.scheme;
        sc.store_full = true;
        const double slack = 5.0 * cfg.grid.dx();
        auto reps = run_replicas<Rep>(cfg.replicas, workers, [&](int r) {
            const NoiseGrid noise(cfg.grid, derive_seed(cfg.master_seed, r));
            const Field u0 = build_initial(cfg.u0, cfg.u0_clamp, cfg.grid);
            const Field v0 = build_initial(cfg.v0, cfg.v0_clamp, cfg.grid);
            auto [up, vp] = simulate_coupled(u0, v0, cfg.pair, cfg.grid, sc, noise);
            Rep rep;
            rep.diag = coupled_series(up, vp, cfg.pair, noise);
            rep.summary = summarize(rep.diag);
            const auto res = inequality_residual(rep.diag, rep.diag.d1.front());
            rep.steps = static_cast<long>(res.size());
            for (double v : res)
                if (v < -slack) ++rep.bad_steps;
            return rep;
        });

        CsvFile csv(artifact("couple.csv"),
                    "config_hash,master_seed,replica,t,d1,drift,bracket,mart,residual");
        const int stride = cfg.scheme.effective_stride(cfg.grid);
        long bad = 0, total = 0;
        std::vector<double> marts;
        double mean_bracket = 0.0;
        for (int r = 0; r < cfg.replicas; ++r) {
            const auto& d = reps[r].diag;
            const auto res = inequality_residual(d, d.d1.front());
            const int n = static_cast<int>(d.d1.size());
            for (int m = 0; m < n; m += stride) {
                csv.row({hash_str, seed_str, std::to_string(r), fmt_num(m * d.dt),
                         fmt_num(d.d1[m]), fmt_num(d.drift[m]), fmt_num(d.bracket[m]),
                         fmt_num(d.mart[m]), fmt_num(res[m])});
            }
            if ((n - 1) % stride != 0) {
                const int m = n - 1;
                csv.row({hash_str, seed_str, std::to_string(r), fmt_num(m * d.dt),
                         fmt_num(d.d1[m]), fmt_num(d.drift[m]), fmt_num(d.bracket[m]),
                         fmt_num(d.mart[m]), fmt_num(res[m])});
            }
            bad += reps[r].bad_steps;
            total += reps[r].steps;
            marts.push_back(reps[r].summary.mart_T);
            mean_bracket += reps[r].summary.bracket_T;
        }
        mean_bracket /= cfg.replicas;
        const double bad_frac = total > 0 ? static_cast<double>(bad) / total : 0.0;
        const double mart_mean = mean_of(marts);
        const double mart_var = variance_of(marts);
        const double mart_se = std::sqrt(mart_var / cfg.replicas);
        result.report["residual_bad_fraction"] = bad_frac;
        result.report["mart_mean"] = mart_mean;
        result.report["mart_variance"] = mart_var;
        result.report["mean_bracket"] = mean_bracket;
        require(bad_frac < 0.01, "residual: fraction of steps below -5*dx is " +
                                     fmt_num(bad_frac) + " (limit 0.01)");
        if (cfg.replicas >= 16) {
            require(std::abs(mart_mean) <= 4.0 * mart_se,
                    "mart(T): ensemble mean " + fmt_num(mart_mean) + " exceeds 4 SE " +
                        fmt_num(4.0 * mart_se));
        }
    }

    std::vector<CoupledSummary> coupled_summaries() {
        SchemeConfig sc = cfg.scheme;
        sc.store_full = true;
        return run_replicas<CoupledSummary>(cfg.replicas, workers, [&](int r) {
            const NoiseGrid noise(cfg.grid, derive_seed(cfg.master_seed, r));
            const Field u0 = build_initial(cfg.u0, cfg.u0_clamp, cfg.grid);
            const Field v0 = build_initial(cfg.v0, cfg.v0_clamp, cfg.grid);
            auto [up, vp] = simulate_coupled(u0, v0, cfg.pair, cfg.grid, sc, noise);
            return summarize(coupled_series(up, vp, cfg.pair, noise));
        });
    }

    void moments() {
        const auto ens = coupled_summaries();
        CsvFile csv(artifact("moment_summaries.csv"),
                    "config_hash,master_seed,replica,d1_0,sup_d1,bracket_T,b_l1_T,mart_T");
        for (int r = 0; r < cfg.replicas; ++r) {
            const auto& s = ens[r];
            csv.row({hash_str, seed_str, std::to_string(r), fmt_num(s.d1_0), fmt_num(s.sup_d1),
                     fmt_num(s.bracket_T), fmt_num(s.b_l1_T), fmt_num(s.mart_T)});
        }
        const MomentReport rep = moment_bound(ens, cfg.gamma, cfg.variant);
        nlohmann::json j{{"gamma", rep.gamma},
                         {"variant", rep.variant == MomentVariant::general ? "general"
                                                                           : "nonincreasing"},
                         {"lhs", rep.lhs},
                         {"rhs_scale", rep.rhs_scale},
                         {"ratio", rep.ratio},
                         {"stderr", rep.stderr_},
                         {"replicas", rep.replicas},
                         {"seed", cfg.master_seed}};
        result.report["moments"] = j;
        std::ofstream(artifact("moments.json"), std::ios::binary) << j.dump(2) << "\n";
    }

    void confluence() {
        struct Rep {
            double delta_0 = 0.0, delta_T = 0.0;
            long increase_violations = 0;
        };
        auto reps = run_replicas<Rep>(cfg.replicas, workers, [&](int r) {
            const NoiseGrid noise(cfg.grid, derive_seed(cfg.master_seed, r));
            const Field u0 = build_initial(cfg.u0, cfg.u0_clamp, cfg.grid);
            const Field v0 = build_initial(cfg.v0, cfg.v0_clamp, cfg.grid);
            const auto d1 = coupled_d1_series(u0, v0, cfg.pair, cfg.grid, cfg.scheme, noise);
            Rep rep;
            rep.delta_0 = d1.front();
            rep.delta_T = d1.back();
            for (std::size_t m = 1; m < d1.size(); ++m)
                if (d1[m] > d1[m - 1]) ++rep.increase_violations;
            return rep;
        });
        CsvFile csv(artifact("confluence.csv"),
                    "config_hash,master_seed,replica,delta_0,delta_T,ratio,increase_violations");
        std::vector<double> ratios;
        long violations = 0;
        for (int r = 0; r < cfg.replicas; ++r) {
            const double ratio = reps[r].delta_0 > 0 ? reps[r].delta_T / reps[r].delta_0 : 0.0;
            ratios.push_back(ratio);
            violations += reps[r].increase_violations;
            csv.row({hash_str, seed_str, std::to_string(r), fmt_num(reps[r].delta_0),
                     fmt_num(reps[r].delta_T), fmt_num(ratio),
                     std::to_string(reps[r].increase_violations)});
        }
        std::sort(ratios.begin(), ratios.end());
        const double median = ratios[ratios.size() / 2];
        result.report["median_ratio"] = median;
        result.report["increase_violations"] = violations;
        require(median <= 0.05, "confluence: median Delta(T)/Delta(0) = " + fmt_num(median) +
                                    " (limit 0.05)");
    }

    void invariant() {
        // Long coupled chain: the two laws merge, so second-half observables of
        // the two paths come from (approximately) the same distribution.
        struct Rep {
            std::vector<double> k_series;
            std::vector<ObservableSample> obs_u, obs_v;
        };
        SchemeConfig sc = cfg.scheme;
        auto reps = run_replicas<Rep>(cfg.replicas, workers, [&](int r) {
            const NoiseGrid noise(cfg.grid, derive_seed(cfg.master_seed, r));
            const Field u0 = build_initial(cfg.u0, cfg.u0_clamp, cfg.grid);
            const Field v0 = build_initial(cfg.v0, cfg.v0_clamp, cfg.grid);
            sc.validate(cfg.grid);
            const int steps = cfg.grid.steps();
            const int stride = sc.effective_stride(cfg.grid);
            std::vector<double> u = u0.values, v = v0.values;
            Stepper su(cfg.grid, cfg.pair, sc), sv(cfg.grid, cfg.pair, sc);
            std::vector<double> slice(cfg.grid.cells), nf(cfg.grid.cells);
            const double inv_dx = 1.0 / cfg.grid.dx();
            Rep rep;
            Field fu(cfg.grid.cells, cfg.grid.dx()), fv(cfg.grid.cells, cfg.grid.dx());
            for (int m = 0; m < steps; ++m) {
                noise.slice(m, slice);
                for (int i = 0; i < cfg.grid.cells; ++i) nf[i] = slice[i] * inv_dx;
                su.advance(u, nf, m + 1);
                sv.advance(v, nf, m + 1);
                if ((m + 1) % stride == 0 || m + 1 == steps) {
                    fu.values = u;
                    fv.values = v;
                    rep.k_series.push_back(k_stat(fu, fv, cfg.pair));
                    if (m + 1 > steps / 2) {
                        rep.obs_u.push_back(observe(fu));
                        rep.obs_v.push_back(observe(fv));
                    }
                }
            }
            return rep;
        });

        CsvFile csv(artifact("invariant.csv"),
                    "config_hash,master_seed,replica,sample,k,mean_u,mean_v,second_u,second_v,"
                    "max_u,max_v");
        std::vector<double> mean_u, mean_v, second_u, second_v, max_u, max_v;
        std::vector<double> k_all;
        for (int r = 0; r < cfg.replicas; ++r) {
            const auto& rep = reps[r];
            const std::size_t tail = rep.k_series.size() - rep.obs_u.size();
            for (std::size_t s = 0; s < rep.k_series.size(); ++s) {
                const bool in_tail = s >= tail;
                const std::size_t o = in_tail ? s - tail : 0;
                csv.row({hash_str, seed_str, std::to_string(r), std::to_string(s),
                         fmt_num(rep.k_series[s]),
                         in_tail ? fmt_num(rep.obs_u[o].mean) : "",
                         in_tail ? fmt_num(rep.obs_v[o].mean) : "",
                         in_tail ? fmt_num(rep.obs_u[o].second) : "",
                         in_tail ? fmt_num(rep.obs_v[o].second) : "",
                         in_tail ? fmt_num(rep.obs_u[o].maximum) : "",
                         in_tail ? fmt_num(rep.obs_v[o].maximum) : ""});
            }
            for (const auto& o : rep.obs_u) {
                mean_u.push_back(o.mean);
                second_u.push_back(o.second);
                max_u.push_back(o.maximum);
            }
            for (const auto& o : rep.obs_v) {
                mean_v.push_back(o.mean);
                second_v.push_back(o.second);
                max_v.push_back(o.maximum);
            }
            // ensemble-average K per checkpoint time; concatenating replica
            // series would turn decay-in-time into a replica sawtooth
            if (k_all.size() < rep.k_series.size()) k_all.resize(rep.k_series.size(), 0.0);
            for (std::size_t s = 0; s < rep.k_series.size(); ++s)
                k_all[s] += rep.k_series[s] / cfg.replicas;
        }
        const double stride_dt = cfg.scheme.effective_stride(cfg.grid) * cfg.grid.dt;
        const SubsequenceReport sub = select_subsequence(
            k_all.size() < 2 ? std::vector<double>{0, 0} : k_all, stride_dt, 8);
        const double ks_mean = ks_distance_two_sample(mean_u, mean_v);
        const double ks_second = ks_distance_two_sample(second_u, second_v);
        const double ks_max = ks_distance_two_sample(max_u, max_v);
        result.report["k_integral"] = sub.integral;
        result.report["k_non_integrable"] = sub.non_integrable;
        result.report["k_last_selected"] = sub.k_values.back();
        result.report["ks_mean"] = ks_mean;
        result.report["ks_second"] = ks_second;
        result.report["ks_max"] = ks_max;
        require(!sub.non_integrable, "invariant: running integral of K still grows linearly");
    }

    void martingale() {
        const HittingEstimate hit =
            hitting_prob(cfg.mart_m, cfg.mart_x, cfg.replicas, cfg.master_seed, cfg.mart_dt);
        const LemmaCheckReport lemma = lemma_check(cfg.gamma, cfg.mart_m, cfg.replicas,
                                                   cfg.master_seed, cfg.mart_dt,
                                                   cfg.mart_tcap_scale);
        nlohmann::json j{
            {"m", cfg.mart_m},
            {"x", cfg.mart_x},
            {"gamma", cfg.gamma},
            {"replicas", cfg.replicas},
            {"seed", cfg.master_seed},
            {"hitting", {{"estimate", hit.estimate},
                         {"analytic", hit.analytic},
                         {"ci_low", hit.interval.lo},
                         {"ci_high", hit.interval.hi}}},
            {"moments", {{"e_s_gamma", lemma.e_s_gamma},
                         {"analytic_s", lemma.analytic_s},
                         {"e_tau_gamma_half", lemma.e_tau_gamma_half},
                         {"analytic_tau", lemma.analytic_tau},
                         {"bound", lemma.bound},
                         {"stderr", lemma.stderr_s},
                         {"censored_fraction", lemma.censored_fraction},
                         {"heavy_tail_warning", lemma.heavy_tail_warning}}}};
        result.report = j;
        std::ofstream(artifact("martingale.json"), std::ios::binary) << j.dump(2) << "\n";
        require(hit.interval.lo <= hit.analytic && hit.analytic <= hit.interval.hi,
                "hitting probability CI misses m/(m+x)");
        require(std::abs(lemma.e_s_gamma - lemma.analytic_s) <= 0.10 * lemma.analytic_s,
                "E[S^gamma] off the quadrature value by more than 10%");
    }

    void kernel_check() {
        const GaussianBoundReport gb = check_gaussian_bound(cfg.kernel, 0.1, 24);
        CsvFile csv(artifact("kernel.csv"),
                    "config_hash,master_seed,t,x,y,G,bound_ratio,tail_bound");
        const std::vector<double> times{1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};
        const int Q = cfg.kernel.quadrature_points;
        double worst_mass = 0.0, worst_sym = 0.0, min_value = 0.0, worst_ck = 0.0;
        for (double t : times) {
            for (int a = 0; a < 9; ++a) {
                const double x = (a + 0.5) / 9.0;
                for (int bq = 0; bq < 9; ++bq) {
                    const double y = (bq + 0.5) / 9.0;
                    const double g = green_eval_raw(cfg.kernel, t, x, y);
                    const double gauss =
                        std::exp(-(x - y) * (x - y) / (4.0 * t)) / std::sqrt(4.0 * kPi * t);
                    csv.row({hash_str, seed_str, fmt_num(t), fmt_num(x), fmt_num(y), fmt_num(g),
                             fmt_num(gauss > 0 ? g / gauss : 0.0),
                             fmt_num(kernel_tail_bound(cfg.kernel, t))});
                    min_value = std::min(min_value, g);
                    worst_sym = std::max(worst_sym,
                                         std::abs(g - green_eval_raw(cfg.kernel, t, y, x)));
                }
                double mass = 0.0;
                for (int q = 0; q < Q; ++q)
                    mass += green_eval_raw(cfg.kernel, t, x, (q + 0.5) / Q);
                mass /= Q;
                worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
            }
        }
        {
            const double s = 0.01, t = 0.02;
            for (int a = 0; a < 5; ++a) {
                const double x = (a + 0.5) / 5.0;
                for (int bq = 0; bq < 5; ++bq) {
                    const double y = (bq + 0.5) / 5.0;
                    double conv = 0.0;
                    for (int q = 0; q < Q; ++q) {
                        const double z = (q + 0.5) / Q;
                        conv += green_eval_raw(cfg.kernel, s, x, z) *
                                green_eval_raw(cfg.kernel, t - s, z, y);
                    }
                    conv /= Q;
                    worst_ck = std::max(worst_ck,
                                        std::abs(conv - green_eval_raw(cfg.kernel, t, x, y)));
                }
            }
        }
        result.report["max_mass_defect"] = worst_mass;
        result.report["max_symmetry_defect"] = worst_sym;
        result.report["min_value"] = min_value;
        result.report["max_chapman_kolmogorov_defect"] = worst_ck;
        result.report["gaussian_bound_c"] = gb.fitted_c;
        require(worst_mass <= 1e-6, "kernel mass defect " + fmt_num(worst_mass) + " > 1e-6");
        require(worst_sym == 0.0, "kernel symmetry defect " + fmt_num(worst_sym) + " != 0");
        require(min_value >= -1e-9, "kernel minimum " + fmt_num(min_value) + " < -1e-9");
        require(worst_ck <= 1e-6,
                "Chapman-Kolmogorov defect " + fmt_num(worst_ck) + " > 1e-6");
    }

    void galerkin() {
        const int probe_cell = std::min(cfg.grid.cells - 1,
                                        static_cast<int>(cfg.probe_x * cfg.grid.cells));
        const int probe_step = std::min(cfg.grid.steps(),
                                        static_cast<int>(std::lround(cfg.probe_time / cfg.grid.dt)));
        GridSpec probe_grid = cfg.grid;
        probe_grid.horizon = probe_step * cfg.grid.dt;
        struct Rep {
            std::vector<double> sq_err;  // one per requested mode count
        };
        auto reps = run_replicas<Rep>(cfg.replicas, workers, [&](int r) {
            const NoiseGrid noise(probe_grid, derive_seed(cfg.master_seed, r));
            const Field u0 = build_initial(cfg.u0, cfg.u0_clamp, probe_grid);
            const PathRecord ref = simulate_path(u0, cfg.pair, probe_grid, cfg.scheme, noise);
            Rep rep;
            for (int n : cfg.galerkin_modes) {
                const PathRecord gp =
                    galerkin_simulate(u0, n, cfg.pair, probe_grid, cfg.scheme, noise);
                const double d = gp.terminal[probe_cell] - ref.terminal[probe_cell];
                rep.sq_err.push_back(d * d);
            }
            return rep;
        });
        CsvFile csv(artifact("galerkin.csv"),
                    "config_hash,master_seed,replica,modes,sq_err");
        std::vector<double> mse(cfg.galerkin_modes.size(), 0.0);
        for (int r = 0; r < cfg.replicas; ++r)
            for (std::size_t k = 0; k < cfg.galerkin_modes.size(); ++k) {
                csv.row({hash_str, seed_str, std::to_string(r),
                         std::to_string(cfg.galerkin_modes[k]), fmt_num(reps[r].sq_err[k])});
                mse[k] += reps[r].sq_err[k];
            }
        for (auto& v : mse) v /= cfg.replicas;
        nlohmann::json j = nlohmann::json::array();
        bool decreasing = true;
        for (std::size_t k = 0; k < mse.size(); ++k) {
            j.push_back({{"modes", cfg.galerkin_modes[k]}, {"mse", mse[k]}});
            if (k > 0 && !(mse[k] < mse[k - 1])) decreasing = false;
        }
        result.report["galerkin_mse"] = j;
        result.report["strictly_decreasing"] = decreasing;
        require(decreasing, "galerkin: E|u^n - u|^2 not strictly decreasing in n");
    }
};

}  // namespace detail

/// Dispatches one experiment; artifacts land in out_dir, the manifest last.
/// Exit status 0 iff every built-in assertion passed.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                                       int workers = 1) {
    const auto start = std::chrono::steady_clock::now();
    std::filesystem::create_directories(out_dir);
    ExperimentResult result;
    detail::Runner runner(cfg, out_dir, workers, result);
    try {
        switch (cfg.kind) {
            case ExperimentKind::simulate: runner.simulate(); break;
            case ExperimentKind::couple: runner.couple(); break;
            case ExperimentKind::moments: runner.moments(); break;
            case ExperimentKind::confluence: runner.confluence(); break;
            case ExperimentKind::invariant: runner.invariant(); break;
            case ExperimentKind::martingale: runner.martingale(); break;
            case ExperimentKind::kernel_check: runner.kernel_check(); break;
            case ExperimentKind::galerkin: runner.galerkin(); break;
        }
    } catch (const PathBlowupError& e) {
        result.exit_code = 3;
        result.failures.push_back(std::string("path blowup: ") + e.what());
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    nlohmann::json manifest{{"kind", kind_name(cfg.kind)},
                            {"config_hash", detail::hash_hex(cfg.config_hash)},
                            {"master_seed", cfg.master_seed},
                            {"files", result.files},
                            {"failures", result.failures},
                            {"wall_seconds", wall}};
    std::ofstream(std::filesystem::path(out_dir) / "manifest.json", std::ios::binary)
        << manifest.dump(2) << "\n";
    if (result.exit_code == 0 && !result.failures.empty()) result.exit_code = 1;
    return result;
}

}  // namespace heatpath
