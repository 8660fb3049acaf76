#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "heatpath/coeffs.hpp"
#include "heatpath/common.hpp"
#include "heatpath/diagnostics.hpp"
#include "heatpath/kernel.hpp"
#include "heatpath/numeric.hpp"
#include "heatpath/solver.hpp"

namespace heatpath {

enum class ExperimentKind {
    simulate,
    couple,
    moments,
    confluence,
    invariant,
    martingale,
    kernel_check,
    galerkin,
};

inline const char* kind_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::simulate: return "simulate";
        case ExperimentKind::couple: return "couple";
        case ExperimentKind::moments: return "moments";
        case ExperimentKind::confluence: return "confluence";
        case ExperimentKind::invariant: return "invariant";
        case ExperimentKind::martingale: return "martingale";
        case ExperimentKind::kernel_check: return "kernel-check";
        case ExperimentKind::galerkin: return "galerkin";
    }
    return "?";
}

inline std::optional<ExperimentKind> kind_from_name(const std::string& s) {
    for (ExperimentKind k :
         {ExperimentKind::simulate, ExperimentKind::couple, ExperimentKind::moments,
          ExperimentKind::confluence, ExperimentKind::invariant, ExperimentKind::martingale,
          ExperimentKind::kernel_check, ExperimentKind::galerkin})
        if (s == kind_name(k)) return k;
    return std::nullopt;
}

struct ConfigError : std::runtime_error {
    std::vector<std::string> violations;
    explicit ConfigError(std::vector<std::string> v)
        : std::runtime_error(join(v)), violations(std::move(v)) {}
    static std::string join(const std::vector<std::string>& v) {
        std::string s = "config rejected:";
        for (const auto& e : v) s += "\n  - " + e;
        return s;
    }
};

/// Fully validated experiment description. Everything an experiment touches is
/// in here; outputs are a pure function of (config, master_seed).
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::simulate;
    GridSpec grid;
    SchemeConfig scheme;
    CoefficientPair pair;
    InitialCondition u0, v0;
    double u0_clamp = 0.0;  // 0 = no truncation
    double v0_clamp = 0.0;
    double gamma = 0.5;
    MomentVariant variant = MomentVariant::general;
    int replicas = 1;
    std::uint64_t master_seed = 0;
    std::vector<int> galerkin_modes{4, 16, 64};
    double probe_time = 0.5;
    double probe_x = 0.5;
    KernelSpec kernel;
    double mart_m = 1.0;
    double mart_x = 1.0;
    double mart_dt = 1e-3;
    double mart_tcap_scale = 1e3;
    std::uint64_t config_hash = 0;
    std::string canonical_text;
};

namespace detail {

class KeyValueDoc {
  public:
    explicit KeyValueDoc(const std::string& text, std::vector<std::string>& errors) {
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.resize(hash);
            auto trim = [](std::string s) {
                const auto a = s.find_first_not_of(" \t\r");
                if (a == std::string::npos) return std::string{};
                const auto b = s.find_last_not_of(" \t\r");
                return s.substr(a, b - a + 1);
            };
            const std::string t = trim(line);
            if (t.empty()) continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos) {
                errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
                continue;
            }
            const std::string key = trim(t.substr(0, eq));
            const std::string val = trim(t.substr(eq + 1));
            if (key.empty()) {
                errors.push_back("line " + std::to_string(lineno) + ": empty key");
                continue;
            }
            if (kv_.count(key)) {
                errors.push_back(key + ": duplicate key");
                continue;
            }
            kv_[key] = val;
        }
    }

    std::optional<std::string> get(const std::string& key) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return std::nullopt;
        consumed_.insert(key);
        return it->second;
    }

    std::vector<std::string> unknown_keys() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : kv_)
            if (!consumed_.count(k)) out.push_back(k);
        return out;
    }

    const std::map<std::string, std::string>& entries() const { return kv_; }

  private:
    std::map<std::string, std::string> kv_;
    std::set<std::string> consumed_;
};

inline std::optional<double> parse_double(const std::string& s) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

struct Reader {
    KeyValueDoc& doc;
    std::vector<std::string>& errors;

    double number(const std::string& key, double fallback) {
        auto s = doc.get(key);
        if (!s) return fallback;
        auto v = parse_double(*s);
        if (!v) {
            errors.push_back(key + ": not a number: '" + *s + "'");
            return fallback;
        }
        return *v;
    }
    long integer(const std::string& key, long fallback) {
        const double v = number(key, static_cast<double>(fallback));
        return static_cast<long>(v);
    }
    std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
        auto s = doc.get(key);
        if (!s) return fallback;
        try {
            return std::stoull(*s);
        } catch (...) {
            errors.push_back(key + ": not a 64-bit unsigned integer");
            return fallback;
        }
    }
    bool boolean(const std::string& key, bool fallback) {
        auto s = doc.get(key);
        if (!s) return fallback;
        if (*s == "true" || *s == "1") return true;
        if (*s == "false" || *s == "0") return false;
        errors.push_back(key + ": expected true/false");
        return fallback;
    }
    std::string text(const std::string& key, const std::string& fallback) {
        return doc.get(key).value_or(fallback);
    }
    std::vector<double> list(const std::string& key) {
        std::vector<double> out;
        auto s = doc.get(key);
        if (!s) return out;
        std::istringstream in(*s);
        std::string tok;
        while (std::getline(in, tok, ',')) {
            auto v = parse_double(tok);
            if (!v) {
                errors.push_back(key + ": bad list entry '" + tok + "'");
                return {};
            }
            out.push_back(*v);
        }
        return out;
    }
};

inline CoefficientFn read_coefficient(Reader& r, const std::string& prefix) {
    const std::string kind = r.text(prefix + ".kind", "zero");
    CoefficientFn f;
    const double slope = r.number(prefix + ".slope", 0.0);
    const double power = r.number(prefix + ".power", 1.0);
    const double amplitude = r.number(prefix + ".amplitude", 0.0);
    try {
        if (kind == "linear")
            f = CoefficientFn::linear(slope);
        else if (kind == "linear-plus-sine")
            f = CoefficientFn::linear_plus_sine(slope, amplitude);
        else if (kind == "signed-min-power")
            f = CoefficientFn::signed_min_power(slope, power);
        else if (kind == "compact-bump")
            f = CoefficientFn::compact_bump(amplitude == 0.0 ? 1.0 : amplitude);
        else if (kind == "zero")
            f = CoefficientFn::zero_fn();
        else if (kind == "custom-table") {
            auto xs = r.list(prefix + ".table.x");
            auto ys = r.list(prefix + ".table.y");
            f = CoefficientFn::custom_table(xs, ys);
        } else {
            r.errors.push_back(prefix + ".kind: unknown coefficient kind '" + kind + "'");
        }
    } catch (const std::exception& e) {
        r.errors.push_back(prefix + ": " + e.what());
    }
    const double lip = r.number(prefix + ".lipschitz", -1.0);
    if (lip >= 0.0) f.declared_lipschitz = lip;
    return f;
}

inline InitialCondition read_initial(Reader& r, const std::string& prefix) {
    InitialCondition ic;
    const std::string kind = r.text(prefix + ".kind", "constant");
    if (kind == "constant")
        ic.kind = InitKind::constant;
    else if (kind == "cosine")
        ic.kind = InitKind::cosine;
    else if (kind == "step")
        ic.kind = InitKind::step;
    else if (kind == "singular")
        ic.kind = InitKind::singular;
    else if (kind == "table")
        ic.kind = InitKind::table;
    else
        r.errors.push_back(prefix + ".kind: unknown initial condition '" + kind + "'");
    ic.value = r.number(prefix + ".value", 0.0);
    ic.amplitude = r.number(prefix + ".amplitude", ic.kind == InitKind::singular ? 1.0 : 0.0);
    ic.mode = static_cast<int>(r.integer(prefix + ".mode", 1));
    ic.right = r.number(prefix + ".right", 0.0);
    ic.split = r.number(prefix + ".split", 0.5);
    ic.table_x = r.list(prefix + ".table.x");
    ic.table_y = r.list(prefix + ".table.y");
    if (ic.kind == InitKind::table && (ic.table_x.size() != ic.table_y.size() || ic.table_x.size() < 2))
        r.errors.push_back(prefix + ".table: need matching x/y lists with >= 2 points");
    return ic;
}

}  // namespace detail

/// Parses the flat dotted key-value format. Collects every violation (unknown
/// keys, bad values, invariant breaches) before rejecting.
inline ExperimentConfig parse_config(const std::string& text,
                                     std::optional<ExperimentKind> forced_kind = std::nullopt) {
    std::vector<std::string> errors;
    detail::KeyValueDoc doc(text, errors);
    detail::Reader r{doc, errors};

    ExperimentConfig cfg;
    const std::string kind_str = r.text("kind", forced_kind ? kind_name(*forced_kind) : "");
    if (auto k = kind_from_name(kind_str))
        cfg.kind = *k;
    else
        errors.push_back("kind: unknown experiment kind '" + kind_str + "'");
    if (forced_kind && kind_str != kind_name(*forced_kind))
        errors.push_back("kind: config says '" + kind_str + "' but the subcommand is '" +
                         std::string(kind_name(*forced_kind)) + "'");

    cfg.grid.cells = static_cast<int>(r.integer("grid.cells", 64));
    cfg.grid.dt = r.number("grid.dt", 1e-4);
    cfg.grid.horizon = r.number("grid.horizon", 1.0);

    const std::string scheme = r.text("scheme.kind", "explicit");
    if (scheme == "explicit")
        cfg.scheme.scheme = Scheme::explicit_euler;
    else if (scheme == "semi-implicit")
        cfg.scheme.scheme = Scheme::semi_implicit;
    else
        errors.push_back("scheme.kind: expected explicit | semi-implicit");
    cfg.scheme.checkpoint_stride = static_cast<int>(r.integer("scheme.checkpoint_stride", 0));

    const std::string catalog = r.text("pair.catalog", "");
    if (!catalog.empty()) {
        bool found = false;
        for (auto& p : catalog_pairs())
            if (p.name == catalog) {
                cfg.pair = p;
                found = true;
            }
        if (!found) errors.push_back("pair.catalog: unknown catalog pair '" + catalog + "'");
        // allow overrides on top of the catalog entry
        if (doc.entries().count("pair.b.kind")) cfg.pair.b = detail::read_coefficient(r, "pair.b");
        if (doc.entries().count("pair.sigma.kind"))
            cfg.pair.sigma = detail::read_coefficient(r, "pair.sigma");
    } else {
        cfg.pair.b = detail::read_coefficient(r, "pair.b");
        cfg.pair.sigma = detail::read_coefficient(r, "pair.sigma");
    }
    cfg.pair.b_nonincreasing = r.boolean("pair.nonincreasing", cfg.pair.b_nonincreasing);
    const std::string rho_kind = r.text("pair.rho.kind", "");
    if (!rho_kind.empty()) {
        try {
            if (rho_kind == "linear")
                cfg.pair.rho = RhoSpec::linear_rho(r.number("pair.rho.epsilon", 1.0));
            else if (rho_kind == "rho_p")
                cfg.pair.rho = RhoSpec::power_rho(r.number("pair.rho.epsilon", 1.0),
                                                  r.number("pair.rho.p", 1.0));
            else
                errors.push_back("pair.rho.kind: expected linear | rho_p");
        } catch (const std::exception& e) {
            errors.push_back(std::string("pair.rho: ") + e.what());
        }
    }

    cfg.u0 = detail::read_initial(r, "u0");
    cfg.v0 = detail::read_initial(r, "v0");
    cfg.u0_clamp = r.number("u0.clamp_level", 0.0);
    cfg.v0_clamp = r.number("v0.clamp_level", 0.0);

    cfg.gamma = r.number("gamma", 0.5);
    const std::string variant = r.text("variant", "general");
    if (variant == "general")
        cfg.variant = MomentVariant::general;
    else if (variant == "nonincreasing")
        cfg.variant = MomentVariant::nonincreasing;
    else
        errors.push_back("variant: expected general | nonincreasing");
    cfg.replicas = static_cast<int>(r.integer("replicas", 1));
    cfg.master_seed = r.u64("seed", 0);

    const auto modes = r.list("galerkin.modes");
    if (!modes.empty()) {
        cfg.galerkin_modes.clear();
        for (double m : modes) cfg.galerkin_modes.push_back(static_cast<int>(m));
    }
    cfg.probe_time = r.number("probe.time", 0.5);
    cfg.probe_x = r.number("probe.x", 0.5);

    cfg.kernel.mode_cutoff = static_cast<int>(r.integer("kernel.modes", 256));
    cfg.kernel.quadrature_points = static_cast<int>(r.integer("kernel.quadrature", 512));

    cfg.mart_m = r.number("martingale.m", 1.0);
    cfg.mart_x = r.number("martingale.x", 1.0);
    cfg.mart_dt = r.number("martingale.dt", 1e-3);
    cfg.mart_tcap_scale = r.number("martingale.tcap_scale", 1e3);

    for (const auto& k : doc.unknown_keys()) errors.push_back(k + ": unknown key");

    // invariants
    if (cfg.grid.cells < 2) errors.push_back("grid.cells: must be >= 2");
    if (!(cfg.grid.dt > 0.0)) errors.push_back("grid.dt: must be > 0");
    if (!(cfg.grid.horizon > 0.0)) errors.push_back("grid.horizon: must be > 0");
    if (cfg.scheme.scheme == Scheme::explicit_euler && cfg.grid.cells >= 2 &&
        cfg.grid.dt > 0.0 && cfg.grid.cfl() > 0.5 + 1e-12)
        errors.push_back("grid: cfl = dt/dx^2 = " + std::to_string(cfg.grid.cfl()) +
                         " violates the explicit-scheme bound cfl <= 0.5");
    if (cfg.kind == ExperimentKind::moments && !(cfg.gamma > 0.0 && cfg.gamma < 1.0))
        errors.push_back("gamma: must lie in (0,1)");
    if (cfg.kind == ExperimentKind::martingale && !(cfg.gamma > 0.0 && cfg.gamma < 1.0))
        errors.push_back("gamma: must lie in (0,1)");
    if (cfg.replicas < 1) errors.push_back("replicas: must be >= 1");
    if (cfg.kind == ExperimentKind::galerkin)
        for (int n : cfg.galerkin_modes)
            if (n < 0 || n >= cfg.grid.cells)
            errors.push_back("galerkin.modes: mode count " + std::to_string(n) +
                             " not resolvable on " + std::to_string(cfg.grid.cells) + " cells");
    if (cfg.variant == MomentVariant::nonincreasing && !cfg.pair.b_nonincreasing &&
        cfg.kind == ExperimentKind::moments)
        errors.push_back("variant: nonincreasing requires pair.nonincreasing = true");

    if (!errors.empty()) throw ConfigError(std::move(errors));

    // canonical text + hash: sorted key=value lines of everything that was set
    std::string canon;
    canon += std::string("kind=") + kind_name(cfg.kind) + "\n";
    for (const auto& [k, v] : doc.entries())
        if (k != "kind") canon += k + "=" + v + "\n";
    cfg.canonical_text = canon;
    cfg.config_hash = fnv1a(canon);
    return cfg;
}

inline Field build_initial(const InitialCondition& ic, double clamp_level, const GridSpec& grid) {
    if (clamp_level > 0.0) return truncate_initial(ic, clamp_level, grid).field;
    return sample_field(grid, [&](double x) { return ic(x); });
}

}  // namespace heatpath
