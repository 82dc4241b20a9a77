#pragma once

// Convergence sweeps, the validation suite and CSV / plot-data emission.

#include "bsde2/config.hpp"
#include "bsde2/core.hpp"
#include "bsde2/fd_solver.hpp"
#include "bsde2/increments.hpp"
#include "bsde2/models.hpp"
#include "bsde2/parallel.hpp"
#include "bsde2/pde_benchmark.hpp"
#include "bsde2/proba_solver.hpp"
#include "bsde2/tree_dp.hpp"

#include <cmath>
#include <iomanip>
#include <locale>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace bsde2 {

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kCsvHeader = "scheme,dt,dx,paths,seed,y0,runtime_s,monotonicity_margin";

struct CsvOptions {
    bool stable = false;  // write runtime_s = 0 so that output is byte-stable
};

namespace detail {

inline std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace detail

inline std::string csv_row(const SolveResult& r, const CsvOptions& opt = {}) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << scheme_name(r.scheme) << ',' << detail::format_real(r.dt) << ',' << detail::format_real(r.dx) << ','
       << r.paths << ',' << r.seed << ',' << detail::format_real(r.y0) << ','
       << detail::format_real(opt.stable ? 0.0 : r.runtime_s) << ',' << detail::format_real(r.monotonicity_margin);
    return os.str();
}

/// Header plus one row, with the diagnostics appended as extra columns.
inline void write_result_csv(std::ostream& out, const SolveResult& r, const CsvOptions& opt = {}) {
    out << kCsvHeader;
    for (const auto& [k, v] : r.diagnostics) out << ',' << k;
    out << '\n' << csv_row(r, opt);
    for (const auto& [k, v] : r.diagnostics) out << ',' << detail::format_real(v);
    out << '\n';
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SolveResult>& rows, const CsvOptions& opt = {}) {
    out << kCsvHeader << '\n';
    for (const auto& r : rows) out << csv_row(r, opt) << '\n';
}

/// One gnuplot data block per scheme (select with `index`), columns dt y0.
inline void write_plot_data(std::ostream& out, const std::vector<SolveResult>& rows) {
    std::vector<Scheme> order;
    for (const auto& r : rows) {
        if (std::find(order.begin(), order.end(), r.scheme) == order.end()) order.push_back(r.scheme);
    }
    bool first = true;
    for (Scheme s : order) {
        if (!first) out << "\n\n";
        first = false;
        out << "# " << scheme_name(s) << "\n# dt y0\n";
        for (const auto& r : rows) {
            if (r.scheme == s) out << detail::format_real(r.dt) << ' ' << detail::format_real(r.y0) << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Running one scheme
// ---------------------------------------------------------------------------

struct SchemeRequest {
    Scheme scheme = Scheme::FiniteDifference;
    TimeGrid grid{1.0, 100};
    std::uint64_t seed = 1;
    std::size_t workers = 0;
};

inline SolveResult run_scheme(const RunConfig& cfg, const SchemeRequest& req) {
    const ModelConfig& mc = cfg.model;
    const Generator gen = make_generator(mc);
    const TerminalCondition term = make_terminal(mc);
    const ControlSet cs = control_set(mc);
    switch (req.scheme) {
        case Scheme::FiniteDifference: {
            LatticeConfig lc = cfg.fd;
            lc.workers = req.workers;
            return fd_solve(gen, term, cs, req.grid, mc.x0, lc);
        }
        case Scheme::PdeSplitting: {
            PdeLatticeConfig lc = cfg.pde;
            lc.workers = req.workers;
            return pde_split_solve(gen, term, cs, req.grid, mc.x0, lc);
        }
        case Scheme::Probabilistic: {
            ProbaConfig pc = cfg.proba;
            pc.seed = req.seed;
            pc.workers = req.workers;
            return proba_solve(gen, term, cs, req.grid, mc.x0, pc);
        }
        case Scheme::TreeDP: {
            const double dx = cfg.fd.dx > 0.0 ? cfg.fd.dx : cfl_space_step(cs, req.grid.dt());
            const auto fam = IncrementFamily::trinomial(cs.a_hi(), req.grid.dt(), dx);
            TreeOptions opt;
            opt.x0 = mc.x0;
            opt.mode = cfg.tree.mode;
            opt.m_rule = cfg.tree.m_rule;
            return solve_tree(gen, term, cs, fam, req.grid, opt).result;
        }
    }
    throw Error(ErrorKind::Config, "unknown scheme");
}

/// Cheap checks of every scheme precondition, so that a sweep fails before
/// doing any work.
inline void check_scheme_preconditions(const RunConfig& cfg, Scheme scheme, const TimeGrid& grid) {
    const ModelConfig& mc = cfg.model;
    const Generator gen = make_generator(mc);
    const ControlSet cs = control_set(mc);
    const double dt = grid.dt();
    switch (scheme) {
        case Scheme::FiniteDifference:
            detail::check_fd_preconditions(gen, cs, dt, cfg.fd.dx > 0.0 ? cfg.fd.dx : cfl_space_step(cs, dt));
            break;
        case Scheme::PdeSplitting: {
            const double dx = cfg.pde.dx > 0.0 ? cfg.pde.dx : cfl_space_step(cs, dt);
            if (cs.a_hi() * dt / (dx * dx) > 0.5 + 1e-12) {
                std::ostringstream os;
                os << "a_hi dt / dx^2 = " << cs.a_hi() * dt / (dx * dx) << " > 1/2";
                throw Error(ErrorKind::CflViolation, os.str());
            }
            break;
        }
        case Scheme::Probabilistic:
            if (gen.depends_on_z) {
                throw Error(ErrorKind::ZDependentGenerator, "the probabilistic scheme needs a z-independent generator");
            }
            if (cs.a_hi() > 3.0 * cs.a_lo()) throw Error(ErrorKind::DomainViolation, "a_hi exceeds 3 a_lo");
            if (cfg.proba.n_paths < 10 * cfg.proba.basis.size()) {
                throw Error(ErrorKind::Config, "n_paths below 10 x basis size");
            }
            break;
        case Scheme::TreeDP: {
            if (grid.steps() > 12) throw Error(ErrorKind::TreeTooLarge, "n exceeds the tree cap 12");
            const double dx = cfg.fd.dx > 0.0 ? cfg.fd.dx : cfl_space_step(cs, dt);
            const auto fam = IncrementFamily::trinomial(cs.a_hi(), dt, dx);
            if (cfg.tree.mode == TreeMode::Implicit && gen.lip_y * dt >= 1.0) {
                throw Error(ErrorKind::NoContraction, "lip_y dt >= 1");
            }
            (void)fam;
            break;
        }
    }
}

namespace detail {

inline Error tag_error(const Error& e, Scheme s, double dt) {
    std::ostringstream os;
    os << "scheme=" << scheme_name(s) << " dt=" << format_real(dt) << ": ";
    const std::string msg = e.what();
    os << msg.substr(msg.find(": ") + 2);
    return Error(e.kind(), os.str());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// One row per (scheme, dt, seed) in that order. Seeds apply to the
/// probabilistic scheme only. Cells run in parallel when more than one worker
/// is available; row order never depends on completion order.
inline std::vector<SolveResult> run_sweep(const RunConfig& cfg, std::size_t workers = 0) {
    const SweepSpec& sp = cfg.sweep;
    if (sp.dt_list.empty()) throw Error(ErrorKind::Config, "sweep needs a nonempty dt_list");
    if (sp.schemes.empty()) throw Error(ErrorKind::Config, "sweep needs at least one scheme");
    for (std::size_t i = 1; i < sp.dt_list.size(); ++i) {
        if (!(sp.dt_list[i] < sp.dt_list[i - 1])) throw Error(ErrorKind::Config, "dt_list must be strictly decreasing");
    }
    const std::vector<std::uint64_t> seeds = sp.seeds.empty() ? std::vector<std::uint64_t>{cfg.proba.seed} : sp.seeds;

    std::vector<SchemeRequest> cells;
    for (Scheme s : sp.schemes) {
        for (double dt : sp.dt_list) {
            TimeGrid grid = [&] {
                try {
                    return TimeGrid::from_step(cfg.model.horizon, dt);
                } catch (const Error& e) {
                    throw detail::tag_error(e, s, dt);
                }
            }();
            try {
                check_scheme_preconditions(cfg, s, grid);
            } catch (const Error& e) {
                throw detail::tag_error(e, s, dt);
            }
            if (s == Scheme::Probabilistic) {
                for (auto seed : seeds) cells.push_back({s, grid, seed, 0});
            } else {
                cells.push_back({s, grid, cfg.proba.seed, 0});
            }
        }
    }

    const std::size_t w = workers ? workers : default_thread_count();
    std::vector<SolveResult> rows(cells.size());
    // one level of parallelism: across cells when there are several workers
    const std::size_t inner = w > 1 ? 1 : w;
    parallel_for(0, cells.size(), w, [&](std::size_t i) {
        SchemeRequest req = cells[i];
        req.workers = inner;
        try {
            rows[i] = run_scheme(cfg, req);
        } catch (const Error& e) {
            throw detail::tag_error(e, req.scheme, req.grid.dt());
        }
        if (req.scheme != Scheme::Probabilistic) rows[i].seed = 0;
    });
    return rows;
}

// ---------------------------------------------------------------------------
// Validation suite
// ---------------------------------------------------------------------------

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<CheckResult> checks;

    bool passed() const {
        for (const auto& c : checks) {
            if (!c.pass) return false;
        }
        return true;
    }
};

struct ValidationOptions {
    double dt = 0.02;
    double variance_scale = 1.0;  // fault injection: variance target scale
    bool cfl_breach = false;      // fault injection: halve dx below the CFL step
};

namespace detail {

inline std::string describe(const MomentReport& r) {
    std::ostringstream os;
    if (r.failures.empty()) {
        os << r.rows.size() << " controls ok";
    } else {
        for (const auto& f : r.failures) os << f.check << " a=" << format_real(f.a) << " residual=" << format_real(f.residual) << "; ";
    }
    return os.str();
}

}  // namespace detail

inline ValidationReport run_validation(const ModelConfig& base = {}, const ValidationOptions& opt = {}) {
    ValidationReport rep;
    auto add = [&](std::string name, bool pass, std::string detail) {
        rep.checks.push_back({std::move(name), pass, std::move(detail)});
    };
    const ControlSet cs = control_set(base);
    const double dt = opt.dt;
    MomentCheckOptions mopt;
    mopt.variance_scale = opt.variance_scale;

    // moment contract for every family
    {
        const double dx = cfl_space_step(cs, dt) * (opt.cfl_breach ? 0.5 : 1.0);
        try {
            const auto tri = validate_moments(IncrementFamily::trinomial(cs.a_hi(), dt, dx), cs, mopt);
            add("moments_trinomial", tri.passed(), detail::describe(tri));
        } catch (const Error& e) {
            add("moments_trinomial", false, e.what());
        }
        const auto gau = validate_moments(IncrementFamily::gaussian(cs.a_hi(), dt), cs, mopt);
        add("moments_gaussian", gau.passed(), detail::describe(gau));
        if (cs.a_hi() <= 3.0 * cs.a_lo()) {
            const auto ftw = validate_moments(IncrementFamily::ftw(cs.a_lo(), cs.a_hi(), dt), cs, mopt);
            add("moments_ftw", ftw.passed(), detail::describe(ftw));
        } else {
            add("moments_ftw", false, "a_hi exceeds 3 a_lo");
        }
    }

    // tree vs fd on matched lattices at n = 3
    auto tree_vs_fd = [&](const std::string& name, const Generator& gen, const TerminalCondition& term) {
        try {
            const TimeGrid grid(0.3, 3);
            const double dx = cfl_space_step(cs, grid.dt()) * (opt.cfl_breach ? 0.5 : 1.0);
            LatticeConfig lc;
            lc.dx = dx;
            const double fd = fd_solve(gen, term, cs, grid, base.x0, lc).y0;
            TreeOptions to;
            to.x0 = base.x0;
            const double tree =
                solve_tree(gen, term, cs, IncrementFamily::trinomial(cs.a_hi(), grid.dt(), dx), grid, to).result.y0;
            const double diff = std::abs(fd - tree);
            add(name, diff <= 1e-12, "|fd - tree| = " + detail::format_real(diff));
        } catch (const Error& e) {
            add(name, false, detail::tag_error(e, Scheme::FiniteDifference, 0.1).what());
        }
    };
    tree_vs_fd("tree_vs_fd_f1", f1_generator(base.k_lo, base.k_hi, cs.a_hi()), asian_spread_terminal(base.k1, base.k2));
    tree_vs_fd("tree_vs_fd_zero", zero_generator(), asian_spread_terminal(base.k1, base.k2));

    // G-expectation closed forms with f = 0 and a convex payoff in x
    {
        const TimeGrid grid = TimeGrid::from_step(1.0, dt);
        LatticeConfig lc;
        lc.m_sd = 1e-6;  // the payoff ignores m
        if (opt.cfl_breach) lc.dx = 0.5 * cfl_space_step(cs, dt);
        auto closed = [](double a) { return std::sqrt(a) * std::sqrt(2.0 / std::numbers::pi); };
        try {
            const auto full = fd_solve(zero_generator(), abs_terminal(), cs, grid, 0.0, lc);
            const double err_full = std::abs(full.y0 - closed(cs.a_hi()));
            add("g_expectation_full_set", err_full <= 2.0 * full.dx, "error " + detail::format_real(err_full));
            const ControlSet single(cs.a_lo(), cs.a_lo(), 1);
            LatticeConfig ls = lc;
            ls.dx = full.dx;
            const auto one = fd_solve(zero_generator(), abs_terminal(), single, grid, 0.0, ls);
            const double err_one = std::abs(one.y0 - closed(cs.a_lo()));
            add("g_expectation_singleton", err_one <= 2.0 * one.dx, "error " + detail::format_real(err_one));
        } catch (const Error& e) {
            add("g_expectation", false, detail::tag_error(e, Scheme::FiniteDifference, dt).what());
        }
        const ControlSet two(cs.a_lo(), cs.a_hi(), 2);
        const double gp = g_function(0, 0, 0, 0, 2.0, zero_generator(), two, dt);
        const double gm = g_function(0, 0, 0, 0, -2.0, zero_generator(), two, dt);
        add("g_function_closed_form", std::abs(gp - cs.a_hi()) <= 1e-15 && std::abs(gm + cs.a_lo()) <= 1e-15,
            "G(2) = " + detail::format_real(gp) + ", G(-2) = " + detail::format_real(gm));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Calibration of the f2 drift parameter
// ---------------------------------------------------------------------------

struct CalibrationPoint {
    double b = 0.0;
    double y0 = 0.0;
};

struct Calibration {
    double b = 0.0;
    double y0 = 0.0;
    std::vector<CalibrationPoint> scan;
};

/// Scans b over [b_lo, b_hi] and returns the value whose fd solution is
/// closest to target.
inline Calibration calibrate_b(ModelConfig mc, const TimeGrid& grid, double target, double b_lo = 0.0,
                               double b_hi = 0.2, double step = 0.005, const LatticeConfig& lc = {}) {
    if (!(step > 0.0) || b_hi < b_lo) throw Error(ErrorKind::Config, "invalid calibration range");
    mc.model = ModelId::F2;
    Calibration out;
    double best = std::numeric_limits<double>::infinity();
    const auto count = static_cast<std::size_t>(std::floor((b_hi - b_lo) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) {
        mc.b = b_lo + step * static_cast<double>(i);
        const double y0 = fd_solve(make_generator(mc), make_terminal(mc), control_set(mc), grid, mc.x0, lc).y0;
        out.scan.push_back({mc.b, y0});
        if (std::abs(y0 - target) < best) {
            best = std::abs(y0 - target);
            out.b = mc.b;
            out.y0 = y0;
        }
    }
    return out;
}

/// Process exit code for an error kind.
inline int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::Config: return 2;
        case ErrorKind::Validation: return 4;
        default: return 3;
    }
}

}  // namespace bsde2
