// Command-line front end: single solves, sweeps and validation.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical precondition
// violation, 4 validation failure.

#include "bsde2/bsde2.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace {

struct CommonFlags {
    std::string config;
    std::string output;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<int> degree;
    std::optional<double> dt;
    std::optional<std::size_t> n;
    bool stable = false;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config, "Configuration file (key = value with sections)");
    app->add_option("--output", f.output, "Output file (default: stdout)");
    app->add_option("--seed", f.seed, "Random seed for the probabilistic scheme");
    app->add_option("--dt", f.dt, "Time step (overrides the config)");
    app->add_option("--n", f.n, "Number of time steps (overrides the config)");
    app->add_flag("--stable", f.stable, "Write runtime_s = 0 for byte-stable output");
}

bsde2::RunConfig load(const CommonFlags& f) {
    bsde2::RunConfig cfg = f.config.empty() ? bsde2::RunConfig{} : bsde2::load_config(f.config);
    if (f.seed) cfg.proba.seed = *f.seed;
    if (f.paths) cfg.proba.n_paths = *f.paths;
    if (f.degree) cfg.proba.basis.degree = *f.degree;
    if (f.dt) {
        cfg.dt = *f.dt;
        cfg.n.reset();
    }
    if (f.n) {
        cfg.n = *f.n;
        cfg.dt.reset();
    }
    return cfg;
}

/// Runs fn with an output stream bound to --output or stdout.
template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
    if (path.empty()) {
        fn(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw bsde2::Error(bsde2::ErrorKind::Config, "cannot open output file '" + path + "'");
    fn(out);
}

void print_notes(const bsde2::SolveResult& r) {
    for (const auto& note : r.notes) std::cerr << note << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"2BSDE solvers under volatility uncertainty"};
    app.require_subcommand(1);

    CommonFlags f;
    std::string family = "trinomial";
    bool debug = false;
    double inject_variance = 1.0;
    bool inject_cfl = false;
    double target = 0.129, b_lo = 0.0, b_hi = 0.2, b_step = 0.005;

    auto* fd = app.add_subcommand("solve-fd", "Finite-difference scheme on the (x, m) lattice");
    auto* pde = app.add_subcommand("solve-pde", "Splitting benchmark for the degenerate HJB equation");
    auto* proba = app.add_subcommand("solve-proba", "Monte-Carlo regression scheme");
    auto* tree = app.add_subcommand("solve-tree", "Exact path-tree dynamic programming (n <= 12)");
    auto* sweep = app.add_subcommand("sweep", "Run a dt sweep and write CSV plus plot data");
    auto* vinc = app.add_subcommand("validate-increments", "Moment table of an increment family");
    auto* val = app.add_subcommand("validate", "Full validation suite");
    auto* cal = app.add_subcommand("calibrate-b", "Scan the f2 drift parameter b against a target value");

    for (auto* sc : {fd, pde, proba, tree, sweep, vinc, val, cal}) add_common(sc, f);
    proba->add_option("--paths", f.paths, "Number of simulated paths");
    proba->add_option("--degree", f.degree, "Total degree of the regression basis");
    sweep->add_option("--paths", f.paths, "Number of simulated paths");
    sweep->add_option("--degree", f.degree, "Total degree of the regression basis");
    tree->add_flag("--debug", debug, "Dump every node (k, path, m, y, z, a*) to stderr");
    vinc->add_option("--family", family, "trinomial, gaussian, ftw or all")
        ->check(CLI::IsMember({"trinomial", "gaussian", "ftw", "all"}));
    val->add_option("--inject-variance-scale", inject_variance, "Scale the variance target (fault injection)");
    val->add_flag("--inject-cfl-breach", inject_cfl, "Halve dx below the CFL step (fault injection)");
    cal->add_option("--target", target, "Target y0");
    cal->add_option("--b-lo", b_lo, "Scan start");
    cal->add_option("--b-hi", b_hi, "Scan end");
    cal->add_option("--b-step", b_step, "Scan step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const bsde2::RunConfig cfg = load(f);
        const bsde2::CsvOptions csv{f.stable};

        auto solve = [&](bsde2::Scheme s) {
            bsde2::SchemeRequest req{s, cfg.time_grid(), cfg.proba.seed, 0};
            bsde2::SolveResult r;
            try {
                r = bsde2::run_scheme(cfg, req);
            } catch (const bsde2::Error& e) {
                throw bsde2::detail::tag_error(e, s, req.grid.dt());
            }
            print_notes(r);
            with_output(f.output, [&](std::ostream& out) { bsde2::write_result_csv(out, r, csv); });
        };

        if (fd->parsed()) solve(bsde2::Scheme::FiniteDifference);
        if (pde->parsed()) solve(bsde2::Scheme::PdeSplitting);
        if (proba->parsed()) solve(bsde2::Scheme::Probabilistic);

        if (tree->parsed()) {
            const bsde2::ModelConfig& mc = cfg.model;
            const bsde2::TimeGrid grid = cfg.time_grid();
            const bsde2::ControlSet cs = bsde2::control_set(mc);
            const double dx = cfg.fd.dx > 0.0 ? cfg.fd.dx : bsde2::cfl_space_step(cs, grid.dt());
            bsde2::TreeOptions opt;
            opt.x0 = mc.x0;
            opt.mode = cfg.tree.mode;
            opt.m_rule = cfg.tree.m_rule;
            opt.record_nodes = debug;
            const auto sol = bsde2::solve_tree(bsde2::make_generator(mc), bsde2::make_terminal(mc), cs,
                                               bsde2::IncrementFamily::trinomial(cs.a_hi(), grid.dt(), dx), grid, opt);
            print_notes(sol.result);
            if (debug) {
                std::cerr << "k,path,m,y,z,a_star\n";
                for (const auto& nd : sol.nodes) {
                    std::cerr << nd.k << ',';
                    for (std::size_t i = 0; i < nd.path.size(); ++i) {
                        std::cerr << (i ? ";" : "") << bsde2::detail::format_real(nd.path[i]);
                    }
                    std::cerr << ',' << bsde2::detail::format_real(nd.m) << ',' << bsde2::detail::format_real(nd.y)
                              << ',' << bsde2::detail::format_real(nd.z) << ','
                              << bsde2::detail::format_real(nd.a_star) << '\n';
                }
            }
            with_output(f.output, [&](std::ostream& out) { bsde2::write_result_csv(out, sol.result, csv); });
        }

        if (sweep->parsed()) {
            const auto rows = bsde2::run_sweep(cfg);
            const std::string out_path = f.output.empty() ? cfg.sweep.output : f.output;
            with_output(out_path, [&](std::ostream& out) { bsde2::write_sweep_csv(out, rows, csv); });
            std::string plot_path = cfg.sweep.plot_data;
            if (plot_path.empty() && !out_path.empty()) {
                const auto dot = out_path.find_last_of('.');
                plot_path = (dot == std::string::npos ? out_path : out_path.substr(0, dot)) + ".dat";
            }
            if (!plot_path.empty()) {
                with_output(plot_path, [&](std::ostream& out) { bsde2::write_plot_data(out, rows); });
            }
        }

        if (vinc->parsed()) {
            const bsde2::ControlSet cs = bsde2::control_set(cfg.model);
            const double dt = cfg.time_grid().dt();
            std::vector<bsde2::IncrementFamily> fams;
            if (family == "trinomial" || family == "all") {
                fams.push_back(bsde2::IncrementFamily::trinomial(
                    cs.a_hi(), dt, cfg.fd.dx > 0.0 ? cfg.fd.dx : bsde2::cfl_space_step(cs, dt)));
            }
            if (family == "gaussian" || family == "all") fams.push_back(bsde2::IncrementFamily::gaussian(cs.a_hi(), dt));
            if (family == "ftw" || family == "all") fams.push_back(bsde2::IncrementFamily::ftw(cs.a_lo(), cs.a_hi(), dt));
            bool ok = true;
            with_output(f.output, [&](std::ostream& out) {
                for (const auto& fam : fams) {
                    if (fams.size() > 1) out << "# " << bsde2::to_string(fam.kind()) << '\n';
                    out << "a,mean,var,var_target,moment_2plus_delta,bound,pass\n";
                    const auto rep = bsde2::validate_moments(fam, cs);
                    ok = ok && rep.passed();
                    for (const auto& r : rep.rows) {
                        using bsde2::detail::format_real;
                        out << format_real(r.a) << ',' << format_real(r.mean)
                            << ',' << format_real(r.var) << ',' << format_real(r.var_target) << ','
                            << format_real(r.moment) << ',' << format_real(r.bound) << ','
                            << (r.pass ? "true" : "false") << '\n';
                    }
                    for (const auto& fl : rep.failures) {
                        std::cerr << bsde2::to_string(fam.kind()) << ": " << fl.check << " failed at a = " << fl.a
                                  << " (residual " << fl.residual << ")\n";
                    }
                }
            });
            if (!ok) return 4;
        }

        if (val->parsed()) {
            bsde2::ValidationOptions vo;
            vo.variance_scale = inject_variance;
            vo.cfl_breach = inject_cfl;
            if (cfg.dt) vo.dt = *cfg.dt;
            const auto rep = bsde2::run_validation(cfg.model, vo);
            with_output(f.output, [&](std::ostream& out) {
                for (const auto& c : rep.checks) out << (c.pass ? "PASS " : "FAIL ") << c.name << " - " << c.detail << '\n';
            });
            if (!rep.passed()) return 4;
        }

        if (cal->parsed()) {
            bsde2::LatticeConfig lc = cfg.fd;
            const auto res = bsde2::calibrate_b(cfg.model, cfg.time_grid(), target, b_lo, b_hi, b_step, lc);
            with_output(f.output, [&](std::ostream& out) {
                out << "b,y0\n";
                for (const auto& p : res.scan) {
                    out << bsde2::detail::format_real(p.b) << ',' << bsde2::detail::format_real(p.y0) << '\n';
                }
            });
            std::cerr << "best b = " << res.b << " (y0 = " << res.y0 << ")\n";
        }
    } catch (const bsde2::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return bsde2::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
