#pragma once

// Monte-Carlo regression scheme. Paths are simulated under the base
// diffusion sigma0 = sqrt(a0); the backward step is
//
//   Y_k = E_k[Y_{k+1}] + dt * G(t_k, x, m, E_k[Y_{k+1}], Gamma_k),
//   Gamma_k = E_k[(Y_{k+1} - E_k[Y_{k+1}]) (dW^2 - dt) / (dt^2 a0)],
//   G(t, x, m, y, g) = sup_a ( f(t, x, m, y + (a - a0) g dt / 2, 0, a) + (a - a0) g / 2 ),
//
// with both conditional expectations estimated by least squares.

#include "bsde2/core.hpp"
#include "bsde2/parallel.hpp"
#include "bsde2/random.hpp"
#include "bsde2/regression.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <vector>

namespace bsde2 {

/// Second-order weight (dW^2 - dt) / (dt^2 a0).
inline double gamma_weight(double dw, double dt, double a0) { return (dw * dw - dt) / (dt * dt * a0); }

/// sup over the control grid of f(t, x, m, y + (a - a0) gamma dt / 2, 0, a) + (a - a0) gamma / 2.
/// With a0 = 0 this is the plain Hamiltonian sup_a(f(.., y + a gamma dt / 2, ..) + a gamma / 2).
inline double g_function(double t, double x, double m, double y, double gamma, const Generator& gen,
                         const std::vector<double>& controls, double dt, double a0 = 0.0) {
    if (gen.depends_on_z) {
        throw Error(ErrorKind::ZDependentGenerator, "the probabilistic scheme needs a z-independent generator");
    }
    double best = -std::numeric_limits<double>::infinity();
    for (double a : controls) {
        const double half = 0.5 * (a - a0) * gamma;
        best = std::max(best, gen(t, x, m, y + half * dt, 0.0, a) + half);
    }
    return best;
}

inline double g_function(double t, double x, double m, double y, double gamma, const Generator& gen,
                         const ControlSet& cs, double dt, double a0 = 0.0) {
    return g_function(t, x, m, y, gamma, gen, make_control_grid(cs), dt, a0);
}

/// Paths of x = x0 + sigma0 W on the time grid with the left-endpoint
/// running integral m. Arrays are step-major: index k * n_paths + p.
struct SimulatedEnsemble {
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    std::uint64_t seed = 0;
    double dt = 0.0;
    double sigma0 = 0.0;
    std::vector<double> x;   // (n_steps + 1) * n_paths
    std::vector<double> m;   // (n_steps + 1) * n_paths
    std::vector<double> dw;  // n_steps * n_paths, increment over [t_k, t_{k+1}]

    std::span<const double> x_at(std::size_t k) const { return {x.data() + k * n_paths, n_paths}; }
    std::span<const double> m_at(std::size_t k) const { return {m.data() + k * n_paths, n_paths}; }
    std::span<const double> dw_at(std::size_t k) const { return {dw.data() + k * n_paths, n_paths}; }
};

inline SimulatedEnsemble simulate_ensemble(double x0, double a0, const TimeGrid& grid, std::size_t n_paths,
                                           std::uint64_t seed, std::size_t workers = 0) {
    SimulatedEnsemble e;
    e.n_paths = n_paths;
    e.n_steps = grid.steps();
    e.seed = seed;
    e.dt = grid.dt();
    e.sigma0 = std::sqrt(a0);
    e.x.resize((e.n_steps + 1) * n_paths);
    e.m.resize((e.n_steps + 1) * n_paths);
    e.dw.resize(e.n_steps * n_paths);
    const double sqrt_dt = std::sqrt(e.dt);
    parallel_for(0, n_paths, workers ? workers : default_thread_count(), [&](std::size_t p) {
        double x = x0;
        double m = 0.0;
        e.x[p] = x;
        e.m[p] = m;
        for (std::size_t k = 0; k < e.n_steps; ++k) {
            const double dw = sqrt_dt * counter_normal(seed, p, k);
            e.dw[k * n_paths + p] = dw;
            m += x * e.dt;
            x += e.sigma0 * dw;
            e.x[(k + 1) * n_paths + p] = x;
            e.m[(k + 1) * n_paths + p] = m;
        }
    });
    return e;
}

struct ProbaConfig {
    std::size_t n_paths = 200000;
    std::uint64_t seed = 1;
    RegressionBasis basis{2};
    std::size_t workers = 0;
};

inline SolveResult proba_solve(const Generator& gen, const TerminalCondition& term, const ControlSet& cs,
                               const TimeGrid& grid, double x0, const ProbaConfig& cfg = {}) {
    const auto start = std::chrono::steady_clock::now();
    if (gen.depends_on_z) {
        throw Error(ErrorKind::ZDependentGenerator, "the probabilistic scheme needs a z-independent generator");
    }
    if (cfg.basis.degree < 0) throw Error(ErrorKind::Config, "regression degree must be nonnegative");
    if (cfg.n_paths < 10 * cfg.basis.size()) {
        std::ostringstream os;
        os << "n_paths = " << cfg.n_paths << " < 10 x basis size " << cfg.basis.size();
        throw Error(ErrorKind::Config, os.str());
    }
    const double a0 = cs.a_lo();
    if (cs.a_hi() > 3.0 * a0) {
        std::ostringstream os;
        os << "a_hi = " << cs.a_hi() << " exceeds 3 a0 = " << 3.0 * a0;
        throw Error(ErrorKind::DomainViolation, os.str());
    }
    const std::size_t workers = cfg.workers ? cfg.workers : default_thread_count();
    const std::size_t n = cfg.n_paths;
    const double dt = grid.dt();
    const auto controls = make_control_grid(cs);

    const SimulatedEnsemble ens = simulate_ensemble(x0, a0, grid, n, cfg.seed, workers);

    // a priori bound used to truncate regressed values
    const double c = std::max(gen.lip_y, gen.bound_at_zero);
    const double bound = std::exp(c * grid.horizon()) * (term.sup_norm + c * grid.horizon());

    std::vector<double> y(n), e(n), r(n);
    {
        const auto xs = ens.x_at(grid.steps());
        const auto ms = ens.m_at(grid.steps());
        parallel_for(0, n, workers, [&](std::size_t p) { y[p] = term(xs[p], ms[p]); });
    }

    double max_condition = 1.0;
    double max_weight_z = 0.0;
    std::size_t reductions = 0;
    std::size_t truncations = 0;
    for (std::size_t k = grid.steps(); k-- > 0;) {
        const double t = grid.node(k);
        const auto xs = ens.x_at(k);
        const auto ms = ens.m_at(k);
        const auto dws = ens.dw_at(k);

        const Regressor reg(xs, ms, cfg.basis.degree, workers);
        max_condition = std::max(max_condition, reg.condition());
        if (reg.reduced()) ++reductions;

        const Eigen::VectorXd ce = reg.fit(y);
        parallel_for(0, n, workers, [&](std::size_t p) {
            e[p] = reg.predict(p, ce);
            r[p] = (y[p] - e[p]) * gamma_weight(dws[p], dt, a0);
        });
        const Eigen::VectorXd cg = reg.fit(r);

        // E[w] = 0 sanity: z-score of the sample mean of the weights
        const Eigen::Vector2d wsum = detail::chunked_sum(
            n, workers, Eigen::Vector2d::Zero().eval(), [&](std::size_t lo, std::size_t hi, Eigen::Vector2d& acc) {
                for (std::size_t p = lo; p < hi; ++p) {
                    const double w = gamma_weight(dws[p], dt, a0);
                    acc[0] += w;
                    acc[1] += w * w;
                }
            });
        const double w_mean = wsum[0] / static_cast<double>(n);
        const double w_var = wsum[1] / static_cast<double>(n) - w_mean * w_mean;
        max_weight_z = std::max(max_weight_z, std::abs(w_mean) / std::sqrt(w_var / static_cast<double>(n)));

        std::vector<unsigned char> clipped(n, 0);
        parallel_for(0, n, workers, [&](std::size_t p) {
            const double gamma = reg.predict(p, cg);
            double v = e[p] + dt * g_function(t, xs[p], ms[p], e[p], gamma, gen, controls, dt, a0);
            if (std::abs(v) > bound) {
                v = std::clamp(v, -bound, bound);
                clipped[p] = 1;
            }
            y[p] = v;
        });
        for (unsigned char cl : clipped) truncations += cl;
    }

    const double y0 = detail::chunked_sum(n, workers, 0.0, [&](std::size_t lo, std::size_t hi, double& acc) {
                          for (std::size_t p = lo; p < hi; ++p) acc += y[p];
                      }) /
                      static_cast<double>(n);

    SolveResult res;
    res.y0 = y0;
    res.scheme = Scheme::Probabilistic;
    res.n_steps = grid.steps();
    res.dt = dt;
    res.paths = n;
    res.seed = cfg.seed;
    res.monotonicity_margin = 1.0;  // z-independent generator
    res.diagnostics["a0"] = a0;
    res.diagnostics["regression_condition_max"] = max_condition;
    res.diagnostics["degree_reductions"] = static_cast<double>(reductions);
    res.diagnostics["truncated_values"] = static_cast<double>(truncations);
    res.diagnostics["gamma_weight_max_z"] = max_weight_z;
    if (reductions > 0) {
        std::ostringstream os;
        os << "warning: regression degree reduced at " << reductions << " step(s)";
        res.notes.push_back(os.str());
    }
    res.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

}  // namespace bsde2
