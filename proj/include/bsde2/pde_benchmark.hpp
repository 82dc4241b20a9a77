#pragma once

// Splitting solver for the degenerate HJB equation
//
//   v_t + x v_m + sup_a ( a/2 v_xx + f(t, x, m, v, v_x, a) ) = 0,
//
// alternating an explicit monotone HJB step in x with a semi-Lagrangian
// advection step in m on a fixed (x, m) lattice.

#include "bsde2/core.hpp"
#include "bsde2/increments.hpp"
#include "bsde2/parallel.hpp"
#include "bsde2/tree_dp.hpp"
#include "bsde2/value_grid.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace bsde2 {

enum class SplitOrder { HjbThenAdvection, Strang };

struct PdeLatticeConfig {
    double dx = 0.0;       // 0 selects sqrt(2 a_hi dt)
    double x_sd = 6.0;
    double m_ratio = 2.0;  // dm = m_ratio * dx * dt
    double m_sd = 6.0;
    SplitOrder order = SplitOrder::HjbThenAdvection;
    std::size_t workers = 0;
};

/// Explicit HJB substep over dt: v + dt sup_a(a/2 D2v + f(t, x, m, v, Dv, a)),
/// Neumann in x.
inline ValueGrid hjb_substep(const ValueGrid& v, double t, double dt, const Generator& gen,
                             const std::vector<double>& controls, std::size_t workers) {
    const UniformAxis& xa = v.x_axis();
    const UniformAxis& ma = v.m_axis();
    ValueGrid out(xa, ma);
    const std::size_t last = xa.count - 1;
    const double inv_dx2 = 1.0 / (xa.step * xa.step);
    const double inv_2dx = 0.5 / xa.step;
    parallel_for(0, xa.count, workers, [&](std::size_t i) {
        const double x = xa.at(i);
        const std::size_t up = std::min(i + 1, last);
        const std::size_t dn = i == 0 ? 0 : i - 1;
        for (std::size_t j = 0; j < ma.count; ++j) {
            const double m = ma.at(j);
            const double c = v(i, j);
            const double d2 = (v(up, j) - 2.0 * c + v(dn, j)) * inv_dx2;
            const double d1 = (v(up, j) - v(dn, j)) * inv_2dx;
            double best = -std::numeric_limits<double>::infinity();
            for (double a : controls) best = std::max(best, 0.5 * a * d2 + gen(t, x, m, c, d1, a));
            out(i, j) = c + dt * best;
        }
    });
    return out;
}

/// Semi-Lagrangian advection substep over tau: v(x, m) <- v(x, m + x tau).
inline ValueGrid advection_substep(const ValueGrid& v, double tau, std::size_t workers) {
    const UniformAxis& xa = v.x_axis();
    const UniformAxis& ma = v.m_axis();
    ValueGrid out(xa, ma);
    parallel_for(0, xa.count, workers, [&](std::size_t i) {
        const double shift = xa.at(i) * tau;
        for (std::size_t j = 0; j < ma.count; ++j) out(i, j) = v.at_m(i, ma.at(j) + shift);
    });
    return out;
}

inline SolveResult pde_split_solve(const Generator& gen, const TerminalCondition& term, const ControlSet& cs,
                                   const TimeGrid& grid, double x0, const PdeLatticeConfig& cfg = {}) {
    const auto start = std::chrono::steady_clock::now();
    const double dt = grid.dt();
    const double horizon = grid.horizon();
    const double dx = cfg.dx > 0.0 ? cfg.dx : std::sqrt(2.0 * cs.a_hi() * dt);
    const double p = cs.a_hi() * dt / (dx * dx);
    if (p > 0.5 + 1e-12) {
        std::ostringstream os;
        os << "a_hi dt / dx^2 = " << p << " > 1/2 (dt = " << dt << ", dx = " << dx << ")";
        throw Error(ErrorKind::CflViolation, os.str());
    }
    if (!(cfg.m_ratio > 0.0) || !(cfg.x_sd > 0.0) || !(cfg.m_sd > 0.0)) {
        throw Error(ErrorKind::Config, "lattice widths and m_ratio must be positive");
    }
    const std::size_t workers = cfg.workers ? cfg.workers : default_thread_count();

    const auto nx = static_cast<std::size_t>(std::ceil(cfg.x_sd * std::sqrt(cs.a_hi() * horizon) / dx));
    const UniformAxis xa{x0 - static_cast<double>(nx) * dx, dx, 2 * nx + 1};
    const double dm = cfg.m_ratio * dx * dt;
    const double half_width = cfg.m_sd * std::sqrt(cs.a_hi()) * std::pow(horizon, 1.5) / std::sqrt(3.0);
    const double m_lo = std::min(0.0, x0 * horizon) - half_width;
    const double m_hi = std::max(0.0, x0 * horizon) + half_width;
    const auto nm = static_cast<std::size_t>(std::ceil((m_hi - m_lo) / dm)) + 1;
    const UniformAxis ma{m_lo, dm, nm};

    const auto controls = make_control_grid(cs);
    ValueGrid v(xa, ma);
    v.fill([&](double x, double m) { return term(x, m); });
    for (std::size_t k = grid.steps(); k-- > 0;) {
        const double t = grid.node(k);
        if (cfg.order == SplitOrder::Strang) {
            v = advection_substep(v, 0.5 * dt, workers);
            v = hjb_substep(v, t, dt, gen, controls, workers);
            v = advection_substep(v, 0.5 * dt, workers);
        } else {
            v = hjb_substep(v, t, dt, gen, controls, workers);
            v = advection_substep(v, dt, workers);
        }
    }

    SolveResult r;
    r.y0 = v.at_m(nx, 0.0);
    r.scheme = Scheme::PdeSplitting;
    r.n_steps = grid.steps();
    r.dt = dt;
    r.dx = dx;
    // the HJB substep uses the fd stencil, so its monotonicity margin is the same
    r.monotonicity_margin = check_monotonicity(gen, cs, IncrementFamily::trinomial(cs.a_hi(), dt, dx));
    if (r.monotonicity_margin < 0.0) r.notes.push_back("warning: negative monotonicity margin");
    r.diagnostics["cfl_p_max"] = p;
    r.diagnostics["count_x"] = static_cast<double>(xa.count);
    r.diagnostics["count_m"] = static_cast<double>(ma.count);
    r.diagnostics["dm"] = dm;
    r.notes.push_back(cfg.order == SplitOrder::Strang ? "order=strang" : "order=hjb_then_advection");
    r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

}  // namespace bsde2
