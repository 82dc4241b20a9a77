#pragma once

// Finite-difference scheme on the reduced (x, m) state. Each backward step
// advects m along m' = m + x dt and applies the nodal control supremum
//
//   u(t_k, x, m) = sup_a { u_a + f(t_k, x, m, u_a, Du, a) dt },
//   u_a = u' + a dt / 2 * D2u,
//
// where u', Du and D2u are read from the t_{k+1} grid at (x, x +- dx, m').

#include "bsde2/core.hpp"
#include "bsde2/increments.hpp"
#include "bsde2/parallel.hpp"
#include "bsde2/tree_dp.hpp"
#include "bsde2/value_grid.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

namespace bsde2 {

struct LatticeConfig {
    double dx = 0.0;       // 0 selects the CFL-tight step sqrt(2 a_hi dt)
    double x_sd = 6.0;     // x half-width in standard deviations of the a_hi diffusion
    double m_ratio = 1.0;  // dm = m_ratio * dx * dt; 1 makes m-advection exact
    double m_sd = 6.0;     // m half-width in standard deviations of the integrated diffusion
    std::size_t workers = 0;  // 0 reads BSDE2_THREADS
};

/// Per-level lattices. Level k covers x0 +- x_sd sd(x_{t_k}) and
/// x0 t_k +- m_sd sd(m_{t_k}) under the a_hi diffusion, which contains the
/// domain of dependence of (x0, 0) up to the truncation tolerance. All levels
/// share the node spacing, and the m-window moves with the drift x0 dt per
/// step, so that m-advection by x dt lands on nodes when m_ratio = 1.
struct Lattice {
    double x0 = 0.0;
    double dx = 0.0;
    double dm = 0.0;
    double dt = 0.0;
    std::vector<std::size_t> x_half;  // per level, in units of dx
    std::vector<std::size_t> m_half;  // per level, in units of dm

    std::size_t levels() const { return x_half.size(); }
    UniformAxis x_axis(std::size_t k) const {
        return {x0 - static_cast<double>(x_half[k]) * dx, dx, 2 * x_half[k] + 1};
    }
    UniformAxis m_axis(std::size_t k) const {
        return {x0 * static_cast<double>(k) * dt - static_cast<double>(m_half[k]) * dm, dm, 2 * m_half[k] + 1};
    }
    /// Index of x0 on level k.
    std::size_t x0_index(std::size_t k) const { return x_half[k]; }
};

inline double cfl_space_step(const ControlSet& cs, double dt) { return std::sqrt(2.0 * cs.a_hi() * dt); }

inline Lattice make_fd_lattice(const ControlSet& cs, const TimeGrid& grid, double x0, const LatticeConfig& cfg) {
    const double dt = grid.dt();
    if (!(cfg.m_ratio > 0.0) || !(cfg.x_sd > 0.0) || !(cfg.m_sd > 0.0) || cfg.dx < 0.0) {
        throw Error(ErrorKind::Config, "lattice widths and m_ratio must be positive");
    }
    Lattice lat;
    lat.x0 = x0;
    lat.dt = dt;
    lat.dx = cfg.dx > 0.0 ? cfg.dx : cfl_space_step(cs, dt);
    lat.dm = cfg.m_ratio * lat.dx * dt;
    const double sa = std::sqrt(cs.a_hi());
    for (std::size_t k = 0; k <= grid.steps(); ++k) {
        const double t = grid.node(k);
        const double hx = cfg.x_sd * sa * std::sqrt(t);
        const double hm = cfg.m_sd * sa * std::pow(t, 1.5) / std::sqrt(3.0);
        lat.x_half.push_back(std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(hx / lat.dx))));
        lat.m_half.push_back(std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(hm / lat.dm))));
    }
    return lat;
}

struct FdStepOptions {
    double m_drift = 0.0;  // default output m-window: next's shifted by -m_drift dt
    std::size_t workers = 0;
    // explicit output axes; the x-axis must be aligned with next's x nodes
    std::optional<UniformAxis> x_out;
    std::optional<UniformAxis> m_out;
};

namespace detail {

inline void check_fd_preconditions(const Generator& gen, const ControlSet& cs, double dt, double dx,
                                   double* margin_out = nullptr) {
    const double p = cs.a_hi() * dt / (dx * dx);
    if (p > 0.5 + 1e-12) {
        std::ostringstream os;
        os << "a_hi dt / dx^2 = " << p << " > 1/2 (dt = " << dt << ", dx = " << dx << ")";
        throw Error(ErrorKind::CflViolation, os.str());
    }
    const double margin = check_monotonicity(gen, cs, IncrementFamily::trinomial(cs.a_hi(), dt, dx));
    if (margin < 0.0) {
        std::ostringstream os;
        os << "monotonicity margin " << margin << " < 0 (lip_z dx > a_lo; dt = " << dt << ", dx = " << dx << ")";
        throw Error(ErrorKind::MonotonicityViolation, os.str());
    }
    if (margin_out) *margin_out = margin;
}

}  // namespace detail

/// One backward step of the finite-difference scheme. x-neighbours outside
/// next's window are clamped (Neumann), m-positions are clamped to its ends.
inline ValueGrid fd_step(const ValueGrid& next, double t_k, const Generator& gen, const ControlSet& cs, double dt,
                         const FdStepOptions& opt = {}) {
    const UniformAxis& nx = next.x_axis();
    const double dx = nx.step;
    detail::check_fd_preconditions(gen, cs, dt, dx);

    const UniformAxis xa = opt.x_out.value_or(nx);
    UniformAxis ma = next.m_axis();
    ma.min -= opt.m_drift * dt;
    if (opt.m_out) ma = *opt.m_out;
    const double shift = (xa.min - nx.min) / dx;
    const auto offset = static_cast<long>(std::lround(shift));
    if (std::abs(xa.step - dx) > 1e-12 * dx || std::abs(shift - static_cast<double>(offset)) > 1e-9) {
        throw Error(ErrorKind::Config, "output x-axis is not aligned with the input lattice");
    }

    ValueGrid out(xa, ma);
    const auto controls = make_control_grid(cs);
    const long last = static_cast<long>(nx.count) - 1;
    const auto clamp_index = [last](long i) { return static_cast<std::size_t>(std::clamp(i, 0L, last)); };
    const double inv_dx2 = 1.0 / (dx * dx);
    const double inv_2dx = 0.5 / dx;
    const std::size_t workers = opt.workers ? opt.workers : default_thread_count();

    parallel_for(0, xa.count, workers, [&](std::size_t i) {
        const double x = xa.at(i);
        const long c = static_cast<long>(i) + offset;
        const std::size_t mid = clamp_index(c);
        const std::size_t up = clamp_index(c + 1);
        const std::size_t dn = clamp_index(c - 1);
        for (std::size_t j = 0; j < ma.count; ++j) {
            const double m = ma.at(j);
            const double pos = next.m_axis().position(m + x * dt);
            const double v0 = next.at_position(mid, pos);
            const double vp = next.at_position(up, pos);
            const double vm = next.at_position(dn, pos);
            const double d2 = (vp - 2.0 * v0 + vm) * inv_dx2;
            const double d1 = (vp - vm) * inv_2dx;
            double best = -std::numeric_limits<double>::infinity();
            for (double a : controls) {
                const double ua = v0 + 0.5 * a * dt * d2;
                best = std::max(best, ua + gen(t_k, x, m, ua, d1, a) * dt);
            }
            out(i, j) = best;
        }
    });
    return out;
}

struct FdSolution {
    SolveResult result;
    ValueGrid initial;  // u(0, ., .) on the level-0 window
};

inline FdSolution fd_solve_full(const Generator& gen, const TerminalCondition& term, const ControlSet& cs,
                                const TimeGrid& grid, double x0, const LatticeConfig& cfg = {}) {
    const auto start = std::chrono::steady_clock::now();
    const double dt = grid.dt();
    const Lattice lat = make_fd_lattice(cs, grid, x0, cfg);
    double margin = 1.0;
    detail::check_fd_preconditions(gen, cs, dt, lat.dx, &margin);

    const std::size_t n = grid.steps();
    ValueGrid u(lat.x_axis(n), lat.m_axis(n));
    u.fill([&](double x, double m) { return term(x, m); });
    std::size_t nodes = 0;
    for (std::size_t k = n; k-- > 0;) {
        FdStepOptions step_opt;
        step_opt.workers = cfg.workers;
        step_opt.x_out = lat.x_axis(k);
        step_opt.m_out = lat.m_axis(k);
        u = fd_step(u, grid.node(k), gen, cs, dt, step_opt);
        nodes += u.size();
    }

    FdSolution out;
    SolveResult& r = out.result;
    r.y0 = u.at_m(lat.x0_index(0), 0.0);
    r.scheme = Scheme::FiniteDifference;
    r.n_steps = n;
    r.dt = dt;
    r.dx = lat.dx;
    r.monotonicity_margin = margin;
    r.diagnostics["cfl_p_max"] = cs.a_hi() * dt / (lat.dx * lat.dx);
    r.diagnostics["count_x"] = static_cast<double>(lat.x_axis(n).count);
    r.diagnostics["count_m"] = static_cast<double>(lat.m_axis(n).count);
    r.diagnostics["dm"] = lat.dm;
    r.diagnostics["node_updates"] = static_cast<double>(nodes);
    r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.initial = std::move(u);
    return out;
}

inline SolveResult fd_solve(const Generator& gen, const TerminalCondition& term, const ControlSet& cs,
                            const TimeGrid& grid, double x0, const LatticeConfig& cfg = {}) {
    return fd_solve_full(gen, term, cs, grid, x0, cfg).result;
}

}  // namespace bsde2
