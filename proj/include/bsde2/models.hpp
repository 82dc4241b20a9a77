#pragma once

// Example problems: the two robust-control drivers, the Asian call-spread
// payoff and a few closed-form test payoffs.

#include "bsde2/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace bsde2 {

enum class ModelId { F1, F2, Zero, Custom };
enum class TerminalKind { AsianSpread, Constant, AbsX };

inline const char* to_string(ModelId id) {
    switch (id) {
        case ModelId::F1: return "f1";
        case ModelId::F2: return "f2";
        case ModelId::Zero: return "zero";
        case ModelId::Custom: return "custom";
    }
    return "unknown";
}

inline const char* to_string(TerminalKind k) {
    switch (k) {
        case TerminalKind::AsianSpread: return "asian_spread";
        case TerminalKind::Constant: return "constant";
        case TerminalKind::AbsX: return "abs_x";
    }
    return "unknown";
}

inline ModelId parse_model_id(const std::string& s) {
    if (s == "f1") return ModelId::F1;
    if (s == "f2") return ModelId::F2;
    if (s == "zero") return ModelId::Zero;
    if (s == "custom") return ModelId::Custom;
    throw Error(ErrorKind::Config, "unknown model '" + s + "' (expected f1, f2, zero or custom)");
}

inline TerminalKind parse_terminal_kind(const std::string& s) {
    if (s == "asian_spread") return TerminalKind::AsianSpread;
    if (s == "constant") return TerminalKind::Constant;
    if (s == "abs_x") return TerminalKind::AbsX;
    throw Error(ErrorKind::Config, "unknown terminal '" + s + "' (expected asian_spread, constant or abs_x)");
}

struct ModelConfig {
    ModelId model = ModelId::F1;
    double x0 = 0.2;
    double horizon = 1.0;
    double a_lo = 0.04;
    double a_hi = 0.09;
    std::size_t control_grid = 6;
    double k_lo = -1.0;
    double k_hi = 1.0;
    double k1 = -0.2;
    double k2 = 0.2;
    double b = 0.0;         // f2 drift parameter
    double z_bound = 1.0;   // box |z| <= z_bound on which f2's z-Lipschitz constant is computed
    TerminalKind terminal = TerminalKind::AsianSpread;
    double terminal_value = 0.0;  // used by the constant payoff
    double c0 = 0.0, c_y = 0.0, c_z = 0.0;  // custom affine driver

    void validate() const {
        if (!(k_lo <= k_hi)) throw Error(ErrorKind::Config, "K_lo must not exceed K_hi");
        if (!(k1 <= k2)) throw Error(ErrorKind::Config, "K1 must not exceed K2");
        if (!(horizon > 0.0)) throw Error(ErrorKind::Config, "T must be positive");
        if (!(z_bound > 0.0)) throw Error(ErrorKind::Config, "z_bound must be positive");
        ControlSet(a_lo, a_hi, control_grid);
    }
};

/// f1 = inf_{r in [K_lo, K_hi]} r y a, attained at an endpoint.
inline Generator f1_generator(double k_lo, double k_hi, double a_hi) {
    if (!(k_lo <= k_hi)) throw Error(ErrorKind::Config, "K_lo must not exceed K_hi");
    Generator g;
    g.eval = [k_lo, k_hi](double, double, double, double y, double, double a) {
        return std::min(k_lo * y * a, k_hi * y * a);
    };
    g.lip_y = std::max(std::abs(k_lo), std::abs(k_hi)) * a_hi;
    g.lip_z = 0.0;
    g.depends_on_z = false;
    g.bound_at_zero = 0.0;
    return g;
}

/// f2 = ((sqrt(a) z + b / sqrt(a))^-)^2 / 2 - z b - b^2 / (2 a).
inline Generator f2_generator(double b, double a_lo, double a_hi, double z_bound = 1.0) {
    Generator g;
    g.eval = [b](double, double, double, double, double z, double a) {
        const double s = std::sqrt(a);
        const double neg = std::max(0.0, -(s * z + b / s));
        return 0.5 * neg * neg - z * b - 0.5 * b * b / a;
    };
    g.lip_y = 0.0;
    // |df/dz| = |-(sqrt(a) z + b/sqrt(a))^- sqrt(a) - b| <= max(|b|, a |z|) on |z| <= z_bound
    g.lip_z = std::max(std::abs(b), a_hi * z_bound);
    g.depends_on_z = true;
    g.bound_at_zero = 0.5 * b * b / a_lo;
    return g;
}

inline Generator zero_generator() {
    Generator g;
    g.eval = [](double, double, double, double, double, double) { return 0.0; };
    return g;
}

/// f = c0 + c_y y + c_z z.
inline Generator affine_generator(double c0, double c_y, double c_z) {
    Generator g;
    g.eval = [c0, c_y, c_z](double, double, double, double y, double z, double) { return c0 + c_y * y + c_z * z; };
    g.lip_y = std::abs(c_y);
    g.lip_z = std::abs(c_z);
    g.depends_on_z = c_z != 0.0;
    g.bound_at_zero = std::abs(c0);
    return g;
}

/// K1 + (m - K1)^+ - (m - K2)^+, i.e. m clamped to [K1, K2].
inline TerminalCondition asian_spread_terminal(double k1, double k2) {
    if (!(k1 <= k2)) throw Error(ErrorKind::Config, "K1 must not exceed K2");
    TerminalCondition t;
    t.eval = [k1, k2](double, double m) { return std::clamp(m, k1, k2); };
    t.lip = 1.0;
    t.sup_norm = std::max(std::abs(k1), std::abs(k2));
    return t;
}

inline TerminalCondition constant_terminal(double c) {
    TerminalCondition t;
    t.eval = [c](double, double) { return c; };
    t.lip = 0.0;
    t.sup_norm = std::abs(c);
    return t;
}

/// clamp(|x|, 0, 10).
inline TerminalCondition abs_terminal() {
    TerminalCondition t;
    t.eval = [](double x, double) { return std::min(std::abs(x), 10.0); };
    t.lip = 1.0;
    t.sup_norm = 10.0;
    return t;
}

inline ControlSet control_set(const ModelConfig& mc) { return {mc.a_lo, mc.a_hi, mc.control_grid}; }

inline Generator make_generator(const ModelConfig& mc) {
    switch (mc.model) {
        case ModelId::F1: return f1_generator(mc.k_lo, mc.k_hi, mc.a_hi);
        case ModelId::F2: return f2_generator(mc.b, mc.a_lo, mc.a_hi, mc.z_bound);
        case ModelId::Zero: return zero_generator();
        case ModelId::Custom: return affine_generator(mc.c0, mc.c_y, mc.c_z);
    }
    throw Error(ErrorKind::Config, "unknown model");
}

inline TerminalCondition make_terminal(const ModelConfig& mc) {
    switch (mc.terminal) {
        case TerminalKind::AsianSpread: return asian_spread_terminal(mc.k1, mc.k2);
        case TerminalKind::Constant: return constant_terminal(mc.terminal_value);
        case TerminalKind::AbsX: return abs_terminal();
    }
    throw Error(ErrorKind::Config, "unknown terminal");
}

struct ConvexityReport {
    double worst_gap = 0.0;  // most negative midpoint gap found
    bool convex = true;
};

/// Midpoint convexity of a -> f(t, x, m, y, z, a) on a sample box of
/// (y, z) values; reported, not assumed.
inline ConvexityReport check_convexity_in_a(const Generator& gen, const ControlSet& cs, double y_range = 1.0,
                                            double z_range = 1.0, std::size_t samples = 9) {
    ConvexityReport rep;
    const auto grid = make_control_grid(ControlSet(cs.a_lo(), cs.a_hi(), std::max<std::size_t>(samples, 3)));
    for (std::size_t iy = 0; iy < samples; ++iy) {
        const double y = -y_range + 2.0 * y_range * static_cast<double>(iy) / static_cast<double>(samples - 1);
        for (std::size_t iz = 0; iz < samples; ++iz) {
            const double z = -z_range + 2.0 * z_range * static_cast<double>(iz) / static_cast<double>(samples - 1);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                for (std::size_t j = i + 2; j < grid.size(); j += 2) {
                    const double mid = 0.5 * (grid[i] + grid[j]);
                    const double gap = 0.5 * (gen(0, 0, 0, y, z, grid[i]) + gen(0, 0, 0, y, z, grid[j])) -
                                       gen(0, 0, 0, y, z, mid);
                    rep.worst_gap = std::min(rep.worst_gap, gap);
                }
            }
        }
    }
    rep.convex = rep.worst_gap >= -1e-12;
    return rep;
}

}  // namespace bsde2
