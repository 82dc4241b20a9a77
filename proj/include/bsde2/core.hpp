#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace bsde2 {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class ErrorKind {
    Config,
    CflViolation,
    MonotonicityViolation,
    DomainViolation,
    NoContraction,
    TreeTooLarge,
    ZDependentGenerator,
    RankDeficientBasis,
    Validation,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config: return "ConfigError";
        case ErrorKind::CflViolation: return "CflViolation";
        case ErrorKind::MonotonicityViolation: return "MonotonicityViolation";
        case ErrorKind::DomainViolation: return "DomainViolation";
        case ErrorKind::NoContraction: return "NoContraction";
        case ErrorKind::TreeTooLarge: return "TreeTooLarge";
        case ErrorKind::ZDependentGenerator: return "ZDependentGenerator";
        case ErrorKind::RankDeficientBasis: return "RankDeficientBasis";
        case ErrorKind::Validation: return "ValidationFailure";
    }
    return "Error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Markovian state of the discretized problem: the driving coordinate x and
/// its running time integral m.
struct DiscreteState {
    double x = 0.0;
    double m = 0.0;
};

/// Interval [a_lo, a_hi] of squared volatilities together with the size of
/// the uniform grid used for the control supremum.
class ControlSet {
public:
    ControlSet(double a_lo, double a_hi, std::size_t grid_size)
        : a_lo_(a_lo), a_hi_(a_hi), grid_size_(grid_size) {
        if (!(std::isfinite(a_lo) && std::isfinite(a_hi)) || !(a_lo > 0.0) || a_lo > a_hi) {
            throw Error(ErrorKind::Config, "control set requires 0 < a_lo <= a_hi");
        }
        if (grid_size == 0) {
            throw Error(ErrorKind::Config, "control grid needs at least one point");
        }
        if (grid_size < 2 && a_lo < a_hi) {
            throw Error(ErrorKind::Config, "control grid of a non-degenerate interval needs >= 2 points");
        }
    }

    double a_lo() const noexcept { return a_lo_; }
    double a_hi() const noexcept { return a_hi_; }
    std::size_t grid_size() const noexcept { return grid_size_; }
    bool singleton() const noexcept { return a_lo_ == a_hi_; }

private:
    double a_lo_;
    double a_hi_;
    std::size_t grid_size_;
};

/// Equally spaced control values, endpoints included.
inline std::vector<double> make_control_grid(const ControlSet& cs) {
    const std::size_t n = cs.grid_size();
    std::vector<double> grid(n, cs.a_lo());
    if (n == 1) return grid;
    const double span = cs.a_hi() - cs.a_lo();
    for (std::size_t i = 1; i + 1 < n; ++i) {
        grid[i] = cs.a_lo() + span * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    grid.back() = cs.a_hi();
    return grid;
}

/// Driver f(t, x, m, y, z, a) of the backward scheme. Every solver adds
/// f * dt per step: Y_k = E_k[Y_{k+1}] + f(...) dt.
struct Generator {
    using Fn = std::function<double(double t, double x, double m, double y, double z, double a)>;

    Fn eval;
    double lip_y = 0.0;
    double lip_z = 0.0;
    bool depends_on_z = false;
    // sup |f(t, x, m, 0, 0, a)| over the admissible controls
    double bound_at_zero = 0.0;

    double operator()(double t, double x, double m, double y, double z, double a) const {
        return eval(t, x, m, y, z, a);
    }
};

struct TerminalCondition {
    std::function<double(double x, double m)> eval;
    double lip = 0.0;
    // sup norm; infinity when the functional is unbounded
    double sup_norm = std::numeric_limits<double>::infinity();

    double operator()(double x, double m) const { return eval(x, m); }
};

/// Uniform time grid t_k = k * T / n.
class TimeGrid {
public:
    TimeGrid(double horizon, std::size_t n) : horizon_(horizon), n_(n) {
        if (!(horizon > 0.0) || !std::isfinite(horizon)) {
            throw Error(ErrorKind::Config, "time horizon must be positive");
        }
        if (n == 0) throw Error(ErrorKind::Config, "time grid needs at least one step");
    }

    /// Grid with the step closest to dt; rejects dt that does not divide T.
    static TimeGrid from_step(double horizon, double dt) {
        if (!(dt > 0.0)) throw Error(ErrorKind::Config, "time step must be positive");
        const double steps = horizon / dt;
        const double rounded = std::round(steps);
        if (rounded < 1.0 || std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps)) {
            throw Error(ErrorKind::Config, "time step does not divide the horizon");
        }
        return TimeGrid(horizon, static_cast<std::size_t>(rounded));
    }

    double horizon() const noexcept { return horizon_; }
    std::size_t steps() const noexcept { return n_; }
    double dt() const noexcept { return horizon_ / static_cast<double>(n_); }
    double node(std::size_t k) const noexcept {
        return k == n_ ? horizon_ : static_cast<double>(k) * dt();
    }

private:
    double horizon_;
    std::size_t n_;
};

enum class Scheme { TreeDP, FiniteDifference, Probabilistic, PdeSplitting };

inline const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::TreeDP: return "tree";
        case Scheme::FiniteDifference: return "fd";
        case Scheme::Probabilistic: return "proba";
        case Scheme::PdeSplitting: return "pde";
    }
    return "unknown";
}

struct SolveResult {
    double y0 = 0.0;
    Scheme scheme = Scheme::FiniteDifference;
    std::size_t n_steps = 0;
    double dt = 0.0;
    double dx = 0.0;          // 0 when the scheme has no space step
    std::size_t paths = 0;    // proba only
    std::uint64_t seed = 0;   // proba only
    double runtime_s = 0.0;
    double monotonicity_margin = std::numeric_limits<double>::quiet_NaN();
    std::map<std::string, double> diagnostics;
    std::vector<std::string> notes;
};

}  // namespace bsde2
