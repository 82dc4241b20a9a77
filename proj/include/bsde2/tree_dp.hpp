#pragma once

// Exact backward induction on the full trinomial path tree. Oracle scale
// only: the tree has 3^n leaves.

#include "bsde2/core.hpp"
#include "bsde2/increments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

namespace bsde2 {

enum class TreeMode { Implicit, Explicit };

/// Rule for the running integral m along a discrete path.
enum class MIntegration { LeftEndpoint, Trapezoidal };

struct PathNode {
    std::size_t k = 0;
    std::vector<double> path;  // x_0 ... x_k
    double m = 0.0;

    double x() const { return path.back(); }
};

struct StepResult {
    double y = 0.0;
    double z = 0.0;
    double dn_second_moment = 0.0;  // E[(dN)^2], orthogonal remainder
};

namespace detail {

struct ChildMoments {
    double expectation = 0.0;
    double z = 0.0;
};

inline ChildMoments child_moments(std::span<const double> child_values, const std::vector<Outcome>& law, double a,
                                  double dt) {
    if (child_values.size() != law.size()) {
        throw Error(ErrorKind::DomainViolation, "child values do not cover the increment support");
    }
    ChildMoments cm;
    double cov = 0.0;
    for (std::size_t i = 0; i < law.size(); ++i) {
        cm.expectation += law[i].prob * child_values[i];
        cov += law[i].prob * child_values[i] * law[i].value;
    }
    cm.z = cov / (a * dt);
    return cm;
}

}  // namespace detail

/// One step of the implicit scheme: y = E[Y'] + f(t, x, m, y, z, a) dt with
/// z = E[Y' dM] / (a dt); y is found by Picard iteration.
inline StepResult implicit_step(std::span<const double> child_values, const PathNode& node, double a,
                                const Generator& gen, const IncrementFamily& fam) {
    const double dt = fam.dt();
    if (gen.lip_y * dt >= 1.0) {
        std::ostringstream os;
        os << "lip_y * dt = " << gen.lip_y * dt << " >= 1";
        throw Error(ErrorKind::NoContraction, os.str());
    }
    const auto law = fam.outcomes(a);
    const auto cm = detail::child_moments(child_values, law, a, dt);
    const double t = static_cast<double>(node.k) * dt;
    const double x = node.x();

    double y = cm.expectation;
    for (int it = 0; it < 100; ++it) {
        const double next = cm.expectation + gen(t, x, node.m, y, cm.z, a) * dt;
        const double change = std::abs(next - y);
        y = next;
        if (change <= 1e-12) break;
    }

    StepResult out{y, cm.z, 0.0};
    for (std::size_t i = 0; i < law.size(); ++i) {
        const double dn = child_values[i] - cm.expectation - cm.z * law[i].value;
        out.dn_second_moment += law[i].prob * dn * dn;
    }
    return out;
}

/// One step of the explicit scheme: f is evaluated at E[Y'].
inline StepResult explicit_step(std::span<const double> child_values, const PathNode& node, double a,
                                const Generator& gen, const IncrementFamily& fam) {
    const double dt = fam.dt();
    const auto law = fam.outcomes(a);
    const auto cm = detail::child_moments(child_values, law, a, dt);
    const double t = static_cast<double>(node.k) * dt;
    const double y = cm.expectation + gen(t, node.x(), node.m, cm.expectation, cm.z, a) * dt;
    return {y, cm.z, 0.0};
}

/// Smallest one-step weight 1 + L_z a^{-1} dM over grid controls and
/// increment support points. A nonnegative margin certifies the sufficient
/// condition |L_z H| <= a for monotonicity.
inline double check_monotonicity(const Generator& gen, const ControlSet& cs, const IncrementFamily& fam) {
    if (!gen.depends_on_z || gen.lip_z == 0.0) return 1.0;
    if (!fam.discrete()) return -std::numeric_limits<double>::infinity();
    double margin = std::numeric_limits<double>::infinity();
    for (double a : make_control_grid(cs)) {
        for (const auto& o : fam.outcomes(a)) {
            if (o.prob <= 0.0) continue;
            margin = std::min(margin, 1.0 - gen.lip_z * std::abs(o.value) / a);
        }
    }
    return margin;
}

struct TreeOptions {
    double x0 = 0.0;
    TreeMode mode = TreeMode::Explicit;
    MIntegration m_rule = MIntegration::LeftEndpoint;
    bool record_nodes = false;
    std::size_t max_steps = 12;
};

struct NodeRecord {
    std::size_t k = 0;
    std::vector<double> path;
    double m = 0.0;
    double y = 0.0;
    double z = 0.0;
    double a_star = 0.0;
};

struct TreeSolution {
    SolveResult result;
    std::vector<NodeRecord> nodes;  // filled when record_nodes is set
};

namespace detail {

class TreeSolver {
public:
    TreeSolver(const Generator& gen, const TerminalCondition& term, const std::vector<double>& controls,
               const IncrementFamily& fam, std::size_t n, const TreeOptions& opt)
        : gen_(gen), term_(term), controls_(controls), fam_(fam), n_(n), opt_(opt) {
        // support points are control independent; probabilities are not
        for (const auto& o : fam_.outcomes(controls_.front())) support_.push_back(o.value);
    }

    double solve() {
        node_.k = 0;
        node_.path.assign(1, opt_.x0);
        node_.m = 0.0;
        return visit();
    }

    double sup_abs_y = 0.0;
    double max_dn_moment = 0.0;
    std::vector<NodeRecord> records;

private:
    double visit() {
        const std::size_t k = node_.k;
        const double dt = fam_.dt();
        double y_best;
        if (k == n_) {
            y_best = term_(node_.x(), node_.m);
        } else {
            const double x = node_.x();
            const double m = node_.m;
            std::vector<double> children(support_.size());
            for (std::size_t c = 0; c < support_.size(); ++c) {
                const double xn = x + support_[c];
                node_.path.push_back(xn);
                node_.m = opt_.m_rule == MIntegration::LeftEndpoint ? m + x * dt : m + 0.5 * (x + xn) * dt;
                node_.k = k + 1;
                children[c] = visit();
                node_.path.pop_back();
                node_.k = k;
                node_.m = m;
            }
            y_best = -std::numeric_limits<double>::infinity();
            double z_best = 0.0;
            double a_best = controls_.front();
            for (double a : controls_) {
                const StepResult s = opt_.mode == TreeMode::Implicit ? implicit_step(children, node_, a, gen_, fam_)
                                                                     : explicit_step(children, node_, a, gen_, fam_);
                max_dn_moment = std::max(max_dn_moment, s.dn_second_moment);
                if (s.y > y_best) {
                    y_best = s.y;
                    z_best = s.z;
                    a_best = a;
                }
            }
            if (opt_.record_nodes) records.push_back({k, node_.path, m, y_best, z_best, a_best});
        }
        sup_abs_y = std::max(sup_abs_y, std::abs(y_best));
        return y_best;
    }

    const Generator& gen_;
    const TerminalCondition& term_;
    const std::vector<double>& controls_;
    const IncrementFamily& fam_;
    std::size_t n_;
    TreeOptions opt_;
    std::vector<double> support_;
    PathNode node_;
};

}  // namespace detail

/// Backward induction with per-node maximization over the control grid.
inline TreeSolution solve_tree(const Generator& gen, const TerminalCondition& term, const ControlSet& cs,
                               const IncrementFamily& fam, const TimeGrid& grid, const TreeOptions& opt = {}) {
    const auto start = std::chrono::steady_clock::now();
    if (grid.steps() > opt.max_steps) {
        std::ostringstream os;
        os << "n = " << grid.steps() << " exceeds the tree cap " << opt.max_steps;
        throw Error(ErrorKind::TreeTooLarge, os.str());
    }
    if (!fam.discrete()) throw Error(ErrorKind::DomainViolation, "tree solver needs a discrete increment family");
    if (std::abs(fam.dt() - grid.dt()) > 1e-14 * grid.dt()) {
        throw Error(ErrorKind::Config, "increment family time step differs from the time grid");
    }
    const auto controls = make_control_grid(cs);
    detail::TreeSolver solver(gen, term, controls, fam, grid.steps(), opt);
    const double y0 = solver.solve();

    TreeSolution out;
    SolveResult& r = out.result;
    r.y0 = y0;
    r.scheme = Scheme::TreeDP;
    r.n_steps = grid.steps();
    r.dt = grid.dt();
    r.dx = fam.dx();
    r.monotonicity_margin = check_monotonicity(gen, cs, fam);
    r.diagnostics["sup_abs_y"] = solver.sup_abs_y;
    r.diagnostics["max_dn_second_moment"] = solver.max_dn_moment;
    // a priori bound e^{CT}(|xi|_inf + C T) with C from the generator bounds
    const double c = std::max(gen.lip_y, gen.bound_at_zero);
    const double bound = std::exp(c * grid.horizon()) * (term.sup_norm + c * grid.horizon());
    r.diagnostics["a_priori_bound"] = bound;
    r.diagnostics["bound_ok"] = solver.sup_abs_y <= bound * (1.0 + 1e-12) ? 1.0 : 0.0;
    r.notes.push_back(opt.mode == TreeMode::Implicit ? "mode=implicit" : "mode=explicit");
    r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.nodes = std::move(solver.records);
    return out;
}

}  // namespace bsde2
