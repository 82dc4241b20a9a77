#include "bsde2/fd_solver.hpp"
#include "bsde2/models.hpp"
#include "bsde2/tree_dp.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace bsde2;

namespace {

Generator constant_generator(double c) {
    Generator g;
    g.eval = [c](double, double, double, double, double, double) { return c; };
    g.bound_at_zero = std::abs(c);
    return g;
}

PathNode root(double x0 = 0.0) { return {0, {x0}, 0.0}; }

TerminalCondition linear_x() {
    TerminalCondition t;
    t.eval = [](double x, double) { return x; };
    t.lip = 1.0;
    return t;
}

}  // namespace

// --- single steps ----------------------------------------------------------

TEST(ImplicitStep, ConstantChildrenWithZeroDriver) {
    const auto fam = trinomial_increment(0.09, 0.02, 0.06);
    const std::vector<double> v{0.7, 0.7, 0.7};
    const auto s = implicit_step(v, root(), 0.04, zero_generator(), fam);
    EXPECT_DOUBLE_EQ(s.y, 0.7);
    EXPECT_NEAR(s.z, 0.0, 1e-15);
}

TEST(ImplicitStep, ConstantDriverAddsDt) {
    const auto fam = trinomial_increment(0.09, 0.02, 0.06);
    const std::vector<double> v{0.7, 0.7, 0.7};
    EXPECT_NEAR(implicit_step(v, root(), 0.04, constant_generator(1.0), fam).y, 0.7 + 0.02, 1e-15);
    EXPECT_NEAR(explicit_step(v, root(), 0.04, constant_generator(1.0), fam).y, 0.7 + 0.02, 1e-15);
}

TEST(ImplicitStep, CovariationEstimatorByEnumeration) {
    const double a = 0.04, dt = 0.02, dx = 0.06;
    const auto fam = trinomial_increment(0.09, dt, dx);
    // children ordered {-dx, 0, +dx}
    const std::vector<double> v{-1.0, 0.0, 1.0};
    const double p = a * dt / (dx * dx);
    // P[+-dx] = p / 2, P[0] = 1 - p
    const double z_hand = (0.5 * p * (-1.0) * (-dx) + (1.0 - p) * 0.0 * 0.0 + 0.5 * p * 1.0 * dx) / (a * dt);
    EXPECT_NEAR(z_hand, 1.0 / dx, 1e-12);
    const auto s = implicit_step(v, root(), a, zero_generator(), fam);
    EXPECT_NEAR(s.z, z_hand, 1e-12);
    EXPECT_NEAR(s.z, 16.666666666666668, 1e-9);
    // orthogonal remainder: v - E - z dM vanishes for an affine child profile
    EXPECT_NEAR(s.dn_second_moment, 0.0, 1e-15);
}

TEST(ImplicitStep, SolvesTheFixedPoint) {
    const auto fam = trinomial_increment(0.09, 0.02, 0.06);
    const Generator g = affine_generator(0.3, -2.0, 0.0);
    const std::vector<double> v{0.1, 0.5, 0.2};
    const double p = 0.05 * 0.02 / 0.0036;
    const double e = 0.5 * p * 0.1 + (1 - p) * 0.5 + 0.5 * p * 0.2;
    // y = e + (0.3 - 2 y) dt  =>  y = (e + 0.3 dt) / (1 + 2 dt)
    const double y = (e + 0.3 * 0.02) / (1.0 + 2.0 * 0.02);
    EXPECT_NEAR(implicit_step(v, root(), 0.05, g, fam).y, y, 1e-12);
    EXPECT_NEAR(explicit_step(v, root(), 0.05, g, fam).y, e + (0.3 - 2.0 * e) * 0.02, 1e-15);
}

TEST(ImplicitStep, NoContraction) {
    const auto fam = trinomial_increment(0.09, 0.02, 0.06);
    const std::vector<double> v{0.0, 0.0, 0.0};
    try {
        implicit_step(v, root(), 0.05, affine_generator(0.0, 60.0, 0.0), fam);
        FAIL() << "expected NoContraction";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NoContraction);
    }
}

TEST(ExplicitStep, CoincidesWithImplicitForZeroDriver) {
    const auto fam = trinomial_increment(0.09, 0.02, 0.06);
    const std::vector<double> v{0.3, -0.1, 0.9};
    const auto a = implicit_step(v, root(), 0.07, zero_generator(), fam);
    const auto b = explicit_step(v, root(), 0.07, zero_generator(), fam);
    EXPECT_EQ(a.y, b.y);
    EXPECT_EQ(a.z, b.z);
}

TEST(ExplicitStep, PerStepGapIsSecondOrder) {
    const Generator g = f1_generator(-1.0, 1.0, 0.09);
    const std::vector<double> v{0.3, 0.1, 0.5};
    std::vector<double> dts, gaps;
    for (double dt : {0.04, 0.02, 0.01, 0.005}) {
        const auto fam = trinomial_increment(0.09, dt, std::sqrt(2.0 * 0.09 * dt));
        const double gap = std::abs(implicit_step(v, root(), 0.09, g, fam).y - explicit_step(v, root(), 0.09, g, fam).y);
        dts.push_back(dt);
        gaps.push_back(gap);
    }
    EXPECT_NEAR(oracle::loglog_slope(dts, gaps), 2.0, 0.1);
}

// --- monotonicity margin ----------------------------------------------------

TEST(Monotonicity, ZIndependentDriverHasUnitMargin) {
    const ControlSet cs(0.04, 0.09, 6);
    EXPECT_EQ(check_monotonicity(f1_generator(-1, 1, 0.09), cs, trinomial_increment(0.09, 0.02, 0.06)), 1.0);
}

TEST(Monotonicity, SubstitutionExamples) {
    const ControlSet cs(0.04, 0.09, 6);
    EXPECT_NEAR(check_monotonicity(affine_generator(0, 0, 1.0), cs, trinomial_increment(0.09, 0.005, 0.03)),
                1.0 - 0.03 / 0.04, 1e-12);
    EXPECT_NEAR(check_monotonicity(affine_generator(0, 0, 2.0), cs, trinomial_increment(0.09, 0.02, 0.06)),
                1.0 - 0.12 / 0.04, 1e-12);
}

// --- full tree ----------------------------------------------------------------

TEST(SolveTree, ConstantTerminalIsAFixedPoint) {
    for (std::size_t n : {1u, 3u, 5u}) {
        const TimeGrid grid(1.0, n);
        const ControlSet cs(0.04, 0.09, 4);
        const auto fam = trinomial_increment(0.09, grid.dt(), std::sqrt(2 * 0.09 * grid.dt()));
        EXPECT_DOUBLE_EQ(solve_tree(zero_generator(), constant_terminal(0.7), cs, fam, grid).result.y0, 0.7);
    }
}

TEST(SolveTree, MartingaleProperty) {
    const TimeGrid grid(1.0, 2);
    const ControlSet cs(0.05, 0.05, 1);
    const auto fam = trinomial_increment(0.05, grid.dt(), 0.4);
    TreeOptions opt;
    opt.x0 = 0.25;
    EXPECT_NEAR(solve_tree(zero_generator(), linear_x(), cs, fam, grid, opt).result.y0, 0.25, 1e-15);
}

TEST(SolveTree, MatchesFdOnMatchedLattice) {
    const ModelConfig mc;
    const TimeGrid grid(0.3, 3);
    const ControlSet cs = control_set(mc);
    const double dx = cfl_space_step(cs, grid.dt());
    TreeOptions opt;
    opt.x0 = mc.x0;
    LatticeConfig lc;
    lc.dx = dx;
    // the narrow spread makes the payoff nonlinear on the reachable m-range
    const TerminalCondition terms[] = {asian_spread_terminal(mc.k1, mc.k2), asian_spread_terminal(0.05, 0.07),
                                       abs_terminal()};
    for (const Generator& g : {f1_generator(mc.k_lo, mc.k_hi, mc.a_hi), zero_generator()}) {
        for (const auto& term : terms) {
            const double tree =
                solve_tree(g, term, cs, trinomial_increment(cs.a_hi(), grid.dt(), dx), grid, opt).result.y0;
            const double fd = fd_solve(g, term, cs, grid, mc.x0, lc).y0;
            EXPECT_NEAR(tree, fd, 1e-12);
        }
    }
}

TEST(SolveTree, TooLarge) {
    const TimeGrid grid(1.0, 13);
    const ControlSet cs(0.04, 0.09, 2);
    try {
        solve_tree(zero_generator(), constant_terminal(0), cs, trinomial_increment(0.09, grid.dt(), 0.2), grid);
        FAIL() << "expected TreeTooLarge";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::TreeTooLarge);
    }
}

TEST(SolveTree, ImplicitExplicitGapIsFirstOrder) {
    const ModelConfig mc;
    const ControlSet cs = control_set(mc);
    const Generator g = f1_generator(mc.k_lo, mc.k_hi, mc.a_hi);
    const TerminalCondition term = asian_spread_terminal(mc.k1, mc.k2);
    std::vector<double> dts, gaps;
    for (std::size_t n = 2; n <= 8; ++n) {
        const TimeGrid grid(mc.horizon, n);
        const auto fam = trinomial_increment(cs.a_hi(), grid.dt(), cfl_space_step(cs, grid.dt()));
        TreeOptions opt;
        opt.x0 = mc.x0;
        opt.mode = TreeMode::Implicit;
        const double yi = solve_tree(g, term, cs, fam, grid, opt).result.y0;
        opt.mode = TreeMode::Explicit;
        const double ye = solve_tree(g, term, cs, fam, grid, opt).result.y0;
        dts.push_back(grid.dt());
        gaps.push_back(std::abs(yi - ye));
    }
    EXPECT_GE(oracle::loglog_slope(dts, gaps), 0.9);
}

TEST(SolveTree, ComparisonPrinciple) {
    const ModelConfig mc;
    const ControlSet cs = control_set(mc);
    const TimeGrid grid(1.0, 6);
    const auto fam = trinomial_increment(cs.a_hi(), grid.dt(), cfl_space_step(cs, grid.dt()));
    TreeOptions opt;
    opt.x0 = mc.x0;
    const Generator g = f1_generator(mc.k_lo, mc.k_hi, mc.a_hi);
    const double lo = solve_tree(g, asian_spread_terminal(-0.2, 0.1), cs, fam, grid, opt).result.y0;
    const double hi = solve_tree(g, asian_spread_terminal(-0.2, 0.2), cs, fam, grid, opt).result.y0;
    EXPECT_LE(lo, hi);
    // z-dependent driver with a nonnegative margin
    const Generator gz = affine_generator(0.0, 0.5, 0.05);
    ASSERT_GE(check_monotonicity(gz, cs, fam), 0.0);
    EXPECT_LE(solve_tree(gz, asian_spread_terminal(-0.2, 0.1), cs, fam, grid, opt).result.y0,
              solve_tree(gz, asian_spread_terminal(-0.2, 0.2), cs, fam, grid, opt).result.y0);
}

TEST(SolveTree, APrioriBoundHolds) {
    const ModelConfig mc;
    const ControlSet cs = control_set(mc);
    for (std::size_t n : {2u, 5u, 8u}) {
        const TimeGrid grid(1.0, n);
        const auto fam = trinomial_increment(cs.a_hi(), grid.dt(), cfl_space_step(cs, grid.dt()));
        TreeOptions opt;
        opt.x0 = mc.x0;
        for (const Generator& g : {f1_generator(-1, 1, 0.09), affine_generator(0.2, -0.5, 0.0)}) {
            const auto r = solve_tree(g, asian_spread_terminal(-0.2, 0.2), cs, fam, grid, opt).result;
            EXPECT_EQ(r.diagnostics.at("bound_ok"), 1.0) << "n = " << n;
            EXPECT_LE(r.diagnostics.at("sup_abs_y"), r.diagnostics.at("a_priori_bound"));
        }
    }
}

TEST(SolveTree, GridRefinementNeverLowersValue) {
    const ModelConfig mc;
    const TimeGrid grid(1.0, 5);
    const auto fam = trinomial_increment(0.09, grid.dt(), cfl_space_step(ControlSet(0.04, 0.09, 2), grid.dt()));
    TreeOptions opt;
    opt.x0 = mc.x0;
    const Generator g = f1_generator(-1, 1, 0.09);
    const TerminalCondition term = asian_spread_terminal(-0.2, 0.2);
    // grids 2 -> 3 -> 5 -> 9 are nested
    double prev = -1e9;
    for (std::size_t k : {2u, 3u, 5u, 9u}) {
        const double y = solve_tree(g, term, ControlSet(0.04, 0.09, k), fam, grid, opt).result.y0;
        EXPECT_GE(y, prev - 1e-15);
        prev = y;
    }
}

TEST(SolveTree, RecordsOptimalControls) {
    const TimeGrid grid(1.0, 2);
    const ControlSet cs(0.04, 0.09, 2);
    TreeOptions opt;
    opt.record_nodes = true;
    const auto sol = solve_tree(zero_generator(), abs_terminal(), cs,
                                trinomial_increment(0.09, grid.dt(), cfl_space_step(cs, grid.dt())), grid, opt);
    EXPECT_EQ(sol.nodes.size(), 1u + 3u);
    // convex payoff: the root picks the largest volatility
    EXPECT_EQ(sol.nodes.back().k, 0u);
    EXPECT_EQ(sol.nodes.back().a_star, 0.09);
}
