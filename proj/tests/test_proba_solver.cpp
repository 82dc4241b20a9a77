#include "bsde2/fd_solver.hpp"
#include "bsde2/models.hpp"
#include "bsde2/proba_solver.hpp"
#include "bsde2/regression.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

using namespace bsde2;

TEST(GammaWeight, Examples) {
    const double dt = 0.02;
    EXPECT_NEAR(gamma_weight(std::sqrt(dt), dt, 0.04), 0.0, 1e-12);
    EXPECT_NEAR(gamma_weight(0.0, dt, 0.04), -1250.0, 1e-9);
    // E[w] = 0 under dW ~ N(0, dt)
    const double mean = oracle::normal_expectation([&](double z) { return gamma_weight(std::sqrt(dt) * z, dt, 0.04); });
    EXPECT_NEAR(mean, 0.0, 1e-9);
}

TEST(GFunction, TwoPointMaximisation) {
    const ControlSet cs(0.04, 0.09, 2);
    const Generator f0 = zero_generator();
    EXPECT_EQ(g_function(0.3, 0.1, 0.2, 0.5, 0.0, f0, cs, 0.02), 0.0);
    EXPECT_NEAR(g_function(0, 0, 0, 0, 2.0, f0, cs, 0.02), 0.09, 1e-15);
    EXPECT_NEAR(g_function(0, 0, 0, 0, -2.0, f0, cs, 0.02), -0.04, 1e-15);
}

TEST(GFunction, BaseLevelShiftsTheControl) {
    const ControlSet cs(0.04, 0.09, 2);
    // sup_a (a - a0) gamma / 2 with a0 = 0.04
    EXPECT_NEAR(g_function(0, 0, 0, 0, 2.0, zero_generator(), cs, 0.02, 0.04), 0.05, 1e-15);
    EXPECT_NEAR(g_function(0, 0, 0, 0, -2.0, zero_generator(), cs, 0.02, 0.04), 0.0, 1e-15);
}

TEST(GFunction, DominatesEveryControl) {
    const ControlSet cs(0.04, 0.09, 6);
    const Generator g = f1_generator(-1, 1, 0.09);
    const double dt = 0.02;
    for (double y : {-0.3, 0.0, 0.2}) {
        for (double gamma : {-5.0, -0.1, 0.0, 0.7, 4.0}) {
            const double gv = g_function(0, 0, 0, y, gamma, g, cs, dt);
            for (double a : make_control_grid(cs)) {
                EXPECT_GE(gv, g(0, 0, 0, y + 0.5 * a * gamma * dt, 0, a) + 0.5 * a * gamma);
            }
        }
    }
}

TEST(GFunction, RejectsZDependentGenerator) {
    try {
        g_function(0, 0, 0, 0, 1.0, f2_generator(0.0, 0.04, 0.09), ControlSet(0.04, 0.09, 2), 0.02);
        FAIL() << "expected ZDependentGenerator";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ZDependentGenerator);
    }
}

TEST(Ensemble, IncrementsAndRunningIntegral) {
    const TimeGrid grid(1.0, 10);
    const auto e = simulate_ensemble(0.2, 0.04, grid, 100, 5);
    for (std::size_t p = 0; p < 100; ++p) {
        double m = 0.0;
        for (std::size_t k = 0; k < 10; ++k) {
            const double x = e.x_at(k)[p];
            EXPECT_NEAR(e.x_at(k + 1)[p] - x, 0.2 * e.dw_at(k)[p], 1e-15);
            m += x * grid.dt();
            EXPECT_NEAR(e.m_at(k + 1)[p], m, 1e-15);
        }
    }
}

TEST(Regression, ReducesDegreeOnDegenerateDesign) {
    std::vector<double> x, m;
    for (int i = 0; i < 300; ++i) {
        x.push_back(static_cast<double>(i % 3));  // three support points
        m.push_back(0.0);                          // no spread: dropped
    }
    const Regressor reg(x, m, 4, 1);
    EXPECT_TRUE(reg.reduced());
    EXPECT_FALSE(reg.features().uses_m());
    EXPECT_LE(reg.features().degree(), 2);
    // exact on functions of the three points
    std::vector<double> y;
    for (double v : x) y.push_back(v * v - 1.0);
    const auto c = reg.fit(y);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(reg.predict(i, c), y[i], 1e-10);
}

TEST(ProbaSolve, ConstantTerminalIsExact) {
    const ControlSet cs(0.04, 0.09, 6);
    ProbaConfig pc;
    pc.n_paths = 20000;
    const auto r = proba_solve(zero_generator(), constant_terminal(0.37), cs, TimeGrid(1.0, 20), 0.2, pc);
    EXPECT_NEAR(r.y0, 0.37, 1e-10);
}

TEST(ProbaSolve, SingletonControlClosedForm) {
    const double a0 = 0.04;
    ProbaConfig pc;
    pc.n_paths = 50000;
    pc.seed = 9;
    const TimeGrid grid(1.0, 20);
    const auto r = proba_solve(zero_generator(), abs_terminal(), ControlSet(a0, a0, 1), grid, 0.0, pc);
    // standard error of the terminal sample mean
    const auto e = simulate_ensemble(0.0, a0, grid, pc.n_paths, pc.seed);
    double s = 0, s2 = 0;
    for (double x : e.x_at(grid.steps())) {
        s += std::abs(x);
        s2 += x * x;
    }
    const double n = static_cast<double>(pc.n_paths);
    const double se = std::sqrt((s2 / n - (s / n) * (s / n)) / n);
    EXPECT_NEAR(r.y0, oracle::abs_brownian(std::sqrt(a0), 1.0), 3.0 * se);
}

TEST(ProbaSolve, Preconditions) {
    const TimeGrid grid(1.0, 10);
    ProbaConfig pc;
    pc.n_paths = 50;
    auto kind_of = [&](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::Validation;
    };
    EXPECT_EQ(kind_of([&] { proba_solve(zero_generator(), abs_terminal(), ControlSet(0.04, 0.09, 2), grid, 0, pc); }),
              ErrorKind::Config);
    pc.n_paths = 1000;
    EXPECT_EQ(kind_of([&] { proba_solve(zero_generator(), abs_terminal(), ControlSet(0.02, 0.09, 2), grid, 0, pc); }),
              ErrorKind::DomainViolation);
    EXPECT_EQ(kind_of([&] {
                  proba_solve(f2_generator(0, 0.04, 0.09), abs_terminal(), ControlSet(0.04, 0.09, 2), grid, 0, pc);
              }),
              ErrorKind::ZDependentGenerator);
}

TEST(ProbaSolve, SeedAndWorkerDeterminism) {
    const ModelConfig mc;
    ProbaConfig pc;
    pc.n_paths = 30000;
    pc.seed = 17;
    pc.workers = 1;
    const TimeGrid grid = TimeGrid::from_step(1.0, 0.05);
    const auto a = proba_solve(make_generator(mc), make_terminal(mc), control_set(mc), grid, mc.x0, pc);
    const auto b = proba_solve(make_generator(mc), make_terminal(mc), control_set(mc), grid, mc.x0, pc);
    pc.workers = 3;
    const auto c = proba_solve(make_generator(mc), make_terminal(mc), control_set(mc), grid, mc.x0, pc);
    pc.seed = 18;
    const auto d = proba_solve(make_generator(mc), make_terminal(mc), control_set(mc), grid, mc.x0, pc);
    EXPECT_EQ(a.y0, b.y0);
    EXPECT_EQ(a.y0, c.y0);
    EXPECT_NE(a.y0, d.y0);
}

TEST(ProbaSolve, WeightMomentsWithinFourStandardErrors) {
    const ModelConfig mc;
    ProbaConfig pc;
    pc.n_paths = 50000;
    const auto r = proba_solve(make_generator(mc), make_terminal(mc), control_set(mc), TimeGrid::from_step(1.0, 0.05),
                               mc.x0, pc);
    EXPECT_LE(r.diagnostics.at("gamma_weight_max_z"), 4.0);
}

TEST(ProbaSolve, CloseToFiniteDifferences) {
    const ModelConfig mc;
    const TimeGrid grid = TimeGrid::from_step(1.0, 0.02);
    ProbaConfig pc;
    pc.n_paths = 50000;
    const double p = proba_solve(make_generator(mc), make_terminal(mc), control_set(mc), grid, mc.x0, pc).y0;
    const double f = fd_solve(make_generator(mc), make_terminal(mc), control_set(mc), grid, mc.x0).y0;
    EXPECT_NEAR(p, f, 0.02);
}

TEST(ProbaSolve, StandardErrorShrinksAsInverseSqrtPaths) {
    const ModelConfig mc;
    const TimeGrid grid = TimeGrid::from_step(1.0, 0.05);
    std::vector<double> ns, ses;
    for (std::size_t n : {1000u, 10000u, 100000u}) {
        std::vector<double> y;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            ProbaConfig pc;
            pc.n_paths = n;
            pc.seed = 1000 * seed + n;
            y.push_back(proba_solve(make_generator(mc), make_terminal(mc), control_set(mc), grid, mc.x0, pc).y0);
        }
        const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 20.0;
        double var = 0.0;
        for (double v : y) var += (v - mean) * (v - mean);
        ns.push_back(static_cast<double>(n));
        ses.push_back(std::sqrt(var / 19.0));
    }
    EXPECT_NEAR(oracle::loglog_slope(ns, ses), -0.5, 0.1);
}
