#include "bsde2/models.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace bsde2;

TEST(F1, Examples) {
    const Generator g = f1_generator(-1.0, 1.0, 0.09);
    EXPECT_EQ(g(0, 0, 0, 0.0, 0, 0.05), 0.0);
    EXPECT_NEAR(g(0, 0, 0, 2.0, 0, 0.09), -0.18, 1e-15);
    EXPECT_NEAR(g(0, 0, 0, -2.0, 0, 0.04), -0.08, 1e-15);
    EXPECT_FALSE(g.depends_on_z);
    EXPECT_NEAR(g.lip_y, 0.09, 1e-15);
}

TEST(F1, HomogeneousAndConcaveInY) {
    const Generator g = f1_generator(-1.0, 0.5, 0.09);
    for (double y : {-1.0, -0.2, 0.3, 2.0}) {
        for (double lambda : {0.5, 2.0, 7.0}) {
            EXPECT_NEAR(g(0, 0, 0, lambda * y, 0, 0.07), lambda * g(0, 0, 0, y, 0, 0.07), 1e-15);
        }
        const double y2 = y + 0.9;
        EXPECT_GE(g(0, 0, 0, 0.5 * (y + y2), 0, 0.07), 0.5 * (g(0, 0, 0, y, 0, 0.07) + g(0, 0, 0, y2, 0, 0.07)) - 1e-15);
    }
}

TEST(F1, RejectsInvertedK) { EXPECT_THROW(f1_generator(1.0, -1.0, 0.09), Error); }

TEST(F2, Examples) {
    const Generator g0 = f2_generator(0.0, 0.04, 0.09);
    EXPECT_EQ(g0(0, 0, 0, 0, 1.0, 0.04), 0.0);
    EXPECT_NEAR(g0(0, 0, 0, 0, -1.0, 0.04), 0.02, 1e-15);
    EXPECT_EQ(g0(0, 0, 0, 0, 0.0, 0.04), 0.0);
    const Generator gb = f2_generator(0.1, 0.04, 0.09);
    EXPECT_NEAR(gb(0, 0, 0, 0, 0.0, 0.04), -0.125, 1e-15);
    EXPECT_TRUE(gb.depends_on_z);
}

TEST(F2, LipschitzConstantOnTheBox) {
    const double b = 0.04, a_lo = 0.04, a_hi = 0.09, zb = 1.0;
    const Generator g = f2_generator(b, a_lo, a_hi, zb);
    double worst = 0.0;
    for (double a = a_lo; a <= a_hi + 1e-12; a += 0.01) {
        for (double z = -zb; z < zb; z += 0.001) {
            worst = std::max(worst, std::abs(g(0, 0, 0, 0, z + 0.001, a) - g(0, 0, 0, 0, z, a)) / 0.001);
        }
    }
    EXPECT_LE(worst, g.lip_z + 1e-9);
    EXPECT_NEAR(g.bound_at_zero, 0.5 * b * b / a_lo, 1e-15);
}

TEST(AsianSpread, Examples) {
    const TerminalCondition t = asian_spread_terminal(-0.2, 0.2);
    EXPECT_EQ(t(0.5, -0.2), -0.2);
    EXPECT_EQ(t(0.5, 0.2), 0.2);
    EXPECT_EQ(t(0.5, 3.0), 0.2);
    EXPECT_EQ(t(0.5, 0.0), 0.0);
    EXPECT_EQ(t.sup_norm, 0.2);
}

TEST(AsianSpread, MonotoneBoundedConstantInX) {
    const TerminalCondition t = asian_spread_terminal(-0.2, 0.3);
    double prev = -1e9;
    for (double m = -1.0; m <= 1.0; m += 0.01) {
        const double v = t(0.0, m);
        EXPECT_GE(v, prev);
        EXPECT_LE(std::abs(v), 0.3);
        EXPECT_EQ(v, t(5.0, m));
        prev = v;
    }
}

TEST(Models, ConvexityInAIsReported) {
    const ControlSet cs(0.04, 0.09, 6);
    EXPECT_TRUE(check_convexity_in_a(f1_generator(-1, 1, 0.09), cs).convex);
    EXPECT_TRUE(check_convexity_in_a(zero_generator(), cs).convex);
    const auto rep = check_convexity_in_a(f2_generator(0.04, 0.04, 0.09), cs);
    EXPECT_LE(rep.worst_gap, 0.0);  // value is reported either way
}

TEST(Models, FactoryDispatch) {
    ModelConfig mc;
    mc.model = ModelId::Zero;
    mc.terminal = TerminalKind::Constant;
    mc.terminal_value = 0.5;
    EXPECT_EQ(make_generator(mc)(0, 0, 0, 1, 1, 0.05), 0.0);
    EXPECT_EQ(make_terminal(mc)(1, 1), 0.5);
    mc.model = ModelId::Custom;
    mc.c0 = 0.1;
    mc.c_y = 2.0;
    mc.c_z = 0.0;
    const Generator g = make_generator(mc);
    EXPECT_NEAR(g(0, 0, 0, 1.0, 5.0, 0.05), 2.1, 1e-15);
    EXPECT_FALSE(g.depends_on_z);
    EXPECT_THROW(parse_model_id("f3"), Error);
}

TEST(Models, ConfigInvariants) {
    ModelConfig mc;
    EXPECT_NO_THROW(mc.validate());
    mc.k1 = 0.3;
    EXPECT_THROW(mc.validate(), Error);
}
