#include "fadeflow/history.hpp"
#include "fadeflow/sampling.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace fadeflow;

namespace {

Vector vec(double a) { return Vector::Constant(1, a); }

HistoryFunction scalar(double step, double depth, double (*f)(double)) {
    return HistoryFunction::from_function(1, step, depth, [f](double s) { return vec(f(s)); });
}

}  // namespace

TEST(History, EvalConstantAndMidpoint) {
    auto x = HistoryFunction::constant(0.1, 5.0, vec(1.0));
    EXPECT_DOUBLE_EQ(eval(x, -3.7)[0], 1.0);
    EXPECT_DOUBLE_EQ(eval(x, -40.0)[0], 1.0);

    auto y = HistoryFunction::from_samples(0.5, {vec(0.0), vec(1.0), vec(1.0)});
    EXPECT_DOUBLE_EQ(eval(y, -0.25)[0], 0.5);
    EXPECT_THROW(eval(y, 0.1), InvalidArgument);
}

TEST(History, EvalExponentialAgainstClosedForm) {
    auto x = scalar(0.01, 5.0, [](double s) { return std::exp(s); });
    EXPECT_NEAR(eval(x, -1.0)[0], std::exp(-1.0), 1e-4);
    EXPECT_NEAR(eval(x, -1.005)[0], std::exp(-1.005), 1e-4);
}

TEST(History, TailIsOldestSample) {
    auto x = scalar(0.5, 2.0, [](double s) { return s; });
    EXPECT_DOUBLE_EQ(x.tail()[0], -2.0);
    EXPECT_DOUBLE_EQ(eval(x, -100.0)[0], -2.0);
}

TEST(History, Seminorm) {
    auto zero = HistoryFunction::zeros(1, 0.01, 3.0);
    auto c = HistoryFunction::constant(0.01, 3.0, vec(2.5));
    auto clip = scalar(0.01, 3.0, [](double s) { return std::min(1.0, -s); });
    EXPECT_EQ(seminorm(c, c, 1), 0.0);
    EXPECT_DOUBLE_EQ(seminorm(zero, c, 7), 2.5);
    EXPECT_DOUBLE_EQ(seminorm(zero, clip, 1), 1.0);
    EXPECT_NEAR(seminorm(zero, clip, 0.5), 0.5, 1e-12);
}

TEST(History, MetricExamples) {
    auto zero = HistoryFunction::zeros(1, 0.1, 4.0);
    auto one = HistoryFunction::constant(0.1, 4.0, vec(1.0));
    auto three = HistoryFunction::constant(0.1, 4.0, vec(3.0));
    EXPECT_EQ(metric_d(one, one), 0.0);
    // sum 2^-n * 1/2 over n <= 40
    EXPECT_NEAR(metric_d(zero, one), 0.5, std::ldexp(1.0, -40));
    EXPECT_NEAR(metric_d(zero, three), 0.75, std::ldexp(1.0, -40));
    EXPECT_NEAR(metric_d(zero, three, 5), 0.75 * (1.0 - std::ldexp(1.0, -5)), 1e-15);
}

TEST(History, GridMismatchRejected) {
    auto a = HistoryFunction::zeros(1, 0.1, 4.0);
    auto b = HistoryFunction::zeros(1, 0.1, 5.0);
    auto c = HistoryFunction::zeros(2, 0.1, 4.0);
    EXPECT_THROW(metric_d(a, b), InvalidArgument);
    EXPECT_THROW(seminorm(a, c, 1), InvalidArgument);
}

TEST(History, LeqAExamples) {
    OrderParams A({-1.0});
    auto zero = HistoryFunction::zeros(1, 0.01, 5.0);
    auto one = HistoryFunction::constant(0.01, 5.0, vec(1.0));
    auto neg_t = scalar(0.01, 5.0, [](double s) { return -s; });
    EXPECT_TRUE(leq_A(zero, zero, A));
    EXPECT_TRUE(leq_A(zero, one, A));
    EXPECT_FALSE(leq_A(zero, neg_t, A));
    EXPECT_FALSE(leq_A(one, zero, A));
}

TEST(History, TotalVariation) {
    auto c = HistoryFunction::constant(0.01, 2.0, vec(4.0));
    EXPECT_NEAR(total_variation(c, -1, 0)[0], 0.0, 1e-15);
    auto lin = scalar(0.01, 2.0, [](double s) { return s; });
    EXPECT_NEAR(total_variation(lin, -1, 0)[0], 1.0, 1e-12);
    auto sine = HistoryFunction::from_function(1, 0.001, 4.0, [](double s) { return vec(std::sin(s)); });
    EXPECT_NEAR(total_variation(sine, -std::numbers::pi, 0)[0], 2.0, 1e-3);
    EXPECT_THROW(total_variation(lin, -3, 0), InvalidArgument);
    EXPECT_THROW(total_variation(lin, -0.5, -0.5), InvalidArgument);
}

TEST(History, RegularityR) {
    auto c = HistoryFunction::constant(0.01, 4.0, vec(-2.0));
    auto rc = regularity_R(c);
    EXPECT_NEAR(rc.sup_var, 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(rc.norm_R, 2.0);
    EXPECT_TRUE(rc.satisfied);
    EXPECT_EQ(rc.windows, 4);

    auto sine = HistoryFunction::from_function(1, 0.001, 10.0, [](double s) { return vec(std::sin(s)); });
    EXPECT_LE(regularity_R(sine).sup_var, 1.0 + 1e-12);

    // Variation of sin(t^2) on [-k, -k+1] is about 2(2k-1)/pi: grows linearly.
    auto chirp = HistoryFunction::from_function(1, 0.0005, 30.0, [](double s) { return vec(std::sin(s * s)); });
    auto rr = regularity_R(chirp, 10.0);
    EXPECT_FALSE(rr.satisfied);
    EXPECT_NEAR(rr.window_variation.back(), 2.0 * 59.0 / std::numbers::pi, 1.0);
    EXPECT_GT(rr.window_variation[29], 5.0 * rr.window_variation[4]);

    auto shallow = HistoryFunction::zeros(1, 0.1, 1.0);
    EXPECT_THROW(regularity_R(shallow), InvalidArgument);
}

TEST(History, ConstructHExamples) {
    OrderParams A({-1.0});
    auto c = HistoryFunction::constant(0.01, 5.0, vec(0.7));
    auto h = construct_h(c, A);
    for (std::size_t i = 0; i < h.count(); ++i) EXPECT_NEAR(h(i, 0), 0.7, 1e-14);

    auto ex = scalar(0.01, 5.0, [](double s) { return std::exp(s); });
    auto he = construct_h(ex, A);
    for (std::size_t i = 0; i < he.count(); ++i) EXPECT_NEAR(he(i, 0), ex(i, 0), 1e-12);

    auto z = HistoryFunction::zeros(2, 0.01, 5.0);
    EXPECT_EQ(construct_h(z, OrderParams({-1.0, -2.0})).sup_norm(), 0.0);

    auto h0 = construct_h0(c, A);
    for (std::size_t i = 0; i < h0.count(); ++i) EXPECT_NEAR(h0(i, 0), 1.4, 1e-14);
    EXPECT_EQ(construct_h0(z, OrderParams({-1.0, -2.0})).sup_norm(), 0.0);
}

TEST(History, ShiftedEnvelope) {
    OrderParams A({-1.0});
    auto h0 = HistoryFunction::constant(0.01, 5.0, vec(2.0));
    auto e0 = shifted_envelope(h0, A, 0.0);
    EXPECT_EQ(seminorm(e0, h0, 5), 0.0);
    auto e5 = shifted_envelope(h0, A, 5.0);
    EXPECT_NEAR(e5.head()[0], 2.0 * std::exp(-5.0), 1e-15);
    EXPECT_NEAR(eval(e5, -1.0)[0], 2.0 * std::exp(-4.0), 1e-14);
    auto zero = HistoryFunction::zeros(1, 0.01, 5.0);
    const double d1 = metric_d(shifted_envelope(h0, A, 1.0), zero);
    const double d5 = metric_d(e5, zero);
    const double d10 = metric_d(shifted_envelope(h0, A, 10.0), zero);
    EXPECT_GT(d1, d5);
    EXPECT_GT(d5, d10);
}

TEST(History, OrderEnvelopeExamples) {
    OrderParams A({-1.0});
    auto k = HistoryFunction::constant(0.01, 5.0, vec(0.3));
    auto [a, b] = order_envelope(k, k, A);
    EXPECT_LT(seminorm(a, k, 5), 1e-14);
    EXPECT_LT(seminorm(b, k, 5), 1e-14);

    auto v = scalar(0.01, 5.0, [](double s) { return std::sin(3 * s) + 0.2 * s; });
    auto [av, bv] = order_envelope(v, v, A);
    EXPECT_LT(seminorm(av, v, 5), 1e-12);
    EXPECT_LT(seminorm(bv, v, 5), 1e-12);

    auto z = HistoryFunction::zeros(1, 0.01, 5.0);
    auto [az, bz] = order_envelope(z, z, A);
    EXPECT_EQ(az.sup_norm(), 0.0);
    EXPECT_EQ(bz.sup_norm(), 0.0);
}

// ---------------------------------------------------------------- properties

TEST(HistoryProperty, PartialOrderAndTranslation) {
    Rng rng(11);
    OrderParams A({-1.0, -0.5});
    for (int trial = 0; trial < 200; ++trial) {
        auto x = random_bv_history(rng, 2, 0.05, 6.0, 2.0, trial % 2 == 0);
        auto c1 = random_cone_element(rng, A, 0.05, 6.0);
        auto c2 = random_cone_element(rng, A, 0.05, 6.0);
        auto w = random_bv_history(rng, 2, 0.05, 6.0, 3.0, true);
        auto y = x + c1;
        auto z = y + c2;
        ASSERT_TRUE(leq_A(x, x, A));
        ASSERT_TRUE(leq_A(x, y, A));
        ASSERT_TRUE(leq_A(y, z, A));
        ASSERT_TRUE(leq_A(x, z, A));
        ASSERT_TRUE(leq_A(x + w, y + w, A));
        if (c1.sup_norm() > 1e-6) ASSERT_FALSE(leq_A(y, x, A));
    }
}

TEST(HistoryProperty, ConstructHDominates) {
    Rng rng(12);
    OrderParams A({-1.0, -2.0});
    auto zero = HistoryFunction::zeros(2, 0.02, 8.0);
    for (int trial = 0; trial < 100; ++trial) {
        auto x = random_bv_history(rng, 2, 0.02, 8.0, 5.0, true);
        auto h = construct_h(x, A);
        ASSERT_TRUE(leq_A(x, h, A));
        ASSERT_TRUE(leq_A(zero, h, A));
        auto h0 = construct_h0(x, A);
        auto shifted = x;
        shifted += Vector(-x.head());
        ASSERT_TRUE(leq_A(x, h0, A));
        ASSERT_TRUE(leq_A(zero, h0, A));
        ASSERT_TRUE(leq_A(shifted, h0, A));
        for (double T : {0.0, 0.5, 3.0, 20.0}) ASSERT_TRUE(leq_A(zero, shifted_envelope(h0, A, T), A));
    }
}

TEST(HistoryProperty, ConeBoundsVariation) {
    // 0 <=_A h and x <=_A h bound the unit-window variation of x by
    // D + e^a |x| with D = e^a (2|h| + |x|).
    Rng rng(13);
    OrderParams A({-1.0});
    const double ea = std::exp(1.0);
    for (int trial = 0; trial < 100; ++trial) {
        auto x = random_bv_history(rng, 1, 0.02, 6.0, 2.0, true);
        auto h = construct_h(x, A) + random_cone_element(rng, A, 0.02, 6.0);
        const double D = ea * (2 * h.sup_norm() + x.sup_norm());
        ASSERT_LE(regularity_R(x).sup_var, D + ea * x.sup_norm());
    }
}

TEST(HistoryProperty, MetricBounded) {
    Rng rng(14);
    for (int trial = 0; trial < 100; ++trial) {
        auto x = random_bv_history(rng, 2, 0.1, 5.0, 100.0, true);
        auto y = random_bv_history(rng, 2, 0.1, 5.0, 100.0, true);
        const double d = metric_d(x, y);
        ASSERT_LE(d, 1.0);
        ASSERT_GE(d, 0.0);
        ASSERT_EQ(metric_d(x, x), 0.0);
    }
}

TEST(HistoryProperty, OrderEnvelopeBrackets) {
    Rng rng(15);
    OrderParams A({-1.0, -3.0});
    for (int trial = 0; trial < 100; ++trial) {
        auto v = random_bv_history(rng, 2, 0.02, 6.0, 2.0, trial % 3 == 0);
        auto c = random_bv_history(rng, 2, 0.02, 6.0, 2.0);
        auto [a, b] = order_envelope(v, c, A);
        ASSERT_TRUE(leq_A(a, v, A));
        ASSERT_TRUE(leq_A(v, b, A));
        ASSERT_TRUE(leq_A(a, c, A));
        ASSERT_TRUE(leq_A(c, b, A));
    }
}
