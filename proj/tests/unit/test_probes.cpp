#include "fadeflow/models.hpp"
#include "fadeflow/sampling.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fadeflow;

namespace {

constexpr double kGolden = 0.6180339887498949;

FdeModel forced_scalar(double beta, double step, double depth) {
    ScalarFdeSpec s;
    s.alpha = 1.0;
    s.beta = beta;
    s.gamma = 1.0;
    s.base = TorusBase({kGolden});
    s.base.add_coeff("wave", {{{1}, 1.0, 0.0}});
    s.forcing = CoeffRef(0.5, "wave", 0.2);
    s.grid = Grid{step, depth};
    return build_scalar_fde(s);
}

}  // namespace

TEST(Probes, FittedLogSlope) {
    std::vector<double> t{0, 1, 2, 3}, v;
    for (double x : t) v.push_back(2.0 * std::exp(-0.7 * x));
    EXPECT_NEAR(fitted_log_slope(t, v), -0.7, 1e-12);
    v[1] = 0.0;  // skipped
    EXPECT_NEAR(fitted_log_slope(t, v), -0.7, 1e-12);
}

TEST(Probes, MonotonicityHoldsAndRejectsUnordered) {
    const auto m = forced_scalar(0.5, 0.05, 20.0);
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const auto [x, y] = random_ordered_pair(rng, m.order, 0.05, 20.0);
        const auto rep = check_monotonicity(m, random_base_point(rng, 1), x, y, 10.0);
        EXPECT_TRUE(rep.pass);
        EXPECT_FALSE(rep.first_violation.has_value());
        EXPECT_EQ(rep.checked, 201u);
    }
    const auto x = random_bv_history(rng, 1, 0.05, 20.0);
    EXPECT_THROW(check_monotonicity(m, BasePoint({0.0}), x, x - HistoryFunction::constant(0.05, 20.0, Vector::Ones(1)), 1.0),
                 InvalidArgument);
}

TEST(Probes, ContinuityScalesWithKernelTail) {
    // Linear model: the deviation from a bump below -n scales exactly like e^{-n}.
    const auto m = forced_scalar(0.5, 0.05, 25.0);
    const auto x0 = HistoryFunction::constant(0.05, 25.0, Vector::Constant(1, 0.3));
    const auto rep = continuity_probe(m, BasePoint({0.1}), x0, 2.0, 5.0, {4.0, 8.0, 12.0});
    ASSERT_EQ(rep.rows.size(), 3u);
    EXPECT_TRUE(rep.decreasing);
    for (std::size_t i = 1; i < 3; ++i)
        EXPECT_NEAR(rep.rows[i].head_deviation / rep.rows[i - 1].head_deviation, std::exp(-4.0), 1e-3 * std::exp(-4.0));
    EXPECT_GT(rep.rows[0].initial_distance, rep.rows[2].initial_distance);
}

TEST(Probes, OmegaLimitOfContractingModel) {
    const auto m = forced_scalar(0.5, 0.05, 20.0);
    OmegaOptions o;
    o.transients = {20.0, 40.0};
    o.t_max = 80.0;
    o.threshold = 1e-3;
    Rng rng(8);
    const auto x0 = HistoryFunction::zeros(1, 0.05, 20.0);
    const auto y0 = random_bv_history(rng, 1, 0.05, 20.0);
    const auto rep = omega_limit_probe(m, BasePoint({0.0}), x0, y0, o);
    ASSERT_EQ(rep.levels.size(), 2u);
    EXPECT_GT(rep.return_times, 0u);
    EXPECT_TRUE(rep.pairs_decreasing);
    EXPECT_LT(rep.two_solution_distance, 1e-3);
    EXPECT_LT(rep.two_solution_decay_rate, 0.0);

    o.t_max = 20.2;
    o.transients = {20.0};
    EXPECT_THROW(omega_limit_probe(m, BasePoint({0.0}), x0, y0, o), NoReturnPairs);
}

TEST(Probes, UniformStabilityRows) {
    const auto m = forced_scalar(0.5, 0.05, 20.0);
    const auto rep = uniform_stability_probe(m, 2.0, {0.2, 0.05, 0.1}, 2, 10.0, 5);
    ASSERT_EQ(rep.rows.size(), 3u);
    EXPECT_EQ(rep.pairs, 2u);
    EXPECT_FALSE(rep.any_collapse);
    for (std::size_t i = 1; i < 3; ++i) {
        EXPECT_LT(rep.rows[i - 1].eps, rep.rows[i].eps);
        EXPECT_LE(rep.rows[i - 1].delta, rep.rows[i].delta);
    }
}
