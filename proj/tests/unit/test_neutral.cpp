#include "fadeflow/neutral.hpp"
#include "fadeflow/sampling.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fadeflow;

namespace {

const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

Vector vec(double a) { return Vector::Constant(1, a); }
CoeffMatrix c1(double v) { return CoeffMatrix::constant(Matrix::Constant(1, 1, v)); }

NeutralOperator atom_operator(double c, double r = 1.0, double step = 0.05, double depth = 10.0) {
    NeutralOperator D;
    D.base = TorusBase({kGolden});
    D.atoms.push_back({r, c1(c)});
    D.grid = Grid{step, depth};
    return D;
}

// Two components, oscillating atom coefficients and a density.
NeutralOperator rich_operator() {
    NeutralOperator D;
    D.dim = 2;
    D.base = TorusBase({1.0, kGolden});
    D.base.add_coeff("osc", {{{1, 0}, 0.5, 0.0}, {{0, 1}, 0.5, 0.3}});
    D.atoms.push_back({0.5, CoeffMatrix::diagonal({CoeffRef(0.2, "osc", 0.2), CoeffRef(0.1)})});
    D.atoms.push_back({1.5, CoeffMatrix::constant((Matrix(2, 2) << 0.0, 0.1, -0.15, 0.0).finished())});
    D.density = Density{1.0, CoeffMatrix::constant((Matrix(2, 2) << 0.1, 0.05, 0.0, 0.2).finished()), 0.0};
    D.grid = Grid{0.05, 10.0};
    return D;
}

NfdeModel scalar_nfde(double c, double forcing) {
    NfdeModel m;
    m.D = atom_operator(c);
    m.G = RhsForm(1);
    // G = -D(z_t) + forcing.
    m.G.linear_inst(0, 0) = -1.0;
    m.G.delays.push_back({1.0, c1(c)});
    m.G.forcing = {CoeffRef(forcing)};
    m.order = OrderParams({-1.0});
    return m;
}

}  // namespace

TEST(Neutral, EvalDExamples) {
    const auto D = atom_operator(0.5);
    const BasePoint th({0.2});
    EXPECT_DOUBLE_EQ(eval_D(D, th, HistoryFunction::constant(0.05, 10.0, vec(1.0)))[0], 0.5);
    const auto ramp = HistoryFunction::from_function(1, 0.05, 10.0, [](double s) { return vec(s); });
    EXPECT_NEAR(eval_D(D, th, ramp)[0], 0.5, 1e-12);

    NeutralOperator dens;
    dens.base = TorusBase({kGolden});
    dens.density = Density{1.0, c1(1.0), 0.0};
    dens.grid = Grid{0.05, 10.0};
    dens.validate();
    EXPECT_NEAR(eval_D(dens, th, HistoryFunction::constant(0.05, 10.0, vec(1.0)))[0], std::exp(-10.0), 1e-12);
}

TEST(Neutral, ValidationRejects) {
    EXPECT_THROW(atom_operator(1.0).validate(), InvalidArgument);
    EXPECT_THROW(atom_operator(0.5, 0.0).validate(), InvalidArgument);
    EXPECT_THROW(atom_operator(0.5, 0.33).validate(), InvalidArgument);
    EXPECT_THROW(atom_operator(0.5, 9.95).validate(), InvalidArgument);
    EXPECT_NO_THROW(atom_operator(0.99).validate());
    EXPECT_THROW(eval_D(atom_operator(0.5), BasePoint({0.0}), HistoryFunction::constant(0.1, 10.0, vec(1.0))),
                 InvalidArgument);
}

TEST(Neutral, KernelVariation) {
    const auto D = rich_operator();
    const BasePoint th({0.0, 0.0});
    EXPECT_DOUBLE_EQ(kernel_variation(atom_operator(0.5), th, -0.9, -0.1), 0.0);
    EXPECT_DOUBLE_EQ(kernel_variation(atom_operator(0.5), th, -0.5, 0.0), 0.0);
    const auto plain = atom_operator(0.5);
    EXPECT_NEAR(kernel_variation(plain, th, -1e6, 0.0), plain.q(), 1e-9);
    // Near zero only the density contributes, and it vanishes with the interval.
    EXPECT_LT(kernel_variation(D, th, -1e-6, 0.0), 1e-6);
    EXPECT_LE(kernel_variation(D, th, -1e6, 0.0), D.q() + 1e-12);
}

TEST(Neutral, Dhat2Examples) {
    const auto D = atom_operator(0.5);
    const BasePoint th({0.4});
    EXPECT_EQ(eval_Dhat2(D, th, HistoryFunction::zeros(1, 0.05, 10.0)).sup_norm(), 0.0);
    const auto out = eval_Dhat2(D, th, HistoryFunction::constant(0.05, 10.0, vec(1.0)));
    for (std::size_t i = 0; i < out.count(); ++i) EXPECT_NEAR(out.sample(i)[0], 0.5, 1e-15);
}

TEST(Neutral, InverseConstantFixedPoint) {
    const auto D = atom_operator(0.5);
    const BasePoint th({0.1});
    const auto h = HistoryFunction::constant(0.05, 10.0, vec(1.0));
    const auto inv = dhat_inverse(D, th, h);
    EXPECT_TRUE(inv.converged);
    for (std::size_t i = 0; i < inv.x.count(); ++i) EXPECT_NEAR(inv.x.sample(i)[0], 2.0, 1e-9);
    const auto sweep = dhat_inverse_sweep(D, th, h);
    for (std::size_t i = 0; i < sweep.count(); ++i) EXPECT_NEAR(sweep.sample(i)[0], 2.0, 1e-12);
    EXPECT_EQ(dhat_inverse(D, th, HistoryFunction::zeros(1, 0.05, 10.0)).x.sup_norm(), 0.0);
}

TEST(Neutral, InverseMaxIterReported) {
    const auto D = atom_operator(0.9);
    Rng rng(5);
    const auto h = random_bv_history(rng, 1, 0.05, 10.0);
    const auto inv = dhat_inverse(D, BasePoint({0.0}), h, 1e-12, 3);
    EXPECT_FALSE(inv.converged);
    EXPECT_EQ(inv.iterations, 3);
    EXPECT_GT(inv.residual, 1e-6);
}

TEST(NeutralProperty, RoundTripAndBounds) {
    const auto D = rich_operator();
    Rng rng(11);
    const double kprime = 1.0 / (1.0 - D.q());
    for (int s = 0; s < 25; ++s) {
        const BasePoint th = random_base_point(rng, 2);
        const auto h = random_bv_history(rng, 2, 0.05, 10.0, 1.0, true);
        const auto inv = dhat_inverse(D, th, h);
        ASSERT_TRUE(inv.converged);
        EXPECT_LE(inv.residual, 1e-8);
        EXPECT_LE(inv.x.sup_norm(), kprime * h.sup_norm() + 1e-9);
        const auto sw = dhat_inverse_sweep(D, th, h);
        EXPECT_LE(seminorm(sw, inv.x, 10.0), 1e-8);
        EXPECT_LE(seminorm(eval_Dhat2(D, th, sw), h, 10.0), 1e-12);
        // Injectivity proxy.
        const auto x = random_bv_history(rng, 2, 0.05, 10.0);
        EXPECT_LE(seminorm(dhat_inverse_sweep(D, th, eval_Dhat2(D, th, x)), x, 10.0), 1e-10);
    }
}

TEST(NeutralProperty, Linearity) {
    const auto D = rich_operator();
    Rng rng(12);
    for (int s = 0; s < 10; ++s) {
        const BasePoint th = random_base_point(rng, 2);
        const auto x = random_bv_history(rng, 2, 0.05, 10.0);
        const auto y = random_bv_history(rng, 2, 0.05, 10.0);
        const double a = 0.7, b = -1.3;
        const auto lhs = eval_Dhat2(D, th, a * x + b * y);
        const auto rhs = a * eval_Dhat2(D, th, x) + b * eval_Dhat2(D, th, y);
        EXPECT_LE(seminorm(lhs, rhs, 10.0), 1e-10);
        const auto il = dhat_inverse(D, th, a * x + b * y).x;
        const auto ir = a * dhat_inverse(D, th, x).x + b * dhat_inverse(D, th, y).x;
        EXPECT_LE(seminorm(il, ir, 10.0), 1e-9);
    }
}

TEST(NeutralProperty, DeepTailPerturbation) {
    // Perturbations below -n reach [-n/2, 0] only through ~n/(2 r) atom hops.
    const auto D = atom_operator(0.5, 1.0, 0.05, 20.0);
    Rng rng(13);
    const BasePoint th({0.3});
    const auto x = random_bv_history(rng, 1, 0.05, 20.0);
    for (double n : {4.0, 8.0, 12.0}) {
        const auto bump = HistoryFunction::from_function(1, 0.05, 20.0, [&](double s) {
            return vec(s < -n ? 1.0 : 0.0);
        });
        const double bound = std::pow(D.q(), std::floor(n / 2.0)) * (1.0 / (1.0 - D.q()));
        const auto d1 = eval_Dhat2(D, th, x + bump) - eval_Dhat2(D, th, x);
        const auto d2 = dhat_inverse_sweep(D, th, x + bump) - dhat_inverse_sweep(D, th, x);
        EXPECT_LE(seminorm(d1, HistoryFunction::zeros(1, 0.05, 20.0), n / 2.0), bound + 1e-12);
        EXPECT_LE(seminorm(d2, HistoryFunction::zeros(1, 0.05, 20.0), n / 2.0), bound + 1e-12);
    }
}

TEST(Neutral, NonhomogeneousExamples) {
    const auto D = atom_operator(0.5);
    const BasePoint th({0.0});
    auto tr = solve_nonhomogeneous(D, th, HistoryFunction::constant(0.05, 10.0, vec(2.0)),
                                   [](double) { return vec(1.0); }, 5.0);
    for (std::size_t i = 0; i <= tr.steps(); ++i) EXPECT_NEAR(tr.head(i)[0], 2.0, 1e-14);
    auto zero = solve_nonhomogeneous(D, th, HistoryFunction::zeros(1, 0.05, 10.0),
                                     [](double) { return vec(0.0); }, 2.0);
    for (std::size_t i = 0; i <= zero.steps(); ++i) EXPECT_EQ(zero.head(i)[0], 0.0);
    EXPECT_THROW(solve_nonhomogeneous(D, th, HistoryFunction::constant(0.05, 10.0, vec(2.0)),
                                      [](double) { return vec(0.0); }, 1.0),
                 InvalidArgument);
}

TEST(Neutral, NonhomogeneousWithDensityMatchesD) {
    const auto D = rich_operator();
    Rng rng(3);
    const BasePoint th({0.1, 0.2});
    auto phi = random_bv_history(rng, 2, 0.05, 10.0);
    auto h = [&](double t) { return Vector(eval_D(D, th, phi) + Vector::Constant(2, std::sin(t))); };
    const auto tr = solve_nonhomogeneous(D, th, phi, h, 4.0);
    for (std::size_t i = 0; i <= tr.steps(); i += 7)
        EXPECT_LE(max_norm(eval_D(D, tr.base_point(i), tr.snapshot_view(i)) - h(tr.time(i))), 1e-12);
}

TEST(Neutral, StabilityConstants) {
    const auto D = atom_operator(0.5);
    const auto sc = stability_constants(D, 20, 6.0);
    EXPECT_DOUBLE_EQ(sc.k_bound, 2.0);
    EXPECT_LE(sc.k_emp, 2.0 + 1e-9);
    EXPECT_TRUE(sc.within_bound);

    NeutralOperator id;
    id.base = TorusBase({kGolden});
    id.grid = Grid{0.05, 10.0};
    const auto si = stability_constants(id, 5, 2.0);
    EXPECT_DOUBLE_EQ(si.k_emp, 1.0);
    for (std::size_t j = 0; j < si.times.size(); ++j)
        if (si.times[j] > 0.0) EXPECT_EQ(si.c_profile[j], 0.0);

    const auto sr = stability_constants(rich_operator(), 5, 12.0);
    EXPECT_TRUE(sr.within_bound);
}

TEST(Neutral, SingleAtomDecayAtMultiples) {
    const auto D = atom_operator(0.6);
    Rng rng(21);
    const BasePoint th({0.0});
    auto phi = random_bv_history(rng, 1, 0.05, 10.0);
    phi.set_sample(0, Vector(phi.head() - eval_D(D, th, phi)));
    const auto tr = solve_nonhomogeneous(D, th, phi, [](double) { return vec(0.0); }, 8.0);
    for (int n = 1; n <= 8; ++n)
        EXPECT_LE(std::abs(tr.head(static_cast<std::size_t>(20 * n))[0]),
                  std::pow(0.6, n) * (1 + 1e-6) * phi.sup_norm());
}

TEST(Neutral, KdBounds) {
    NeutralOperator id;
    id.base = TorusBase({kGolden});
    id.grid = Grid{0.05, 10.0};
    const auto b0 = bounds_KD(id, 20);
    EXPECT_DOUBLE_EQ(b0.K_D, 1.0);
    EXPECT_DOUBLE_EQ(b0.K_D_prime, 1.0);

    const auto D = atom_operator(0.5);
    const auto b = bounds_KD(D, 200);
    EXPECT_DOUBLE_EQ(b.K_D, 1.5);
    EXPECT_DOUBLE_EQ(b.K_D_prime, 2.0);
    EXPECT_LE(b.emp_forward, 1.5 + 1e-12);
    EXPECT_LE(b.emp_inverse, 2.0 + 1e-12);
    // Sign alignment attains K_D.
    const auto aligned = HistoryFunction::from_function(1, 0.05, 10.0, [](double s) { return vec(s > -0.5 ? 1.0 : -1.0); });
    EXPECT_NEAR(eval_D(D, BasePoint({0.0}), aligned)[0], 1.5, 1e-15);
}

TEST(Neutral, LeqDA) {
    const auto D = rich_operator();
    const OrderParams A({-1.0, -2.0});
    Rng rng(4);
    const BasePoint th({0.3, 0.1});
    const auto x = random_bv_history(rng, 2, 0.05, 10.0);
    EXPECT_TRUE(leq_DA(D, th, x, x, A));
    const auto c = random_cone_element(rng, A, 0.05, 10.0);
    EXPECT_TRUE(leq_DA(D, th, x, x + dhat_inverse_sweep(D, th, c), A));

    NeutralOperator id;
    id.dim = 2;
    id.base = D.base;
    id.grid = D.grid;
    for (int s = 0; s < 20; ++s) {
        auto [a, b] = random_ordered_pair(rng, A, 0.05, 10.0);
        if (s % 2) std::swap(a, b);
        EXPECT_EQ(leq_DA(id, th, a, b, A), leq_A(a, b, A));
    }
}

TEST(Neutral, CheckN4) {
    auto m = scalar_nfde(0.5, 0.5);
    const auto zero = check_N4(m, 1, 50);
    EXPECT_TRUE(zero.pass);
    // Margin for G = -D + f is exactly zero.
    EXPECT_NEAR(zero.min_margin, 0.0, 1e-12);
    m.order = OrderParams({-0.5});
    EXPECT_FALSE(check_N4(m, 1, 50).pass);
}

TEST(Neutral, TransformIdentityIsG) {
    NfdeModel m = scalar_nfde(0.0, 0.2);
    m.D.atoms.clear();
    m.G.delays.clear();
    const auto F = transform_to_fde(m);
    Rng rng(8);
    const auto x = random_bv_history(rng, 1, 0.05, 10.0);
    const BasePoint th({0.7});
    EXPECT_EQ(F(th, x)[0], eval_G(m, th, x)[0]);

    const auto ma = scalar_nfde(0.5, 0.5);
    const auto Fa = transform_to_fde(ma);
    // Constant y^ = 1 inverts to 2, where G = -2 + 0.5 * 2 + 0.5 = -0.5.
    EXPECT_NEAR(Fa(th, HistoryFunction::constant(0.05, 10.0, vec(1.0)))[0], -0.5, 1e-12);
}

TEST(Neutral, ConservationWhenGZero) {
    NfdeModel m;
    m.D = rich_operator();
    m.G = RhsForm(2);
    m.order = OrderParams({-1.0, -1.0});
    Rng rng(9);
    const BasePoint th({0.2, 0.6});
    const auto x0 = random_bv_history(rng, 2, 0.05, 10.0);
    const Vector d0 = eval_D(m.D, th, x0);
    const auto tr = integrate_nfde(m, th, x0, 30.0);
    for (std::size_t i = 0; i <= tr.steps(); i += 3) {
        EXPECT_LE(max_norm(eval_D(m.D, tr.base_point(i), tr.snapshot_view(i)) - d0), 1e-8);
        EXPECT_LE(max_norm(tr.w(i) - d0), 1e-12);
    }
}

TEST(Neutral, ScalarAtomEquilibrium) {
    const auto m = scalar_nfde(0.5, 0.5);
    const auto x0 = HistoryFunction::zeros(1, 0.05, 10.0);
    const auto tr = integrate_nfde(m, BasePoint({0.0}), x0, 40.0);
    const std::size_t last = tr.steps();
    EXPECT_NEAR(tr.w(last)[0], 0.5, 1e-8);
    EXPECT_NEAR(tr.head(last)[0], 1.0, 1e-6);
    // w solves w' = -w + 0.5 exactly up to RK4 error.
    EXPECT_NEAR(tr.w(20)[0], 0.5 * (1.0 - std::exp(-1.0)), 1e-7);
}

TEST(Neutral, PipelineEquivalence) {
    // Atoms only and a deep grid: the transformed pipeline inverts each window with a
    // constant tail, so the density mass e^{-L} and atom hops past -L must be negligible.
    NfdeModel m;
    m.D = rich_operator();
    m.D.density.reset();
    m.D.grid = Grid{0.025, 30.0};
    m.G = RhsForm(2);
    m.G.linear_inst(0, 0) = -1.0;
    m.G.linear_inst(1, 1) = CoeffRef(-1.2, "osc");
    m.G.linear_inst(0, 1) = 0.2;
    m.G.delays.push_back({1.0, CoeffMatrix::constant((Matrix(2, 2) << 0.3, 0.0, 0.1, 0.2).finished())});
    m.G.dists.push_back({2.0, CoeffMatrix::constant((Matrix(2, 2) << 0.2, 0.0, 0.0, 0.3).finished())});
    m.G.forcing = {CoeffRef(0.3, "osc"), CoeffRef(0.1)};
    m.order = OrderParams({-1.0, -1.0});
    const BasePoint th({0.1, 0.4});
    const auto x0 = HistoryFunction::from_function(2, 0.025, 30.0, [](double s) {
        return Vector((Vector(2) << std::sin(s) + 0.3, std::cos(0.7 * s)).finished());
    });
    const double T = 5.0;
    const auto direct = integrate_nfde(m, th, x0, T);
    const auto hat = integrate_functional(m.base(), transform_to_fde(m), th, eval_Dhat2(m.D, th, x0), T);
    ASSERT_EQ(direct.steps(), hat.steps());
    double err = 0.0, werr = 0.0;
    for (std::size_t i = 0; i <= direct.steps(); ++i) {
        werr = std::max(werr, max_norm(direct.w(i) - hat.head(i)));
        const auto z = dhat_inverse_sweep(m.D, hat.base_point(i), hat.snapshot_view(i));
        err = std::max(err, max_norm(direct.head(i) - z.head()));
    }
    EXPECT_LE(werr, 1e-6);
    EXPECT_LE(err, 1e-6);
}

TEST(Neutral, MonotonicityAndProbe) {
    const auto m = scalar_nfde(0.5, 0.5);
    Rng rng(14);
    const BasePoint th({0.0});
    const auto x0 = random_bv_history(rng, 1, 0.05, 10.0);
    const auto c = random_cone_element(rng, m.order, 0.05, 10.0);
    const auto y0 = x0 + dhat_inverse_sweep(m.D, th, c);
    EXPECT_TRUE(check_nfde_monotonicity(m, th, x0, x0, 5.0).pass);
    EXPECT_TRUE(check_nfde_monotonicity(m, th, x0, y0, 10.0).pass);
    EXPECT_THROW(check_nfde_monotonicity(m, th, y0, x0 - dhat_inverse_sweep(m.D, th, c), 1.0), InvalidArgument);
}
