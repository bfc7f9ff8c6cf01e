#include "fadeflow/models.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fadeflow;

namespace {

Vector vec(double a) { return Vector::Constant(1, a); }

ScalarFdeSpec scalar(double a, double b, double g, double f) {
    ScalarFdeSpec s;
    s.alpha = a;
    s.beta = b;
    s.gamma = g;
    s.forcing = CoeffRef(f);
    return s;
}

CompartmentalSpec single_active(double c, double inflow) {
    auto s = CompartmentalSpec::zeros(1, TorusBase({0.618}), Grid{0.05, 10.0});
    s.neutral(0, 0) = c;
    s.neutral_delay = {1.0};
    s.excretion = {CoeffRef(1.0)};
    s.inflow = {CoeffRef(inflow)};
    return s;
}

CompartmentalSpec ring(LossForm form) {
    TorusBase base({1.0, 0.618});
    base.add_coeff("pulse", {{{1, 0}, 0.2, 0.0}});
    auto s = CompartmentalSpec::zeros(2, base, Grid{0.05, 10.0});
    s.transport(0, 1) = CoeffRef(0.6, "pulse");
    s.transport(1, 0) = 0.4;
    s.transport_delay = {0.0, 0.0, 0.0, 0.0};
    s.neutral(0, 1) = CoeffRef(0.2, "pulse", 0.5);
    s.neutral(1, 0) = 0.1;
    s.neutral_delay = {1.0, 0.5, 1.5, 1.0};
    s.inflow = {CoeffRef(0.3), CoeffRef(0.1)};
    s.loss_form = form;
    return s;
}

}  // namespace

TEST(Models, ScalarPureDecay) {
    const auto m = build_scalar_fde(scalar(1.0, 0.0, 1.0, 0.0));
    const auto tr = integrate(m, BasePoint({0.0}), HistoryFunction::constant(0.01, 20.0, vec(1.0)), 1.0);
    EXPECT_NEAR(tr.head(tr.steps())[0], std::exp(-1.0), 1e-8);
}

TEST(Models, ScalarEquilibrium) {
    const auto spec = scalar(1.0, 0.5, 1.0, 0.5);
    EXPECT_DOUBLE_EQ(scalar_equilibrium(spec), 1.0);
    const auto m = build_scalar_fde(spec);
    const auto tr = integrate(m, BasePoint({0.0}), HistoryFunction::zeros(1, 0.01, 20.0), 80.0);
    EXPECT_NEAR(tr.head(tr.steps())[0], 1.0, 1e-6);
}

TEST(Models, ScalarDomain) {
    EXPECT_TRUE(scalar_dissipative(scalar(1.0, 0.5, 1.0, 0.0)));
    EXPECT_FALSE(scalar_dissipative(scalar(1.0, 2.0, 1.0, 0.0)));
    EXPECT_THROW(build_scalar_fde(scalar(0.0, 0.5, 1.0, 0.0)), InvalidArgument);
    EXPECT_THROW(build_scalar_fde(scalar(1.0, -0.5, 1.0, 0.0)), InvalidArgument);
    EXPECT_THROW(build_scalar_fde(scalar(1.0, 0.5, 0.0, 0.0)), InvalidArgument);
}

TEST(Models, CompartmentalSingleActive) {
    const auto m = build_compartmental_nfde(single_active(0.5, 0.5));
    const auto tr = integrate_nfde(m, BasePoint({0.0}), HistoryFunction::zeros(1, 0.05, 10.0), 40.0);
    EXPECT_NEAR(tr.w(tr.steps())[0], 0.5, 1e-8);
    EXPECT_NEAR(tr.head(tr.steps())[0], 1.0, 1e-6);
    EXPECT_NEAR(compartmental_equilibrium(single_active(0.5, 0.5))[0], 1.0, 1e-14);
}

TEST(Models, CompartmentalZeroSpec) {
    const auto s = CompartmentalSpec::zeros(3, TorusBase({0.618}), Grid{0.05, 5.0});
    const auto m = build_compartmental_nfde(s);
    const auto tr = integrate_nfde(m, BasePoint({0.2}), HistoryFunction::zeros(3, 0.05, 5.0), 5.0);
    for (std::size_t i = 0; i <= tr.steps(); ++i) EXPECT_EQ(max_norm(tr.head(i)), 0.0);
}

TEST(Models, CompartmentalValidation) {
    auto s = ring(LossForm::Neutral);
    s.transport(0, 1) = -0.1;
    EXPECT_THROW(s.validate(), InvalidArgument);
    s = ring(LossForm::Neutral);
    s.neutral(0, 0) = 0.9;
    s.neutral_delay[0] = 1.0;
    EXPECT_THROW(s.validate(), InvalidArgument);
    s = ring(LossForm::Neutral);
    s.inflow[1] = CoeffRef(0.1, "pulse");
    EXPECT_THROW(s.validate(), InvalidArgument);
    s = ring(LossForm::Neutral);
    s.transport(1, 1) = 0.2;
    EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(Models, RingMassBalance) {
    // With instantaneous transport and the head loss form, sum_i D_i grows by the net inflow only.
    const auto m = build_compartmental_nfde(ring(LossForm::Head));
    const BasePoint th({0.3, 0.7});
    const auto x0 = HistoryFunction::constant(0.05, 10.0, (Vector(2) << 1.0, 2.0).finished());
    const auto tr = integrate_nfde(m, th, x0, 20.0);
    const double s0 = tr.w(0).sum();
    for (std::size_t i = 0; i <= tr.steps(); i += 10)
        EXPECT_NEAR(tr.w(i).sum(), s0 + 0.4 * tr.time(i), 1e-10);
}

TEST(Models, NonnegativityAlongTrajectories) {
    for (auto form : {LossForm::Neutral, LossForm::Head}) {
        auto s = ring(form);
        s.transport_delay = {0.0, 0.5, 1.0, 0.0};
        const auto m = build_compartmental_nfde(s);
        Rng rng(2);
        for (int k = 0; k < 3; ++k) {
            const BasePoint th = random_base_point(rng, 2);
            const auto x0 = HistoryFunction::constant(0.05, 10.0, (Vector(2) << 0.1 * k, 1.0).finished());
            const auto tr = integrate_nfde(m, th, x0, 30.0);
            for (std::size_t i = 0; i <= tr.steps(); ++i) EXPECT_GE(tr.head(i).minCoeff(), -1e-12);
        }
    }
}

TEST(Models, ConstantEquilibriumMatchesRun) {
    auto base = TorusBase({0.618});
    auto s = CompartmentalSpec::zeros(2, base, Grid{0.05, 10.0});
    s.transport(0, 1) = 0.5;
    s.transport(1, 0) = 0.3;
    s.transport_delay = {0.0, 1.0, 0.5, 0.0};
    s.neutral(0, 1) = 0.25;
    s.neutral(1, 0) = 0.2;
    s.neutral_delay = {1.0, 1.0, 0.5, 1.0};
    s.excretion = {CoeffRef(0.2), CoeffRef(0.4)};
    s.inflow = {CoeffRef(0.5), CoeffRef(0.2)};
    const Vector eq = compartmental_equilibrium(s);
    const auto tr = integrate_nfde(build_compartmental_nfde(s), BasePoint({0.0}),
                                   HistoryFunction::zeros(2, 0.05, 10.0), 400.0);
    EXPECT_LE(max_norm(tr.head(tr.steps()) - eq), 1e-6);
}

TEST(Models, AuditCanonicalScalar) {
    ScalarFdeSpec spec = scalar(1.0, 0.5, 1.0, 0.5);
    spec.grid = Grid{0.02, 20.0};
    AuditOptions opts;
    opts.n_samples = 100;
    const auto rep = audit_hypotheses(build_scalar_fde(spec), opts);
    EXPECT_FALSE(rep.hard_failure());
    for (const auto& c : rep.checks) EXPECT_TRUE(c.ok) << c.name << ": " << c.detail;
    EXPECT_EQ(rep.find("F1")->status, CheckStatus::ByConstruction);
    EXPECT_EQ(rep.find("F5")->status, CheckStatus::Heuristic);
}

TEST(Models, AuditFlagsViolations) {
    ScalarFdeSpec spec = scalar(1.0, 0.0, 1.0, 0.0);
    spec.grid = Grid{0.02, 20.0};
    AuditOptions opts;
    opts.n_samples = 100;
    const auto rep = audit_hypotheses(build_scalar_fde(spec, OrderParams({-0.5})), opts);
    EXPECT_TRUE(rep.hard_failure());
    EXPECT_FALSE(rep.find("F4")->ok);

    ScalarFdeSpec bad = scalar(1.0, 2.0, 1.0, 0.0);
    bad.grid = Grid{0.02, 20.0};
    const auto rb = audit_hypotheses(build_scalar_fde(bad), opts);
    EXPECT_FALSE(rb.find("dissipative")->ok);
    EXPECT_EQ(rb.find("dissipative")->status, CheckStatus::Heuristic);
    EXPECT_FALSE(rb.find("F6")->ok);
}

TEST(Models, AuditCompartmentalNearUnitMass) {
    auto s = CompartmentalSpec::zeros(2, TorusBase({0.618}), Grid{0.05, 10.0});
    s.transport(0, 1) = 0.5;
    s.transport(1, 0) = 0.3;
    s.transport_delay = {0.0, 1.0, 0.5, 0.0};
    s.neutral(0, 1) = 0.9;
    s.neutral(1, 0) = 0.6;
    s.neutral_delay = {1.0, 1.0, 0.5, 1.0};
    s.excretion = {CoeffRef(0.2), CoeffRef(0.4)};
    s.inflow = {CoeffRef(0.5), CoeffRef(0.2)};
    AuditOptions opts;
    opts.n_samples = 50;
    const auto rep = audit_hypotheses(build_compartmental_nfde(s), opts);
    EXPECT_NEAR(rep.q, 0.9, 1e-15);
    EXPECT_NEAR(rep.k_bound, 10.0, 1e-12);
    EXPECT_FALSE(rep.hard_failure());
    for (const auto& c : rep.checks) EXPECT_TRUE(c.ok) << c.name << ": " << c.detail;
}
