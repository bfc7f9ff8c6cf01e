#include "fadeflow/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace fadeflow {

namespace {

bool nonzero(const CoeffRef& c) { return c.constant != 0.0 || !c.is_constant(); }

double upper_bound(const TorusBase& base, const CoeffRef& c) {
    if (c.is_constant()) return c.constant;
    return c.constant + std::abs(c.scale) * base.coeff_bound(c.id);
}

std::string fresh_id(const TorusBase& base, const std::string& stem) {
    std::string id = stem;
    for (int k = 1; base.has_coeff(id); ++k) id = stem + "_" + std::to_string(k);
    return id;
}

/// A linear combination of coefficients, registered on the base as one trig
/// polynomial when it involves more than one id.
class CoeffSum {
public:
    void add(const CoeffRef& c, double factor = 1.0) {
        constant_ += factor * c.constant;
        if (!c.is_constant()) terms_.push_back({c.id, factor * c.scale});
    }
    bool empty() const { return constant_ == 0.0 && terms_.empty(); }

    CoeffRef finish(TorusBase& base, const std::string& stem) const {
        if (terms_.empty()) return CoeffRef(constant_);
        if (terms_.size() == 1) return CoeffRef(constant_, terms_[0].first, terms_[0].second);
        TrigPolynomial p;
        for (const auto& [id, s] : terms_)
            for (TrigTerm t : base.coeffs().at(id)) {
                t.amplitude *= s;
                p.push_back(std::move(t));
            }
        const std::string id = fresh_id(base, stem);
        base.add_coeff(id, std::move(p));
        return CoeffRef(constant_, id, 1.0);
    }

private:
    double constant_ = 0.0;
    std::vector<std::pair<std::string, double>> terms_;
};

CoeffRef product(const CoeffRef& a, const CoeffRef& b) {
    if (a.is_constant()) return CoeffRef(a.constant * b.constant, b.id, a.constant * b.scale);
    if (b.is_constant()) return CoeffRef(a.constant * b.constant, a.id, b.constant * a.scale);
    throw InvalidArgument("neutral loss form needs constant loss or constant neutral coefficients");
}

std::size_t lag_key(double delay, double step) {
    const double r = delay / step;
    if (delay < 0.0 || std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r))
        throw InvalidArgument("delay " + std::to_string(delay) + " is not a nonnegative multiple of the step");
    return static_cast<std::size_t>(std::llround(r));
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

void require_matrix(const CoeffMatrix& c, std::size_t m, const char* what) {
    if (c.dim != m || c.entries.size() != m * m)
        throw InvalidArgument(std::string(what) + " must be " + std::to_string(m) + "x" + std::to_string(m));
}

void require_ids(const TorusBase& base, const CoeffRef& c) {
    if (!c.is_constant() && !base.has_coeff(c.id))
        throw InvalidArgument("coefficient id '" + c.id + "' is not registered on the base");
}

}  // namespace

// ---------------------------------------------------------------- scalar FDE

FdeModel build_scalar_fde(const ScalarFdeSpec& spec) {
    return build_scalar_fde(spec, OrderParams({-spec.alpha}));
}

FdeModel build_scalar_fde(const ScalarFdeSpec& spec, const OrderParams& A) {
    if (!(spec.alpha > 0.0)) throw InvalidArgument("alpha must be positive");
    if (!(spec.beta >= 0.0)) throw InvalidArgument("beta must be nonnegative");
    if (!(spec.gamma > 0.0)) throw InvalidArgument("gamma must be positive");
    FdeModel m;
    m.base = spec.base;
    m.rhs = RhsForm(1);
    m.rhs.linear_inst(0, 0) = -spec.alpha;
    if (spec.beta != 0.0)
        m.rhs.dists.push_back({spec.gamma, CoeffMatrix::constant(Matrix::Constant(1, 1, spec.beta))});
    if (nonzero(spec.forcing)) m.rhs.forcing = {spec.forcing};
    m.order = A;
    m.grid = spec.grid;
    m.validate();
    return m;
}

bool scalar_dissipative(const ScalarFdeSpec& spec) { return spec.beta / spec.gamma < spec.alpha; }

double scalar_equilibrium(const ScalarFdeSpec& spec) {
    if (!spec.forcing.is_constant()) throw InvalidArgument("equilibrium needs constant forcing");
    const double net = spec.alpha - spec.beta / spec.gamma;
    if (net == 0.0) throw InvalidArgument("no isolated equilibrium when beta / gamma = alpha");
    return spec.forcing.constant / net;
}

// ---------------------------------------------------------------- compartmental NFDE

CompartmentalSpec CompartmentalSpec::zeros(std::size_t m, const TorusBase& base, const Grid& grid) {
    CompartmentalSpec s;
    s.m = m;
    s.base = base;
    s.transport = CoeffMatrix(m);
    s.transport_delay.assign(m * m, 0.0);
    s.neutral = CoeffMatrix(m);
    s.neutral_delay.assign(m * m, grid.step);
    s.excretion.assign(m, CoeffRef(0.0));
    s.inflow.assign(m, CoeffRef(0.0));
    s.grid = grid;
    return s;
}

void CompartmentalSpec::validate() const {
    if (m == 0) throw InvalidArgument("need at least one compartment");
    require_matrix(transport, m, "transport");
    require_matrix(neutral, m, "neutral");
    if (transport_delay.size() != m * m || neutral_delay.size() != m * m)
        throw InvalidArgument("delay matrices must have m*m entries");
    if (excretion.size() != m || inflow.size() != m)
        throw InvalidArgument("excretion and inflow need one entry per compartment");
    for (std::size_t i = 0; i < m; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const CoeffRef& g = transport(i, j);
            const CoeffRef& c = neutral(i, j);
            require_ids(base, g);
            require_ids(base, c);
            if (i == j && nonzero(g)) throw InvalidArgument("self transport g_ii must be zero");
            if (g.lower_bound(base) < 0.0)
                throw InvalidArgument("transport g_" + std::to_string(i + 1) + std::to_string(j + 1) +
                                      " can be negative");
            lag_key(transport_delay[i * m + j], grid.step);
            if (nonzero(c)) {
                if (!(neutral_delay[i * m + j] > 0.0))
                    throw InvalidArgument("neutral delays must be positive");
                lag_key(neutral_delay[i * m + j], grid.step);
            }
            row += c.bound(base);
        }
        if (!(row < 1.0))
            throw InvalidArgument("neutral row mass " + fmt(row) + " of compartment " + std::to_string(i + 1) +
                                  " must be < 1");
        require_ids(base, excretion[i]);
        require_ids(base, inflow[i]);
        if (excretion[i].lower_bound(base) < 0.0 || inflow[i].lower_bound(base) < 0.0)
            throw InvalidArgument("excretion and inflow must be nonnegative");
    }
}

std::vector<double> CompartmentalSpec::loss_bound() const {
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) out[i] += upper_bound(base, transport(j, i));
        out[i] += upper_bound(base, excretion[i]);
    }
    return out;
}

NfdeModel build_compartmental_nfde(const CompartmentalSpec& spec) {
    spec.validate();
    std::vector<double> a;
    for (double l : spec.loss_bound()) a.push_back(-std::max(l, 1e-3));
    return build_compartmental_nfde(spec, OrderParams(a));
}

NfdeModel build_compartmental_nfde(const CompartmentalSpec& spec, const OrderParams& A) {
    spec.validate();
    const std::size_t m = spec.m;
    const double step = spec.grid.step;
    NfdeModel model;
    NeutralOperator& D = model.D;
    D.dim = m;
    D.base = spec.base;
    D.grid = spec.grid;

    std::map<std::size_t, CoeffMatrix> atoms;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (nonzero(spec.neutral(i, j))) {
                auto& a = atoms.try_emplace(lag_key(spec.neutral_delay[i * m + j], step), m).first->second;
                a(i, j) = spec.neutral(i, j);
            }
    for (auto& [k, c] : atoms) D.atoms.push_back({static_cast<double>(k) * step, std::move(c)});

    std::vector<CoeffRef> loss(m);
    for (std::size_t i = 0; i < m; ++i) {
        CoeffSum s;
        for (std::size_t j = 0; j < m; ++j) s.add(spec.transport(j, i));
        s.add(spec.excretion[i]);
        loss[i] = s.finish(D.base, "loss_" + std::to_string(i + 1));
    }

    // Lag 0 holds the instantaneous part.
    std::map<std::size_t, std::vector<CoeffSum>> terms;
    auto at = [&](std::size_t k) -> std::vector<CoeffSum>& {
        return terms.try_emplace(k, std::vector<CoeffSum>(m * m)).first->second;
    };
    for (std::size_t i = 0; i < m; ++i) {
        at(0)[i * m + i].add(loss[i], -1.0);
        for (std::size_t j = 0; j < m; ++j) {
            if (spec.loss_form == LossForm::Neutral && nonzero(spec.neutral(i, j)))
                at(lag_key(spec.neutral_delay[i * m + j], step))[i * m + j].add(product(loss[i], spec.neutral(i, j)));
            if (nonzero(spec.transport(i, j)))
                at(lag_key(spec.transport_delay[i * m + j], step))[i * m + j].add(spec.transport(i, j));
        }
    }
    model.G = RhsForm(m);
    for (const auto& [k, sums] : terms) {
        CoeffMatrix c(m);
        bool any = false;
        for (std::size_t e = 0; e < m * m; ++e) {
            if (sums[e].empty()) continue;
            any = true;
            c.entries[e] = sums[e].finish(D.base, "g" + std::to_string(k) + "_" + std::to_string(e));
        }
        if (k == 0) model.G.linear_inst = std::move(c);
        else if (any) model.G.delays.push_back({static_cast<double>(k) * step, std::move(c)});
    }
    model.G.forcing = spec.inflow;
    model.order = A;
    model.validate();
    return model;
}

Vector compartmental_equilibrium(const CompartmentalSpec& spec) {
    spec.validate();
    const std::size_t m = spec.m;
    auto value = [](const CoeffRef& c) {
        if (!c.is_constant()) throw InvalidArgument("equilibrium needs constant coefficients");
        return c.constant;
    };
    const auto mm = static_cast<Eigen::Index>(m);
    Matrix M = Matrix::Zero(mm, mm);
    Vector rhs(mm);
    for (std::size_t i = 0; i < m; ++i) {
        double loss = value(spec.excretion[i]);
        for (std::size_t j = 0; j < m; ++j) loss += value(spec.transport(j, i));
        const auto ii = static_cast<Eigen::Index>(i);
        M(ii, ii) -= loss;
        for (std::size_t j = 0; j < m; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            M(ii, jj) += value(spec.transport(i, j));
            if (spec.loss_form == LossForm::Neutral) M(ii, jj) += loss * value(spec.neutral(i, j));
        }
        rhs[ii] = -value(spec.inflow[i]);
    }
    Eigen::FullPivLU<Matrix> lu(M);
    if (!lu.isInvertible()) throw InvalidArgument("constant equilibrium is not unique");
    return lu.solve(rhs);
}

// ---------------------------------------------------------------- audit

std::string to_string(CheckStatus s) {
    switch (s) {
        case CheckStatus::Pass: return "pass";
        case CheckStatus::Fail: return "fail";
        case CheckStatus::Heuristic: return "heuristic";
        case CheckStatus::ByConstruction: return "by construction";
    }
    return "unknown";
}

bool AuditReport::hard_failure() const {
    return std::any_of(checks.begin(), checks.end(), [](const auto& c) { return c.status == CheckStatus::Fail; });
}

const HypothesisCheck* AuditReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

namespace {

HypothesisCheck hard(std::string name, bool ok, double value, std::string detail) {
    return {std::move(name), ok ? CheckStatus::Pass : CheckStatus::Fail, ok, value, std::move(detail)};
}

/// Sufficient dissipativity: every row has a strictly dominant negative diagonal.
HypothesisCheck dissipativity(const TorusBase& base, const RhsForm& rhs) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rhs.dim; ++i) {
        double row = upper_bound(base, rhs.linear_inst(i, i));
        for (std::size_t j = 0; j < rhs.dim; ++j) {
            if (j != i) row += rhs.linear_inst(i, j).bound(base);
            for (const auto& d : rhs.delays) row += d.coeff(i, j).bound(base);
            for (const auto& d : rhs.dists) row += d.coeff(i, j).bound(base) / d.decay;
        }
        worst = std::max(worst, row);
    }
    const bool ok = worst < 0.0;
    return {"dissipative", CheckStatus::Heuristic, ok, worst,
            ok ? "diagonal dominance margin " + fmt(-worst)
               : "flagged: diagonal dominance fails by " + fmt(worst) + " (sufficient test only)"};
}

HypothesisCheck stability_check(const std::string& name, const std::function<UniformStabilityReport()>& run) {
    try {
        const UniformStabilityReport rep = run();
        double smallest = std::numeric_limits<double>::infinity();
        std::string rows;
        for (const auto& r : rep.rows) {
            smallest = std::min(smallest, r.delta / r.eps);
            rows += (rows.empty() ? "" : ", ") + ("eps " + fmt(r.eps) + " -> delta " + fmt(r.delta));
        }
        if (rep.rows.empty()) smallest = 0.0;
        return hard(name, !rep.any_collapse && !rep.rows.empty(), smallest,
                    std::to_string(rep.pairs) + " pairs; " + rows);
    } catch (const BlowUpError& e) {
        return hard(name, false, 0.0, e.what());
    }
}

}  // namespace

AuditReport audit_hypotheses(const FdeModel& model, const AuditOptions& opts) {
    model.validate();
    AuditReport rep;
    const auto& rhs = model.rhs;
    rep.lipschitz = rhs.lipschitz_bound(model.base);
    rep.checks.push_back({"F1", CheckStatus::ByConstruction, true, rep.lipschitz,
                          "Lipschitz in x with constant " + fmt(rep.lipschitz) + " on every ball"});
    const double bb = rhs.ball_bound(model.base, opts.ball_radius);
    rep.checks.push_back({"F2", CheckStatus::ByConstruction, true, bb,
                          "|F| <= " + fmt(bb) + " on the ball of radius " + fmt(opts.ball_radius)});
    rep.checks.push_back({"F3", CheckStatus::ByConstruction, true, 0.0,
                          "finitely many point evaluations and exponential kernels"});

    const MarginReport f4 = check_quasimonotone(model, opts.seed, opts.n_samples);
    rep.checks.push_back(hard("F4", f4.pass, f4.min_margin,
                              "min margin " + fmt(f4.min_margin) + " over " + std::to_string(f4.samples) + " pairs"));

    // Separation on late snapshots, a proxy for points with a backward extension.
    {
        Rng rng(opts.seed + 17);
        const BasePoint th = random_base_point(rng, model.base.dim());
        const HistoryFunction x0 = random_bv_history(rng, model.dim(), model.grid.step, model.grid.depth,
                                                     0.5 * opts.ball_radius);
        double worst = std::numeric_limits<double>::infinity();
        try {
            const Trajectory tr = integrate(model, th, x0, opts.late_time);
            for (std::size_t i : {tr.steps() / 2, (3 * tr.steps()) / 4, tr.steps()}) {
                const HistoryFunction x = tr.snapshot(i);
                for (std::size_t k = 0; k < model.dim(); ++k) {
                    Vector e = Vector::Zero(static_cast<Eigen::Index>(model.dim()));
                    e[static_cast<Eigen::Index>(k)] = 1e-3;
                    const HistoryFunction y = x + HistoryFunction::constant(x.step(), x.depth(), e);
                    const auto kk = static_cast<Eigen::Index>(k);
                    const double margin = eval_F(model, tr.base_point(i), y)[kk] -
                                          eval_F(model, tr.base_point(i), x)[kk] - model.order.diag[k] * 1e-3;
                    worst = std::min(worst, margin / 1e-3);
                }
            }
        } catch (const BlowUpError&) {
            worst = -std::numeric_limits<double>::infinity();
        }
        rep.checks.push_back({"F5", CheckStatus::Heuristic, worst > 0.0, worst,
                              "strict separation rate " + fmt(worst) + " on late snapshots (heuristic)"});
    }

    rep.checks.push_back(stability_check("F6", [&] {
        return uniform_stability_probe(model, opts.ball_radius, opts.eps_list, opts.stability_pairs,
                                       opts.stability_horizon, opts.seed);
    }));
    rep.checks.push_back(dissipativity(model.base, rhs));
    return rep;
}

AuditReport audit_hypotheses(const NfdeModel& model, const AuditOptions& opts) {
    model.validate();
    AuditReport rep;
    const NeutralOperator& D = model.D;
    rep.lipschitz = model.G.lipschitz_bound(D.base);
    rep.q = D.q();
    rep.k_bound = 1.0 / (1.0 - rep.q);
    rep.K_D = 1.0 + rep.q;
    rep.checks.push_back({"N1", CheckStatus::ByConstruction, true, rep.lipschitz,
                          "G Lipschitz in x with constant " + fmt(rep.lipschitz)});
    rep.checks.push_back({"N3", CheckStatus::ByConstruction, true, 0.0,
                          "finitely many point evaluations and exponential kernels"});

    {
        const BasePoint th(std::vector<double>(D.base.dim(), 0.0));
        const double r0 = std::min(D.min_delay(), D.grid.depth);
        std::vector<double> masses;
        for (double f : {1.0, 0.1, 0.01}) masses.push_back(kernel_variation(D, th, -f * r0, 0.0));
        const bool ok = masses.back() <= masses.front() && masses.back() < 0.05 * std::max(rep.q, 1e-12) + 1e-15;
        rep.checks.push_back(hard("D3", ok, masses.back(),
                                  "kernel mass on [-rho, 0]: " + fmt(masses[0]) + ", " + fmt(masses[1]) + ", " +
                                      fmt(masses[2]) + " for rho = r_min, r_min/10, r_min/100"));
    }
    {
        const double T = 5.0 * std::max(D.reach(), D.grid.step);
        const StabilityConstants sc = stability_constants(D, std::min<std::size_t>(opts.n_samples, 20), T, opts.seed);
        const bool ok = sc.within_bound && sc.k_emp <= sc.k_bound + 1e-9;
        rep.checks.push_back(hard("D4", ok, rep.q,
                                  "q = " + fmt(rep.q) + ", k_bound = " + fmt(sc.k_bound) + ", k_emp = " +
                                      fmt(sc.k_emp) + (sc.within_bound ? ", decay within q^(t/r)" : ", decay bound violated")));
    }
    {
        const KdBounds kb = bounds_KD(D, std::min<std::size_t>(opts.n_samples, 50), opts.seed);
        const bool ok = kb.emp_forward <= kb.K_D + 1e-9 && kb.emp_inverse <= kb.K_D_prime + 1e-9;
        rep.checks.push_back(hard("K_D", ok, kb.K_D,
                                  "K_D = " + fmt(kb.K_D) + " (sampled " + fmt(kb.emp_forward) + "), K_D' = " +
                                      fmt(kb.K_D_prime) + " (sampled " + fmt(kb.emp_inverse) + ")"));
    }

    const MarginReport n4 = check_N4(model, opts.seed, opts.n_samples);
    rep.checks.push_back(hard("N4", n4.pass, n4.min_margin,
                              "min margin " + fmt(n4.min_margin) + " over " + std::to_string(n4.samples) + " pairs"));

    {
        Rng rng(opts.seed + 17);
        const BasePoint th = random_base_point(rng, D.base.dim());
        const HistoryFunction x0 = random_bv_history(rng, model.dim(), D.grid.step, D.grid.depth,
                                                     0.5 * opts.ball_radius);
        double worst = std::numeric_limits<double>::infinity();
        try {
            const Trajectory tr = integrate_nfde(model, th, x0, opts.late_time);
            for (std::size_t i : {tr.steps() / 2, (3 * tr.steps()) / 4, tr.steps()}) {
                const HistoryFunction x = tr.snapshot(i);
                const BasePoint& ti = tr.base_point(i);
                for (std::size_t k = 0; k < model.dim(); ++k) {
                    Vector e = Vector::Zero(static_cast<Eigen::Index>(model.dim()));
                    e[static_cast<Eigen::Index>(k)] = 1e-3;
                    const HistoryFunction y =
                        x + dhat_inverse_sweep(D, ti, HistoryFunction::constant(x.step(), x.depth(), e));
                    const auto kk = static_cast<Eigen::Index>(k);
                    const double dD = eval_D(D, ti, y)[kk] - eval_D(D, ti, x)[kk];
                    const double margin =
                        eval_G(model, ti, y)[kk] - eval_G(model, ti, x)[kk] - model.order.diag[k] * dD;
                    worst = std::min(worst, margin / 1e-3);
                }
            }
        } catch (const BlowUpError&) {
            worst = -std::numeric_limits<double>::infinity();
        }
        rep.checks.push_back({"N5", CheckStatus::Heuristic, worst > 0.0, worst,
                              "strict separation rate " + fmt(worst) + " on late snapshots (heuristic)"});
    }

    rep.checks.push_back(stability_check("N6", [&] {
        return uniform_stability_probe(model, opts.ball_radius, opts.eps_list, opts.stability_pairs,
                                       opts.stability_horizon, opts.seed);
    }));
    return rep;
}

}  // namespace fadeflow
