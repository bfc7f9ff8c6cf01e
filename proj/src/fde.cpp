#include "fadeflow/fde.hpp"

#include "stepping.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace fadeflow {

namespace {

constexpr double kGridEps = 1e-9;

std::size_t steps_of(double span, double step, const char* what) {
    const double r = span / step;
    const double n = std::round(r);
    if (n < 1.0 || std::abs(r - n) > kGridEps * std::max(1.0, r))
        throw InvalidArgument(std::string(what) + " " + std::to_string(span) +
                              " is not a positive multiple of the step " + std::to_string(step));
    return static_cast<std::size_t>(n);
}

std::size_t run_steps(double T, double step) {
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("integration horizon must be positive");
    return static_cast<std::size_t>(std::ceil(T / step - kGridEps));
}

void check_ids(const CoeffRef& c, const TorusBase& base) {
    if (!c.id.empty() && !base.has_coeff(c.id))
        throw InvalidArgument("coefficient id '" + c.id + "' is not registered on the base");
}

void check_matrix(const CoeffMatrix& a, std::size_t m, const TorusBase& base, const char* what) {
    if (a.dim != m || a.entries.size() != m * m)
        throw InvalidArgument(std::string(what) + " has wrong dimension");
    for (const auto& c : a.entries) check_ids(c, base);
}

// Moments int_0^1 v^p e^{-h v} dv, p = 0..3.
std::array<double, 4> exp_moments(double h) {
    std::array<double, 4> mom{};
    if (h < 1.0) {
        for (int p = 0; p < 4; ++p) {
            double term = 1.0;  // (-h)^n / n!
            double sum = 0.0;
            for (int n = 0; n < 60; ++n) {
                const double add = term / static_cast<double>(p + n + 1);
                sum += add;
                if (std::abs(add) < 1e-18 * std::abs(sum)) break;
                term *= -h / static_cast<double>(n + 1);
            }
            mom[static_cast<std::size_t>(p)] = sum;
        }
        return mom;
    }
    const double eh = std::exp(-h);
    mom[0] = -std::expm1(-h) / h;
    for (int p = 1; p < 4; ++p)
        mom[static_cast<std::size_t>(p)] = (p * mom[static_cast<std::size_t>(p - 1)] - eh) / h;
    return mom;
}

}  // namespace

// ---------------------------------------------------------------- coefficients

double CoeffRef::value(const TorusBase& base, const BasePoint& theta) const {
    if (is_constant()) return constant;
    return constant + scale * base.eval_coeff(id, theta);
}

double CoeffRef::bound(const TorusBase& base) const {
    if (is_constant()) return std::abs(constant);
    return std::abs(constant) + std::abs(scale) * base.coeff_bound(id);
}

double CoeffRef::lower_bound(const TorusBase& base) const {
    if (is_constant()) return constant;
    return constant - std::abs(scale) * base.coeff_bound(id);
}

CoeffMatrix CoeffMatrix::constant(const Matrix& a) {
    CoeffMatrix c(static_cast<std::size_t>(a.rows()));
    for (std::size_t i = 0; i < c.dim; ++i)
        for (std::size_t j = 0; j < c.dim; ++j)
            c(i, j) = CoeffRef(a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    return c;
}

CoeffMatrix CoeffMatrix::diagonal(const std::vector<CoeffRef>& d) {
    CoeffMatrix c(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) c(i, i) = d[i];
    return c;
}

Matrix CoeffMatrix::value(const TorusBase& base, const BasePoint& theta) const {
    const auto m = static_cast<Eigen::Index>(dim);
    Matrix a(m, m);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j)
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*this)(i, j).value(base, theta);
    return a;
}

Matrix CoeffMatrix::abs_bound(const TorusBase& base) const {
    const auto m = static_cast<Eigen::Index>(dim);
    Matrix a(m, m);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j)
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*this)(i, j).bound(base);
    return a;
}

bool CoeffMatrix::is_constant() const {
    return std::all_of(entries.begin(), entries.end(), [](const CoeffRef& c) { return c.is_constant(); });
}

std::size_t Grid::intervals() const { return steps_of(depth, step, "grid depth"); }

// ---------------------------------------------------------------- right-hand side

RhsForm::RhsForm(std::size_t m) : dim(m), linear_inst(m), forcing(m) {}

void RhsForm::validate(const TorusBase& base, const Grid& grid) const {
    if (dim == 0) throw InvalidArgument("model dimension must be positive");
    const std::size_t n = grid.intervals();
    check_matrix(linear_inst, dim, base, "linear_inst");
    for (const auto& d : delays) {
        const std::size_t p = steps_of(d.delay, grid.step, "delay");
        if (p + 3 > n)
            throw InvalidArgument("delay " + std::to_string(d.delay) + " does not fit inside the grid depth");
        check_matrix(d.coeff, dim, base, "delay coefficient");
    }
    for (const auto& k : dists) {
        if (!(k.decay > 0.0)) throw InvalidArgument("distributed kernel decay must be positive");
        if (!(std::exp(-k.decay * grid.depth) < 1e-8))
            throw InvalidArgument("grid depth too short for kernel decay " + std::to_string(k.decay) +
                                  " (need e^{-decay*depth} < 1e-8)");
        check_matrix(k.coeff, dim, base, "distributed coefficient");
    }
    if (forcing.size() != dim) throw InvalidArgument("forcing has wrong dimension");
    for (const auto& f : forcing) check_ids(f, base);
    if (nonlinearity && nonlinearity->amplitude.size() != dim)
        throw InvalidArgument("nonlinearity has wrong dimension");
}

Vector RhsForm::eval(const TorusBase& base, const BasePoint& theta, const HistoryView& x) const {
    if (x.dim() != dim) throw InvalidArgument("history dimension does not match the model");
    const Vector x0 = x.head();
    Vector v = linear_inst.value(base, theta) * x0;
    for (const auto& d : delays) v += d.coeff.value(base, theta) * x.eval(-d.delay);
    for (const auto& k : dists) v += k.coeff.value(base, theta) * exp_integral(x, k.decay);
    for (std::size_t i = 0; i < dim; ++i) v[static_cast<Eigen::Index>(i)] += forcing[i].value(base, theta);
    if (nonlinearity)
        for (std::size_t i = 0; i < dim; ++i)
            v[static_cast<Eigen::Index>(i)] +=
                nonlinearity->amplitude[i] * std::tanh(x0[static_cast<Eigen::Index>(i)]);
    return v;
}

double RhsForm::lipschitz_bound(const TorusBase& base) const {
    double l = max_row_sum(linear_inst.abs_bound(base));
    for (const auto& d : delays) l += max_row_sum(d.coeff.abs_bound(base));
    for (const auto& k : dists) l += max_row_sum(k.coeff.abs_bound(base)) / k.decay;
    if (nonlinearity) {
        double a_max = 0.0;
        for (double a : nonlinearity->amplitude) a_max = std::max(a_max, std::abs(a));
        l += a_max;  // tanh is 1-Lipschitz
    }
    return l;
}

double RhsForm::ball_bound(const TorusBase& base, double r) const {
    double f = 0.0;
    for (const auto& c : forcing) f = std::max(f, c.bound(base));
    double l = max_row_sum(linear_inst.abs_bound(base));
    for (const auto& d : delays) l += max_row_sum(d.coeff.abs_bound(base));
    for (const auto& k : dists) l += max_row_sum(k.coeff.abs_bound(base)) / k.decay;
    double nl = 0.0;
    if (nonlinearity)
        for (double a : nonlinearity->amplitude) nl = std::max(nl, std::abs(a));
    return l * r + f + nl;
}

double RhsForm::max_delay() const {
    double r = 0.0;
    for (const auto& d : delays) r = std::max(r, d.delay);
    return r;
}

void FdeModel::validate() const {
    order.validate();
    if (order.dim() != rhs.dim) throw InvalidArgument("order matrix dimension does not match the model");
    rhs.validate(base, grid);
}

std::array<double, 4> exp_cubic_weights(double decay, double step, int first) {
    if (!(decay > 0.0) || !(step > 0.0)) throw InvalidArgument("decay and step must be positive");
    const auto mom = exp_moments(decay * step);
    // Exactness on 1, v, v^2, v^3 at nodes v = first + k.
    Eigen::Matrix4d V;
    Eigen::Vector4d rhs;
    for (int p = 0; p < 4; ++p) {
        for (int k = 0; k < 4; ++k) V(p, k) = std::pow(static_cast<double>(first + k), p);
        rhs[p] = mom[static_cast<std::size_t>(p)];
    }
    const Eigen::Vector4d w = V.fullPivLu().solve(rhs) * step;
    return {w[0], w[1], w[2], w[3]};
}

Vector exp_integral(const HistoryView& x, double decay, std::size_t offset_steps, bool with_tail) {
    if (!(decay > 0.0)) throw InvalidArgument("kernel decay must be positive");
    const std::size_t n = x.intervals();
    if (n < 3) throw InvalidArgument("kernel quadrature needs at least three grid intervals");
    const double step = x.step();
    const auto first = exp_cubic_weights(decay, step, 0);
    const auto mid = exp_cubic_weights(decay, step, -1);
    const auto last = exp_cubic_weights(decay, step, -2);
    const double e = std::exp(-decay * step);
    const auto m = static_cast<Eigen::Index>(x.dim());
    Vector acc = Vector::Zero(m);
    double ej = std::pow(e, static_cast<double>(offset_steps));
    // Interval j covers [-(j+1) step, -j step]; its stencil starts at sample j + node offset.
    for (std::size_t j = offset_steps; j < n; ++j) {
        const std::array<double, 4>* w = &mid;
        std::size_t s0 = j - 1;
        if (j == 0) {
            w = &first;
            s0 = 0;
        } else if (j + 2 > n) {
            w = &last;
            s0 = j - 2;
        }
        for (Eigen::Index k = 0; k < m; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            acc[k] += ej * ((*w)[0] * x(s0, kk) + (*w)[1] * x(s0 + 1, kk) + (*w)[2] * x(s0 + 2, kk) +
                            (*w)[3] * x(s0 + 3, kk));
        }
        ej *= e;
    }
    if (with_tail) acc += (std::exp(-decay * x.depth()) / decay) * x.tail();
    return acc;
}

Vector eval_F(const FdeModel& model, const BasePoint& theta, const HistoryView& x) {
    if (x.dim() != model.dim() || x.intervals() != model.grid.intervals() ||
        std::abs(x.step() - model.grid.step) > kGridEps * model.grid.step)
        throw InvalidArgument("history grid does not match the model grid");
    return model.rhs.eval(model.base, theta, x);
}

// ---------------------------------------------------------------- trajectory

Trajectory::Trajectory(std::size_t dim, double step, std::size_t depth_intervals,
                       const HistoryView& x0, const BasePoint& theta0, double t0)
    : dim_(dim), step_(step), n_(depth_intervals), t0_(t0) {
    if (x0.dim() != dim || x0.intervals() != depth_intervals)
        throw InvalidArgument("initial datum does not match the trajectory grid");
    heads_.assign(x0.data(), x0.data() + x0.count() * dim);
    base_points_.push_back(theta0);
}

std::size_t Trajectory::index_of(double t) const {
    const double r = (t - t0_) / step_;
    const double i = std::round(r);
    if (i < 0.0 || i > static_cast<double>(steps_) || std::abs(r - i) > 1e-6)
        throw InvalidArgument("time " + std::to_string(t) + " is not a recorded grid time");
    return static_cast<std::size_t>(i);
}

Vector Trajectory::head(std::size_t i) const {
    Vector v(static_cast<Eigen::Index>(dim_));
    for (std::size_t k = 0; k < dim_; ++k) v[static_cast<Eigen::Index>(k)] = head(i, k);
    return v;
}

HistoryView Trajectory::snapshot_view(std::size_t i) const {
    if (i > steps_) throw InvalidArgument("snapshot index beyond the recorded run");
    return {dim_, step_, n_ + 1, heads_.data() + i * dim_};
}

Vector Trajectory::w(std::size_t i) const {
    Vector v(static_cast<Eigen::Index>(dim_));
    for (std::size_t k = 0; k < dim_; ++k) v[static_cast<Eigen::Index>(k)] = w_.at((i + n_) * dim_ + k);
    return v;
}

HistoryView Trajectory::w_snapshot_view(std::size_t i) const {
    if (w_.size() < (i + n_ + 1) * dim_) throw InvalidArgument("no w history recorded at this index");
    return {dim_, step_, n_ + 1, w_.data() + i * dim_};
}

void Trajectory::init_w(const HistoryView& w0) {
    if (w0.dim() != dim_ || w0.intervals() != n_) throw InvalidArgument("w history does not match the grid");
    w_.assign(w0.data(), w0.data() + w0.count() * dim_);
}

void Trajectory::push(const Vector& head, const BasePoint& theta) {
    for (Eigen::Index k = 0; k < head.size(); ++k) heads_.push_back(head[k]);
    base_points_.push_back(theta);
    ++steps_;
}

void Trajectory::push_w(const Vector& w) {
    for (Eigen::Index k = 0; k < w.size(); ++k) w_.push_back(w[k]);
}

// ---------------------------------------------------------------- integrators

using detail::guard;
using detail::half_step_value;

Trajectory integrate(const FdeModel& model, const BasePoint& theta0, const HistoryView& x0,
                     double T, double t0) {
    model.validate();
    const double dt = model.grid.step;
    const std::size_t n_int = model.grid.intervals();
    if (x0.dim() != model.dim() || x0.intervals() != n_int || std::abs(x0.step() - dt) > kGridEps * dt)
        throw InvalidArgument("initial datum does not match the model grid");
    const std::size_t steps = run_steps(T, dt);
    const auto& rhs = model.rhs;

    Trajectory tr(model.dim(), dt, n_int, x0, theta0, t0);
    detail::StageRhs stage(rhs, model.base, theta0, dt);
    const std::size_t nd = rhs.dists.size();
    std::vector<Vector> q(nd), i2(nd), i3(nd), i4(nd), k1(nd), k2(nd), k3(nd);

    for (std::size_t n = 0; n < steps; ++n) {
        const auto cur = static_cast<std::ptrdiff_t>(n + n_int);
        const HistoryView snap = tr.snapshot_view(n);
        const Vector z = snap.head();
        for (std::size_t k = 0; k < nd; ++k) q[k] = exp_integral(snap, rhs.dists[k].decay);
        const double h = dt;

        stage.prepare(n, 0.0);
        const Vector K1 = stage.eval(tr, cur, 0.0, z, q);
        for (std::size_t k = 0; k < nd; ++k) k1[k] = z - rhs.dists[k].decay * q[k];

        stage.prepare(n, 0.5);
        const Vector Z2 = z + 0.5 * h * K1;
        for (std::size_t k = 0; k < nd; ++k) i2[k] = q[k] + 0.5 * h * k1[k];
        const Vector K2 = stage.eval(tr, cur, 0.5, Z2, i2);
        for (std::size_t k = 0; k < nd; ++k) k2[k] = Z2 - rhs.dists[k].decay * i2[k];

        const Vector Z3 = z + 0.5 * h * K2;
        for (std::size_t k = 0; k < nd; ++k) i3[k] = q[k] + 0.5 * h * k2[k];
        const Vector K3 = stage.eval(tr, cur, 0.5, Z3, i3);
        for (std::size_t k = 0; k < nd; ++k) k3[k] = Z3 - rhs.dists[k].decay * i3[k];

        const BasePoint& th4 = stage.prepare(n, 1.0);
        const Vector Z4 = z + h * K3;
        for (std::size_t k = 0; k < nd; ++k) i4[k] = q[k] + h * k3[k];
        const Vector K4 = stage.eval(tr, cur, 1.0, Z4, i4);

        const Vector next = z + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
        guard(next, tr.time(n + 1));
        tr.push(next, th4);
    }
    return tr;
}

Trajectory integrate_functional(const TorusBase& base, const FdeEvaluator& F,
                                const BasePoint& theta0, const HistoryView& x0, double T,
                                double t0) {
    const double dt = x0.step();
    const std::size_t n_int = x0.intervals();
    const std::size_t m = x0.dim();
    if (n_int < 4) throw InvalidArgument("history grid too coarse for stage interpolation");
    const std::size_t steps = run_steps(T, dt);
    Trajectory tr(m, dt, n_int, x0, theta0, t0);
    std::vector<double> buf((n_int + 1) * m);

    auto half_history = [&](std::ptrdiff_t cur, const Vector& z) {
        // Row r of the stage history is time t_n + dt/2 - (n_int - r) dt.
        const std::ptrdiff_t oldest = cur - static_cast<std::ptrdiff_t>(n_int);
        for (std::size_t j = 1; j <= n_int; ++j) {
            const std::ptrdiff_t R = cur - static_cast<std::ptrdiff_t>(j);
            const std::size_t row = n_int - j;
            for (std::size_t k = 0; k < m; ++k) buf[row * m + k] = half_step_value(tr, R, cur, oldest, k);
        }
        for (std::size_t k = 0; k < m; ++k) buf[n_int * m + k] = z[static_cast<Eigen::Index>(k)];
        return HistoryView(m, dt, n_int + 1, buf.data());
    };
    auto end_history = [&](std::ptrdiff_t cur, const Vector& z) {
        const auto* src = tr.raw_heads().data() + static_cast<std::size_t>(cur + 1 - static_cast<std::ptrdiff_t>(n_int)) * m;
        std::copy(src, src + n_int * m, buf.begin());
        for (std::size_t k = 0; k < m; ++k) buf[n_int * m + k] = z[static_cast<Eigen::Index>(k)];
        return HistoryView(m, dt, n_int + 1, buf.data());
    };

    for (std::size_t n = 0; n < steps; ++n) {
        const auto cur = static_cast<std::ptrdiff_t>(n + n_int);
        const HistoryView snap = tr.snapshot_view(n);
        const Vector z = snap.head();
        const double tn = static_cast<double>(n) * dt;
        const BasePoint th1 = base.advance(theta0, tn);
        const BasePoint th2 = base.advance(theta0, tn + 0.5 * dt);
        const BasePoint th4 = base.advance(theta0, tn + dt);

        const Vector K1 = F(th1, snap);
        const Vector Z2 = z + 0.5 * dt * K1;
        const Vector K2 = F(th2, half_history(cur, Z2));
        const Vector Z3 = z + 0.5 * dt * K2;
        const Vector K3 = F(th2, half_history(cur, Z3));
        const Vector Z4 = z + dt * K3;
        const Vector K4 = F(th4, end_history(cur, Z4));
        const Vector next = z + (dt / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
        guard(next, tr.time(n + 1));
        tr.push(next, th4);
    }
    return tr;
}

FdeEvaluator make_evaluator(const FdeModel& model) {
    return [&model](const BasePoint& theta, const HistoryView& x) { return eval_F(model, theta, x); };
}

}  // namespace fadeflow
