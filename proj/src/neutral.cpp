#include "fadeflow/neutral.hpp"

#include "stepping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

namespace fadeflow {

namespace {

constexpr double kGridEps = 1e-9;

std::size_t lag_steps(double span, double step) {
    return static_cast<std::size_t>(std::llround(span / step));
}

bool is_multiple(double span, double step) {
    const double r = span / step;
    return std::abs(r - std::round(r)) <= kGridEps * std::max(1.0, r);
}

void require_grid(const NeutralOperator& D, const HistoryView& x) {
    if (x.dim() != D.dim || x.intervals() != D.grid.intervals() ||
        std::abs(x.step() - D.grid.step) > kGridEps * D.grid.step)
        throw InvalidArgument("history grid does not match the neutral operator grid");
}

double density_mass(const Density& d, double depth) {
    return (std::exp(-d.decay * d.offset) - std::exp(-d.decay * depth)) / d.decay;
}

/// Kernel coefficients evaluated at one base point.
struct KernelAt {
    std::vector<Matrix> atoms;
    Matrix g;
};

KernelAt kernel_at(const NeutralOperator& D, const BasePoint& theta) {
    KernelAt k;
    for (const auto& a : D.atoms) k.atoms.push_back(a.coeff.value(D.base, theta));
    if (D.density) k.g = D.density->coeff.value(D.base, theta);
    return k;
}

bool kernel_constant(const NeutralOperator& D) {
    bool c = true;
    for (const auto& a : D.atoms) c = c && a.coeff.is_constant();
    if (D.density) c = c && D.density->coeff.is_constant();
    return c;
}

/// Kernel coefficients at theta.s_i for s_i = -i step, i = 0..N.
std::vector<KernelAt> kernel_along(const NeutralOperator& D, const BasePoint& theta, std::size_t n) {
    std::vector<KernelAt> out;
    out.reserve(n + 1);
    if (kernel_constant(D)) {
        out.assign(n + 1, kernel_at(D, theta));
        return out;
    }
    for (std::size_t i = 0; i <= n; ++i)
        out.push_back(kernel_at(D, D.base.advance(theta, -static_cast<double>(i) * D.grid.step)));
    return out;
}

/// Weight of the newest sample in the density quadrature.
double newest_weight(const Density& d, double step, std::size_t n) {
    std::vector<double> impulse(n + 1, 0.0);
    impulse[n] = 1.0;
    const HistoryView v(1, step, n + 1, impulse.data());
    return exp_integral(v, d.decay, lag_steps(d.offset, step), false)[0];
}

/// Oldest-first buffer holding N copies of the tail followed by the history,
/// so that every shifted segment x_{s_i} is a contiguous window.
class ShiftBuffer {
public:
    ShiftBuffer(std::size_t dim, double step, std::size_t n)
        : dim_(dim), step_(step), n_(n), data_((2 * n + 1) * dim, 0.0) {}

    void load(const HistoryView& x) {
        for (std::size_t i = 0; i <= n_; ++i) set(i, x.sample_span(i));
    }
    /// Writes sample -i*step; writing the oldest sample refreshes the tail copies.
    template <class V>
    void set(std::size_t i, const V& v) {
        for (std::size_t k = 0; k < dim_; ++k) data_[(2 * n_ - i) * dim_ + k] = v[k];
        if (i == n_)
            for (std::size_t r = 0; r < n_; ++r)
                for (std::size_t k = 0; k < dim_; ++k) data_[r * dim_ + k] = v[k];
    }
    void zero(std::size_t i) {
        for (std::size_t k = 0; k < dim_; ++k) data_[(2 * n_ - i) * dim_ + k] = 0.0;
    }
    double get(std::size_t i, std::size_t k) const { return data_[(2 * n_ - std::min(i, n_)) * dim_ + k]; }
    Vector sample(std::size_t i) const {
        Vector v(static_cast<Eigen::Index>(dim_));
        for (std::size_t k = 0; k < dim_; ++k) v[static_cast<Eigen::Index>(k)] = get(i, k);
        return v;
    }
    /// The segment x_{s_i} on [-L, 0].
    HistoryView window(std::size_t i) const { return {dim_, step_, n_ + 1, data_.data() + (n_ - i) * dim_}; }

private:
    std::size_t dim_;
    double step_;
    std::size_t n_;
    std::vector<double> data_;
};

/// sum_j C_j x_{i+p_j} + g * int over the window of sample i.
Vector kernel_apply(const NeutralOperator& D, const KernelAt& k, const std::vector<std::size_t>& lags,
                    const ShiftBuffer& buf, std::size_t i) {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(D.dim));
    for (std::size_t j = 0; j < lags.size(); ++j) v += k.atoms[j] * buf.sample(i + lags[j]);
    if (D.density)
        v += k.g * exp_integral(buf.window(i), D.density->decay, lag_steps(D.density->offset, D.grid.step), false);
    return v;
}

std::vector<std::size_t> atom_lags(const NeutralOperator& D) {
    std::vector<std::size_t> lags;
    for (const auto& a : D.atoms) lags.push_back(lag_steps(a.delay, D.grid.step));
    return lags;
}

HistoryFunction from_buffer(const ShiftBuffer& buf, std::size_t dim, double step, std::size_t n) {
    HistoryFunction out = HistoryFunction::zeros(dim, step, static_cast<double>(n) * step);
    for (std::size_t i = 0; i <= n; ++i)
        for (std::size_t k = 0; k < dim; ++k) out.at(i, k) = buf.get(i, k);
    return out;
}

}  // namespace

// ---------------------------------------------------------------- operator

void NeutralOperator::validate() const {
    if (dim == 0) throw InvalidArgument("neutral operator dimension must be positive");
    const std::size_t n = grid.intervals();
    if (n < 3) throw InvalidArgument("grid needs at least three intervals");
    for (const auto& a : atoms) {
        if (!(a.delay > 0.0)) throw InvalidArgument("atom delays must be positive (no atom at 0)");
        if (!is_multiple(a.delay, grid.step) || a.delay < grid.step * (1.0 - kGridEps))
            throw InvalidArgument("atom delay " + std::to_string(a.delay) + " is not a positive multiple of the step");
        if (lag_steps(a.delay, grid.step) + 3 > n)
            throw InvalidArgument("atom delay " + std::to_string(a.delay) + " does not fit inside the grid depth");
        if (a.coeff.dim != dim || a.coeff.entries.size() != dim * dim)
            throw InvalidArgument("atom coefficient has wrong dimension");
        for (const auto& c : a.coeff.entries)
            if (!c.id.empty() && !base.has_coeff(c.id))
                throw InvalidArgument("coefficient id '" + c.id + "' is not registered on the base");
    }
    if (density) {
        if (!(density->decay > 0.0)) throw InvalidArgument("density decay must be positive");
        if (!(density->offset >= 0.0) || !is_multiple(density->offset, grid.step) ||
            lag_steps(density->offset, grid.step) >= n)
            throw InvalidArgument("density offset must be a nonnegative multiple of the step below the depth");
        if (density->coeff.dim != dim || density->coeff.entries.size() != dim * dim)
            throw InvalidArgument("density coefficient has wrong dimension");
        for (const auto& c : density->coeff.entries)
            if (!c.id.empty() && !base.has_coeff(c.id))
                throw InvalidArgument("coefficient id '" + c.id + "' is not registered on the base");
    }
    const double qv = q();
    if (!(qv < 1.0))
        throw InvalidArgument("neutral kernel mass q = " + std::to_string(qv) + " must be < 1");
}

double NeutralOperator::q() const {
    const auto m = static_cast<Eigen::Index>(dim);
    Matrix total = Matrix::Zero(m, m);
    for (const auto& a : atoms) total += a.coeff.abs_bound(base);
    if (density) total += density->coeff.abs_bound(base) * density_mass(*density, grid.depth);
    return max_row_sum(total);
}

double NeutralOperator::min_delay() const {
    double r = std::numeric_limits<double>::infinity();
    for (const auto& a : atoms) r = std::min(r, a.delay);
    if (density) r = std::min(r, std::max(density->offset, grid.step));
    return r;
}

double NeutralOperator::reach() const {
    double r = 0.0;
    for (const auto& a : atoms) r = std::max(r, a.delay);
    if (density) r = grid.depth;
    return r;
}

Vector eval_D(const NeutralOperator& D, const BasePoint& theta, const HistoryView& x) {
    require_grid(D, x);
    const KernelAt k = kernel_at(D, theta);
    Vector v = x.head();
    for (std::size_t j = 0; j < D.atoms.size(); ++j) v -= k.atoms[j] * x.eval(-D.atoms[j].delay);
    if (D.density)
        v -= k.g * exp_integral(x, D.density->decay, lag_steps(D.density->offset, D.grid.step), false);
    return v;
}

double kernel_variation(const NeutralOperator& D, const BasePoint& theta, double a, double b) {
    if (!(a < b) || b > 0.0) throw InvalidArgument("kernel_variation needs a < b <= 0");
    const KernelAt k = kernel_at(D, theta);
    const auto m = static_cast<Eigen::Index>(D.dim);
    Matrix total = Matrix::Zero(m, m);
    for (std::size_t j = 0; j < D.atoms.size(); ++j) {
        const double s = -D.atoms[j].delay;
        if (s >= a && s <= b) total += k.atoms[j].cwiseAbs();
    }
    if (D.density) {
        const double lo = std::max(a, -D.grid.depth);
        const double hi = std::min(b, -D.density->offset);
        if (lo < hi) {
            const double g = D.density->decay;
            total += k.g.cwiseAbs() * ((std::exp(g * hi) - std::exp(g * lo)) / g);
        }
    }
    return max_row_sum(total);
}

HistoryFunction eval_Dhat2(const NeutralOperator& D, const BasePoint& theta, const HistoryView& x) {
    D.validate();
    require_grid(D, x);
    const std::size_t n = x.intervals();
    ShiftBuffer buf(D.dim, x.step(), n);
    buf.load(x);
    const auto kernels = kernel_along(D, theta, n);
    const auto lags = atom_lags(D);
    HistoryFunction out = HistoryFunction::zeros(D.dim, x.step(), x.depth());
    for (std::size_t i = 0; i <= n; ++i) out.set_sample(i, buf.sample(i) - kernel_apply(D, kernels[i], lags, buf, i));
    return out;
}

InverseResult dhat_inverse(const NeutralOperator& D, const BasePoint& theta, const HistoryView& h,
                           double tol_fix, int max_iter) {
    D.validate();
    require_grid(D, h);
    if (!(tol_fix > 0.0) || max_iter < 1) throw InvalidArgument("dhat_inverse needs tol_fix > 0 and max_iter >= 1");
    const std::size_t n = h.intervals();
    const auto kernels = kernel_along(D, theta, n);
    const auto lags = atom_lags(D);
    ShiftBuffer cur(D.dim, h.step(), n), next(D.dim, h.step(), n);
    cur.load(h);
    InverseResult res{HistoryFunction::from_view(h)};
    for (int it = 1; it <= max_iter; ++it) {
        double change = 0.0;
        // Fill the oldest sample last so its tail copies do not leak into this sweep.
        for (std::size_t i = 0; i <= n; ++i) {
            const Vector v = h.sample(i) + kernel_apply(D, kernels[i], lags, cur, i);
            for (std::size_t k = 0; k < D.dim; ++k)
                change = std::max(change, std::abs(v[static_cast<Eigen::Index>(k)] - cur.get(i, k)));
            next.set(i, v);
        }
        std::swap(cur, next);
        res.iterations = it;
        res.last_change = change;
        if (change <= tol_fix) {
            res.converged = true;
            break;
        }
    }
    res.x = from_buffer(cur, D.dim, h.step(), n);
    const HistoryFunction back = eval_Dhat2(D, theta, res.x);
    res.residual = seminorm(back, HistoryFunction::from_view(h), h.depth());
    return res;
}

HistoryFunction dhat_inverse_sweep(const NeutralOperator& D, const BasePoint& theta,
                                   const HistoryView& h) {
    D.validate();
    require_grid(D, h);
    const std::size_t n = h.intervals();
    const auto kernels = kernel_along(D, theta, n);
    const auto lags = atom_lags(D);
    const auto m = static_cast<Eigen::Index>(D.dim);
    const Matrix I = Matrix::Identity(m, m);
    ShiftBuffer buf(D.dim, h.step(), n);

    // Oldest sample: every read is the tail itself.
    {
        const KernelAt& k = kernels[n];
        Matrix a = I;
        for (const auto& c : k.atoms) a -= c;
        if (D.density) {
            std::vector<double> ones(n + 1, 1.0);
            const HistoryView v(1, h.step(), n + 1, ones.data());
            a -= k.g * exp_integral(v, D.density->decay, lag_steps(D.density->offset, h.step()), false)[0];
        }
        buf.set(n, Vector(a.partialPivLu().solve(h.sample(n))));
    }
    const double w0 = D.density ? newest_weight(*D.density, h.step(), n) : 0.0;
    for (std::size_t i = n; i-- > 0;) {
        buf.zero(i);
        const KernelAt& k = kernels[i];
        const Vector rhs = h.sample(i) + kernel_apply(D, k, lags, buf, i);
        if (w0 != 0.0) buf.set(i, Vector((I - w0 * k.g).partialPivLu().solve(rhs)));
        else buf.set(i, rhs);
    }
    return from_buffer(buf, D.dim, h.step(), n);
}

// ---------------------------------------------------------------- forward recursion

namespace {

/// Recovers the newest head from D(theta, x_t) = target, given the older rows of `tr`.
class HeadRecovery {
public:
    explicit HeadRecovery(const NeutralOperator& D)
        : D_(D), n_(D.grid.intervals()), lags_(atom_lags(D)), scratch_((n_ + 1) * D.dim, 0.0) {
        if (D.density) w0_ = newest_weight(*D.density, D.grid.step, n_);
        k0_ = D.density ? lag_steps(D.density->offset, D.grid.step) : 0;
    }

    /// `row` is the trajectory row being solved for (rows below it are final).
    Vector solve(const Trajectory& tr, std::ptrdiff_t row, const KernelAt& k, const Vector& target) {
        const std::size_t m = D_.dim;
        Vector rhs = target;
        for (std::size_t j = 0; j < lags_.size(); ++j) {
            Vector v(static_cast<Eigen::Index>(m));
            for (std::size_t c = 0; c < m; ++c)
                v[static_cast<Eigen::Index>(c)] = tr.row_value(row - static_cast<std::ptrdiff_t>(lags_[j]), c);
            rhs += k.atoms[j] * v;
        }
        if (!D_.density) return rhs;
        const auto* src = tr.raw_heads().data();
        const std::ptrdiff_t first = row - static_cast<std::ptrdiff_t>(n_);
        for (std::size_t r = 0; r < n_; ++r) {
            const std::ptrdiff_t rr = std::max<std::ptrdiff_t>(first + static_cast<std::ptrdiff_t>(r), 0);
            std::copy(src + static_cast<std::size_t>(rr) * m, src + static_cast<std::size_t>(rr + 1) * m,
                      scratch_.begin() + static_cast<std::ptrdiff_t>(r * m));
        }
        std::fill(scratch_.end() - static_cast<std::ptrdiff_t>(m), scratch_.end(), 0.0);
        const HistoryView win(m, D_.grid.step, n_ + 1, scratch_.data());
        rhs += k.g * exp_integral(win, D_.density->decay, k0_, false);
        if (w0_ == 0.0) return rhs;
        const auto mm = static_cast<Eigen::Index>(m);
        return (Matrix::Identity(mm, mm) - w0_ * k.g).partialPivLu().solve(rhs);
    }

private:
    const NeutralOperator& D_;
    std::size_t n_;
    std::vector<std::size_t> lags_;
    std::vector<double> scratch_;
    double w0_ = 0.0;
    std::size_t k0_ = 0;
};

}  // namespace

Trajectory solve_nonhomogeneous(const NeutralOperator& D, const BasePoint& theta,
                                const HistoryView& phi, const std::function<Vector(double)>& h,
                                double T) {
    D.validate();
    require_grid(D, phi);
    if (!(T > 0.0)) throw InvalidArgument("horizon must be positive");
    const Vector h0 = h(0.0);
    if (max_norm(eval_D(D, theta, phi) - h0) > 1e-8)
        throw InvalidArgument("incompatible data: D(theta, phi) must equal h(0)");
    const double dt = D.grid.step;
    const std::size_t n = D.grid.intervals();
    const auto steps = static_cast<std::size_t>(std::ceil(T / dt - kGridEps));
    Trajectory tr(D.dim, dt, n, phi, theta);
    HeadRecovery rec(D);
    const bool constant = kernel_constant(D);
    const KernelAt fixed = kernel_at(D, theta);
    for (std::size_t s = 1; s <= steps; ++s) {
        const double t = static_cast<double>(s) * dt;
        const BasePoint th = D.base.advance(theta, t);
        const Vector x = rec.solve(tr, static_cast<std::ptrdiff_t>(s + n), constant ? fixed : kernel_at(D, th), h(t));
        detail::guard(x, t);
        tr.push(x, th);
    }
    return tr;
}

StabilityConstants stability_constants(const NeutralOperator& D, std::size_t n_samples, double T,
                                       std::uint64_t seed) {
    D.validate();
    StabilityConstants rep;
    rep.q = D.q();
    rep.k_bound = 1.0 / (1.0 - rep.q);
    Rng rng(seed);
    const double dt = D.grid.step, L = D.grid.depth;
    const std::size_t n = D.grid.intervals();
    const double w0 = D.density ? newest_weight(*D.density, dt, n) : 0.0;
    const auto m = static_cast<Eigen::Index>(D.dim);
    const auto steps = static_cast<std::size_t>(std::ceil(T / dt - kGridEps));
    const std::size_t stride = std::max<std::size_t>(1, steps / 200);
    for (std::size_t i = 0; i <= steps; i += stride) rep.times.push_back(static_cast<double>(i) * dt);
    rep.c_profile.assign(rep.times.size(), 0.0);

    // Enough sweeps for q^k < 1e-10 (1 - q), beyond the default cap when q is close to 1.
    const int iterations = std::max(200, static_cast<int>(std::ceil(std::log(1e-10 * (1.0 - rep.q)) / std::log(std::max(rep.q, 1e-3)))) + 10);
    for (std::size_t s = 0; s < n_samples; ++s) {
        const BasePoint theta = random_base_point(rng, D.base.dim());
        const HistoryFunction h = random_bv_history(rng, D.dim, dt, L, 1.0, true);
        const InverseResult inv = dhat_inverse(D, theta, h, 1e-10, iterations);
        if (h.sup_norm() > 0.0) rep.k_emp = std::max(rep.k_emp, inv.x.sup_norm() / h.sup_norm());

        // Homogeneous datum: adjust phi(0) so that D(theta, phi) = 0.
        HistoryFunction phi = random_bv_history(rng, D.dim, dt, L, 1.0, true);
        const Vector d = eval_D(D, theta, phi);
        Matrix a = Matrix::Identity(m, m);
        if (D.density) a -= w0 * D.density->coeff.value(D.base, theta);
        phi.set_sample(0, Vector(phi.head() - a.partialPivLu().solve(d)));
        const double norm = phi.sup_norm();
        if (!(norm > 0.0) || steps == 0) continue;
        const Trajectory tr = solve_nonhomogeneous(D, theta, phi, [&](double) { return Vector::Zero(m); }, T);
        for (std::size_t j = 0; j < rep.times.size(); ++j)
            rep.c_profile[j] = std::max(rep.c_profile[j], max_norm(tr.head(j * stride)) / norm);
    }
    const double reach = D.reach();
    for (std::size_t j = 0; j < rep.times.size(); ++j) {
        const double t = rep.times[j];
        const double b = (t <= 0.0 || reach <= 0.0) ? 1.0 : std::pow(rep.q, std::ceil(t / reach - kGridEps));
        rep.c_bound.push_back(reach <= 0.0 && t > 0.0 ? 0.0 : b);
        if (rep.c_profile[j] > rep.c_bound.back() * (1.0 + 1e-6) + 1e-14) rep.within_bound = false;
    }
    return rep;
}

bool leq_DA(const NeutralOperator& D, const BasePoint& theta, const HistoryView& x,
            const HistoryView& y, const OrderParams& A) {
    return leq_A(eval_Dhat2(D, theta, x), eval_Dhat2(D, theta, y), A);
}

KdBounds bounds_KD(const NeutralOperator& D, std::size_t n_samples, std::uint64_t seed) {
    D.validate();
    KdBounds b;
    const double q = D.q();
    b.K_D = 1.0 + q;
    b.K_D_prime = 1.0 / (1.0 - q);
    Rng rng(seed);
    for (std::size_t s = 0; s < n_samples; ++s) {
        const BasePoint theta = random_base_point(rng, D.base.dim());
        const HistoryFunction x = random_bv_history(rng, D.dim, D.grid.step, D.grid.depth, 1.0, true);
        if (!(x.sup_norm() > 0.0)) continue;
        b.emp_forward = std::max(b.emp_forward, eval_Dhat2(D, theta, x).sup_norm() / x.sup_norm());
        b.emp_inverse = std::max(b.emp_inverse, dhat_inverse_sweep(D, theta, x).sup_norm() / x.sup_norm());
    }
    return b;
}

// ---------------------------------------------------------------- neutral equations

void NfdeModel::validate() const {
    D.validate();
    order.validate();
    if (G.dim != D.dim) throw InvalidArgument("G and D dimensions differ");
    if (order.dim() != D.dim) throw InvalidArgument("order matrix dimension does not match the model");
    G.validate(D.base, D.grid);
}

Vector eval_G(const NfdeModel& model, const BasePoint& theta, const HistoryView& x) {
    require_grid(model.D, x);
    return model.G.eval(model.base(), theta, x);
}

MarginReport check_N4(const NfdeModel& model, std::uint64_t seed, std::size_t n_pairs) {
    if (n_pairs == 0) throw InvalidArgument("check_N4 needs at least one pair");
    model.validate();
    Rng rng(seed);
    std::uniform_real_distribution<double> scale(0.05, 1.0);
    const double dt = model.grid().step, L = model.grid().depth;
    MarginReport rep;
    rep.min_margin = std::numeric_limits<double>::infinity();
    double size = 0.0;
    for (std::size_t s = 0; s < n_pairs; ++s) {
        const BasePoint theta = random_base_point(rng, model.base().dim());
        const HistoryFunction x = random_bv_history(rng, model.dim(), dt, L, 1.0);
        const HistoryFunction c = random_cone_element(rng, model.order, dt, L, scale(rng));
        const HistoryFunction y = x + dhat_inverse_sweep(model.D, theta, c);
        const Vector gx = eval_G(model, theta, x), gy = eval_G(model, theta, y);
        const Vector dD = eval_D(model.D, theta, y) - eval_D(model.D, theta, x);
        for (Eigen::Index i = 0; i < dD.size(); ++i)
            rep.min_margin = std::min(rep.min_margin,
                                      gy[i] - gx[i] - model.order.diag[static_cast<std::size_t>(i)] * dD[i]);
        size = std::max(size, max_norm(gx) + max_norm(gy));
        ++rep.samples;
    }
    rep.tol = model.order.tol * (1.0 + size);
    rep.pass = rep.min_margin >= -rep.tol;
    return rep;
}

FdeEvaluator transform_to_fde(const NfdeModel& model) {
    model.validate();
    auto shared = std::make_shared<const NfdeModel>(model);
    return [shared](const BasePoint& theta, const HistoryView& yhat) {
        return eval_G(*shared, theta, dhat_inverse_sweep(shared->D, theta, yhat));
    };
}

Trajectory integrate_nfde(const NfdeModel& model, const BasePoint& theta0, const HistoryView& x0,
                          double T, double t0) {
    model.validate();
    const NeutralOperator& D = model.D;
    require_grid(D, x0);
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("integration horizon must be positive");
    const double dt = D.grid.step;
    const std::size_t n_int = D.grid.intervals();
    const auto steps = static_cast<std::size_t>(std::ceil(T / dt - kGridEps));
    const auto m = static_cast<Eigen::Index>(D.dim);
    const auto& G = model.G;

    Trajectory tr(D.dim, dt, n_int, x0, theta0, t0);
    tr.init_w(eval_Dhat2(D, theta0, x0));
    detail::StageRhs stage(G, D.base, theta0, dt);
    HeadRecovery rec(D);
    const auto lags = atom_lags(D);
    const bool constant = kernel_constant(D);
    const KernelAt fixed = kernel_at(D, theta0);
    const std::size_t k0 = D.density ? lag_steps(D.density->offset, dt) : 0;
    const double gam = D.density ? D.density->decay : 0.0;
    const double e_off = D.density ? std::exp(-gam * D.density->offset) : 0.0;
    const double e_end = D.density ? std::exp(-gam * D.grid.depth) : 0.0;
    const std::size_t nd = G.dists.size();

    auto lagged = [&](std::size_t p, std::ptrdiff_t cur, double c, const Vector& z_stage) {
        if (p == 0) return z_stage;
        Vector v(m);
        const std::ptrdiff_t oldest = cur - static_cast<std::ptrdiff_t>(n_int);
        for (std::size_t k = 0; k < D.dim; ++k) {
            const auto pp = static_cast<std::ptrdiff_t>(p);
            double val;
            if (c == 0.0) val = tr.row_value(cur - pp, k);
            else if (c == 1.0) val = tr.row_value(cur + 1 - pp, k);
            else val = detail::half_step_value(tr, cur - pp, cur, oldest, k);
            v[static_cast<Eigen::Index>(k)] = val;
        }
        return v;
    };

    std::vector<Vector> q(nd), qs(nd), kq(nd);
    for (std::size_t n = 0; n < steps; ++n) {
        const auto cur = static_cast<std::ptrdiff_t>(n + n_int);
        const HistoryView snap = tr.snapshot_view(n);
        const Vector z = snap.head();
        const Vector w = tr.w(n);
        for (std::size_t k = 0; k < nd; ++k) {
            q[k] = exp_integral(snap, G.dists[k].decay);
            kq[k] = Vector::Zero(m);
        }
        Vector P = D.density ? exp_integral(snap, gam, k0, false) : Vector::Zero(m);

        Vector K[4];
        Vector kp_prev = Vector::Zero(m);
        Vector K_prev = Vector::Zero(m);
        static constexpr double kC[4] = {0.0, 0.5, 0.5, 1.0};
        BasePoint th_end;
        for (int s = 0; s < 4; ++s) {
            const double c = kC[s];
            const BasePoint& th = stage.prepare(n, c);
            if (s == 3) th_end = th;
            const KernelAt kern = constant ? fixed : kernel_at(D, th);
            const Vector Ws = w + c * dt * K_prev;
            const Vector Ps = P + c * dt * kp_prev;
            for (std::size_t k = 0; k < nd; ++k) qs[k] = q[k] + c * dt * kq[k];
            Vector Zs;
            if (s == 0) {
                Zs = z;
            } else {
                Zs = Ws;
                for (std::size_t j = 0; j < lags.size(); ++j) Zs += kern.atoms[j] * lagged(lags[j], cur, c, z);
                if (D.density) Zs += kern.g * Ps;
            }
            K[s] = stage.eval(tr, cur, c, Zs, qs);
            for (std::size_t k = 0; k < nd; ++k) kq[k] = Zs - G.dists[k].decay * qs[k];
            if (D.density)
                kp_prev = e_off * lagged(k0, cur, c, Zs) - e_end * lagged(n_int, cur, c, Zs) - gam * Ps;
            K_prev = K[s];
        }
        const Vector w_next = w + (dt / 6.0) * (K[0] + 2.0 * K[1] + 2.0 * K[2] + K[3]);
        const KernelAt kern_end = constant ? fixed : kernel_at(D, th_end);
        const Vector z_next = rec.solve(tr, cur + 1, kern_end, w_next);
        detail::guard(z_next, tr.time(n + 1));
        tr.push(z_next, th_end);
        tr.push_w(w_next);
    }
    return tr;
}

MonotonicityReport check_nfde_monotonicity(const NfdeModel& model, const BasePoint& theta0,
                                           const HistoryView& x0, const HistoryView& y0, double T) {
    if (!leq_DA(model.D, theta0, x0, y0, model.order))
        throw InvalidArgument("check_nfde_monotonicity needs x0 <=_{D,A} y0");
    const Trajectory tx = integrate_nfde(model, theta0, x0, T);
    const Trajectory ty = integrate_nfde(model, theta0, y0, T);
    return compare_snapshots([&](std::size_t i) { return tx.w_snapshot_view(i); },
                             [&](std::size_t i) { return ty.w_snapshot_view(i); }, tx.steps(), tx.t0(),
                             tx.step(), model.order);
}

UniformStabilityReport uniform_stability_probe(const NfdeModel& model, double r,
                                               std::vector<double> eps_list, std::size_t n_pairs,
                                               double T, std::uint64_t seed) {
    model.validate();
    if (!(r > 0.0)) throw InvalidArgument("ball radius must be positive");
    Rng rng(seed);
    const double dt = model.grid().step, L = model.grid().depth;
    std::vector<StabilityPair> pairs;
    for (std::size_t p = 0; p < n_pairs; ++p) {
        BasePoint theta = random_base_point(rng, model.base().dim());
        HistoryFunction x = random_bv_history(rng, model.dim(), dt, L, 0.5 * r);
        HistoryFunction c = dhat_inverse_sweep(model.D, theta, random_cone_element(rng, model.order, dt, L, 1.0));
        const double cn = c.sup_norm();
        if (cn <= 0.0) continue;
        const double s_max = (r - x.sup_norm()) / cn;
        pairs.push_back({std::move(theta), std::move(x), std::move(c), s_max});
    }
    return uniform_stability_search(
        pairs, [&](const BasePoint& th, const HistoryView& x) { return integrate_nfde(model, th, x, T); },
        std::move(eps_list));
}

NfdeCopyOfBaseReport nfde_omega_probe(const NfdeModel& model, const BasePoint& theta0,
                                      const HistoryView& x0, const HistoryView& y0,
                                      const OmegaOptions& opts) {
    NfdeCopyOfBaseReport rep;
    rep.initial_regularity = regularity_R(eval_Dhat2(model.D, theta0, x0));
    const Trajectory tx = integrate_nfde(model, theta0, x0, opts.t_max);
    const Trajectory ty = integrate_nfde(model, theta0, y0, opts.t_max);
    rep.hat = analyze_copy_of_base(
        model.base(), theta0, [&](std::size_t i) { return tx.w_snapshot_view(i); },
        [&](std::size_t i) { return ty.w_snapshot_view(i); }, tx.steps(), tx.step(), opts);
    rep.original = analyze_copy_of_base(
        model.base(), theta0, [&](std::size_t i) { return tx.snapshot_view(i); },
        [&](std::size_t i) { return ty.snapshot_view(i); }, tx.steps(), tx.step(), opts);
    rep.pass = rep.hat.pass && rep.original.pass;
    return rep;
}

}  // namespace fadeflow
