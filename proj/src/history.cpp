#include "fadeflow/history.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fadeflow {

namespace {

constexpr double kGridEps = 1e-9;

std::size_t grid_intervals(double step, double depth) {
    if (!(step > 0.0) || !std::isfinite(step))
        throw InvalidArgument("history step must be positive and finite");
    if (!(depth > 0.0) || !std::isfinite(depth))
        throw InvalidArgument("history depth must be positive and finite");
    const double ratio = depth / step;
    const double n = std::round(ratio);
    if (n < 1.0 || std::abs(ratio - n) > kGridEps * std::max(1.0, ratio))
        throw InvalidArgument("history depth " + std::to_string(depth) +
                              " is not a multiple of step " + std::to_string(step));
    return static_cast<std::size_t>(n);
}

// Grid index of the last sample inside [-n, 0].
std::size_t last_index_within(const HistoryView& x, double n) {
    const double r = n / x.step() + kGridEps;
    if (r >= static_cast<double>(x.intervals())) return x.intervals();
    return static_cast<std::size_t>(std::floor(r));
}

}  // namespace

Vector HistoryView::sample(std::size_t i) const {
    Vector v(static_cast<Eigen::Index>(dim_));
    for (std::size_t k = 0; k < dim_; ++k) v[static_cast<Eigen::Index>(k)] = (*this)(i, k);
    return v;
}

Vector HistoryView::eval(double s) const {
    if (s > 0.0) throw InvalidArgument("history evaluated at s > 0");
    const double r = -s / step_;
    if (r >= static_cast<double>(intervals())) return tail();
    const auto i = static_cast<std::size_t>(std::floor(r));
    const double w = r - static_cast<double>(i);
    Vector v(static_cast<Eigen::Index>(dim_));
    for (std::size_t k = 0; k < dim_; ++k) {
        const double lo = (*this)(i, k);
        const double hi = (i + 1 < count_) ? (*this)(i + 1, k) : lo;
        v[static_cast<Eigen::Index>(k)] = (1.0 - w) * lo + w * hi;
    }
    return v;
}

double HistoryView::sup_norm() const {
    double m = 0.0;
    for (std::size_t j = 0; j < count_ * dim_; ++j) m = std::max(m, std::abs(data_[j]));
    return m;
}

bool HistoryView::same_grid(const HistoryView& o) const noexcept {
    return dim_ == o.dim_ && count_ == o.count_ &&
           std::abs(step_ - o.step_) <= kGridEps * step_;
}

HistoryFunction::HistoryFunction(std::size_t dim, double step, double depth,
                                 std::vector<double> oldest_first)
    : dim_(dim), step_(step), count_(grid_intervals(step, depth) + 1),
      data_(std::move(oldest_first)) {
    if (dim_ == 0) throw InvalidArgument("history dimension must be positive");
    if (data_.size() != count_ * dim_)
        throw InvalidArgument("history sample buffer has " + std::to_string(data_.size()) +
                              " values, expected " + std::to_string(count_ * dim_));
    for (double v : data_)
        if (!std::isfinite(v)) throw InvalidArgument("history samples must be finite");
}

HistoryFunction HistoryFunction::constant(double step, double depth, const Vector& value) {
    const std::size_t n = grid_intervals(step, depth) + 1;
    const auto m = static_cast<std::size_t>(value.size());
    std::vector<double> buf(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < m; ++k) buf[i * m + k] = value[static_cast<Eigen::Index>(k)];
    return {m, step, depth, std::move(buf)};
}

HistoryFunction HistoryFunction::zeros(std::size_t dim, double step, double depth) {
    return constant(step, depth, Vector::Zero(static_cast<Eigen::Index>(dim)));
}

HistoryFunction HistoryFunction::from_function(std::size_t dim, double step, double depth,
                                               const std::function<Vector(double)>& f) {
    const std::size_t n = grid_intervals(step, depth);
    std::vector<double> buf((n + 1) * dim);
    for (std::size_t i = 0; i <= n; ++i) {
        const Vector v = f(-static_cast<double>(i) * step);
        if (static_cast<std::size_t>(v.size()) != dim)
            throw InvalidArgument("history generator returned wrong dimension");
        for (std::size_t k = 0; k < dim; ++k)
            buf[(n - i) * dim + k] = v[static_cast<Eigen::Index>(k)];
    }
    return {dim, step, static_cast<double>(n) * step, std::move(buf)};
}

HistoryFunction HistoryFunction::from_samples(double step, const std::vector<Vector>& newest_first) {
    if (newest_first.size() < 2) throw InvalidArgument("history needs at least two samples");
    const auto m = static_cast<std::size_t>(newest_first.front().size());
    const std::size_t n = newest_first.size() - 1;
    std::vector<double> buf((n + 1) * m);
    for (std::size_t i = 0; i <= n; ++i) {
        if (static_cast<std::size_t>(newest_first[i].size()) != m)
            throw InvalidArgument("history samples have inconsistent dimension");
        for (std::size_t k = 0; k < m; ++k)
            buf[(n - i) * m + k] = newest_first[i][static_cast<Eigen::Index>(k)];
    }
    return {m, step, static_cast<double>(n) * step, std::move(buf)};
}

HistoryFunction HistoryFunction::from_view(const HistoryView& v) {
    std::vector<double> buf(v.data(), v.data() + v.count() * v.dim());
    return {v.dim(), v.step(), v.depth(), std::move(buf)};
}

void HistoryFunction::set_sample(std::size_t i, const Vector& v) {
    for (std::size_t k = 0; k < dim_; ++k) at(i, k) = v[static_cast<Eigen::Index>(k)];
}

HistoryFunction& HistoryFunction::operator+=(const HistoryFunction& o) {
    require_same_grid(*this, o);
    for (std::size_t j = 0; j < data_.size(); ++j) data_[j] += o.data_[j];
    return *this;
}

HistoryFunction& HistoryFunction::operator-=(const HistoryFunction& o) {
    require_same_grid(*this, o);
    for (std::size_t j = 0; j < data_.size(); ++j) data_[j] -= o.data_[j];
    return *this;
}

HistoryFunction& HistoryFunction::operator*=(double a) {
    for (double& v : data_) v *= a;
    return *this;
}

HistoryFunction& HistoryFunction::operator+=(const Vector& c) {
    if (static_cast<std::size_t>(c.size()) != dim_) throw InvalidArgument("dimension mismatch");
    for (std::size_t i = 0; i < count_; ++i)
        for (std::size_t k = 0; k < dim_; ++k) data_[i * dim_ + k] += c[static_cast<Eigen::Index>(k)];
    return *this;
}

HistoryFunction operator+(HistoryFunction a, const HistoryFunction& b) { return a += b; }
HistoryFunction operator-(HistoryFunction a, const HistoryFunction& b) { return a -= b; }
HistoryFunction operator*(double s, HistoryFunction a) { return a *= s; }

OrderParams::OrderParams(std::vector<double> d, double tolerance)
    : diag(std::move(d)), tol(tolerance) {
    validate();
}

void OrderParams::validate() const {
    if (diag.empty()) throw InvalidArgument("order matrix A is empty");
    for (double a : diag)
        if (!(a < 0.0) || !std::isfinite(a))
            throw InvalidArgument("order matrix A needs strictly negative diagonal entries");
    if (!(tol >= 0.0)) throw InvalidArgument("order tolerance must be nonnegative");
}

void require_same_grid(const HistoryView& x, const HistoryView& y) {
    if (!x.same_grid(y))
        throw InvalidArgument("histories live on different grids (dim/step/depth mismatch)");
}

Vector eval(const HistoryView& x, double s) { return x.eval(s); }

double seminorm(const HistoryView& x, const HistoryView& y, double n) {
    require_same_grid(x, y);
    if (!(n > 0.0)) throw InvalidArgument("seminorm index must be positive");
    const std::size_t last = last_index_within(x, n);
    double m = 0.0;
    for (std::size_t i = 0; i <= last; ++i)
        for (std::size_t k = 0; k < x.dim(); ++k) m = std::max(m, std::abs(x(i, k) - y(i, k)));
    return m;
}

double metric_d(const HistoryView& x, const HistoryView& y, int n_terms) {
    require_same_grid(x, y);
    if (n_terms < 1) throw InvalidArgument("metric needs at least one term");
    double sum = 0.0;
    double running = 0.0;
    std::size_t next = 0;
    double weight = 1.0;
    for (int n = 1; n <= n_terms; ++n) {
        const std::size_t last = last_index_within(x, n);
        for (; next <= last; ++next)
            for (std::size_t k = 0; k < x.dim(); ++k)
                running = std::max(running, std::abs(x(next, k) - y(next, k)));
        weight *= 0.5;
        sum += weight * running / (1.0 + running);
    }
    return sum;
}

double cone_margin(const HistoryView& x, const HistoryView& y, const OrderParams& A) {
    require_same_grid(x, y);
    if (A.dim() != x.dim()) throw InvalidArgument("order matrix dimension mismatch");
    const std::size_t n = x.intervals();
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < x.dim(); ++k) {
        const double e = std::exp(A.diag[k] * x.step());
        double newer = y(0, k) - x(0, k);
        margin = std::min(margin, newer);
        for (std::size_t i = 1; i <= n; ++i) {
            const double older = y(i, k) - x(i, k);
            margin = std::min(margin, older);
            margin = std::min(margin, newer - e * older);
            newer = older;
        }
    }
    return margin;
}

bool leq_A(const HistoryView& x, const HistoryView& y, const OrderParams& A) {
    require_same_grid(x, y);
    if (A.dim() != x.dim()) throw InvalidArgument("order matrix dimension mismatch");
    double diff = 0.0;
    for (std::size_t j = 0; j < x.count() * x.dim(); ++j)
        diff = std::max(diff, std::abs(y.data()[j] - x.data()[j]));
    return cone_margin(x, y, A) >= -A.tol * (1.0 + diff);
}

Vector total_variation(const HistoryView& x, double a, double b) {
    if (!(a < b) || b > 0.0 || a < -x.depth() * (1.0 + kGridEps))
        throw InvalidArgument("variation interval must satisfy -depth <= a < b <= 0");
    const auto m = static_cast<Eigen::Index>(x.dim());
    Vector var = Vector::Zero(m);
    Vector prev = x.eval(b);
    // Interior grid points strictly inside (a, b), newest first.
    const double first = std::ceil(-b / x.step() + kGridEps);
    const double last = std::floor(-a / x.step() - kGridEps);
    for (double r = first; r <= last; r += 1.0) {
        const auto i = static_cast<std::size_t>(r);
        const Vector cur = x.sample(i);
        var += (cur - prev).cwiseAbs();
        prev = cur;
    }
    var += (x.eval(std::max(a, -x.depth())) - prev).cwiseAbs();
    return var;
}

RegularityReport regularity_R(const HistoryView& x, double bound) {
    if (x.depth() < 2.0 - kGridEps)
        throw InvalidArgument("regularity check needs depth >= 2 (two unit windows)");
    RegularityReport rep;
    rep.windows = static_cast<int>(std::floor(x.depth() + kGridEps));
    rep.window_variation.reserve(static_cast<std::size_t>(rep.windows));
    for (int k = 1; k <= rep.windows; ++k) {
        const Vector v = total_variation(x, -static_cast<double>(k), -static_cast<double>(k - 1));
        const double w = v.maxCoeff();
        rep.window_variation.push_back(w);
        rep.sup_var = std::max(rep.sup_var, w);
    }
    rep.norm_R = x.sup_norm() + rep.sup_var;
    rep.satisfied = rep.sup_var <= bound;
    return rep;
}

double grid_modulus(const HistoryView& x) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.intervals(); ++i)
        for (std::size_t k = 0; k < x.dim(); ++k) m = std::max(m, std::abs(x(i, k) - x(i + 1, k)));
    return m;
}

HistoryFunction construct_h(const HistoryView& x, const OrderParams& A) {
    A.validate();
    if (A.dim() != x.dim()) throw InvalidArgument("order matrix dimension mismatch");
    HistoryFunction h = HistoryFunction::zeros(x.dim(), x.step(), x.depth());
    const std::size_t n = x.intervals();
    for (std::size_t k = 0; k < x.dim(); ++k) {
        if (!std::isfinite(x(0, k))) throw InvalidArgument("history must be finite");
        // With the constant tail, V_{(-inf,-L]}(e^{a.}x) = |x(-L)| e^{-aL} exactly.
        // Scaled recursion h_i = e^{-a step} h_{i+1} + |x_i - e^{-a step} x_{i+1}|
        // avoids forming e^{a L}.
        const double e = std::exp(A.diag[k] * x.step());
        double hi = std::abs(x(n, k));
        h.at(n, k) = hi;
        for (std::size_t i = n; i-- > 0;) {
            hi = e * hi + std::abs(x(i, k) - e * x(i + 1, k));
            h.at(i, k) = hi;
        }
    }
    return h;
}

HistoryFunction construct_h0(const HistoryView& x, const OrderParams& A) {
    HistoryFunction h = construct_h(x, A);
    h += Vector::Constant(static_cast<Eigen::Index>(x.dim()), x.sup_norm());
    return h;
}

HistoryFunction shifted_envelope(const HistoryView& h0, const OrderParams& A, double T) {
    if (!(T >= 0.0)) throw InvalidArgument("envelope shift T must be nonnegative");
    if (A.dim() != h0.dim()) throw InvalidArgument("order matrix dimension mismatch");
    const Vector head = h0.head();
    return HistoryFunction::from_function(h0.dim(), h0.step(), h0.depth(), [&](double s) {
        const double u = s + T;
        if (u <= 0.0) return h0.eval(u);
        Vector v = head;
        for (Eigen::Index k = 0; k < v.size(); ++k) v[k] *= std::exp(A.diag[static_cast<std::size_t>(k)] * u);
        return v;
    });
}

std::pair<HistoryFunction, HistoryFunction> order_envelope(const HistoryView& v,
                                                           const HistoryView& c,
                                                           const OrderParams& A) {
    require_same_grid(v, c);
    if (A.dim() != v.dim()) throw InvalidArgument("order matrix dimension mismatch");
    HistoryFunction lo = HistoryFunction::zeros(v.dim(), v.step(), v.depth());
    HistoryFunction hi = lo;
    const std::size_t n = v.intervals();
    for (std::size_t k = 0; k < v.dim(); ++k) {
        const double e = std::exp(A.diag[k] * v.step());
        // Tail: constant integrand -A*v(-L) integrates to v(-L) exactly.
        lo.at(n, k) = std::min(v(n, k), c(n, k));
        hi.at(n, k) = std::max(v(n, k), c(n, k));
        for (std::size_t i = n; i-- > 0;) {
            const double dv = v(i, k) - e * v(i + 1, k);
            const double dc = c(i, k) - e * c(i + 1, k);
            lo.at(i, k) = e * lo(i + 1, k) + std::min(dv, dc);
            hi.at(i, k) = e * hi(i + 1, k) + std::max(dv, dc);
        }
    }
    return {std::move(lo), std::move(hi)};
}

}  // namespace fadeflow
