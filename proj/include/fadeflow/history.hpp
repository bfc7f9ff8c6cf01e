#pragma once

#include "fadeflow/types.hpp"

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace fadeflow {

/// Non-owning view of a sampled history on the grid 0, -step, ..., -depth.
///
/// Storage is oldest-first and row-major: the sample at time -i*step lives at
/// row (count-1-i). Below -depth the function is the constant tail, i.e. the
/// oldest sample. Trajectories store their heads in the same layout, so a
/// snapshot is a contiguous slice of a trajectory.
class HistoryView {
public:
    HistoryView(std::size_t dim, double step, std::size_t count, const double* data)
        : dim_(dim), step_(step), count_(count), data_(data) {}

    std::size_t dim() const noexcept { return dim_; }
    double step() const noexcept { return step_; }
    /// Number of grid samples, N+1.
    std::size_t count() const noexcept { return count_; }
    /// Number of grid intervals N = depth/step.
    std::size_t intervals() const noexcept { return count_ - 1; }
    double depth() const noexcept { return static_cast<double>(count_ - 1) * step_; }

    /// Component k of the sample at time -i*step.
    double operator()(std::size_t i, std::size_t k) const noexcept {
        return data_[(count_ - 1 - i) * dim_ + k];
    }
    std::span<const double> sample_span(std::size_t i) const noexcept {
        return {data_ + (count_ - 1 - i) * dim_, dim_};
    }
    Vector sample(std::size_t i) const;
    Vector head() const { return sample(0); }
    Vector tail() const { return sample(count_ - 1); }

    /// Linear interpolation between grid samples; the tail below -depth.
    Vector eval(double s) const;
    double sup_norm() const;

    bool same_grid(const HistoryView& other) const noexcept;
    const double* data() const noexcept { return data_; }

private:
    std::size_t dim_;
    double step_;
    std::size_t count_;
    const double* data_;
};

/// An element of BC truncated to [-depth, 0] with a constant tail.
class HistoryFunction {
public:
    /// `oldest_first` holds (depth/step + 1) rows of `dim` values, oldest row first.
    HistoryFunction(std::size_t dim, double step, double depth, std::vector<double> oldest_first);

    static HistoryFunction constant(double step, double depth, const Vector& value);
    static HistoryFunction zeros(std::size_t dim, double step, double depth);
    /// Samples f(s) at s = 0, -step, ..., -depth.
    static HistoryFunction from_function(std::size_t dim, double step, double depth,
                                         const std::function<Vector(double)>& f);
    /// `newest_first[i]` is the value at -i*step.
    static HistoryFunction from_samples(double step, const std::vector<Vector>& newest_first);
    static HistoryFunction from_view(const HistoryView& v);

    HistoryView view() const noexcept { return {dim_, step_, count_, data_.data()}; }
    operator HistoryView() const noexcept { return view(); }  // NOLINT

    std::size_t dim() const noexcept { return dim_; }
    double step() const noexcept { return step_; }
    double depth() const noexcept { return view().depth(); }
    std::size_t count() const noexcept { return count_; }
    std::size_t intervals() const noexcept { return count_ - 1; }

    double operator()(std::size_t i, std::size_t k) const noexcept { return view()(i, k); }
    double& at(std::size_t i, std::size_t k) noexcept { return data_[(count_ - 1 - i) * dim_ + k]; }
    Vector sample(std::size_t i) const { return view().sample(i); }
    void set_sample(std::size_t i, const Vector& v);
    Vector head() const { return view().head(); }
    Vector tail() const { return view().tail(); }
    Vector eval(double s) const { return view().eval(s); }
    double sup_norm() const { return view().sup_norm(); }
    const std::vector<double>& raw() const noexcept { return data_; }

    HistoryFunction& operator+=(const HistoryFunction& o);
    HistoryFunction& operator-=(const HistoryFunction& o);
    HistoryFunction& operator*=(double a);
    /// Adds the same vector at every sample.
    HistoryFunction& operator+=(const Vector& c);

private:
    std::size_t dim_;
    double step_;
    std::size_t count_;
    std::vector<double> data_;
};

HistoryFunction operator+(HistoryFunction a, const HistoryFunction& b);
HistoryFunction operator-(HistoryFunction a, const HistoryFunction& b);
HistoryFunction operator*(double s, HistoryFunction a);

/// Diagonal of the matrix A (all entries < 0) defining the exponential order,
/// plus the relative slack used by cone-membership tests.
struct OrderParams {
    std::vector<double> diag;
    double tol = 1e-9;

    OrderParams() = default;
    explicit OrderParams(std::vector<double> d, double tolerance = 1e-9);
    std::size_t dim() const noexcept { return diag.size(); }
    void validate() const;
};

/// Throws InvalidArgument unless x and y share dim, step and depth.
void require_same_grid(const HistoryView& x, const HistoryView& y);

/// x(s) for s <= 0.
Vector eval(const HistoryView& x, double s);

/// sup over grid points in [-n, 0] of |x(s) - y(s)|.
double seminorm(const HistoryView& x, const HistoryView& y, double n);

constexpr int kDefaultMetricTerms = 40;

/// Truncated compact-open metric sum_{n<=n_terms} 2^-n |x-y|_n / (1 + |x-y|_n).
/// The omitted remainder is at most 2^-n_terms.
double metric_d(const HistoryView& x, const HistoryView& y, int n_terms = kDefaultMetricTerms);

/// x <=_A y on the grid: y - x >= 0 and (y-x)(t) >= e^{A step}(y-x)(t - step)
/// for consecutive grid times, with slack tol*(1 + |y-x|_inf).
bool leq_A(const HistoryView& x, const HistoryView& y, const OrderParams& A);

/// Smallest one-step cone margin (negative means a violation), unscaled.
double cone_margin(const HistoryView& x, const HistoryView& y, const OrderParams& A);

/// Grid total variation per component on [a, b], endpoints included by interpolation.
Vector total_variation(const HistoryView& x, double a, double b);

struct RegularityReport {
    bool satisfied = true;
    double sup_var = 0.0;
    double norm_R = 0.0;
    /// Unit windows [-k,-k+1] inspected, k = 1..windows.
    int windows = 0;
    /// Largest component variation in each inspected window.
    std::vector<double> window_variation;
};

/// Unit-window variation certificate. Only windows inside [-depth, 0] are
/// inspected, so `satisfied` speaks for the represented window only.
RegularityReport regularity_R(const HistoryView& x,
                              double bound = std::numeric_limits<double>::infinity());

/// Largest increment between consecutive samples (grid modulus of continuity).
double grid_modulus(const HistoryView& x);

/// Common upper bound h of x and 0 for <=_A:
/// h(t) = e^{-a t} V_{(-inf,t]}(e^{a.} x) per component with a = -A_ii.
HistoryFunction construct_h(const HistoryView& x, const OrderParams& A);

/// construct_h(x) + |x|_inf in every component; also dominates x - x(0).
HistoryFunction construct_h0(const HistoryView& x, const OrderParams& A);

/// s -> hbar(s + T), where hbar(s) = e^{As} h0(0) for s > 0 and h0(s) otherwise.
HistoryFunction shifted_envelope(const HistoryView& h0, const OrderParams& A, double T);

/// Lower/upper brackets (a, b) of v and c in <=_A, built from
/// int_{-inf}^s e^{A(s-tau)} inf/sup{v' - Av, c' - Ac} dtau.
///
/// The inf/sup is taken over each grid step of the exactly integrated
/// variation-of-constants increments v(t) - e^{A step} v(t - step), so the
/// brackets hold exactly on the grid and a = b = v when v = c.
std::pair<HistoryFunction, HistoryFunction> order_envelope(const HistoryView& v,
                                                           const HistoryView& c,
                                                           const OrderParams& A);

}  // namespace fadeflow
