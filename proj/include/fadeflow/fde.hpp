#pragma once

#include "fadeflow/baseflow.hpp"
#include "fadeflow/history.hpp"
#include "fadeflow/types.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fadeflow {

/// A real coefficient on the base: constant + scale * trig(id)(theta).
struct CoeffRef {
    double constant = 0.0;
    std::string id;  ///< empty: constant coefficient
    double scale = 1.0;

    CoeffRef() = default;
    CoeffRef(double c) : constant(c) {}  // NOLINT(google-explicit-constructor)
    CoeffRef(double c, std::string trig_id, double s = 1.0)
        : constant(c), id(std::move(trig_id)), scale(s) {}

    bool is_constant() const noexcept { return id.empty() || scale == 0.0; }
    double value(const TorusBase& base, const BasePoint& theta) const;
    /// sup over the base of |value|.
    double bound(const TorusBase& base) const;
    /// inf over the base of value (lower bound from the amplitude sum).
    double lower_bound(const TorusBase& base) const;
};

/// m x m matrix of base coefficients, row-major.
struct CoeffMatrix {
    std::size_t dim = 0;
    std::vector<CoeffRef> entries;

    CoeffMatrix() = default;
    explicit CoeffMatrix(std::size_t m) : dim(m), entries(m * m) {}
    static CoeffMatrix constant(const Matrix& a);
    static CoeffMatrix diagonal(const std::vector<CoeffRef>& d);

    CoeffRef& operator()(std::size_t i, std::size_t j) { return entries[i * dim + j]; }
    const CoeffRef& operator()(std::size_t i, std::size_t j) const { return entries[i * dim + j]; }
    Matrix value(const TorusBase& base, const BasePoint& theta) const;
    /// Entrywise sup |c_ij| over the base.
    Matrix abs_bound(const TorusBase& base) const;
    bool is_constant() const;
};

/// Coefficient acting on x(-delay); delay is a positive multiple of the step.
struct DelayTerm {
    double delay = 1.0;
    CoeffMatrix coeff;
};

/// Coefficient acting on int_{-inf}^0 e^{decay s} x(s) ds.
struct DistTerm {
    double decay = 1.0;
    CoeffMatrix coeff;
};

/// Componentwise amplitude_i * tanh(x_i(0)).
struct Nonlinearity {
    std::vector<double> amplitude;
};

struct Grid {
    double step = 0.01;
    double depth = 20.0;

    std::size_t intervals() const;
};

/// Right-hand side of the structural form
///   linear_inst(theta) x(0) + sum C_j(theta) x(-r_j)
///   + sum K_k(theta) int e^{g_k s} x(s) ds + forcing(theta) + nonlinearity(x(0)).
/// Used for F in FDEs and for G in neutral equations.
struct RhsForm {
    std::size_t dim = 1;
    CoeffMatrix linear_inst;
    std::vector<DelayTerm> delays;
    std::vector<DistTerm> dists;
    std::vector<CoeffRef> forcing;
    std::optional<Nonlinearity> nonlinearity;

    RhsForm() = default;
    explicit RhsForm(std::size_t m);

    void validate(const TorusBase& base, const Grid& grid) const;
    Vector eval(const TorusBase& base, const BasePoint& theta, const HistoryView& x) const;
    /// Lipschitz bound in the sup norm (realizes the Lipschitz hypothesis on balls).
    double lipschitz_bound(const TorusBase& base) const;
    /// sup of |rhs| over the ball of radius r.
    double ball_bound(const TorusBase& base, double r) const;
    double max_delay() const;
};

/// Family z'(t) = F(theta.t, z_t) with F of the RhsForm structure.
struct FdeModel {
    TorusBase base;
    RhsForm rhs;
    OrderParams order;
    Grid grid;

    std::size_t dim() const noexcept { return rhs.dim; }
    void validate() const;
};

/// int_{-L}^{-offset} e^{decay s} x(s) ds, weighting each grid interval exactly
/// against the local cubic interpolant of x (four neighbouring samples), plus the
/// closed-form constant-tail piece e^{-decay L}/decay * x(-L) when `with_tail`.
/// `offset_steps` is the offset in grid steps. Exact for cubics and constants.
Vector exp_integral(const HistoryView& x, double decay, std::size_t offset_steps = 0,
                    bool with_tail = true);

/// Weights w_k with sum_k w_k p((first + k) step) = int_0^step e^{-decay u} p(u) du
/// for every cubic p.
std::array<double, 4> exp_cubic_weights(double decay, double step, int first);

Vector eval_F(const FdeModel& model, const BasePoint& theta, const HistoryView& x);

/// Output of an integration run on the uniform grid t0 + i*step, i = 0..steps.
///
/// Heads are stored oldest first, starting with the initial datum on [-L, 0],
/// so snapshot(i) is a contiguous slice.
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(std::size_t dim, double step, std::size_t depth_intervals, const HistoryView& x0,
               const BasePoint& theta0, double t0 = 0.0);

    std::size_t dim() const noexcept { return dim_; }
    double step() const noexcept { return step_; }
    double t0() const noexcept { return t0_; }
    std::size_t depth_intervals() const noexcept { return n_; }
    /// Number of completed steps.
    std::size_t steps() const noexcept { return steps_; }
    double time(std::size_t i) const noexcept { return t0_ + static_cast<double>(i) * step_; }
    std::size_t index_of(double t) const;

    Vector head(std::size_t i) const;
    double head(std::size_t i, std::size_t k) const { return heads_[(i + n_) * dim_ + k]; }
    const BasePoint& base_point(std::size_t i) const { return base_points_.at(i); }
    /// u(t_i, theta0, x0) as a view into the trajectory storage.
    HistoryView snapshot_view(std::size_t i) const;
    HistoryFunction snapshot(std::size_t i) const { return HistoryFunction::from_view(snapshot_view(i)); }
    HistoryFunction snapshot_at(double t) const { return snapshot(index_of(t)); }

    /// D-transformed values w(t) = D(theta.t, z_t) for neutral runs (empty otherwise),
    /// stored like the heads: the initial hat-history first, then one row per step.
    bool has_w() const noexcept { return !w_.empty(); }
    Vector w(std::size_t i) const;
    /// The window of w over [t_i - L, t_i], i.e. D^_2(theta.t_i, u(t_i)) up to truncation.
    HistoryView w_snapshot_view(std::size_t i) const;

    // Builders used by the integrators.
    void push(const Vector& head, const BasePoint& theta);
    void init_w(const HistoryView& w0);
    void push_w(const Vector& w);
    /// Value at grid row `row` (row 0 is time -L); rows below 0 give the tail.
    double row_value(std::ptrdiff_t row, std::size_t k) const {
        return heads_[static_cast<std::size_t>(row < 0 ? 0 : row) * dim_ + k];
    }
    const std::vector<double>& raw_heads() const noexcept { return heads_; }

private:
    std::size_t dim_ = 0;
    double step_ = 0.0;
    std::size_t n_ = 0;
    double t0_ = 0.0;
    std::size_t steps_ = 0;
    std::vector<double> heads_;
    std::vector<BasePoint> base_points_;
    std::vector<double> w_;
};

/// Fixed-step RK4 for z' = F(theta.t, z_t) (method of steps).
///
/// Stage lookups at half steps use cubic interpolation of stored grid values
/// no newer than the stage start; distributed terms are advanced as auxiliary
/// stage variables restarted from the grid quadrature at every step. The state
/// carried between steps is exactly the snapshot, so restarting from
/// snapshot(t) reproduces the run. Throws BlowUpError above 1e12.
Trajectory integrate(const FdeModel& model, const BasePoint& theta0, const HistoryView& x0,
                     double T, double t0 = 0.0);

/// A general right-hand side F(theta, x) evaluated on stage histories.
using FdeEvaluator = std::function<Vector(const BasePoint&, const HistoryView&)>;

/// RK4 for an arbitrary functional F: each stage builds the full stage history
/// (cubic interpolation at half steps) and calls F on it. O(N) per stage.
Trajectory integrate_functional(const TorusBase& base, const FdeEvaluator& F,
                                const BasePoint& theta0, const HistoryView& x0, double T,
                                double t0 = 0.0);

/// Adapter exposing eval_F as an FdeEvaluator.
FdeEvaluator make_evaluator(const FdeModel& model);

}  // namespace fadeflow
