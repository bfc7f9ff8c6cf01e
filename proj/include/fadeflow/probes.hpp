#pragma once

#include "fadeflow/fde.hpp"
#include "fadeflow/sampling.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace fadeflow {

/// Minimum over samples of min_i [F_i(y) - F_i(x) - (A(y(0) - x(0)))_i].
struct MarginReport {
    std::size_t samples = 0;
    double min_margin = 0.0;
    double tol = 0.0;
    bool pass = true;
};

/// Quasimonotonicity margin of one ordered pair at one base point.
double quasimonotone_margin(const FdeModel& model, const BasePoint& theta, const HistoryView& x,
                            const HistoryView& y);

/// Random base points and random pairs x <=_A y = x + cone element.
MarginReport check_quasimonotone(const FdeModel& model, std::uint64_t seed, std::size_t n_pairs);

struct MonotonicityReport {
    bool pass = true;
    std::optional<double> first_violation;
    /// Smallest cone margin seen, divided by 1 + |y - x|_inf of that snapshot.
    double min_margin = 0.0;
    std::size_t checked = 0;
};

/// Integrates from x0 <=_A y0 and checks the order of the snapshots at every step.
/// Throws InvalidArgument unless leq_A(x0, y0).
MonotonicityReport check_monotonicity(const FdeModel& model, const BasePoint& theta0,
                                      const HistoryView& x0, const HistoryView& y0, double T);

/// Shared by the FDE and neutral monotonicity checks.
MonotonicityReport compare_snapshots(const std::function<HistoryView(std::size_t)>& lower,
                                     const std::function<HistoryView(std::size_t)>& upper,
                                     std::size_t steps, double t0, double step,
                                     const OrderParams& A);

struct StabilityRow {
    double eps = 0.0;
    double delta = 0.0;
    bool collapsed = false;
};

struct UniformStabilityReport {
    std::vector<StabilityRow> rows;
    std::size_t pairs = 0;
    bool any_collapse = false;
};

/// One sampled ordered pair family (x, x + s c), 0 <= s <= s_max.
struct StabilityPair {
    BasePoint theta;
    HistoryFunction x;
    HistoryFunction c;
    double s_max = 0.0;
};

using TrajectoryRunner = std::function<Trajectory(const BasePoint&, const HistoryView&)>;

/// The bisection behind uniform_stability_probe, for any integrator.
UniformStabilityReport uniform_stability_search(const std::vector<StabilityPair>& pairs,
                                                const TrajectoryRunner& run,
                                                std::vector<double> eps_list);

/// Largest delta (by bisection, per sampled ordered pair in B_r) such that
/// metric_d(x, y) <= delta keeps metric_d(u(t,x), u(t,y)) <= eps on [0, T].
/// Rows are sorted by eps and made monotone; a row collapses when delta < 1e-3 eps.
UniformStabilityReport uniform_stability_probe(const FdeModel& model, double r,
                                               std::vector<double> eps_list, std::size_t n_pairs,
                                               double T, std::uint64_t seed);

struct ContinuityRow {
    double depth = 0.0;
    double initial_distance = 0.0;
    double head_deviation = 0.0;
    double metric_deviation = 0.0;
};

struct ContinuityReport {
    std::vector<ContinuityRow> rows;
    bool decreasing = true;
    bool pass = true;
    double tol = 0.0;
};

/// Perturbs x0 by amplitude * clamp(-s - n, 0, 1) (supported below -n, kept in B_r)
/// for each n in `depths` and reports sup over [0, T] of the head and metric deviations.
/// Passes when head deviations strictly decrease and the deepest is below `tol`.
ContinuityReport continuity_probe(const FdeModel& model, const BasePoint& theta0,
                                  const HistoryView& x0, double r, double T,
                                  const std::vector<double>& depths, double amplitude = 1.0,
                                  double tol = 1e-6);

/// Raised when the return-time window holds no usable pairs.
class NoReturnPairs : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct OmegaOptions {
    std::vector<double> transients{100.0, 400.0, 1600.0};
    double t_max = 2000.0;
    double delta_base = 0.02;
    double threshold = 1e-3;
    int metric_terms = kDefaultMetricTerms;
    /// Pairs listed in the report (largest distances at the first level).
    std::size_t listed_pairs = 20;
};

struct ReturnPair {
    double t1 = 0.0;
    double t2 = 0.0;
    double base_distance = 0.0;
    double distance = 0.0;
};

struct TransientLevel {
    double t_transient = 0.0;
    std::size_t pairs = 0;
    double max_distance = 0.0;
    double two_solution_distance = 0.0;
};

struct CopyOfBaseReport {
    std::vector<TransientLevel> levels;
    std::vector<ReturnPair> pairs;
    std::size_t return_times = 0;
    double two_solution_distance = 0.0;
    /// Least-squares slopes of log(distance) against the transient time.
    double pair_decay_rate = 0.0;
    double two_solution_decay_rate = 0.0;
    bool pairs_decreasing = false;
    bool pairs_below_threshold = false;
    bool two_solution_below_threshold = false;
    bool pass = false;
};

using SnapshotFn = std::function<HistoryView(std::size_t)>;

/// Pair and two-solution statistics for two recorded runs on the grid t0 + i*step.
/// Throws NoReturnPairs when some transient level has no pair.
CopyOfBaseReport analyze_copy_of_base(const TorusBase& base, const BasePoint& theta0,
                                      const SnapshotFn& x, const SnapshotFn& y, std::size_t steps,
                                      double step, const OmegaOptions& opts);

CopyOfBaseReport omega_limit_probe(const FdeModel& model, const BasePoint& theta0,
                                   const HistoryView& x0, const HistoryView& y0,
                                   const OmegaOptions& opts = {});

/// Least-squares slope of log(v) against t (entries with v <= 0 are skipped).
double fitted_log_slope(const std::vector<double>& t, const std::vector<double>& v);

}  // namespace fadeflow
