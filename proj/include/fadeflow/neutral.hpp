#pragma once

#include "fadeflow/fde.hpp"
#include "fadeflow/probes.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace fadeflow {

/// Point mass c(theta) at s = -delay.
struct Atom {
    double delay = 1.0;
    CoeffMatrix coeff;
};

/// g(theta) e^{decay s} on [-L, -offset].
struct Density {
    double decay = 1.0;
    CoeffMatrix coeff;
    double offset = 0.0;
};

/// D(theta, x) = x(0) - sum_j c_j(theta) x(-r_j) - int_{-L}^{-s0} g(theta) e^{decay s} x(s) ds.
///
/// The identity mass sits at 0 and every atom is strictly delayed, so the
/// operator is atomic at zero. Stability comes from the mass bound q < 1.
struct NeutralOperator {
    std::size_t dim = 1;
    TorusBase base;
    std::vector<Atom> atoms;
    std::optional<Density> density;
    Grid grid;

    /// Throws InvalidArgument on bad delays/offsets or q >= 1.
    void validate() const;
    /// sup over the base of the max-row-sum total mass of the kernel.
    double q() const;
    double min_delay() const;
    /// Largest lag the kernel reads: the largest atom delay, or the depth with a density.
    double reach() const;
};

Vector eval_D(const NeutralOperator& D, const BasePoint& theta, const HistoryView& x);

/// Max-row-sum mass of the kernel restricted to [a, b].
double kernel_variation(const NeutralOperator& D, const BasePoint& theta, double a, double b);

/// s -> D(theta.s, x_s) on the grid of x; x_s reads the constant tail below -L.
HistoryFunction eval_Dhat2(const NeutralOperator& D, const BasePoint& theta, const HistoryView& x);

struct InverseResult {
    HistoryFunction x;
    int iterations = 0;
    double last_change = 0.0;
    /// |D^_2(theta, x) - h|_inf
    double residual = 0.0;
    bool converged = false;
};

/// Neumann iteration x <- h + (x - D^_2(theta, x)) from x = h, stopping when the
/// sup-change is at most tol_fix. Below -L the iterate is extended by its value at -L.
InverseResult dhat_inverse(const NeutralOperator& D, const BasePoint& theta, const HistoryView& h,
                           double tol_fix = 1e-10, int max_iter = 200);

/// The same discrete fixed point solved directly: a sweep from the oldest sample,
/// with an m x m solve wherever a sample depends on itself.
HistoryFunction dhat_inverse_sweep(const NeutralOperator& D, const BasePoint& theta,
                                   const HistoryView& h);

/// Solves D(theta.t, x_t) = h(t) on [0, T] with x_0 = phi by forward recursion.
/// Requires |D(theta, phi) - h(0)| <= 1e-8.
Trajectory solve_nonhomogeneous(const NeutralOperator& D, const BasePoint& theta,
                                const HistoryView& phi, const std::function<Vector(double)>& h,
                                double T);

struct StabilityConstants {
    double q = 0.0;
    double k_bound = 1.0;
    double k_emp = 0.0;
    std::vector<double> times;
    /// Largest |x(t)| / |phi|_inf over the sampled homogeneous solutions.
    std::vector<double> c_profile;
    /// q^{ceil(t / reach)}, the bound implied by the mass estimate.
    std::vector<double> c_bound;
    bool within_bound = true;
};

StabilityConstants stability_constants(const NeutralOperator& D, std::size_t n_samples, double T,
                                       std::uint64_t seed = 1);

bool leq_DA(const NeutralOperator& D, const BasePoint& theta, const HistoryView& x,
            const HistoryView& y, const OrderParams& A);

struct KdBounds {
    double K_D = 1.0;
    double K_D_prime = 1.0;
    /// Largest sampled |D^_2(x)| / |x| and |D^-1(h)| / |h|.
    double emp_forward = 0.0;
    double emp_inverse = 0.0;
};

KdBounds bounds_KD(const NeutralOperator& D, std::size_t n_samples = 1000, std::uint64_t seed = 1);

/// d/dt D(theta.t, z_t) = G(theta.t, z_t).
struct NfdeModel {
    NeutralOperator D;
    RhsForm G;
    OrderParams order;

    std::size_t dim() const noexcept { return D.dim; }
    const Grid& grid() const noexcept { return D.grid; }
    const TorusBase& base() const noexcept { return D.base; }
    void validate() const;
};

Vector eval_G(const NfdeModel& model, const BasePoint& theta, const HistoryView& x);

/// Samples x and y = x + D^-1(theta, c) with c >=_A 0, so x <=_{D,A} y, and reports
/// min_i [G_i(y) - G_i(x) - (A(D(y) - D(x)))_i].
MarginReport check_N4(const NfdeModel& model, std::uint64_t seed, std::size_t n_pairs);

/// (theta, y^) -> G(theta, D^-1(theta, y^)), the right-hand side of the transformed FDE.
FdeEvaluator transform_to_fde(const NfdeModel& model);

/// Dual-history RK4: advances w = D(theta.t, z_t) with w' = G and recovers z from w.
/// The returned trajectory also carries the w history (initially D^_2(theta0, x0)).
Trajectory integrate_nfde(const NfdeModel& model, const BasePoint& theta0, const HistoryView& x0,
                          double T, double t0 = 0.0);

/// Throws InvalidArgument unless leq_DA(x0, y0).
MonotonicityReport check_nfde_monotonicity(const NfdeModel& model, const BasePoint& theta0,
                                           const HistoryView& x0, const HistoryView& y0, double T);

/// uniform_stability_probe for the neutral family: pairs are ordered by <=_{D,A}
/// (x and x + D^-1(theta, c) with c >=_A 0) and distances are metric_d on the z snapshots.
UniformStabilityReport uniform_stability_probe(const NfdeModel& model, double r,
                                               std::vector<double> eps_list, std::size_t n_pairs,
                                               double T, std::uint64_t seed);

struct NfdeCopyOfBaseReport {
    /// Statistics of the hat-space snapshots D^_2(theta0.t, u(t)).
    CopyOfBaseReport hat;
    /// Statistics of the original snapshots u(t).
    CopyOfBaseReport original;
    /// Regularity certificate of D^_2(theta0, x0) on the represented window.
    RegularityReport initial_regularity;
    bool pass = false;
};

NfdeCopyOfBaseReport nfde_omega_probe(const NfdeModel& model, const BasePoint& theta0,
                                      const HistoryView& x0, const HistoryView& y0,
                                      const OmegaOptions& opts = {});

}  // namespace fadeflow
