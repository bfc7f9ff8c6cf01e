#pragma once

#include "fadeflow/neutral.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fadeflow {

/// x'(t) = -alpha x(t) + beta int_{-inf}^0 e^{gamma s} x(t+s) ds + f(theta.t).
struct ScalarFdeSpec {
    double alpha = 1.0;
    double beta = 0.0;
    double gamma = 1.0;
    /// Trig ids must be registered on `base`.
    CoeffRef forcing;
    TorusBase base{{(2.2360679774997896964 - 1.0) / 2.0}};
    Grid grid;
};

/// Order defaults to A = (-alpha), the value for which the model is quasimonotone.
FdeModel build_scalar_fde(const ScalarFdeSpec& spec);
FdeModel build_scalar_fde(const ScalarFdeSpec& spec, const OrderParams& A);

/// beta / gamma < alpha.
bool scalar_dissipative(const ScalarFdeSpec& spec);

/// Constant equilibrium f / (alpha - beta / gamma) for constant forcing.
double scalar_equilibrium(const ScalarFdeSpec& spec);

/// Where the outflow of compartment i acts.
enum class LossForm {
    /// -loss_i(theta) D_i(theta, x): the material counted by D leaves the compartment.
    Neutral,
    /// -loss_i(theta) x_i(0).
    Head,
};

/// m compartments with delayed transport and active (neutral) compartments:
///
///   D_i = x_i(0) - sum_j c_ij x_j(-r_ij)
///   G_i = -loss_i * (D_i or x_i(0)) + sum_j g_ij x_j(-sigma_ij) + I_i
///
/// with loss_i = sum_j g_ji + e_i, g_ij the rate from j into i and e_i the
/// excretion to the environment. All matrices are row-major m x m.
struct CompartmentalSpec {
    std::size_t m = 1;
    TorusBase base{{(2.2360679774997896964 - 1.0) / 2.0}};
    CoeffMatrix transport;
    std::vector<double> transport_delay;
    CoeffMatrix neutral;
    std::vector<double> neutral_delay;
    std::vector<CoeffRef> excretion;
    std::vector<CoeffRef> inflow;
    LossForm loss_form = LossForm::Neutral;
    Grid grid;

    /// An m-compartment spec with every coefficient zero.
    static CompartmentalSpec zeros(std::size_t m, const TorusBase& base, const Grid& grid);
    /// Throws InvalidArgument on negative transport/excretion/inflow, bad delays or q >= 1.
    void validate() const;
    /// sup over the base of loss_i.
    std::vector<double> loss_bound() const;
};

/// Order defaults to A_i = -max(sup loss_i, 1e-3).
NfdeModel build_compartmental_nfde(const CompartmentalSpec& spec);
NfdeModel build_compartmental_nfde(const CompartmentalSpec& spec, const OrderParams& A);

/// Constant solution of a constant-coefficient instance.
Vector compartmental_equilibrium(const CompartmentalSpec& spec);

enum class CheckStatus { Pass, Fail, Heuristic, ByConstruction };

std::string to_string(CheckStatus s);

struct HypothesisCheck {
    std::string name;
    CheckStatus status = CheckStatus::Pass;
    /// Heuristic checks can still come out negative; they never count as hard failures.
    bool ok = true;
    double value = 0.0;
    std::string detail;
};

struct AuditOptions {
    std::size_t n_samples = 200;
    double ball_radius = 2.0;
    std::vector<double> eps_list{0.05, 0.1, 0.2};
    std::size_t stability_pairs = 3;
    double stability_horizon = 25.0;
    double late_time = 30.0;
    std::uint64_t seed = 1;
};

struct AuditReport {
    std::vector<HypothesisCheck> checks;
    double lipschitz = 0.0;
    /// Neutral constants (zero for FDE audits).
    double q = 0.0;
    double k_bound = 0.0;
    double K_D = 0.0;

    bool hard_failure() const;
    const HypothesisCheck* find(const std::string& name) const;
};

AuditReport audit_hypotheses(const FdeModel& model, const AuditOptions& opts = {});
AuditReport audit_hypotheses(const NfdeModel& model, const AuditOptions& opts = {});

}  // namespace fadeflow
