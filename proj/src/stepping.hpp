#pragma once

// Internal RK4 stage helpers shared by the FDE and neutral integrators.

#include "fadeflow/fde.hpp"

#include <cmath>
#include <vector>

namespace fadeflow::detail {

// Cubic interpolation weights at a half step.
constexpr double kMid[4] = {-1.0 / 16, 9.0 / 16, 9.0 / 16, -1.0 / 16};    // rows R-1..R+2
constexpr double kLeft[4] = {1.0 / 16, -5.0 / 16, 15.0 / 16, 5.0 / 16};   // rows R-2..R+1
constexpr double kRight[4] = {5.0 / 16, 15.0 / 16, -5.0 / 16, 1.0 / 16};  // rows R..R+3

// Value at the midpoint between rows R and R+1, using rows no newer than `newest`
// and no older than `oldest` when possible.
inline double half_step_value(const Trajectory& tr, std::ptrdiff_t R, std::ptrdiff_t newest,
                              std::ptrdiff_t oldest, std::size_t k) {
    if (R + 2 <= newest && R - 1 >= oldest) {
        return kMid[0] * tr.row_value(R - 1, k) + kMid[1] * tr.row_value(R, k) +
               kMid[2] * tr.row_value(R + 1, k) + kMid[3] * tr.row_value(R + 2, k);
    }
    if (R + 2 > newest) {
        return kLeft[0] * tr.row_value(R - 2, k) + kLeft[1] * tr.row_value(R - 1, k) +
               kLeft[2] * tr.row_value(R, k) + kLeft[3] * tr.row_value(R + 1, k);
    }
    return kRight[0] * tr.row_value(R, k) + kRight[1] * tr.row_value(R + 1, k) +
           kRight[2] * tr.row_value(R + 2, k) + kRight[3] * tr.row_value(R + 3, k);
}

inline void guard(const Vector& z, double t) {
    const double nz = max_norm(z);
    if (!std::isfinite(nz) || nz > kBlowUpThreshold) throw BlowUpError(t, nz);
}

/// z(t_n + c step - p step) for c in {0, 1/2, 1}; `cur` is the row of t_n.
inline double lagged_value(const Trajectory& tr, std::ptrdiff_t p, std::ptrdiff_t cur, double c,
                           std::size_t k) {
    if (c == 0.0) return tr.row_value(cur - p, k);
    if (c == 1.0) return tr.row_value(cur + 1 - p, k);
    return half_step_value(tr, cur - p, cur, 0, k);
}

struct StageCoeffs {
    Matrix lin;
    std::vector<Matrix> delay;
    std::vector<Matrix> dist;
    Vector forcing;
};

inline StageCoeffs stage_coeffs(const RhsForm& rhs, const TorusBase& base, const BasePoint& theta) {
    StageCoeffs s;
    s.lin = rhs.linear_inst.value(base, theta);
    for (const auto& d : rhs.delays) s.delay.push_back(d.coeff.value(base, theta));
    for (const auto& k : rhs.dists) s.dist.push_back(k.coeff.value(base, theta));
    s.forcing.resize(static_cast<Eigen::Index>(rhs.dim));
    for (std::size_t i = 0; i < rhs.dim; ++i)
        s.forcing[static_cast<Eigen::Index>(i)] = rhs.forcing[i].value(base, theta);
    return s;
}

// Shared by the FDE integrator and the neutral dual-history integrator.
// Evaluates the structural right-hand side at a stage of step n.
class StageRhs {
public:
    StageRhs(const RhsForm& rhs, const TorusBase& base, const BasePoint& theta0, double step)
        : rhs_(rhs), base_(base), theta0_(theta0), step_(step), constant_(is_constant(rhs)) {
        for (const auto& d : rhs.delays)
            lags_.push_back(static_cast<std::ptrdiff_t>(std::llround(d.delay / step)));
        if (constant_) fixed_ = stage_coeffs(rhs, base, theta0);
    }

    const BasePoint& prepare(std::size_t n, double c) {
        theta_ = base_.advance(theta0_, (static_cast<double>(n) + c) * step_);
        if (!constant_) coeffs_ = stage_coeffs(rhs_, base_, theta_);
        return theta_;
    }

    /// `cur` is the trajectory row of t_n, `c` in {0, 1/2, 1}.
    Vector delayed(const Trajectory& tr, std::size_t j, std::ptrdiff_t cur, double c) const {
        const std::ptrdiff_t p = lags_[j];
        Vector v(static_cast<Eigen::Index>(rhs_.dim));
        for (std::size_t k = 0; k < rhs_.dim; ++k)
            v[static_cast<Eigen::Index>(k)] = lagged_value(tr, p, cur, c, k);
        return v;
    }

    Vector eval(const Trajectory& tr, std::ptrdiff_t cur, double c, const Vector& z,
                const std::vector<Vector>& dist_values) const {
        const StageCoeffs& s = constant_ ? fixed_ : coeffs_;
        Vector v = s.lin * z + s.forcing;
        for (std::size_t j = 0; j < rhs_.delays.size(); ++j) v += s.delay[j] * delayed(tr, j, cur, c);
        for (std::size_t k = 0; k < rhs_.dists.size(); ++k) v += s.dist[k] * dist_values[k];
        if (rhs_.nonlinearity)
            for (std::size_t i = 0; i < rhs_.dim; ++i)
                v[static_cast<Eigen::Index>(i)] +=
                    rhs_.nonlinearity->amplitude[i] * std::tanh(z[static_cast<Eigen::Index>(i)]);
        return v;
    }

    const RhsForm& rhs() const { return rhs_; }

private:
    static bool is_constant(const RhsForm& rhs) {
        bool c = rhs.linear_inst.is_constant();
        for (const auto& d : rhs.delays) c = c && d.coeff.is_constant();
        for (const auto& k : rhs.dists) c = c && k.coeff.is_constant();
        for (const auto& f : rhs.forcing) c = c && f.is_constant();
        return c;
    }

    const RhsForm& rhs_;
    const TorusBase& base_;
    BasePoint theta0_;
    double step_;
    bool constant_;
    std::vector<std::ptrdiff_t> lags_;
    StageCoeffs fixed_;
    StageCoeffs coeffs_;
    BasePoint theta_;
};

}  // namespace fadeflow::detail
