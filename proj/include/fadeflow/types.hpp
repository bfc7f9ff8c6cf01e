#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace fadeflow {

/// A point of R^m. The maximum norm is used throughout.
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised for shape/grid mismatches and out-of-domain arguments.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an integration run exceeds the blow-up guard.
class BlowUpError : public std::runtime_error {
public:
    BlowUpError(double time, double norm)
        : std::runtime_error("solution blew up at t=" + std::to_string(time) +
                             " (|z|=" + std::to_string(norm) + ")"),
          time_(time), norm_(norm) {}

    double time() const noexcept { return time_; }
    double norm() const noexcept { return norm_; }

private:
    double time_;
    double norm_;
};

inline double max_norm(const Vector& v) {
    return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

/// Max-row-sum norm, induced by the maximum norm on R^m.
inline double max_row_sum(const Matrix& a) {
    return a.size() == 0 ? 0.0 : a.cwiseAbs().rowwise().sum().maxCoeff();
}

constexpr double kBlowUpThreshold = 1e12;

}  // namespace fadeflow
