#pragma once

#include "fadeflow/types.hpp"

#include <map>
#include <string>
#include <vector>

namespace fadeflow {

/// One term amplitude * cos(2*pi*k.theta + phase).
struct TrigTerm {
    std::vector<int> k;
    double amplitude = 0.0;
    double phase = 0.0;
};

using TrigPolynomial = std::vector<TrigTerm>;

/// A point theta of the d-torus, coordinates in [0,1).
struct BasePoint {
    std::vector<double> theta;

    BasePoint() = default;
    explicit BasePoint(std::vector<double> t);
    std::size_t dim() const noexcept { return theta.size(); }
};

/// Minimal base flow realized as the rotation theta -> theta + freq*t (mod 1).
///
/// Rational independence of `freq` is the caller's claim;
/// `small_integer_relation` only screens for obvious violations.
class TorusBase {
public:
    TorusBase() = default;
    explicit TorusBase(std::vector<double> freq,
                       std::map<std::string, TrigPolynomial> coeffs = {});

    std::size_t dim() const noexcept { return freq_.size(); }
    const std::vector<double>& freq() const noexcept { return freq_; }
    const std::map<std::string, TrigPolynomial>& coeffs() const noexcept { return coeffs_; }

    void add_coeff(const std::string& id, TrigPolynomial p);
    bool has_coeff(const std::string& id) const { return coeffs_.count(id) != 0; }
    /// Sum of |amplitude| of a registered coefficient: a bound on |eval_coeff|.
    double coeff_bound(const std::string& id) const;

    BasePoint advance(const BasePoint& theta, double t) const;
    double eval_coeff(const std::string& id, const BasePoint& theta) const;

    /// Returns true if |k.freq| < 1e-9 for some nonzero integer k with |k_i| <= 20.
    bool small_integer_relation(int max_k = 20, double tol = 1e-9) const;

private:
    void check_point(const BasePoint& theta) const;

    std::vector<double> freq_;
    std::map<std::string, TrigPolynomial> coeffs_;
};

BasePoint advance(const TorusBase& base, const BasePoint& theta, double t);

/// Max over coordinates of the circle distance min(|d|, 1-|d|).
double base_distance(const BasePoint& a, const BasePoint& b);

double eval_coeff(const TorusBase& base, const std::string& id, const BasePoint& theta);

/// Sampled times t in [t_min, t_max] (spacing `step`) with
/// base_distance(theta0.t, theta0) < delta, thinned to local minima of the
/// sampled distance. An empty result is not an error.
std::vector<double> return_times(const TorusBase& base, const BasePoint& theta0, double delta,
                                 double t_min, double t_max, double step);

}  // namespace fadeflow
