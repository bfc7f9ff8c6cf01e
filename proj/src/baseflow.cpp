#include "fadeflow/baseflow.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

namespace fadeflow {

namespace {

double wrap01(double v) {
    double r = v - std::floor(v);
    if (r >= 1.0) r = 0.0;  // floor rounding at the seam
    return r;
}

}  // namespace

BasePoint::BasePoint(std::vector<double> t) : theta(std::move(t)) {
    for (double& v : theta) {
        if (!std::isfinite(v)) throw InvalidArgument("base point coordinates must be finite");
        v = wrap01(v);
    }
}

TorusBase::TorusBase(std::vector<double> freq, std::map<std::string, TrigPolynomial> coeffs)
    : freq_(std::move(freq)) {
    if (freq_.empty()) throw InvalidArgument("torus base needs at least one frequency");
    for (double f : freq_)
        if (f == 0.0 || !std::isfinite(f)) throw InvalidArgument("torus frequencies must be nonzero and finite");
    for (auto& [id, p] : coeffs) add_coeff(id, std::move(p));
}

void TorusBase::add_coeff(const std::string& id, TrigPolynomial p) {
    for (const auto& term : p) {
        if (term.k.size() != freq_.size())
            throw InvalidArgument("coefficient '" + id + "' has a multi-index of wrong length");
        if (!std::isfinite(term.amplitude) || !std::isfinite(term.phase))
            throw InvalidArgument("coefficient '" + id + "' has a non-finite term");
    }
    coeffs_[id] = std::move(p);
}

double TorusBase::coeff_bound(const std::string& id) const {
    auto it = coeffs_.find(id);
    if (it == coeffs_.end()) throw InvalidArgument("unknown coefficient id '" + id + "'");
    double s = 0.0;
    for (const auto& term : it->second) s += std::abs(term.amplitude);
    return s;
}

void TorusBase::check_point(const BasePoint& theta) const {
    if (theta.dim() != freq_.size()) throw InvalidArgument("base point dimension mismatch");
}

BasePoint TorusBase::advance(const BasePoint& theta, double t) const {
    check_point(theta);
    BasePoint out;
    out.theta.resize(theta.dim());
    for (std::size_t i = 0; i < theta.dim(); ++i) {
        // Reduce freq*t first so large t keeps its fractional precision.
        const double shift = wrap01(std::fma(freq_[i], t, -std::floor(freq_[i] * t)));
        out.theta[i] = wrap01(theta.theta[i] + shift);
    }
    return out;
}

double TorusBase::eval_coeff(const std::string& id, const BasePoint& theta) const {
    check_point(theta);
    auto it = coeffs_.find(id);
    if (it == coeffs_.end()) throw InvalidArgument("unknown coefficient id '" + id + "'");
    double s = 0.0;
    for (const auto& term : it->second) {
        double arg = 0.0;
        for (std::size_t i = 0; i < term.k.size(); ++i) arg += term.k[i] * theta.theta[i];
        s += term.amplitude * std::cos(2.0 * std::numbers::pi * arg + term.phase);
    }
    return s;
}

bool TorusBase::small_integer_relation(int max_k, double tol) const {
    const std::size_t d = freq_.size();
    if (d < 2) return false;
    std::vector<int> k(d, -max_k);
    // Enumerate the box [-max_k, max_k]^d, skipping 0 and sign-duplicates.
    std::function<bool(std::size_t)> rec = [&](std::size_t pos) -> bool {
        if (pos == d) {
            bool nonzero = false;
            double dot = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                nonzero |= k[i] != 0;
                dot += k[i] * freq_[i];
            }
            return nonzero && std::abs(dot) < tol;
        }
        for (int v = -max_k; v <= max_k; ++v) {
            k[pos] = v;
            if (rec(pos + 1)) return true;
        }
        return false;
    };
    if (d > 4) return false;  // box too large to enumerate; user assertion stands
    return rec(0);
}

BasePoint advance(const TorusBase& base, const BasePoint& theta, double t) {
    return base.advance(theta, t);
}

double base_distance(const BasePoint& a, const BasePoint& b) {
    if (a.dim() != b.dim()) throw InvalidArgument("base point dimension mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const double d = std::abs(a.theta[i] - b.theta[i]);
        m = std::max(m, std::min(d, 1.0 - d));
    }
    return m;
}

double eval_coeff(const TorusBase& base, const std::string& id, const BasePoint& theta) {
    return base.eval_coeff(id, theta);
}

std::vector<double> return_times(const TorusBase& base, const BasePoint& theta0, double delta,
                                 double t_min, double t_max, double step) {
    if (!(t_min < t_max)) throw InvalidArgument("return_times needs t_min < t_max");
    if (!(step > 0.0)) throw InvalidArgument("return_times needs a positive step");
    if (!(delta > 0.0)) throw InvalidArgument("return_times needs a positive delta");
    const auto n = static_cast<std::size_t>(std::floor((t_max - t_min) / step + 1e-9)) + 1;
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i)
        dist[i] = base_distance(base.advance(theta0, t_min + static_cast<double>(i) * step), theta0);
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(dist[i] < delta)) continue;
        if (delta < 0.5) {
            // Strict on the left, weak on the right keeps one time per plateau.
            const bool left_ok = i == 0 || dist[i] < dist[i - 1];
            const bool right_ok = i + 1 == n || dist[i] <= dist[i + 1];
            if (!(left_ok && right_ok)) continue;
        }
        out.push_back(t_min + static_cast<double>(i) * step);
    }
    return out;
}

}  // namespace fadeflow
