#include "fadeflow/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace fadeflow {

HistoryFunction random_bv_history(Rng& rng, std::size_t dim, double step, double depth,
                                  double amplitude, bool with_jumps) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    constexpr int kModes = 3;
    std::vector<double> freq(dim * kModes), phase(dim * kModes), amp(dim * kModes), offset(dim);
    std::vector<double> jump_at(dim), jump(dim);
    for (std::size_t k = 0; k < dim; ++k) {
        double total = 0.0;
        for (int j = 0; j < kModes; ++j) {
            const auto idx = k * kModes + static_cast<std::size_t>(j);
            freq[idx] = 0.1 + 2.9 * u(rng);
            phase[idx] = 6.283185307179586 * u(rng);
            amp[idx] = u(rng);
            total += amp[idx];
        }
        offset[k] = 2.0 * u(rng) - 1.0;
        jump_at[k] = -depth * u(rng);
        jump[k] = with_jumps ? 2.0 * u(rng) - 1.0 : 0.0;
        total += std::abs(offset[k]) + std::abs(jump[k]);
        // Normalize so the sup-norm stays within the requested amplitude.
        const double s = amplitude * u(rng) / std::max(total, 1e-300);
        for (int j = 0; j < kModes; ++j) amp[k * kModes + static_cast<std::size_t>(j)] *= s;
        offset[k] *= s;
        jump[k] *= s;
    }
    return HistoryFunction::from_function(dim, step, depth, [&](double t) {
        Vector v(static_cast<Eigen::Index>(dim));
        for (std::size_t k = 0; k < dim; ++k) {
            double val = offset[k] + (t > jump_at[k] ? jump[k] : 0.0);
            for (int j = 0; j < kModes; ++j) {
                const auto idx = k * kModes + static_cast<std::size_t>(j);
                val += amp[idx] * std::sin(freq[idx] * t + phase[idx]);
            }
            v[static_cast<Eigen::Index>(k)] = val;
        }
        return v;
    });
}

HistoryFunction random_cone_element(Rng& rng, const OrderParams& A, double step, double depth,
                                    double scale) {
    A.validate();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t dim = A.dim();
    constexpr int kGenerators = 3;
    struct Gen {
        double start, width, weight;
    };
    std::vector<Gen> gens(dim * kGenerators);
    for (auto& g : gens) {
        g.start = -(depth + 1.0) * u(rng);
        g.width = step + 3.0 * u(rng);
        g.weight = u(rng);
    }
    return HistoryFunction::from_function(dim, step, depth, [&](double s) {
        Vector v = Vector::Zero(static_cast<Eigen::Index>(dim));
        for (std::size_t k = 0; k < dim; ++k) {
            double val = 0.0;
            for (int j = 0; j < kGenerators; ++j) {
                const Gen& g = gens[k * kGenerators + static_cast<std::size_t>(j)];
                if (s <= g.start) continue;
                const double ramp = std::min(1.0, (s - g.start) / g.width);
                val += g.weight * std::exp(A.diag[k] * (s - g.start)) * ramp;
            }
            v[static_cast<Eigen::Index>(k)] = scale * val / kGenerators;
        }
        return v;
    });
}

std::pair<HistoryFunction, HistoryFunction> random_ordered_pair(Rng& rng, const OrderParams& A,
                                                                double step, double depth,
                                                                double amplitude, double scale) {
    HistoryFunction x = random_bv_history(rng, A.dim(), step, depth, amplitude);
    HistoryFunction y = x + random_cone_element(rng, A, step, depth, scale);
    return {std::move(x), std::move(y)};
}

BasePoint random_base_point(Rng& rng, std::size_t d) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> t(d);
    for (double& v : t) v = u(rng);
    return BasePoint(std::move(t));
}

}  // namespace fadeflow
