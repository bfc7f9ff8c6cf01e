#pragma once

#include "fadeflow/baseflow.hpp"
#include "fadeflow/history.hpp"

#include <random>

namespace fadeflow {

using Rng = std::mt19937_64;

/// Smooth random history with sup-norm at most `amplitude`: a few low
/// frequency sinusoids per component, optionally plus a few steps.
HistoryFunction random_bv_history(Rng& rng, std::size_t dim, double step, double depth,
                                  double amplitude = 1.0, bool with_jumps = false);

/// Random element c >=_A 0: a nonnegative combination of generators
/// e^{A(s - s_k)} ramp_k(s) with nondecreasing ramps vanishing below s_k.
/// The largest generator value is `scale`.
HistoryFunction random_cone_element(Rng& rng, const OrderParams& A, double step, double depth,
                                    double scale = 1.0);

/// (x, x + c) with c from random_cone_element.
std::pair<HistoryFunction, HistoryFunction> random_ordered_pair(Rng& rng, const OrderParams& A,
                                                                double step, double depth,
                                                                double amplitude = 1.0,
                                                                double scale = 1.0);

BasePoint random_base_point(Rng& rng, std::size_t d);

}  // namespace fadeflow
