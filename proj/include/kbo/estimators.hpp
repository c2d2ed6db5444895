#pragma once

#include <span>
#include <vector>

#include "kbo/core.hpp"

namespace kbo {

/// Exponentially weighted mean of a set of points.
struct WeightedEstimate {
  std::vector<double> point;
  /// log(sum_i exp(-alpha E_i)), evaluated without overflow.
  double total_weight_log = 0.0;
};

// All weights below are evaluated as exp(-alpha (E - E_min)). The common factor
// exp(-alpha E_min) cancels in every ratio, so any alpha is safe and at least one
// weight is exactly 1.

/// Consensus point v_alpha = sum v_i w_i / sum w_i over a row-major position buffer.
/// The result is clamped to the coordinate-wise bounding box of the inputs.
WeightedEstimate consensus_point(std::span<const double> positions, std::span<const double> energies,
                                 std::size_t dim, double alpha);

/// Same, for an ensemble whose energy cache is fresh.
WeightedEstimate consensus_point(const ParticleEnsemble& ensemble, double alpha);

/// Two-particle best estimate (w(v) v + w(v*) v*) / (w(v) + w(v*)). Symmetric in its arguments.
void pair_best(std::span<const double> v, std::span<const double> v_star, double e_v, double e_star, double beta,
               std::span<double> out);
std::vector<double> pair_best(std::span<const double> v, std::span<const double> v_star, double e_v,
                              double e_star, double beta);

/// Normalized weight of the partner: w(v*) / (w(v) + w(v*)), in [0, 1].
double gamma_weight(double e_v, double e_star, double beta);

/// log of the empirical mean of exp(-beta E_i), i.e. log ||w_beta||_{L1} for an empirical measure.
double log_mean_weight(std::span<const double> energies, double beta);

}  // namespace kbo
