#include "kbo/estimators.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace kbo {

WeightedEstimate consensus_point(std::span<const double> positions, std::span<const double> energies,
                                 std::size_t dim, double alpha) {
  const std::size_t n = energies.size();
  if (n == 0 || dim == 0) throw std::logic_error("consensus_point: empty ensemble");
  assert(positions.size() == n * dim);

  const double e_min = *std::min_element(energies.begin(), energies.end());
  std::vector<double> num(dim, 0.0);
  std::vector<double> lo(positions.begin(), positions.begin() + dim);
  std::vector<double> hi = lo;
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::exp(-alpha * (energies[i] - e_min));
    const double* v = positions.data() + i * dim;
    den += w;
    for (std::size_t k = 0; k < dim; ++k) {
      lo[k] = std::min(lo[k], v[k]);
      hi[k] = std::max(hi[k], v[k]);
      if (w != 0.0) num[k] += w * v[k];
    }
  }
  WeightedEstimate out;
  out.point.resize(dim);
  for (std::size_t k = 0; k < dim; ++k) out.point[k] = std::clamp(num[k] / den, lo[k], hi[k]);
  out.total_weight_log = -alpha * e_min + std::log(den);
  return out;
}

WeightedEstimate consensus_point(const ParticleEnsemble& ensemble, double alpha) {
  if (ensemble.count() == 0) throw std::logic_error("consensus_point: empty ensemble");
  assert(ensemble.energies_fresh());
  return consensus_point(ensemble.positions(), ensemble.energies(), ensemble.dim(), alpha);
}

void pair_best(std::span<const double> v, std::span<const double> v_star, double e_v, double e_star, double beta,
               std::span<double> out) {
  const double e_min = std::min(e_v, e_star);
  const double w = std::exp(-beta * (e_v - e_min));
  const double w_star = std::exp(-beta * (e_star - e_min));
  const double den = w + w_star;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double mixed = (w * v[k] + w_star * v_star[k]) / den;
    out[k] = std::clamp(mixed, std::min(v[k], v_star[k]), std::max(v[k], v_star[k]));
  }
}

std::vector<double> pair_best(std::span<const double> v, std::span<const double> v_star, double e_v,
                              double e_star, double beta) {
  std::vector<double> out(v.size());
  pair_best(v, v_star, e_v, e_star, beta, out);
  return out;
}

double gamma_weight(double e_v, double e_star, double beta) {
  const double e_min = std::min(e_v, e_star);
  const double w = std::exp(-beta * (e_v - e_min));
  const double w_star = std::exp(-beta * (e_star - e_min));
  return w_star / (w + w_star);
}

double log_mean_weight(std::span<const double> energies, double beta) {
  if (energies.empty()) throw std::logic_error("log_mean_weight: no energies");
  const double e_min = *std::min_element(energies.begin(), energies.end());
  double s = 0.0;
  for (double e : energies) s += std::exp(-beta * (e - e_min));
  return -beta * e_min + std::log(s / static_cast<double>(energies.size()));
}

}  // namespace kbo
