#include "kbo/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kbo/estimators.hpp"

namespace kbo {

MomentReport moments(const ParticleEnsemble& ens) {
  const std::size_t n = ens.count(), dim = ens.dim();
  if (n == 0) throw ConfigError("moments: empty ensemble");
  MomentReport r;
  r.mean.assign(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto p = ens.position(i);
    for (std::size_t k = 0; k < dim; ++k) {
      r.mean[k] += p[k];
      r.second_moment += p[k] * p[k];
    }
  }
  for (double& m : r.mean) m /= static_cast<double>(n);
  r.second_moment /= static_cast<double>(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto p = ens.position(i);
    for (std::size_t k = 0; k < dim; ++k) s += (p[k] - r.mean[k]) * (p[k] - r.mean[k]);
  }
  r.variance = 0.5 * s / static_cast<double>(n);
  return r;
}

TheoryParams theory_params(const KboConfig& cfg, std::size_t dim, const TheoryInputs& in) {
  if (in.e_max < in.e_min) throw ConfigError("theory_params: need Ebar >= Eunder");
  if (!std::isfinite(in.log_w0)) throw ConfigError("theory_params: log weight norm must be finite");
  const double gap = in.e_max - in.e_min;
  const double eps = cfg.epsilon;
  const double l1 = cfg.lambda1, s1 = cfg.sigma1 * cfg.sigma1;
  const double l2 = cfg.lambda2, s2 = cfg.sigma2 * cfg.sigma2;

  TheoryParams t;
  t.C_beta = std::exp(cfg.beta * gap);
  t.C_alpha = std::exp(cfg.alpha * gap);
  t.kappa = cfg.diffusion == Diffusion::isotropic ? static_cast<double>(dim) : 1.0;

  t.micro_rate = l1 / t.C_beta - eps * l1 * l1 - 2.0 * s1 * t.kappa;
  t.macro_rate = 2.0 * l2 - eps * l2 * l2 * t.C_alpha - s2 * t.kappa * t.C_alpha;
  t.micro_condition = s1 < l1 / (2.0 * t.kappa) * (1.0 / t.C_beta - eps * l1);
  t.macro_condition = s2 < l2 / t.kappa * (2.0 / t.C_alpha - eps * l2);

  t.mu = l1 / t.C_beta - 2.0 * s1 * t.kappa;
  t.mu_positive = t.mu > 0.0;
  if (t.mu_positive) {
    // beta e^{-beta Eunder} / ||w||, combined in log space.
    const double ratio = cfg.beta * std::exp(-cfg.beta * in.e_min - in.log_w0);
    t.nu = 4.0 * (l1 * in.c1 + s1 * t.kappa * in.c2) * ratio * std::sqrt(in.v0) / t.mu;
    t.nu_below_half = *t.nu < 0.5;
  }
  t.v0_at_most_one = in.v0 <= 1.0;
  return t;
}

bool decay_check(const RunResult& run, double rate, double slack) {
  if (run.trace.empty()) return false;
  const double v0 = run.trace.front().variance;
  for (const auto& row : run.trace) {
    if (row.variance > v0 * std::exp(-slack * rate * row.time)) return false;
  }
  return true;
}

double laplace_gap(std::span<const double> energies, double beta, double e_min) {
  return -log_mean_weight(energies, beta) / beta - e_min;
}

EnergyRange sample_energy_range(const Objective& obj, std::size_t samples, std::uint64_t seed) {
  RngStream rng(seed, stream_id(0x4552));
  std::vector<double> x(obj.dim());
  EnergyRange r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = rng.uniform(obj.lower()[k], obj.upper()[k]);
    const double e = obj(x);
    r.min = std::min(r.min, e);
    r.max = std::max(r.max, e);
  }
  if (obj.min_value()) r.min = std::min(r.min, *obj.min_value());
  return r;
}

}  // namespace kbo
