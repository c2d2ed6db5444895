#pragma once

#include <optional>
#include <span>
#include <vector>

#include "kbo/core.hpp"
#include "kbo/objective.hpp"
#include "kbo/solver.hpp"

namespace kbo {

struct MomentReport {
  std::vector<double> mean;
  double variance = 0.0;       // 1/2 * (1/N) sum |v_i - m|^2
  double second_moment = 0.0;  // (1/N) sum |v_i|^2, equal to |m|^2 + 2 V
};

MomentReport moments(const ParticleEnsemble& ensemble);

/// Constants and rates from the variance-decay and convergence estimates.
///
/// Rates are per unit of mean-field time t = iterations * epsilon and include the O(eps)
/// lambda^2 terms of the scaled collision kernel, so at eps = 1 they are the rates of the
/// unscaled binary model and as eps -> 0 the micro rate tends to mu.
struct TheoryParams {
  double C_beta = 1.0;   // exp(beta (Ebar - Eunder))
  double C_alpha = 1.0;  // exp(alpha (Ebar - Eunder))
  double kappa = 1.0;    // d (isotropic) or 1 (anisotropic)
  double mu = 0.0;       // lambda1 / C_beta - 2 sigma1^2 kappa
  std::optional<double> nu;  // undefined when mu <= 0
  double micro_rate = 0.0;   // lambda1 / C_beta - eps lambda1^2 - 2 sigma1^2 kappa
  double macro_rate = 0.0;   // 2 lambda2 - eps lambda2^2 C_alpha - sigma2^2 kappa C_alpha

  bool micro_condition = false;  // sigma1^2 < lambda1 / (2 kappa) (1 / C_beta - eps lambda1)
  bool macro_condition = false;  // sigma2^2 < lambda2 / kappa (2 / C_alpha - eps lambda2)
  bool mu_positive = false;
  bool nu_below_half = false;
  bool v0_at_most_one = false;   // simplifying assumption of the convergence estimate
};

/// Energy range and smoothness inputs for theory_params.
struct TheoryInputs {
  double e_max = 0.0;
  double e_min = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double v0 = 0.0;
  double log_w0 = 0.0;  // log ||exp(-beta E)||_{L1(f0)}, see log_mean_weight
};

TheoryParams theory_params(const KboConfig& cfg, std::size_t dim, const TheoryInputs& in);

/// True iff V(t) <= V(0) exp(-slack * rate * t) at every recorded row (t = row.time).
bool decay_check(const RunResult& run, double rate, double slack);

/// r(beta) = -(1/beta) log ||w_beta||_{L1} - Eunder for an empirical measure with given energies.
double laplace_gap(std::span<const double> energies, double beta, double e_min);

struct EnergyRange {
  double min = 0.0;
  double max = 0.0;
};

/// Energy range over the objective's box estimated from uniform samples (plus the known
/// minimizer, when recorded).
EnergyRange sample_energy_range(const Objective& objective, std::size_t samples, std::uint64_t seed);

}  // namespace kbo
