#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kbo/core.hpp"
#include "kbo/objective.hpp"

namespace kbo {

enum class Termination { max_iters, stalled };
std::string to_string(Termination t);

/// One recorded step of a run. All points are in the objective's native domain.
struct TraceRow {
  std::size_t step = 0;  // Nanbu iterations, or Bird collisions
  double time = 0.0;     // mean-field time: iterations * epsilon
  std::size_t count = 0;
  std::vector<double> valpha;
  std::vector<double> mean;
  double variance = 0.0;  // 1/2 * mean squared distance to the mean
  double best_energy = 0.0;
};

struct RunResult {
  std::vector<TraceRow> trace;
  std::vector<double> final_estimate;  // last recorded valpha
  Termination termination = Termination::max_iters;
  std::size_t wall_steps = 0;  // iterations (Nanbu) or collisions (Bird)
  double iterations = 0.0;     // wall_steps expressed in Nanbu iterations
  double avg_particles = 0.0;  // mean particle count over the recorded rows
  std::size_t dim = 0;
  std::vector<double> final_positions;  // native domain, row-major
};

/// Counts consecutive consensus checks where valpha moved by less than delta.
class StallMonitor {
 public:
  StallMonitor(std::size_t limit, double delta, std::vector<double> initial);

  /// Feeds the new consensus point. Returns true once the limit is reached.
  bool update(std::span<const double> valpha);
  std::size_t counter() const noexcept { return counter_; }
  bool stalled() const noexcept { return counter_ >= limit_; }

 private:
  std::size_t limit_;
  double delta_;
  std::size_t counter_ = 0;
  std::vector<double> previous_;
};

using EnergyFn = std::function<double(std::span<const double>)>;

/// Recomputes every cached energy. Throws NumericError naming the first non-finite particle.
void evaluate_energies(ParticleEnsemble& ensemble, const EnergyFn& energy);

/// One synchronous Nanbu sweep: every particle collides once with a partner against the
/// frozen consensus point valpha, then energies are refreshed. Randomness for particle i is
/// drawn from stream (cfg.seed, stream_id(tag, step_key, i)), so the result does not depend on
/// the number of threads.
void nanbu_step(ParticleEnsemble& ensemble, std::span<const double> valpha, const KboConfig& cfg,
                const EnergyFn& energy, std::uint64_t step_key);

/// Nanbu driver. Particles live in [-1,1]^d when cfg.rescale is set and are mapped to the
/// objective's box before every evaluation; otherwise they live in the native domain.
RunResult run_nanbu(const KboConfig& cfg, const Objective& objective, ParticleEnsemble init);

/// Bird driver: one random pair per collision and a consensus refresh after each.
RunResult run_bird(const KboConfig& cfg, const Objective& objective, ParticleEnsemble init);

/// ||valpha - x_star||_inf < 0.25.
bool check_success(std::span<const double> valpha, std::span<const double> x_star);

/// Mean squared distance of the particles to their mean (no 1/2 factor).
double ensemble_spread(const ParticleEnsemble& ensemble);

/// floor(n (1 + mu (s_hat - s_prev) / s_prev)) clamped to [min(n_min, n), n]; n when s_prev <= 0.
std::size_t reduced_count(std::size_t n, double s_prev, double s_hat, double mu, std::size_t n_min);

/// Drops particles uniformly at random down to reduced_count(...) with s_hat taken from the
/// ensemble itself. Survivors keep their relative order and cached energies.
ParticleEnsemble reduce_particles(const ParticleEnsemble& ensemble, double s_prev, double mu, std::size_t n_min,
                                  RngStream& rng);

/// Incrementally maintained consensus point for the Bird driver.
class ConsensusAccumulator {
 public:
  ConsensusAccumulator(double alpha, std::size_t dim);

  void rebuild(const ParticleEnsemble& ensemble);
  /// Removes a particle's contribution. Returns false when the removal would lose precision;
  /// the caller must then rebuild.
  bool remove(std::span<const double> position, double energy);
  void add(std::span<const double> position, double energy);
  /// False when the weight sum is too small to be trusted.
  bool healthy() const noexcept;
  void point(std::span<double> out) const;

 private:
  double alpha_;
  double reference_ = 0.0;
  double sum_w_ = 0.0;
  std::vector<double> sum_wv_;
};

}  // namespace kbo
