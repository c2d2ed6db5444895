#include "kbo/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kbo/dynamics.hpp"
#include "kbo/estimators.hpp"

namespace kbo {

namespace {

constexpr std::uint64_t kNanbuTag = 0x4e414e;
constexpr std::uint64_t kPermTag = 0x5045524d;
constexpr std::uint64_t kBirdTag = 0x42495244;
constexpr std::uint64_t kReduceTag = 0x524544;

// Threshold (in coordinate updates) above which a sweep is worth splitting across threads.
constexpr std::size_t kParallelWork = 1 << 14;

// Maps particle-space quantities to the objective's native domain.
class Frame {
 public:
  Frame(const Objective& obj, bool rescale) : rescale_(rescale) {
    if (rescale_) map_ = DomainMap({obj.lower().begin(), obj.lower().end()}, {obj.upper().begin(), obj.upper().end()});
  }

  std::vector<double> to_native(std::span<const double> u) const {
    std::vector<double> x(u.begin(), u.end());
    if (rescale_) map_.to_domain(u, x);
    return x;
  }

  double scale(std::size_t k) const { return rescale_ ? map_.scale(k) : 1.0; }

  EnergyFn energy(const Objective& obj) const {
    if (!rescale_) return [&obj](std::span<const double> u) { return obj(u); };
    return [&obj, map = map_](std::span<const double> u) {
      thread_local std::vector<double> x;
      x.resize(u.size());
      map.to_domain(u, x);
      return obj(x);
    };
  }

 private:
  bool rescale_;
  DomainMap map_;
};

TraceRow make_row(std::size_t step, double time, const ParticleEnsemble& ens, std::span<const double> valpha_native,
                  const Frame& frame) {
  const std::size_t n = ens.count(), dim = ens.dim();
  TraceRow row;
  row.step = step;
  row.time = time;
  row.count = n;
  row.valpha.assign(valpha_native.begin(), valpha_native.end());

  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto p = ens.position(i);
    for (std::size_t k = 0; k < dim; ++k) mean[k] += p[k];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto p = ens.position(i);
    for (std::size_t k = 0; k < dim; ++k) {
      const double dk = (p[k] - mean[k]) * frame.scale(k);
      var += dk * dk;
    }
  }
  row.variance = 0.5 * var / static_cast<double>(n);
  row.mean = frame.to_native(mean);
  row.best_energy = *std::min_element(ens.energies().begin(), ens.energies().end());
  return row;
}

void finish(RunResult& result, const ParticleEnsemble& ens, const Frame& frame) {
  result.final_estimate = result.trace.back().valpha;
  result.dim = ens.dim();
  result.final_positions.clear();
  result.final_positions.reserve(ens.count() * ens.dim());
  for (std::size_t i = 0; i < ens.count(); ++i) {
    auto x = frame.to_native(ens.position(i));
    result.final_positions.insert(result.final_positions.end(), x.begin(), x.end());
  }
  double total = 0.0;
  for (const auto& row : result.trace) total += static_cast<double>(row.count);
  result.avg_particles = total / static_cast<double>(result.trace.size());
}

void check_inputs(const KboConfig& cfg, const Objective& objective, const ParticleEnsemble& init) {
  cfg.validate();
  if (init.dim() != objective.dim()) throw ConfigError("initial ensemble dimension does not match objective");
  if (init.count() < 2) throw ConfigError("drivers need at least two particles");
}

}  // namespace

std::string to_string(Termination t) { return t == Termination::stalled ? "stalled" : "max_iters"; }

// ---------------------------------------------------------------------------

StallMonitor::StallMonitor(std::size_t limit, double delta, std::vector<double> initial)
    : limit_(limit), delta_(delta), previous_(std::move(initial)) {}

bool StallMonitor::update(std::span<const double> valpha) {
  double s = 0.0;
  for (std::size_t k = 0; k < valpha.size(); ++k) s += (valpha[k] - previous_[k]) * (valpha[k] - previous_[k]);
  if (std::sqrt(s) < delta_) {
    ++counter_;
  } else {
    counter_ = 0;
  }
  previous_.assign(valpha.begin(), valpha.end());
  return stalled();
}

// ---------------------------------------------------------------------------

void evaluate_energies(ParticleEnsemble& ensemble, const EnergyFn& energy) {
  const std::size_t n = ensemble.count();
  auto energies = ensemble.energies_mut();
  const bool parallel = n * ensemble.dim() >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t i = 0; i < n; ++i) energies[i] = energy(ensemble.position(i));
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(energies[i])) {
      ensemble.mark_stale();
      throw NumericError("objective returned a non-finite value for particle " + std::to_string(i));
    }
  }
  ensemble.mark_fresh();
}

void nanbu_step(ParticleEnsemble& ensemble, std::span<const double> valpha, const KboConfig& cfg,
                const EnergyFn& energy, std::uint64_t step_key) {
  const std::size_t n = ensemble.count(), dim = ensemble.dim();
  const CollisionParams params = CollisionParams::from(cfg);

  std::vector<std::size_t> partner(n);
  if (cfg.pairing == Pairing::permutation) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    RngStream rng(cfg.seed, stream_id(kPermTag, step_key));
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    for (std::size_t m = 0; m + 1 < n; m += 2) {
      partner[perm[m]] = perm[m + 1];
      partner[perm[m + 1]] = perm[m];
    }
    if (n % 2 == 1) {
      const std::size_t last = perm[n - 1];
      std::size_t j = rng.index(n - 1);
      partner[last] = j >= last ? j + 1 : j;
    }
  }

  std::vector<double> next(n * dim);
  const bool parallel = n * dim >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(cfg.seed, stream_id(kNanbuTag, step_key, i));
    std::size_t j = 0;
    if (cfg.pairing == Pairing::random_partner) {
      j = rng.index(n - 1);
      if (j >= i) ++j;
    } else {
      j = partner[i];
    }
    interact(ensemble.position(i), ensemble.position(j), ensemble.energy(i), ensemble.energy(j), valpha, params, rng,
             std::span<double>(next.data() + i * dim, dim));
  }
  std::copy(next.begin(), next.end(), ensemble.positions().begin());
  ensemble.mark_stale();
  evaluate_energies(ensemble, energy);
}

RunResult run_nanbu(const KboConfig& cfg, const Objective& objective, ParticleEnsemble ens) {
  check_inputs(cfg, objective, ens);
  const Frame frame(objective, cfg.rescale);
  const EnergyFn energy = frame.energy(objective);

  evaluate_energies(ens, energy);
  auto valpha = consensus_point(ens, cfg.alpha).point;
  auto valpha_native = frame.to_native(valpha);

  RunResult result;
  result.trace.push_back(make_row(0, 0.0, ens, valpha_native, frame));
  StallMonitor stall(cfg.n_stall, cfg.delta_stall, valpha_native);

  std::size_t t = 0;
  while (t < cfg.max_iters && !stall.stalled()) {
    // Reduction compares the spread just before and just after the step that precedes it.
    const bool reduce = cfg.reduction.mu > 0.0 && (t + 1) % cfg.reduction.t_r == 0;
    const double s_prev = reduce ? ensemble_spread(ens) : 0.0;
    nanbu_step(ens, valpha, cfg, energy, t);
    ++t;
    if (reduce) {
      RngStream rng(cfg.seed, stream_id(kReduceTag, t));
      ens = reduce_particles(ens, s_prev, cfg.reduction.mu, cfg.reduction.n_min, rng);
    }
    if (!ens.all_finite()) throw NumericError("particle positions became non-finite at iteration " + std::to_string(t));
    valpha = consensus_point(ens, cfg.alpha).point;
    valpha_native = frame.to_native(valpha);
    stall.update(valpha_native);
    const bool last = t >= cfg.max_iters || stall.stalled();
    if (t % cfg.record_every == 0 || last) {
      result.trace.push_back(make_row(t, static_cast<double>(t) * cfg.epsilon, ens, valpha_native, frame));
    }
  }
  result.termination = stall.stalled() ? Termination::stalled : Termination::max_iters;
  result.wall_steps = t;
  result.iterations = static_cast<double>(t);
  finish(result, ens, frame);
  return result;
}

RunResult run_bird(const KboConfig& cfg, const Objective& objective, ParticleEnsemble ens) {
  check_inputs(cfg, objective, ens);
  const Frame frame(objective, cfg.rescale);
  const EnergyFn energy = frame.energy(objective);
  const CollisionParams params = CollisionParams::from(cfg);
  const std::size_t dim = ens.dim();
  const std::size_t n0 = ens.count();
  const std::size_t half = std::max<std::size_t>(1, n0 / 2);
  const std::size_t total = cfg.max_iters * n0 / 2;
  const std::size_t stall_limit = std::max<std::size_t>(1, cfg.n_stall * n0 / 2);

  evaluate_energies(ens, energy);
  ConsensusAccumulator acc(cfg.alpha, dim);
  acc.rebuild(ens);
  std::vector<double> valpha(dim);
  acc.point(valpha);
  auto valpha_native = frame.to_native(valpha);

  RunResult result;
  result.trace.push_back(make_row(0, 0.0, ens, valpha_native, frame));
  StallMonitor stall(stall_limit, cfg.delta_stall, valpha_native);
  const std::size_t period = cfg.reduction.t_r * half;
  double s_prev = 0.0;
  const double time_per_collision = cfg.epsilon / static_cast<double>(half);

  std::vector<double> old_i(dim), old_j(dim);
  std::size_t s = 0;
  while (s < total && !stall.stalled()) {
    // One pseudo-iteration (half collisions) before each reduction, remember the spread.
    if (cfg.reduction.mu > 0.0 && (s + half) % period == 0) s_prev = ensemble_spread(ens);
    const std::size_t n = ens.count();
    RngStream rng(cfg.seed, stream_id(kBirdTag, s));
    const std::size_t i = rng.index(n);
    std::size_t j = rng.index(n - 1);
    if (j >= i) ++j;

    auto vi = ens.position(i);
    auto vj = ens.position(j);
    const double ei = ens.energy(i), ej = ens.energy(j);
    auto out = collide(vi, vj, ei, ej, valpha, params, rng);
    std::copy(vi.begin(), vi.end(), old_i.begin());
    std::copy(vj.begin(), vj.end(), old_j.begin());
    std::copy(out.v.begin(), out.v.end(), vi.begin());
    std::copy(out.v_star.begin(), out.v_star.end(), vj.begin());
    auto energies = ens.energies_mut();
    energies[i] = energy(vi);
    energies[j] = energy(vj);
    if (!std::isfinite(energies[i]) || !std::isfinite(energies[j])) {
      throw NumericError("objective returned a non-finite value for particle " +
                         std::to_string(std::isfinite(energies[i]) ? j : i));
    }

    bool exact = acc.remove(old_i, ei) && acc.remove(old_j, ej);
    if (exact) {
      acc.add(vi, energies[i]);
      acc.add(vj, energies[j]);
    }
    ++s;
    if (cfg.reduction.mu > 0.0 && s % period == 0) {
      RngStream red(cfg.seed, stream_id(kReduceTag, s));
      ens = reduce_particles(ens, s_prev, cfg.reduction.mu, cfg.reduction.n_min, red);
      exact = false;
    }
    if (!exact || !acc.healthy() || s % half == 0) acc.rebuild(ens);
    acc.point(valpha);
    valpha_native = frame.to_native(valpha);
    stall.update(valpha_native);

    const bool last = s >= total || stall.stalled();
    if (s % (cfg.record_every * half) == 0 || last) {
      result.trace.push_back(make_row(s, static_cast<double>(s) * time_per_collision, ens, valpha_native, frame));
    }
  }
  result.termination = stall.stalled() ? Termination::stalled : Termination::max_iters;
  result.wall_steps = s;
  result.iterations = static_cast<double>(s) / static_cast<double>(half);
  finish(result, ens, frame);
  return result;
}

// ---------------------------------------------------------------------------

bool check_success(std::span<const double> valpha, std::span<const double> x_star) {
  if (valpha.size() != x_star.size()) throw ConfigError("check_success: dimension mismatch");
  double worst = 0.0;
  for (std::size_t k = 0; k < valpha.size(); ++k) worst = std::max(worst, std::abs(valpha[k] - x_star[k]));
  return worst < 0.25;
}

double ensemble_spread(const ParticleEnsemble& ens) {
  const std::size_t n = ens.count(), dim = ens.dim();
  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto p = ens.position(i);
    for (std::size_t k = 0; k < dim; ++k) mean[k] += p[k];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto p = ens.position(i);
    for (std::size_t k = 0; k < dim; ++k) s += (p[k] - mean[k]) * (p[k] - mean[k]);
  }
  return s / static_cast<double>(n);
}

std::size_t reduced_count(std::size_t n, double s_prev, double s_hat, double mu, std::size_t n_min) {
  if (!(s_prev > 0.0)) return n;
  const double target = static_cast<double>(n) * (1.0 + mu * (s_hat - s_prev) / s_prev);
  const double floored = std::floor(std::max(target, 0.0));
  const std::size_t lower = std::min(n_min, n);
  if (floored >= static_cast<double>(n)) return n;
  return std::max(lower, static_cast<std::size_t>(floored));
}

ParticleEnsemble reduce_particles(const ParticleEnsemble& ens, double s_prev, double mu, std::size_t n_min,
                                  RngStream& rng) {
  if (mu < 0.0 || mu > 1.0) throw ConfigError("reduction mu must lie in [0,1]");
  const std::size_t n = ens.count();
  const std::size_t target = reduced_count(n, s_prev, ensemble_spread(ens), mu, n_min);
  ParticleEnsemble out = ens;
  if (target == n) return out;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < target; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
  idx.resize(target);
  std::sort(idx.begin(), idx.end());
  out.keep(idx);
  return out;
}

// ---------------------------------------------------------------------------

ConsensusAccumulator::ConsensusAccumulator(double alpha, std::size_t dim) : alpha_(alpha), sum_wv_(dim, 0.0) {}

void ConsensusAccumulator::rebuild(const ParticleEnsemble& ens) {
  const auto energies = ens.energies();
  reference_ = *std::min_element(energies.begin(), energies.end());
  sum_w_ = 0.0;
  std::fill(sum_wv_.begin(), sum_wv_.end(), 0.0);
  for (std::size_t i = 0; i < ens.count(); ++i) {
    const double w = std::exp(-alpha_ * (energies[i] - reference_));
    if (w == 0.0) continue;
    sum_w_ += w;
    auto p = ens.position(i);
    for (std::size_t k = 0; k < sum_wv_.size(); ++k) sum_wv_[k] += w * p[k];
  }
}

bool ConsensusAccumulator::remove(std::span<const double> position, double energy) {
  const double w = std::exp(-alpha_ * (energy - reference_));
  if (w == 0.0) return true;
  // Subtracting a dominant weight would leave a remainder buried in rounding error.
  if (w > 0.25 * sum_w_) return false;
  sum_w_ -= w;
  for (std::size_t k = 0; k < sum_wv_.size(); ++k) sum_wv_[k] -= w * position[k];
  return true;
}

void ConsensusAccumulator::add(std::span<const double> position, double energy) {
  double w = 1.0;
  if (energy < reference_) {
    const double factor = std::exp(-alpha_ * (reference_ - energy));
    sum_w_ *= factor;
    for (double& s : sum_wv_) s *= factor;
    reference_ = energy;
  } else {
    w = std::exp(-alpha_ * (energy - reference_));
    if (w == 0.0) return;
  }
  sum_w_ += w;
  for (std::size_t k = 0; k < sum_wv_.size(); ++k) sum_wv_[k] += w * position[k];
}

bool ConsensusAccumulator::healthy() const noexcept { return std::isfinite(sum_w_) && sum_w_ > 1e-100; }

void ConsensusAccumulator::point(std::span<double> out) const {
  for (std::size_t k = 0; k < sum_wv_.size(); ++k) out[k] = sum_wv_[k] / sum_w_;
}

}  // namespace kbo
