#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <limits>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "kbo/dynamics.hpp"
#include "kbo/estimators.hpp"
#include "kbo/solver.hpp"
#include "support.hpp"

using namespace kbo;

namespace {

KboConfig small_config() {
  KboConfig cfg;
  cfg.sigma1 = 0.5;
  cfg.sigma2 = 0.5;
  cfg.alpha = cfg.beta = 30;
  cfg.epsilon = 0.1;
  cfg.max_iters = 200;
  cfg.n_stall = 1000;
  return cfg;
}

bool same_trace(const RunResult& a, const RunResult& b) {
  if (a.trace.size() != b.trace.size() || a.termination != b.termination) return false;
  for (std::size_t r = 0; r < a.trace.size(); ++r) {
    const auto &x = a.trace[r], &y = b.trace[r];
    if (x.step != y.step || x.count != y.count || x.valpha != y.valpha || x.mean != y.mean ||
        x.variance != y.variance || x.best_energy != y.best_energy)
      return false;
  }
  return a.final_positions == b.final_positions;
}

}  // namespace

TEST_CASE("check_success boundary") {
  std::vector<double> x(20, 1.0);
  CHECK(check_success(x, x));
  auto y = x;
  y[3] += 0.25;
  CHECK_FALSE(check_success(y, x));
  y[3] = x[3] - 0.25;
  CHECK_FALSE(check_success(y, x));
  for (double& v : y) v = 1.2;
  CHECK(check_success(y, x));
}

TEST_CASE("reduced count law") {
  CHECK(reduced_count(100, 2.0, 1.0, 0.0, 10) == 100);
  CHECK(reduced_count(100, 2.0, 2.0, 0.7, 10) == 100);
  CHECK(reduced_count(100, 2.0, 1.0, 1.0, 10) == 50);
  CHECK(reduced_count(100, 2.0, 0.0, 1.0, 10) == 10);
  CHECK(reduced_count(100, 2.0, 0.1, 1.0, 10) == 10);
  CHECK(reduced_count(100, 2.0, 3.0, 1.0, 10) == 100);
  CHECK(reduced_count(100, 0.0, 1.0, 1.0, 10) == 100);
  CHECK(reduced_count(5, 2.0, 0.0, 1.0, 10) == 5);
}

TEST_CASE("reduce_particles keeps a random subset") {
  auto ens = test::Gen(1).ensemble(100, 2, -1, 1);
  for (std::size_t i = 0; i < 100; ++i) ens.energies_mut()[i] = static_cast<double>(i);
  ens.mark_fresh();
  const double s = ensemble_spread(ens);
  RngStream rng(1, 1);
  auto out = reduce_particles(ens, 2 * s, 1.0, 10, rng);
  CHECK(out.count() == 50);
  CHECK(out.energies_fresh());
  // Survivors are original rows with their cached energy.
  double last = -1;
  for (std::size_t i = 0; i < out.count(); ++i) {
    const auto k = static_cast<std::size_t>(out.energy(i));
    CHECK(out.energy(i) > last);
    last = out.energy(i);
    CHECK(out.position(i)[0] == ens.position(k)[0]);
  }
  RngStream rng2(1, 1);
  CHECK(reduce_particles(ens, 2 * s, 0.0, 10, rng2).count() == 100);
  CHECK(reduce_particles(ens, 0.0, 1.0, 10, rng2).count() == 100);
  CHECK_THROWS_AS(reduce_particles(ens, s, 1.5, 10, rng2), ConfigError);
}

TEST_CASE("stall monitor") {
  StallMonitor m(2, 0.1, {0.0});
  CHECK_FALSE(m.update(std::vector<double>{0.05}));
  CHECK(m.counter() == 1);
  CHECK_FALSE(m.update(std::vector<double>{0.5}));
  CHECK(m.counter() == 0);
  CHECK_FALSE(m.update(std::vector<double>{0.55}));
  CHECK(m.update(std::vector<double>{0.56}));
}

TEST_CASE("forced stall ends after one iteration") {
  auto cfg = small_config();
  cfg.n_stall = 1;
  cfg.delta_stall = std::numeric_limits<double>::infinity();
  auto obj = benchmark(Benchmark::sphere, 2);
  auto init = ensemble_init(20, 2, InitLaw::uniform(-5, 5), 1);
  auto r = run_nanbu(cfg, obj, init);
  CHECK(r.termination == Termination::stalled);
  CHECK(r.wall_steps == 1);
  CHECK(r.trace.size() == 2);
  CHECK(r.final_estimate == r.trace.back().valpha);
  auto b = run_bird(cfg, obj, init);
  CHECK(b.termination == Termination::stalled);
  // Bird counts the stall limit in collisions: one pseudo-iteration of N/2 of them.
  CHECK(b.wall_steps == 10);
  CHECK(b.iterations == 1.0);
}

TEST_CASE("noise-free macro dynamics shrink the variance every step") {
  KboConfig cfg;
  cfg.lambda1 = 0;
  cfg.sigma1 = cfg.sigma2 = 0;
  cfg.epsilon = 0.1;
  cfg.alpha = cfg.beta = 10;
  cfg.max_iters = 50;
  auto r = run_nanbu(cfg, benchmark(Benchmark::sphere, 3), ensemble_init(40, 3, InitLaw::uniform(-5, 5), 2));
  REQUIRE(r.trace.size() == 51);
  for (std::size_t t = 1; t < r.trace.size(); ++t) CHECK(r.trace[t].variance < r.trace[t - 1].variance);
}

TEST_CASE("drivers are deterministic") {
  auto cfg = small_config();
  cfg.seed = 17;
  cfg.reduction.mu = 0.5;
  cfg.reduction.t_r = 5;
  auto obj = benchmark(Benchmark::rastrigin, 3);
  auto init = ensemble_init(60, 3, InitLaw::uniform(-5.12, 5.12), 4);
  CHECK(same_trace(run_nanbu(cfg, obj, init), run_nanbu(cfg, obj, init)));
  CHECK(same_trace(run_bird(cfg, obj, init), run_bird(cfg, obj, init)));
  auto other = cfg;
  other.seed = 18;
  CHECK_FALSE(same_trace(run_nanbu(cfg, obj, init), run_nanbu(other, obj, init)));
}

#ifdef _OPENMP
TEST_CASE("thread count does not change a run") {
  auto cfg = small_config();
  cfg.max_iters = 5;
  auto obj = benchmark(Benchmark::ackley, 40);
  auto init = ensemble_init(600, 40, InitLaw::uniform(-1, 1), 9);
  cfg.rescale = true;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  auto a = run_nanbu(cfg, obj, init);
  omp_set_num_threads(4);
  auto b = run_nanbu(cfg, obj, init);
  omp_set_num_threads(saved);
  CHECK(same_trace(a, b));
}
#endif

TEST_CASE("particle count is non-increasing and bounded below") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto cfg = small_config();
    cfg.seed = seed;
    cfg.reduction = {1.0, 2, 7};
    auto obj = benchmark(Benchmark::sphere, 2);
    auto init = ensemble_init(200, 2, InitLaw::uniform(-5, 5), seed);
    for (const auto& r : {run_nanbu(cfg, obj, init), run_bird(cfg, obj, init)}) {
      for (std::size_t t = 1; t < r.trace.size(); ++t) {
        CHECK(r.trace[t].count <= r.trace[t - 1].count);
        CHECK(r.trace[t].count >= 7);
      }
      CHECK(r.trace.back().count < 200);
    }
  }
}

TEST_CASE("bird replays against a full-recompute oracle") {
  KboConfig cfg;
  cfg.lambda1 = 0;
  cfg.lambda2 = 1;
  cfg.sigma1 = cfg.sigma2 = 0;
  cfg.epsilon = 0.3;
  cfg.alpha = cfg.beta = 4;
  cfg.max_iters = 25;
  cfg.n_stall = 10000;
  cfg.seed = 12;
  auto obj = benchmark(Benchmark::griewank, 1);
  ParticleEnsemble init({-3.0, 1.0, 4.5, 7.0}, 1);
  auto run = run_bird(cfg, obj, init);
  REQUIRE(run.wall_steps == 50);

  // Oracle: replicate the pair selection stream and recompute v_alpha from scratch.
  constexpr std::uint64_t kBirdTag = 0x42495244;
  auto ens = init;
  EnergyFn e = [&](std::span<const double> x) { return obj(x); };
  evaluate_energies(ens, e);
  auto va = consensus_point(ens, cfg.alpha).point;
  const auto params = CollisionParams::from(cfg);
  std::size_t row = 1;
  for (std::size_t s = 0; s < 50; ++s) {
    RngStream rng(cfg.seed, stream_id(kBirdTag, s));
    const std::size_t i = rng.index(4);
    std::size_t j = rng.index(3);
    if (j >= i) ++j;
    auto out = collide(ens.position(i), ens.position(j), ens.energy(i), ens.energy(j), va, params, rng);
    // Pure macro with sigma = 0: each particle relaxes toward the frozen v_alpha.
    CHECK(out.v[0] == doctest::Approx(ens.position(i)[0] + 0.3 * (va[0] - ens.position(i)[0])).epsilon(1e-15));
    ens.position(i)[0] = out.v[0];
    ens.position(j)[0] = out.v_star[0];
    evaluate_energies(ens, e);
    va = consensus_point(ens, cfg.alpha).point;
    if ((s + 1) % 2 == 0) {
      REQUIRE(row < run.trace.size());
      CHECK(run.trace[row].step == s + 1);
      CHECK(run.trace[row].valpha[0] == doctest::Approx(va[0]).epsilon(1e-12));
      ++row;
    }
  }
  for (std::size_t i = 0; i < 4; ++i) CHECK(run.final_positions[i] == doctest::Approx(ens.position(i)[0]).epsilon(1e-14));
}

TEST_CASE("bird and nanbu coincide in law for two particles") {
  KboConfig cfg;
  cfg.sigma1 = 0.8;
  cfg.sigma2 = 0.6;
  cfg.alpha = cfg.beta = 2;
  cfg.epsilon = 0.2;
  cfg.max_iters = 6;
  cfg.n_stall = 1000;
  auto obj = benchmark(Benchmark::rastrigin, 1);
  ParticleEnsemble init({-2.0, 1.5}, 1);
  const int runs = 4000;
  double sn = 0, sn2 = 0, sb = 0, sb2 = 0;
  for (int r = 0; r < runs; ++r) {
    cfg.seed = static_cast<std::uint64_t>(r);
    const double a = run_nanbu(cfg, obj, init).final_estimate[0];
    const double b = run_bird(cfg, obj, init).final_estimate[0];
    sn += a;
    sn2 += a * a;
    sb += b;
    sb2 += b * b;
  }
  const double mn = sn / runs, mb = sb / runs;
  const double vn = sn2 / runs - mn * mn, vb = sb2 / runs - mb * mb;
  const double se = std::sqrt((vn + vb) / runs);
  CHECK(std::abs(mn - mb) < 4 * se);
  CHECK(std::abs(std::sqrt(vn) / std::sqrt(vb) - 1.0) < 0.1);
}

TEST_CASE("bird on a ten-dimensional sphere") {
  KboConfig cfg;  // default parameter set
  cfg.rescale = true;
  auto obj = benchmark(Benchmark::sphere, 10);
  int ok = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    cfg.seed = s;
    auto r = run_bird(cfg, obj, ensemble_init(200, 10, InitLaw::uniform(-1, 1), s + 100));
    ok += check_success(r.final_estimate, *obj.minimizer());
  }
  CHECK(ok >= 9);
}

TEST_CASE("driver input checks") {
  auto cfg = small_config();
  auto obj = benchmark(Benchmark::sphere, 2);
  CHECK_THROWS_AS(run_nanbu(cfg, obj, ensemble_init(10, 3, InitLaw::uniform(-1, 1), 0)), ConfigError);
  CHECK_THROWS_AS(run_nanbu(cfg, obj, ensemble_init(1, 2, InitLaw::uniform(-1, 1), 0)), ConfigError);
  Objective nan("nan", 1, [](std::span<const double> x) { return x[0] > 0 ? std::nan("") : 0.0; }, {-1}, {1});
  CHECK_THROWS_AS(run_nanbu(cfg, nan, ParticleEnsemble({-0.5, 0.5}, 1)), NumericError);
}

TEST_CASE("rescaled runs report native-domain estimates") {
  auto cfg = small_config();
  cfg.rescale = true;
  cfg.max_iters = 300;
  auto obj = benchmark(Benchmark::griewank, 2);
  auto r = run_nanbu(cfg, obj, ensemble_init(100, 2, InitLaw::uniform(-1, 1), 3));
  // The first row's mean is near the box center in native units, its variance of order 600^2.
  CHECK(r.trace.front().variance > 1e4);
  for (double x : r.final_positions) CHECK(std::abs(x) <= 600 * 2);
}
