#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "kbo/diagnostics.hpp"
#include "kbo/estimators.hpp"
#include "support.hpp"

using namespace kbo;

TEST_CASE("moments examples") {
  ParticleEnsemble same({2.0, 1.0, 2.0, 1.0, 2.0, 1.0}, 2);
  CHECK(moments(same).variance == 0.0);

  auto m = moments(ParticleEnsemble({-1.0, 1.0}, 1));
  CHECK(m.mean[0] == 0.0);
  CHECK(m.variance == 0.5);
  CHECK(m.second_moment == 1.0);
}

TEST_CASE("second moment identity") {
  test::Gen g(10);
  for (int t = 0; t < 200; ++t) {
    auto ens = g.ensemble(g.size(1, 50), g.size(1, 6), -10, 10);
    auto m = moments(ens);
    double mm = 0.0;
    for (double x : m.mean) mm += x * x;
    CHECK(m.variance >= 0.0);
    CHECK(std::abs(m.second_moment - mm - 2 * m.variance) < 1e-9);
  }
}

TEST_CASE("theory params examples") {
  KboConfig cfg;
  cfg.lambda1 = 1;
  cfg.sigma1 = 0;
  cfg.epsilon = 0.1;
  cfg.beta = std::log(1.5);
  cfg.diffusion = Diffusion::anisotropic;
  TheoryInputs in{1.0, 0.0, 1.0, 1.0, 0.5, 0.0};
  auto t = theory_params(cfg, 3, in);
  CHECK(t.C_beta == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(t.micro_condition);
  CHECK(t.kappa == 1.0);

  cfg.epsilon = 1.0;
  cfg.lambda1 = 0.5;
  cfg.sigma1 = 0.2;
  in.e_max = in.e_min = 0.3;
  t = theory_params(cfg, 3, in);
  CHECK(t.C_beta == 1.0);
  CHECK(t.C_alpha == 1.0);
  CHECK(t.micro_rate == doctest::Approx(0.5 - 0.25 - 2 * 0.04).epsilon(1e-14));

  cfg.lambda1 = 1.0;
  cfg.beta = std::log(2.0);
  cfg.sigma1 = std::sqrt(0.1);
  in.e_min = 0.0;
  in.e_max = 1.0;
  t = theory_params(cfg, 3, in);
  CHECK(t.C_beta == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(t.mu == doctest::Approx(0.3).epsilon(1e-14));
  REQUIRE(t.nu.has_value());
  CHECK(t.mu_positive);

  cfg.diffusion = Diffusion::isotropic;
  t = theory_params(cfg, 3, in);
  CHECK(t.kappa == 3.0);
  CHECK(t.mu < 0);
  CHECK_FALSE(t.nu.has_value());
  CHECK_FALSE(t.mu_positive);

  in.v0 = 2.0;
  CHECK_FALSE(theory_params(cfg, 3, in).v0_at_most_one);
  in.e_max = -1.0;
  CHECK_THROWS_AS(theory_params(cfg, 3, in), ConfigError);
}

TEST_CASE("nu stays finite at large beta") {
  KboConfig cfg;
  cfg.sigma1 = 0;
  std::vector<double> e{0.5, 0.7, 1.0};
  TheoryInputs in{1.0, 0.0, 1.0, 1.0, 0.5, log_mean_weight(e, cfg.beta)};
  auto t = theory_params(cfg, 2, in);
  CHECK(std::isfinite(t.mu));
}

TEST_CASE("theory params are monotone in the noise") {
  test::Gen g(42);
  for (int trial = 0; trial < 200; ++trial) {
    KboConfig cfg;
    cfg.lambda1 = g.real(0.1, 2);
    cfg.lambda2 = g.real(0.1, 2);
    cfg.epsilon = g.real(0.01, 1);
    cfg.alpha = cfg.beta = g.real(0.1, 5);
    cfg.diffusion = g.real(0, 1) < 0.5 ? Diffusion::isotropic : Diffusion::anisotropic;
    TheoryInputs in{g.real(0.5, 2), 0.0, 1.0, 1.0, 0.5, -0.5};
    cfg.sigma1 = g.real(0, 1);
    cfg.sigma2 = g.real(0, 1);
    auto a = theory_params(cfg, 4, in);
    cfg.sigma1 += g.real(0.01, 1);
    cfg.sigma2 += g.real(0.01, 1);
    auto b = theory_params(cfg, 4, in);
    CHECK(b.mu < a.mu);
    CHECK(b.micro_rate < a.micro_rate);
    CHECK(b.macro_rate < a.macro_rate);
  }
}

TEST_CASE("decay check") {
  RunResult flat;
  for (int t = 0; t < 5; ++t) {
    TraceRow row;
    row.time = t;
    flat.trace.push_back(row);
  }
  CHECK(decay_check(flat, 3.0, 1.0));

  RunResult r;
  for (double v : {1.0, 0.9, 0.95, 0.5}) {
    TraceRow row;
    row.time = static_cast<double>(r.trace.size());
    row.variance = v;
    r.trace.push_back(row);
  }
  CHECK(decay_check(r, 0.0, 1.0));
  CHECK_FALSE(decay_check(r, 0.1, 1.0));
  r.trace[2].variance = 1.1;
  CHECK_FALSE(decay_check(r, 0.0, 1.0));
}

TEST_CASE("laplace gap shrinks with beta") {
  auto obj = benchmark(Benchmark::sphere, 3);
  auto ens = ensemble_init(2000, 3, InitLaw::uniform(-5, 5), 4);
  std::vector<double> e(ens.count());
  for (std::size_t i = 0; i < ens.count(); ++i) e[i] = obj(ens.position(i));
  const double lowest = *std::min_element(e.begin(), e.end());
  double prev = 1e300;
  for (double beta : {1.0, 10.0, 100.0, 1000.0}) {
    const double r = laplace_gap(e, beta, 0.0);
    CHECK(r >= 0.0);
    CHECK(r < prev);
    prev = r;
  }
  CHECK(prev - lowest < 0.01);
}

TEST_CASE("micro dynamics on the sphere decay at the theoretical rate") {
  auto obj = benchmark(Benchmark::sphere, 2);
  KboConfig cfg;
  cfg.lambda1 = 1;
  cfg.lambda2 = 0;
  cfg.sigma2 = 0;
  cfg.sigma1 = 0.3;
  cfg.alpha = cfg.beta = 0.01;
  cfg.epsilon = 0.1;
  cfg.max_iters = 100;
  cfg.n_stall = 100000;
  auto range = sample_energy_range(obj, 100000, 1);
  CHECK(range.min == 0.0);
  CHECK(range.max <= 50.0);
  TheoryInputs in{50.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  auto t = theory_params(cfg, 2, in);
  REQUIRE(t.micro_condition);
  REQUIRE(t.mu > 0);
  int failures = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    cfg.seed = s;
    auto r = run_nanbu(cfg, obj, ensemble_init(1000, 2, InitLaw::uniform(-5, 5), 500 + s));
    failures += !decay_check(r, t.mu, 0.5);
  }
  CHECK(failures <= 1);
}
