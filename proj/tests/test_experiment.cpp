#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "kbo/experiment.hpp"

using namespace kbo;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("kbo_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

bool close(const json& j, double v) {
  if (j.is_null()) return std::isnan(v);
  const double x = j.get<double>();
  return std::abs(x - v) <= 1e-12 * std::max(1.0, std::abs(x));
}

ExperimentSpec sphere2d(std::size_t runs) {
  ExperimentSpec spec;
  spec.objective = "sphere";
  spec.dim = 2;
  spec.particles = 100;
  spec.runs = runs;
  spec.kbo.seed = 2024;
  return spec;
}

}  // namespace

TEST_CASE("run seeds") {
  CHECK(run_seed(1, 0) == run_seed(1, 0));
  CHECK(run_seed(1, 0) != run_seed(1, 1));
  CHECK(run_seed(1, 0) != run_seed(2, 0));
  CHECK(run_seed(0, 0) == mix64(0x9e3779b97f4a7c15ULL));
}

TEST_CASE("sphere in two dimensions always succeeds") {
  auto spec = sphere2d(10);
  auto s = run_experiment(spec);
  CHECK(s.runs == 10);
  CHECK(s.success_rate == 1.0);
  CHECK(s.mean_l2_error < 0.25);
  for (const auto& r : s.records) CHECK(r.success);
}

TEST_CASE("forced stall summary") {
  auto spec = sphere2d(1);
  spec.kbo.n_stall = 1;
  spec.kbo.delta_stall = std::numeric_limits<double>::infinity();
  spec.output_dir = scratch("stall");
  auto s = run_experiment(spec);
  CHECK(s.mean_iters == 1.0);
  CHECK(s.terminations.at("stalled") == 1);
  auto j = json::parse(read_text_file(spec.output_dir / "summary.json"));
  CHECK(j.at("termination") == "stalled");
  CHECK(j.at("mean_iters") == 1.0);
  std::filesystem::remove_all(spec.output_dir);
}

TEST_CASE("success flags agree with the success rule") {
  ExperimentSpec spec;
  spec.objective = "rastrigin";
  spec.dim = 20;
  spec.particles = 200;
  spec.runs = 4;
  spec.kbo.max_iters = 300;
  spec.kbo.rescale = true;
  auto obj = make_objective(spec);
  auto s = run_experiment(spec);
  for (const auto& r : s.records) {
    CHECK(r.success == check_success(r.final_estimate, *obj.minimizer()));
    CHECK(r.final_fval == doctest::Approx(obj(r.final_estimate)).epsilon(1e-14));
  }
}

TEST_CASE("summary is reproducible from the written traces") {
  for (auto driver : {Driver::nanbu, Driver::bird}) {
    ExperimentSpec spec;
    spec.objective = "ackley";
    spec.dim = 3;
    spec.particles = 40;
    spec.runs = 5;
    spec.driver = driver;
    spec.kbo.max_iters = 150;
    spec.kbo.rescale = true;
    spec.kbo.reduction = {0.3, 5, 10};
    spec.output_dir = scratch("traces");
    auto s = run_experiment(spec);
    auto j = json::parse(read_text_file(spec.output_dir / "summary.json"));
    auto r = summarize_from_traces(spec.output_dir, make_objective(spec));
    CHECK(r.runs == j.at("runs").get<std::size_t>());
    CHECK(r.successes == j.at("successes").get<std::size_t>());
    CHECK(close(j.at("success_rate"), r.success_rate));
    CHECK(close(j.at("mean_iters"), r.mean_iters));
    CHECK(close(j.at("mean_iters_successful"), r.mean_iters_successful));
    CHECK(close(j.at("mean_l2_error"), r.mean_l2_error));
    CHECK(close(j.at("mean_final_fval"), r.mean_final_fval));
    CHECK(close(j.at("mean_avg_particles"), r.mean_avg_particles));
    CHECK(r.terminations == s.terminations);
    for (std::size_t i = 0; i < r.records.size(); ++i) CHECK(r.records[i].seed == s.records[i].seed);
    CHECK(std::filesystem::exists(spec.output_dir / "run_000.diag.json"));
    std::filesystem::remove_all(spec.output_dir);
  }
}

TEST_CASE("sweeps") {
  SweepSpec sweep;
  sweep.base = sphere2d(3);
  sweep.base.kbo.max_iters = 200;
  sweep.base.output_dir = scratch("sweep");
  sweep.grid = {{"sigma1", {0.1, 0.5}}, {"epsilon", {0.01, 0.05, 0.1}}};
  auto rows = run_sweep(sweep);
  CHECK(rows.size() == 6);
  CHECK(rows[1].values == std::vector<double>{0.1, 0.05});
  std::ifstream csv(sweep.base.output_dir / "sweep.csv");
  std::size_t lines = 0;
  for (std::string line; std::getline(csv, line);) ++lines;
  CHECK(lines == 7);
  std::filesystem::remove_all(sweep.base.output_dir);

  SweepSpec one;
  one.base = sphere2d(3);
  one.grid = {{"sigma2", {6.0}}};
  auto single = run_sweep(one);
  auto direct = run_experiment(one.base);
  REQUIRE(single.size() == 1);
  REQUIRE(single[0].summary.records.size() == direct.records.size());
  for (std::size_t i = 0; i < direct.records.size(); ++i)
    CHECK(single[0].summary.records[i].final_estimate == direct.records[i].final_estimate);

  one.grid = {{"gamma", {1.0}}};
  CHECK_THROWS_AS(run_sweep(one), ConfigError);
  one.grid = {};
  CHECK_THROWS_AS(run_sweep(one), ConfigError);
}

TEST_CASE("config documents") {
  auto spec = parse_experiment(R"({
    "objective": {"name": "griewank", "dim": 4},
    "driver": "bird",
    "particles": 50,
    "runs": 2,
    "seed": 7,
    "init": {"law": "gaussian", "a": 0, "b": 2},
    "kbo": {"sigma1": 0.3, "delta_stall": null, "rescale": true, "reduction": {"mu": 0.1}}
  })");
  CHECK(spec.objective == "griewank");
  CHECK(spec.dim == 4);
  CHECK(spec.driver == Driver::bird);
  CHECK(spec.kbo.seed == 7);
  CHECK(spec.kbo.sigma1 == 0.3);
  CHECK(std::isinf(spec.kbo.delta_stall));
  CHECK(spec.kbo.reduction.mu == 0.1);
  CHECK(spec.init->kind == InitLaw::Kind::gaussian);

  CHECK_THROWS_AS(parse_experiment(R"({"objective": {"name": "sphere"}, "colour": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment(R"({"kbo": {"lamda1": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment(R"({"objective": {"name": "nope"}})").validate(), ConfigError);
  CHECK_THROWS_AS(parse_experiment("{"), ConfigError);

  auto sw = parse_sweep(R"({"objective": {"name": "sphere"}, "sweep": {"sigma1": [0.1, 0.2, 0.3]}})");
  REQUIRE(sw.grid.size() == 1);
  CHECK(sw.grid[0].second.size() == 3);

  ExperimentSpec s;
  set_field(s, "mu", 0.25);
  set_field(s, "particles", 30);
  CHECK(s.kbo.reduction.mu == 0.25);
  CHECK(s.particles == 30);
  CHECK_THROWS_AS(set_field(s, "colour", 1), ConfigError);
}

TEST_CASE("initial ensembles honour the rescale flag") {
  ExperimentSpec spec;
  spec.objective = "griewank";
  spec.dim = 2;
  auto obj = make_objective(spec);
  spec.kbo.rescale = true;
  for (double x : initial_ensemble(spec, obj, 1).positions()) CHECK(std::abs(x) <= 1.0);
  spec.kbo.rescale = false;
  double widest = 0.0;
  for (double x : initial_ensemble(spec, obj, 1).positions()) widest = std::max(widest, std::abs(x));
  CHECK(widest > 1.0);
  CHECK(widest <= 600.0);
}

TEST_CASE("diagnostics document") {
  auto spec = sphere2d(1);
  auto obj = make_objective(spec);
  auto run = run_single(spec, obj, 3);
  auto j = json::parse(diagnostics_json(spec, obj, &run, 3));
  CHECK(j.at("seed") == 3);
  CHECK(j.contains("theory"));
  CHECK(j.at("run").at("termination").is_string());
  auto static_only = json::parse(diagnostics_json(spec, obj, nullptr, 3));
  CHECK_FALSE(static_only.contains("run"));
}

TEST_CASE("ml training study") {
  MlTrainSpec spec;
  spec.kbo.epochs = 3;
  spec.output_dir = scratch("ml");
  auto r = run_mltrain(spec);
  CHECK(r.train_size == 420);
  CHECK(r.result.accuracy.size() == 3);
  CHECK(std::filesystem::exists(spec.output_dir / "mltrain.csv"));
  spec.method = "sgd";
  spec.sgd.epochs = 2;
  CHECK(run_mltrain(spec).result.accuracy.size() <= 2);
  spec.method = "adam";
  CHECK_THROWS_AS(run_mltrain(spec), ConfigError);
  std::filesystem::remove_all(spec.output_dir);
}

TEST_CASE("micro-only noise sweep peaks in the interior") {
  SweepSpec sweep;
  sweep.base.objective = "rastrigin";
  sweep.base.dim = 5;
  sweep.base.particles = 200;
  sweep.base.runs = 20;
  sweep.base.kbo.lambda1 = 1;
  sweep.base.kbo.lambda2 = 0;
  sweep.base.kbo.sigma2 = 0;
  sweep.base.kbo.epsilon = 0.1;
  sweep.base.kbo.max_iters = 2000;
  sweep.base.kbo.n_stall = 100;
  sweep.grid = {{"sigma1", {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0}}};
  auto rows = run_sweep(sweep);
  REQUIRE(rows.size() == 8);
  double best = 0.0;
  for (const auto& r : rows) best = std::max(best, r.summary.success_rate);
  CHECK(best > rows.front().summary.success_rate);
  CHECK(best > rows.back().summary.success_rate);
}
