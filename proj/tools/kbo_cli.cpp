// kbo: single runs, multi-seed studies, parameter sweeps, classifier training and diagnostics.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kbo/experiment.hpp"

namespace {

using kbo::ConfigError;
using kbo::ExperimentSpec;

// Flags shared by run, sweep and diag. Each is applied only when given, on top of --config.
struct SpecFlags {
  std::string config;
  std::optional<std::string> objective, driver, diffusion, pairing, init, out;
  std::optional<std::size_t> dim, particles, runs, n_stall, max_iters, t_r, n_min, record_every;
  std::optional<std::uint64_t> seed, shift_seed;
  std::optional<double> lambda1, lambda2, sigma1, sigma2, alpha, beta, epsilon, delta_stall, mu;
  bool rescale = false, no_rescale = false, no_traces = false;

  void attach(CLI::App& app) {
    app.add_option("-c,--config", config, "JSON config file; flags override it")->check(CLI::ExistingFile);
    app.add_option("--objective", objective, "benchmark name, e.g. sphere, rastrigin, sgdtest");
    app.add_option("--dim", dim, "dimension");
    app.add_option("--driver", driver, "nanbu or bird");
    app.add_option("-n,--particles", particles, "initial particle count");
    app.add_option("--runs", runs, "number of seeded runs");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--shift-seed", shift_seed, "draw the sphere/negexp shift with this seed");
    app.add_option("-o,--out", out, "output directory");
    app.add_option("--init", init, "initial law: uniform:LO:HI or gaussian:MEAN:STD (default: box)");
    app.add_option("--lambda1", lambda1);
    app.add_option("--lambda2", lambda2);
    app.add_option("--sigma1", sigma1);
    app.add_option("--sigma2", sigma2);
    app.add_option("--alpha", alpha);
    app.add_option("--beta", beta);
    app.add_option("--epsilon", epsilon);
    app.add_option("--diffusion", diffusion, "isotropic or anisotropic");
    app.add_option("--pairing", pairing, "random or permutation (nanbu only)");
    app.add_option("--n-stall", n_stall);
    app.add_option("--delta-stall", delta_stall, "stall threshold, inf allowed");
    app.add_option("--max-iters", max_iters);
    app.add_option("--mu", mu, "particle reduction rate, 0 disables");
    app.add_option("--t-r", t_r, "reduction period in iterations");
    app.add_option("--n-min", n_min, "minimum particle count under reduction");
    app.add_option("--record-every", record_every, "trace row period in iterations");
    app.add_flag("--rescale", rescale, "evolve in [-1,1]^d and map to the objective box");
    app.add_flag("--no-rescale", no_rescale);
    app.add_flag("--no-traces", no_traces, "skip per-run CSV and diag files");
  }

  void apply(ExperimentSpec& s) const {
    if (objective) s.objective = *objective;
    if (dim) s.dim = *dim;
    if (driver) s.driver = kbo::parse_driver(*driver);
    if (particles) s.particles = *particles;
    if (runs) s.runs = *runs;
    if (seed) s.kbo.seed = *seed;
    if (shift_seed) s.shift_seed = *shift_seed;
    if (out) s.output_dir = *out;
    if (init) s.init = parse_init(*init);
    auto& k = s.kbo;
    if (lambda1) k.lambda1 = *lambda1;
    if (lambda2) k.lambda2 = *lambda2;
    if (sigma1) k.sigma1 = *sigma1;
    if (sigma2) k.sigma2 = *sigma2;
    if (alpha) k.alpha = *alpha;
    if (beta) k.beta = *beta;
    if (epsilon) k.epsilon = *epsilon;
    if (diffusion) k.diffusion = kbo::parse_diffusion(*diffusion);
    if (pairing) k.pairing = kbo::parse_pairing(*pairing);
    if (n_stall) k.n_stall = *n_stall;
    if (delta_stall) k.delta_stall = *delta_stall;
    if (max_iters) k.max_iters = *max_iters;
    if (mu) k.reduction.mu = *mu;
    if (t_r) k.reduction.t_r = *t_r;
    if (n_min) k.reduction.n_min = *n_min;
    if (record_every) k.record_every = *record_every;
    if (rescale) k.rescale = true;
    if (no_rescale) k.rescale = false;
    if (no_traces) s.write_traces = false;
  }

  static kbo::InitLaw parse_init(const std::string& text) {
    double a = 0.0, b = 0.0;
    char kind[16] = {};
    if (std::sscanf(text.c_str(), "%15[a-z]:%lf:%lf", kind, &a, &b) != 3) {
      throw ConfigError("init must look like uniform:LO:HI or gaussian:MEAN:STD");
    }
    const std::string k = kind;
    if (k == "uniform") return kbo::InitLaw::uniform(a, b);
    if (k == "gaussian") return kbo::InitLaw::gaussian(a, b);
    throw ConfigError("unknown init law: " + k);
  }
};

// "name=v1,v2,..." or "name=lo:hi:step" (inclusive).
std::pair<std::string, std::vector<double>> parse_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("grid axis must look like name=values: " + text);
  const std::string name = text.substr(0, eq), rest = text.substr(eq + 1);
  std::vector<double> values;
  double lo = 0.0, hi = 0.0, step = 0.0;
  if (rest.find(':') != std::string::npos) {
    if (std::sscanf(rest.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3 || !(step > 0.0) || hi < lo) {
      throw ConfigError("range must be lo:hi:step with step > 0: " + rest);
    }
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) values.push_back(lo + static_cast<double>(i) * step);
  } else {
    std::stringstream ss(rest);
    std::string cell;
    while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
  }
  if (values.empty()) throw ConfigError("grid axis has no values: " + text);
  return {name, values};
}

ExperimentSpec load_spec(const SpecFlags& flags) {
  ExperimentSpec s = flags.config.empty() ? ExperimentSpec{} : kbo::parse_experiment(kbo::read_text_file(flags.config));
  flags.apply(s);
  return s;
}

void print_warnings(const kbo::KboConfig& cfg) {
  for (const auto& w : cfg.warnings()) std::cerr << "warning: " << w << "\n";
}

void print_summary(const kbo::Summary& s) {
  std::printf("runs %zu  success_rate %.4f  mean_iters %.2f  mean_l2_error %.6g  mean_final_fval %.6g  N_a %.2f\n",
              s.runs, s.success_rate, s.mean_iters, s.mean_l2_error, s.mean_final_fval, s.mean_avg_particles);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetic binary-interaction optimizer"};
  app.require_subcommand(1);

  SpecFlags run_flags;
  auto* run = app.add_subcommand("run", "seeded runs of one configuration");
  run_flags.attach(*run);

  SpecFlags sweep_flags;
  std::vector<std::string> axes;
  auto* sweep = app.add_subcommand("sweep", "success rate over a parameter grid");
  sweep_flags.attach(*sweep);
  sweep->add_option("-g,--grid", axes, "axis name=v1,v2 or name=lo:hi:step; repeat for a product grid");

  SpecFlags diag_flags;
  bool diag_run = false;
  auto* diag = app.add_subcommand("diag", "theory constants and decay checks");
  diag_flags.attach(*diag);
  diag->add_flag("--run", diag_run, "also execute one run and check it");

  kbo::MlTrainSpec ml;
  std::optional<double> ml_l1, ml_l2, ml_s1, ml_s2, ml_eps, ml_alpha, ml_mu;
  std::optional<std::size_t> ml_tr;
  std::string ml_out;
  std::size_t ml_limit = 0;
  auto* mltrain = app.add_subcommand("mltrain", "train the shallow classifier with KBO or SGD");
  mltrain->add_option("--method", ml.method, "kbo or sgd")->capture_default_str();
  mltrain->add_option("--dataset", ml.dataset, "blobs or idx")->capture_default_str();
  mltrain->add_option("--classes", ml.classes)->capture_default_str();
  mltrain->add_option("--n-per-class", ml.n_per_class)->capture_default_str();
  mltrain->add_option("--features", ml.features)->capture_default_str();
  mltrain->add_option("--sep", ml.separation, "blob center distance in units of sigma")->capture_default_str();
  std::string ti, tl, vi, vl;
  mltrain->add_option("--train-images", ti);
  mltrain->add_option("--train-labels", tl);
  mltrain->add_option("--val-images", vi);
  mltrain->add_option("--val-labels", vl);
  mltrain->add_option("--limit", ml_limit, "samples per split, 0 for all");
  mltrain->add_option("--particles", ml.kbo.particles)->capture_default_str();
  mltrain->add_option("--particle-batch", ml.kbo.particle_batch)->capture_default_str();
  mltrain->add_option("--data-batch", ml.kbo.data_batch)->capture_default_str();
  mltrain->add_option("--epochs", ml.kbo.epochs)->capture_default_str();
  mltrain->add_option("--sweeps", ml.kbo.sweeps, "Nanbu sweeps per batch")->capture_default_str();
  mltrain->add_flag("--global-consensus", ml.kbo.global_consensus);
  mltrain->add_option("--init-std", ml.kbo.init_std)->capture_default_str();
  mltrain->add_option("--lambda1", ml_l1);
  mltrain->add_option("--lambda2", ml_l2);
  mltrain->add_option("--sigma1", ml_s1);
  mltrain->add_option("--sigma2", ml_s2);
  mltrain->add_option("--epsilon", ml_eps);
  mltrain->add_option("--alpha", ml_alpha, "also sets beta");
  mltrain->add_option("--mu", ml_mu);
  mltrain->add_option("--t-r", ml_tr);
  mltrain->add_option("--gamma", ml.sgd.gamma)->capture_default_str();
  mltrain->add_option("--batch", ml.sgd.batch, "sgd batch size")->capture_default_str();
  mltrain->add_option("--tol", ml.sgd.tol)->capture_default_str();
  mltrain->add_option("--seed", ml.seed)->capture_default_str();
  mltrain->add_option("-o,--out", ml_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const auto spec = load_spec(run_flags);
      print_warnings(spec.kbo);
      print_summary(kbo::run_experiment(spec));
    } else if (sweep->parsed()) {
      kbo::SweepSpec spec = sweep_flags.config.empty()
                                ? kbo::SweepSpec{}
                                : kbo::parse_sweep(kbo::read_text_file(sweep_flags.config));
      sweep_flags.apply(spec.base);
      for (const auto& a : axes) spec.grid.push_back(parse_axis(a));
      print_warnings(spec.base.kbo);
      for (const auto& row : kbo::run_sweep(spec)) {
        for (std::size_t a = 0; a < row.values.size(); ++a) std::printf("%s=%g  ", spec.grid[a].first.c_str(), row.values[a]);
        print_summary(row.summary);
      }
    } else if (diag->parsed()) {
      const auto spec = load_spec(diag_flags);
      spec.validate();
      const auto objective = kbo::make_objective(spec);
      const auto seed = kbo::run_seed(spec.kbo.seed, 0);
      std::optional<kbo::RunResult> result;
      if (diag_run) result = kbo::run_single(spec, objective, seed);
      const std::string text = kbo::diagnostics_json(spec, objective, result ? &*result : nullptr, seed);
      if (spec.output_dir.empty()) {
        std::cout << text;
      } else {
        std::filesystem::create_directories(spec.output_dir);
        std::ofstream(spec.output_dir / "diag.json") << text;
      }
    } else if (mltrain->parsed()) {
      auto& k = ml.kbo.kbo;
      if (ml_l1) k.lambda1 = *ml_l1;
      if (ml_l2) k.lambda2 = *ml_l2;
      if (ml_s1) k.sigma1 = *ml_s1;
      if (ml_s2) k.sigma2 = *ml_s2;
      if (ml_eps) k.epsilon = *ml_eps;
      if (ml_alpha) k.alpha = k.beta = *ml_alpha;
      if (ml_mu) k.reduction.mu = *ml_mu;
      if (ml_tr) k.reduction.t_r = *ml_tr;
      ml.sgd.epochs = ml.kbo.epochs;
      ml.train_images = ti;
      ml.train_labels = tl;
      ml.val_images = vi;
      ml.val_labels = vl;
      if (ml_limit > 0) ml.limit = ml_limit;
      ml.output_dir = ml_out;
      const auto report = kbo::run_mltrain(ml);
      const auto& r = report.result;
      for (std::size_t e = 0; e < r.accuracy.size(); ++e) {
        std::printf("epoch %zu  val_accuracy %.4f  train_loss %.5f\n", e + 1, r.accuracy[e], r.loss[e]);
      }
      if (ml.method == "kbo") std::printf("particles %zu (avg %.1f)\n", r.final_particles, r.avg_particles);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
