#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kbo/core.hpp"
#include "kbo/mlbench.hpp"
#include "kbo/objective.hpp"
#include "kbo/solver.hpp"

namespace kbo {

enum class Driver { nanbu, bird };
std::string to_string(Driver d);
Driver parse_driver(const std::string& s);

/// Everything needed to reproduce a batch of seeded runs.
struct ExperimentSpec {
  std::string objective = "sphere";
  std::size_t dim = 2;
  std::optional<std::uint64_t> shift_seed;  // see BenchmarkOptions
  Driver driver = Driver::nanbu;
  KboConfig kbo{};  // kbo.seed is the master seed
  std::size_t particles = 100;
  std::size_t runs = 1;
  /// Initial law. Unset means uniform on [-1,1]^d when rescaling, else uniform on the box.
  std::optional<InitLaw> init;
  std::filesystem::path output_dir;  // empty: nothing is written
  bool write_traces = true;

  void validate() const;
};

/// Seed of run i: SplitMix64 finalizer of master + (i + 1) * 0x9e3779b97f4a7c15.
std::uint64_t run_seed(std::uint64_t master, std::size_t index) noexcept;

Objective make_objective(const ExperimentSpec& spec);
ParticleEnsemble initial_ensemble(const ExperimentSpec& spec, const Objective& objective, std::uint64_t seed);

/// Runs the configured driver once with the given seed.
RunResult run_single(const ExperimentSpec& spec, const Objective& objective, std::uint64_t seed);

struct RunRecord {
  std::uint64_t seed = 0;
  bool success = false;
  double iterations = 0.0;
  double l2_error = 0.0;
  double final_fval = 0.0;
  double avg_particles = 0.0;
  Termination termination = Termination::max_iters;
  std::vector<double> final_estimate;
};

/// Aggregate over runs. mean_iters, mean_final_fval and mean_avg_particles average every run;
/// mean_l2_error and mean_iters_successful average the successful runs and are NaN when there
/// are none.
struct Summary {
  std::size_t runs = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  double mean_iters = 0.0;
  double mean_iters_successful = 0.0;
  double mean_l2_error = 0.0;
  double mean_final_fval = 0.0;
  double mean_avg_particles = 0.0;
  std::map<std::string, std::size_t> terminations;
  std::vector<RunRecord> records;
};

RunRecord make_record(const RunResult& run, const Objective& objective, std::uint64_t seed);
Summary summarize(std::vector<RunRecord> records);

/// Executes spec.runs runs. When output_dir is set, writes run_XXX.csv, run_XXX.diag.json and
/// summary.json there.
Summary run_experiment(const ExperimentSpec& spec);

/// Rebuilds the summary from the run_XXX.csv traces and run_XXX.diag.json files in dir.
Summary summarize_from_traces(const std::filesystem::path& dir, const Objective& objective);

/// Trace CSV: step,time,N_t,valpha_0..,mean_norm,variance,best_energy at full precision.
void write_trace_csv(const std::filesystem::path& path, const RunResult& run);
std::string summary_json(const Summary& summary, const ExperimentSpec& spec);

/// Theory constants and decay checks for a run; pass no run for the static part only.
std::string diagnostics_json(const ExperimentSpec& spec, const Objective& objective, const RunResult* run,
                             std::uint64_t seed);

/// Cartesian grid over named scalar fields of the base spec.
struct SweepSpec {
  ExperimentSpec base;
  std::vector<std::pair<std::string, std::vector<double>>> grid;

  void validate() const;
};

struct SweepRow {
  std::vector<double> values;  // one per grid axis
  Summary summary;
};

/// One summary per grid point, all with the base master seed. Writes sweep.csv (and a
/// point_XXX/ directory per grid point) under the base output_dir when it is set.
std::vector<SweepRow> run_sweep(const SweepSpec& spec);

/// Names accepted by set_field: lambda1, lambda2, sigma1, sigma2, alpha, beta, epsilon, n_stall,
/// delta_stall, max_iters, mu, t_r, n_min, particles, dim, runs, seed.
const std::vector<std::string>& field_names();
void set_field(ExperimentSpec& spec, const std::string& name, double value);

/// Configuration documents are JSON objects mirroring ExperimentSpec:
/// {"objective": {"name", "dim", "shift_seed"}, "driver", "particles", "runs", "seed",
///  "output_dir", "write_traces", "init": {"law", "a", "b"},
///  "kbo": {"lambda1", ..., "diffusion", "pairing", "rescale", "record_every",
///          "reduction": {"mu", "t_r", "n_min"}},
///  "sweep": {"sigma1": [..], ...}}
/// Unknown keys are rejected.
ExperimentSpec parse_experiment(const std::string& json_text);
SweepSpec parse_sweep(const std::string& json_text);
std::string read_text_file(const std::filesystem::path& path);

/// Classifier training study on blobs or IDX files.
struct MlTrainSpec {
  std::string method = "kbo";  // kbo or sgd
  std::string dataset = "blobs";  // blobs or idx
  std::size_t classes = 3;
  std::size_t n_per_class = 200;
  std::size_t features = 2;
  double separation = 4.0;
  std::filesystem::path train_images, train_labels, val_images, val_labels;
  std::optional<std::size_t> limit;
  KboTrainConfig kbo{};
  SgdConfig sgd{};
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;

  void validate() const;
};

struct MlTrainReport {
  TrainResult result;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
};

/// Trains and, when output_dir is set, writes mltrain.csv (epoch,val_accuracy,train_loss) and
/// mltrain.json.
MlTrainReport run_mltrain(const MlTrainSpec& spec);

}  // namespace kbo
