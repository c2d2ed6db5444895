#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "kbo/core.hpp"
#include "kbo/objective.hpp"
#include "kbo/solver.hpp"

namespace kbo {

/// Shape of the classifier softmax(ReLU(W x + b)) with W in R^{classes x features}.
struct NetShape {
  std::size_t features = 0;
  std::size_t classes = 0;
  std::size_t param_count() const noexcept { return classes * features + classes; }
};

/// Network parameters stored flat: W row-major, then b. The flat vector is the point the
/// optimizer moves around.
class ShallowNetParams {
 public:
  explicit ShallowNetParams(NetShape shape);
  static ShallowNetParams from_flat(NetShape shape, std::span<const double> flat);

  const NetShape& shape() const noexcept { return shape_; }
  std::span<const double> flat() const noexcept { return values_; }
  std::span<double> flat() noexcept { return values_; }
  std::span<const double> weights(std::size_t c) const noexcept {
    return {values_.data() + c * shape_.features, shape_.features};
  }
  double bias(std::size_t c) const noexcept { return values_[shape_.classes * shape_.features + c]; }

 private:
  NetShape shape_;
  std::vector<double> values_;
};

enum class Split { train, validation };

/// Scalar affine normalization x -> (x - mean) / std shared by all features.
struct Normalization {
  double mean = 0.0;
  double std = 1.0;
};

struct Dataset {
  std::size_t features = 0;
  std::size_t classes = 0;
  std::vector<double> x;  // size() x features, row-major
  std::vector<int> labels;
  Split split = Split::train;
  Normalization normalization{};

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const noexcept { return {x.data() + i * features, features}; }
};

struct DatasetPair {
  Dataset train;
  Dataset validation;
};

/// Mean and standard deviation over every entry of the feature matrix.
Normalization fit_normalization(const Dataset& data);
void apply_normalization(Dataset& data, Normalization norm);

/// k isotropic unit-variance Gaussian clusters whose centers sit on a regular simplex with
/// pairwise distance sep, split 70/30 into train and validation, normalized with the training
/// statistics.
DatasetPair synth_blobs(std::size_t classes, std::size_t n_per_class, std::size_t features, double sep,
                        std::uint64_t seed);

/// Builds train/validation sets from IDX image and label files. Pixels are mapped to [0,1] and
/// normalized with the training statistics. `limit` caps the number of samples per split.
DatasetPair dataset_from_idx(const std::filesystem::path& train_images, const std::filesystem::path& train_labels,
                             const std::filesystem::path& val_images, const std::filesystem::path& val_labels,
                             std::optional<std::size_t> limit = std::nullopt);

/// Class probabilities for one input. Softmax uses the max-shift.
void forward(const ShallowNetParams& params, std::span<const double> x, std::span<double> probs);
std::vector<double> forward(const ShallowNetParams& params, std::span<const double> x);

/// Mean of -log p_label over rows of an n x k probability matrix; p is clamped at 1e-12.
double cross_entropy(std::span<const double> probs, std::span<const int> labels, std::size_t classes);

/// Mean cross-entropy of the network over the listed samples (all samples when empty).
double mean_loss(const ShallowNetParams& params, const Dataset& data, std::span<const std::size_t> indices = {});
/// Mean-loss gradient with respect to the flat parameters. ReLU kinks use subgradient 0.
void loss_gradient(const ShallowNetParams& params, const Dataset& data, std::span<const std::size_t> indices,
                   std::span<double> grad);
double accuracy(const ShallowNetParams& params, const Dataset& data);

struct SgdConfig {
  double gamma = 0.1;
  std::size_t batch = 100;
  std::size_t epochs = 1;
  double tol = 0.01;
};

struct TrainResult {
  ShallowNetParams params;
  std::vector<double> accuracy;  // validation accuracy after each epoch
  std::vector<double> loss;      // training loss after each epoch
  std::size_t final_particles = 1;
  double avg_particles = 1.0;
};

/// Minibatch SGD on the network; stops early when a minibatch gradient norm drops below tol.
/// Initial parameters are N(0, init_std^2).
TrainResult sgd_train(const Dataset& train, const Dataset& validation, const SgdConfig& cfg, std::uint64_t seed,
                      double init_std = 1.0);

struct ScalarSgdResult {
  double x = 0.0;
  std::size_t iterations = 0;
  bool converged = false;  // |L'(x)| <= tol reached
};

/// Minibatch SGD on the one-dimensional sample objective from x0 ~ U(-3, 3).
ScalarSgdResult sgd_minimize(const SampleObjective& objective, const SgdConfig& cfg, std::uint64_t seed);

struct KboTrainConfig {
  KboConfig kbo{};
  std::size_t particles = 100;
  std::size_t particle_batch = 20;
  std::size_t data_batch = 128;
  std::size_t epochs = 20;
  std::size_t sweeps = 1;          // Nanbu sweeps per (data batch, particle batch)
  bool global_consensus = false;   // use v_alpha over all particles inside each batch
  double init_std = 1.0;
};

/// Stream key of the Nanbu sweep for (data-batch step, particle group, sweep).
std::uint64_t kbo_batch_key(std::size_t step, std::size_t group, std::size_t sweep) noexcept;

/// One data-batch update: refresh energies, split particles into groups, run the Nanbu sweeps
/// on each group against its own (or the global) consensus point. The energy is value-only.
void kbo_batch_update(ParticleEnsemble& particles, const EnergyFn& loss, const KboTrainConfig& cfg,
                      std::size_t step);

/// Value of the loss at x restricted to the listed data samples.
using BatchLoss = std::function<double(std::span<const double> x, std::span<const std::size_t> batch)>;
/// Called after every epoch with the consensus point over all particles.
using EpochHook = std::function<void(std::size_t epoch, std::span<const double> consensus)>;

struct MinibatchResult {
  std::vector<double> consensus;
  std::size_t steps = 0;  // data batches processed
  std::size_t epochs = 0;
  bool stalled = false;
  std::size_t final_particles = 0;
  double avg_particles = 0.0;  // mean over data batches
};

/// Streaming-loss KBO: per epoch the data are shuffled into batches of cfg.data_batch and each
/// batch drives one kbo_batch_update. Stops early when the global consensus stalls (cfg.kbo
/// n_stall / delta_stall), and reduces particles every t_r batches when cfg.kbo.reduction.mu > 0.
MinibatchResult kbo_minibatch(std::size_t n_data, const BatchLoss& loss, ParticleEnsemble particles,
                              const KboTrainConfig& cfg, const EpochHook& hook = {});

/// Gradient-free training: each particle is a flat parameter vector. Reported parameters are
/// the consensus point over all particles.
TrainResult kbo_train(const Dataset& train, const Dataset& validation, const KboTrainConfig& cfg);

}  // namespace kbo
