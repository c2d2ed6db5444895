#include "kbo/mlbench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kbo/estimators.hpp"
#include "kbo/idx.hpp"

namespace kbo {

namespace {

constexpr std::uint64_t kBlobTag = 0x424c4f42;
constexpr std::uint64_t kSgdTag = 0x534744;
constexpr std::uint64_t kDataTag = 0x44415441;
constexpr std::uint64_t kGroupTag = 0x47525550;
constexpr std::uint64_t kSweepTag = 0x4b425357;
constexpr std::uint64_t kReduceTag = 0x4d4c5244;

void shuffle(std::vector<std::size_t>& v, RngStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

// Pre-activations z = W x + b for one sample.
void logits(const NetShape& shape, std::span<const double> flat, std::span<const double> x, std::span<double> z) {
  const std::size_t p = shape.features;
  const double* b = flat.data() + shape.classes * p;
  for (std::size_t c = 0; c < shape.classes; ++c) {
    const double* w = flat.data() + c * p;
    double s = b[c];
    for (std::size_t j = 0; j < p; ++j) s += w[j] * x[j];
    z[c] = s;
  }
}

void softmax_relu(std::span<const double> z, std::span<double> probs) {
  double top = 0.0;
  for (double v : z) top = std::max(top, std::max(v, 0.0));
  double total = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    probs[c] = std::exp(std::max(z[c], 0.0) - top);
    total += probs[c];
  }
  for (double& q : probs) q /= total;
}

double flat_loss(const NetShape& shape, std::span<const double> flat, const Dataset& data,
                 std::span<const std::size_t> indices) {
  thread_local std::vector<double> z, probs;
  z.resize(shape.classes);
  probs.resize(shape.classes);
  const std::size_t n = indices.empty() ? data.size() : indices.size();
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t i = indices.empty() ? s : indices[s];
    logits(shape, flat, data.row(i), z);
    softmax_relu(z, probs);
    total -= std::log(std::max(probs[static_cast<std::size_t>(data.labels[i])], 1e-12));
  }
  return total / static_cast<double>(n);
}

void check_dataset(const Dataset& data, const char* what) {
  if (data.size() == 0) throw ConfigError(std::string(what) + ": empty dataset");
  if (data.x.size() != data.size() * data.features) throw ConfigError(std::string(what) + ": feature matrix size mismatch");
  for (int y : data.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= data.classes) throw ConfigError(std::string(what) + ": label out of range");
  }
}

NetShape shape_of(const Dataset& data) { return {data.features, data.classes}; }

// Centers of a regular simplex with unit edge in R^{k-1}, padded or embedded into R^p.
std::vector<std::vector<double>> simplex_centers(std::size_t k, std::size_t p) {
  std::vector<std::vector<double>> centers(k, std::vector<double>(p, 0.0));
  if (p + 1 < k) {
    // Not enough room for a regular simplex: regular polygon with unit adjacent spacing.
    const double pi = std::acos(-1.0);
    const double radius = 0.5 / std::sin(pi / static_cast<double>(k));
    for (std::size_t c = 0; c < k; ++c) {
      const double a = 2.0 * pi * static_cast<double>(c) / static_cast<double>(k);
      centers[c][0] = radius * std::cos(a);
      if (p > 1) centers[c][1] = radius * std::sin(a);
    }
    return centers;
  }
  // Orthonormal basis of the plane sum(x) = 0 in R^k by Gram-Schmidt on e_c - e_{c+1}.
  std::vector<std::vector<double>> basis;
  for (std::size_t c = 0; c + 1 < k; ++c) {
    std::vector<double> u(k, 0.0);
    u[c] = 1.0;
    u[c + 1] = -1.0;
    for (const auto& q : basis) {
      const double d = std::inner_product(u.begin(), u.end(), q.begin(), 0.0);
      for (std::size_t j = 0; j < k; ++j) u[j] -= d * q[j];
    }
    const double norm = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
    for (double& v : u) v /= norm;
    basis.push_back(std::move(u));
  }
  // Vertices e_c have pairwise distance sqrt(2).
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t m = 0; m + 1 < k; ++m) centers[c][m] = basis[m][c] / std::sqrt(2.0);
  }
  return centers;
}

}  // namespace

// ---------------------------------------------------------------------------

ShallowNetParams::ShallowNetParams(NetShape shape) : shape_(shape), values_(shape.param_count(), 0.0) {}

ShallowNetParams ShallowNetParams::from_flat(NetShape shape, std::span<const double> flat) {
  if (flat.size() != shape.param_count()) throw ConfigError("flat parameter vector has the wrong length");
  ShallowNetParams p(shape);
  std::copy(flat.begin(), flat.end(), p.values_.begin());
  return p;
}

// ---------------------------------------------------------------------------

Normalization fit_normalization(const Dataset& data) {
  if (data.x.empty()) throw ConfigError("cannot normalize an empty dataset");
  const double n = static_cast<double>(data.x.size());
  const double mean = std::accumulate(data.x.begin(), data.x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : data.x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  return {mean, sd > 0.0 ? sd : 1.0};
}

void apply_normalization(Dataset& data, Normalization norm) {
  for (double& v : data.x) v = (v - norm.mean) / norm.std;
  data.normalization = norm;
}

DatasetPair synth_blobs(std::size_t classes, std::size_t n_per_class, std::size_t features, double sep,
                        std::uint64_t seed) {
  if (classes < 2) throw ConfigError("synth_blobs needs at least two classes");
  if (features < 1) throw ConfigError("synth_blobs needs at least one feature");
  if (n_per_class < 2) throw ConfigError("synth_blobs needs at least two samples per class");
  if (!(sep >= 0.0)) throw ConfigError("synth_blobs separation must be >= 0");

  const auto centers = simplex_centers(classes, features);
  const std::size_t n_train = std::max<std::size_t>(1, n_per_class * 7 / 10);
  DatasetPair out;
  for (Dataset* d : {&out.train, &out.validation}) {
    d->features = features;
    d->classes = classes;
  }
  out.validation.split = Split::validation;

  for (std::size_t c = 0; c < classes; ++c) {
    RngStream rng(seed, stream_id(kBlobTag, c));
    for (std::size_t s = 0; s < n_per_class; ++s) {
      Dataset& d = s < n_train ? out.train : out.validation;
      for (std::size_t j = 0; j < features; ++j) d.x.push_back(sep * centers[c][j] + rng.normal());
      d.labels.push_back(static_cast<int>(c));
    }
  }
  const Normalization norm = fit_normalization(out.train);
  apply_normalization(out.train, norm);
  apply_normalization(out.validation, norm);
  return out;
}

DatasetPair dataset_from_idx(const std::filesystem::path& train_images, const std::filesystem::path& train_labels,
                             const std::filesystem::path& val_images, const std::filesystem::path& val_labels,
                             std::optional<std::size_t> limit) {
  auto build = [&](const std::filesystem::path& img_path, const std::filesystem::path& lab_path, Split split) {
    const IdxTensor images = load_idx(img_path);
    const IdxTensor labels = load_idx(lab_path);
    if (images.dims.empty() || labels.dims.size() != 1) throw ConfigError("IDX files must hold images and a label vector");
    if (images.dims[0] != labels.dims[0]) throw ConfigError("IDX image and label counts differ");
    std::size_t n = images.dims[0];
    if (limit) n = std::min(n, *limit);
    const std::size_t p = n == 0 ? 0 : images.element_count() / images.dims[0];
    Dataset d;
    d.split = split;
    d.features = p;
    d.x.assign(images.values.begin(), images.values.begin() + static_cast<std::ptrdiff_t>(n * p));
    for (double& v : d.x) v /= 255.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double y = labels.values[i];
      if (y < 0.0) throw ConfigError("negative label in IDX file");
      d.labels.push_back(static_cast<int>(y));
    }
    return d;
  };
  DatasetPair out{build(train_images, train_labels, Split::train), build(val_images, val_labels, Split::validation)};
  if (out.train.features != out.validation.features) throw ConfigError("train and validation feature counts differ");
  int top = 0;
  for (int y : out.train.labels) top = std::max(top, y);
  for (int y : out.validation.labels) top = std::max(top, y);
  out.train.classes = out.validation.classes = static_cast<std::size_t>(top) + 1;
  const Normalization norm = fit_normalization(out.train);
  apply_normalization(out.train, norm);
  apply_normalization(out.validation, norm);
  return out;
}

// ---------------------------------------------------------------------------

void forward(const ShallowNetParams& params, std::span<const double> x, std::span<double> probs) {
  const NetShape& shape = params.shape();
  if (x.size() != shape.features || probs.size() != shape.classes) throw ConfigError("forward: dimension mismatch");
  std::vector<double> z(shape.classes);
  logits(shape, params.flat(), x, z);
  softmax_relu(z, probs);
}

std::vector<double> forward(const ShallowNetParams& params, std::span<const double> x) {
  std::vector<double> probs(params.shape().classes);
  forward(params, x, probs);
  return probs;
}

double cross_entropy(std::span<const double> probs, std::span<const int> labels, std::size_t classes) {
  if (labels.empty() || probs.size() != labels.size() * classes) throw ConfigError("cross_entropy: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    total -= std::log(std::max(probs[i * classes + static_cast<std::size_t>(labels[i])], 1e-12));
  }
  return total / static_cast<double>(labels.size());
}

double mean_loss(const ShallowNetParams& params, const Dataset& data, std::span<const std::size_t> indices) {
  check_dataset(data, "mean_loss");
  return flat_loss(params.shape(), params.flat(), data, indices);
}

void loss_gradient(const ShallowNetParams& params, const Dataset& data, std::span<const std::size_t> indices,
                   std::span<double> grad) {
  const NetShape& shape = params.shape();
  if (grad.size() != shape.param_count()) throw ConfigError("loss_gradient: gradient buffer has the wrong length");
  const std::size_t n = indices.empty() ? data.size() : indices.size();
  const std::size_t p = shape.features, k = shape.classes;
  std::fill(grad.begin(), grad.end(), 0.0);
  std::vector<double> z(k), probs(k);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t i = indices.empty() ? s : indices[s];
    auto x = data.row(i);
    logits(shape, params.flat(), x, z);
    softmax_relu(z, probs);
    for (std::size_t c = 0; c < k; ++c) {
      if (z[c] <= 0.0) continue;
      const double g = probs[c] - (static_cast<int>(c) == data.labels[i] ? 1.0 : 0.0);
      for (std::size_t j = 0; j < p; ++j) grad[c * p + j] += g * x[j];
      grad[k * p + c] += g;
    }
  }
  for (double& g : grad) g /= static_cast<double>(n);
}

double accuracy(const ShallowNetParams& params, const Dataset& data) {
  check_dataset(data, "accuracy");
  const NetShape& shape = params.shape();
  std::vector<double> z(shape.classes), probs(shape.classes);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    logits(shape, params.flat(), data.row(i), z);
    softmax_relu(z, probs);
    const auto best = std::max_element(probs.begin(), probs.end()) - probs.begin();
    if (best == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------

TrainResult sgd_train(const Dataset& train, const Dataset& validation, const SgdConfig& cfg, std::uint64_t seed,
                      double init_std) {
  check_dataset(train, "sgd_train");
  check_dataset(validation, "sgd_train");
  if (cfg.batch < 1) throw ConfigError("sgd batch size must be >= 1");
  if (cfg.gamma < 0.0) throw ConfigError("sgd learning rate must be >= 0");

  const NetShape shape = shape_of(train);
  TrainResult result{ShallowNetParams(shape), {}, {}, 1, 1.0};
  auto flat = result.params.flat();
  RngStream init(seed, stream_id(kSgdTag));
  for (double& v : flat) v = init_std * init.normal();

  std::vector<double> grad(shape.param_count());
  auto order = all_indices(train.size());
  bool done = false;
  for (std::size_t e = 0; e < cfg.epochs && !done; ++e) {
    RngStream rng(seed, stream_id(kSgdTag, e + 1));
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::span<const std::size_t> batch(order.data() + start, std::min(cfg.batch, order.size() - start));
      loss_gradient(result.params, train, batch, grad);
      double norm = 0.0;
      for (double g : grad) norm += g * g;
      if (std::sqrt(norm) < cfg.tol) {
        done = true;
        break;
      }
      for (std::size_t q = 0; q < flat.size(); ++q) flat[q] -= cfg.gamma * grad[q];
    }
    const double loss = flat_loss(shape, flat, train, {});
    if (!std::isfinite(loss)) throw NumericError("sgd training loss diverged in epoch " + std::to_string(e + 1));
    result.loss.push_back(loss);
    result.accuracy.push_back(accuracy(result.params, validation));
  }
  return result;
}

ScalarSgdResult sgd_minimize(const SampleObjective& objective, const SgdConfig& cfg, std::uint64_t seed) {
  if (cfg.batch < 1) throw ConfigError("sgd batch size must be >= 1");
  RngStream init(seed, stream_id(kSgdTag));
  ScalarSgdResult r;
  r.x = init.uniform(-3.0, 3.0);
  auto order = all_indices(objective.size());
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    RngStream rng(seed, stream_id(kSgdTag, e + 1));
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      if (std::abs(objective.gradient(r.x)) <= cfg.tol) {
        r.converged = true;
        return r;
      }
      const std::size_t m = std::min(cfg.batch, order.size() - start);
      double g = 0.0;
      for (std::size_t l = 0; l < m; ++l) g += objective.sample_gradient(r.x, order[start + l]);
      r.x -= cfg.gamma * g / static_cast<double>(m);
      if (!std::isfinite(r.x)) throw NumericError("sgd iterate diverged");
      ++r.iterations;
    }
  }
  r.converged = std::abs(objective.gradient(r.x)) <= cfg.tol;
  return r;
}

// ---------------------------------------------------------------------------

std::uint64_t kbo_batch_key(std::size_t step, std::size_t group, std::size_t sweep) noexcept {
  return stream_id(kSweepTag, step, (static_cast<std::uint64_t>(group) << 20) | sweep);
}

void kbo_batch_update(ParticleEnsemble& ens, const EnergyFn& loss, const KboTrainConfig& cfg, std::size_t step) {
  const std::size_t n = ens.count(), dim = ens.dim();
  if (n < 2) throw ConfigError("kbo training needs at least two particles");
  evaluate_energies(ens, loss);

  const std::size_t per_group = std::clamp<std::size_t>(cfg.particle_batch, 2, n);
  const std::size_t groups = std::max<std::size_t>(1, n / per_group);
  if (groups == 1) {
    for (std::size_t s = 0; s < cfg.sweeps; ++s) {
      const auto valpha = consensus_point(ens, cfg.kbo.alpha).point;
      nanbu_step(ens, valpha, cfg.kbo, loss, kbo_batch_key(step, 0, s));
    }
    return;
  }

  std::vector<double> global;
  if (cfg.global_consensus) global = consensus_point(ens, cfg.kbo.alpha).point;
  auto perm = all_indices(n);
  RngStream rng(cfg.kbo.seed, stream_id(kGroupTag, step));
  shuffle(perm, rng);

  // Group sizes differ by at most one, so every group has at least two particles.
  std::size_t start = 0;
  auto energies = ens.energies_mut();
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t size = n / groups + (g < n % groups ? 1 : 0);
    std::vector<double> pos(size * dim);
    for (std::size_t m = 0; m < size; ++m) {
      auto src = ens.position(perm[start + m]);
      std::copy(src.begin(), src.end(), pos.begin() + static_cast<std::ptrdiff_t>(m * dim));
    }
    ParticleEnsemble sub(std::move(pos), dim);
    for (std::size_t m = 0; m < size; ++m) sub.energies_mut()[m] = energies[perm[start + m]];
    sub.mark_fresh();
    for (std::size_t s = 0; s < cfg.sweeps; ++s) {
      const auto valpha = cfg.global_consensus ? global : consensus_point(sub, cfg.kbo.alpha).point;
      nanbu_step(sub, valpha, cfg.kbo, loss, kbo_batch_key(step, g, s));
    }
    for (std::size_t m = 0; m < size; ++m) {
      auto src = sub.position(m);
      std::copy(src.begin(), src.end(), ens.position(perm[start + m]).begin());
      energies[perm[start + m]] = sub.energy(m);
    }
    start += size;
  }
  ens.mark_fresh();
}

MinibatchResult kbo_minibatch(std::size_t n_data, const BatchLoss& loss, ParticleEnsemble ens,
                              const KboTrainConfig& cfg, const EpochHook& hook) {
  cfg.kbo.validate();
  if (n_data == 0) throw ConfigError("kbo training needs data");
  if (cfg.data_batch < 1) throw ConfigError("data batch size must be >= 1");
  if (cfg.epochs < 1) throw ConfigError("kbo training needs at least one epoch");
  if (cfg.sweeps < 1) throw ConfigError("kbo training needs at least one sweep per batch");
  if (ens.count() < 2) throw ConfigError("kbo training needs at least two particles");

  MinibatchResult r;
  auto order = all_indices(n_data);
  StallMonitor stall(cfg.kbo.n_stall, cfg.kbo.delta_stall,
                     std::vector<double>(ens.dim(), std::numeric_limits<double>::quiet_NaN()));
  double count_sum = 0.0;

  for (std::size_t e = 0; e < cfg.epochs && !r.stalled; ++e) {
    RngStream rng(cfg.kbo.seed, stream_id(kDataTag, e));
    shuffle(order, rng);
    for (std::size_t start = 0; start < n_data; start += cfg.data_batch) {
      const std::span<const std::size_t> batch(order.data() + start, std::min(cfg.data_batch, n_data - start));
      const EnergyFn energy = [&loss, batch](std::span<const double> x) { return loss(x, batch); };
      const auto& red = cfg.kbo.reduction;
      const bool reduce = red.mu > 0.0 && (r.steps + 1) % red.t_r == 0;
      const double s_prev = reduce ? ensemble_spread(ens) : 0.0;
      kbo_batch_update(ens, energy, cfg, r.steps);
      ++r.steps;
      if (reduce) {
        RngStream rr(cfg.kbo.seed, stream_id(kReduceTag, r.steps));
        ens = reduce_particles(ens, s_prev, red.mu, red.n_min, rr);
      }
      if (!ens.all_finite()) throw NumericError("particle positions became non-finite at batch " + std::to_string(r.steps));
      r.consensus = consensus_point(ens, cfg.kbo.alpha).point;
      count_sum += static_cast<double>(ens.count());
      if (stall.update(r.consensus)) {
        r.stalled = true;
        break;
      }
    }
    r.epochs = e + 1;
    if (hook) hook(e, r.consensus);
  }
  r.final_particles = ens.count();
  r.avg_particles = count_sum / static_cast<double>(r.steps);
  return r;
}

TrainResult kbo_train(const Dataset& train, const Dataset& validation, const KboTrainConfig& cfg) {
  check_dataset(train, "kbo_train");
  check_dataset(validation, "kbo_train");
  const NetShape shape = shape_of(train);
  auto init = ensemble_init(cfg.particles, shape.param_count(), InitLaw::gaussian(0.0, cfg.init_std), cfg.kbo.seed);

  TrainResult result{ShallowNetParams(shape), {}, {}, 0, 0.0};
  const BatchLoss loss = [&train, shape](std::span<const double> x, std::span<const std::size_t> batch) {
    return flat_loss(shape, x, train, batch);
  };
  const EpochHook hook = [&](std::size_t, std::span<const double> consensus) {
    result.params = ShallowNetParams::from_flat(shape, consensus);
    result.loss.push_back(flat_loss(shape, consensus, train, {}));
    result.accuracy.push_back(accuracy(result.params, validation));
  };
  const auto r = kbo_minibatch(train.size(), loss, std::move(init), cfg, hook);
  result.params = ShallowNetParams::from_flat(shape, r.consensus);
  result.final_particles = r.final_particles;
  result.avg_particles = r.avg_particles;
  return result;
}

}  // namespace kbo
