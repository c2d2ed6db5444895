#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kbo {

/// Raised for invalid parameters, bounds or names.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an objective or a training loss produces a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

/// Mixes an arbitrary 64-bit value into a well-distributed one (SplitMix64 finalizer).
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Combines a tag and up to two indices into a stream id. Drivers use this to give
/// every (step, particle) its own stream so results do not depend on thread count.
std::uint64_t stream_id(std::uint64_t tag, std::uint64_t a = 0, std::uint64_t b = 0) noexcept;

/// Counter-based random stream keyed by (seed, stream). Two streams with the same
/// key produce identical sequences; constructing one is O(1).
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  /// Uniform on [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal draw.
  double normal();
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state_;
  std::normal_distribution<double> normal_;
};

// ---------------------------------------------------------------------------
// Particles
// ---------------------------------------------------------------------------

/// N particles in R^d stored row-major, plus a cache of their objective values.
class ParticleEnsemble {
 public:
  ParticleEnsemble() = default;
  ParticleEnsemble(std::size_t count, std::size_t dim);
  ParticleEnsemble(std::vector<double> positions, std::size_t dim);

  std::size_t count() const noexcept { return count_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<double> position(std::size_t i) noexcept { return {positions_.data() + i * dim_, dim_}; }
  std::span<const double> position(std::size_t i) const noexcept {
    return {positions_.data() + i * dim_, dim_};
  }
  std::span<double> positions() noexcept { return positions_; }
  std::span<const double> positions() const noexcept { return positions_; }

  /// Cached energies. Only meaningful while energies_fresh() is true.
  std::span<const double> energies() const noexcept { return energies_; }
  std::span<double> energies_mut() noexcept { return energies_; }
  double energy(std::size_t i) const noexcept { return energies_[i]; }
  bool energies_fresh() const noexcept { return fresh_; }
  void mark_fresh() noexcept { fresh_ = true; }
  void mark_stale() noexcept { fresh_ = false; }

  /// Keeps only the listed particles, in the given order.
  void keep(std::span<const std::size_t> indices);

  /// True if every coordinate is finite.
  bool all_finite() const noexcept;

 private:
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> positions_;
  std::vector<double> energies_;
  bool fresh_ = false;
};

/// Law used to draw the initial particles.
struct InitLaw {
  enum class Kind { uniform, gaussian };
  Kind kind = Kind::uniform;
  double a = -1.0;  // lo or mean
  double b = 1.0;   // hi or std

  static InitLaw uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static InitLaw gaussian(double mean, double std) { return {Kind::gaussian, mean, std}; }
};

/// Draws n i.i.d. particles from the law. Energies are left stale.
ParticleEnsemble ensemble_init(std::size_t n, std::size_t dim, const InitLaw& law, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Domain rescaling
// ---------------------------------------------------------------------------

/// Affine map from [-1,1]^d to the box [lo, hi] and back.
class DomainMap {
 public:
  DomainMap() = default;
  DomainMap(std::vector<double> lo, std::vector<double> hi);

  std::size_t dim() const noexcept { return lo_.size(); }
  void to_domain(std::span<const double> u, std::span<double> x) const noexcept;
  void from_domain(std::span<const double> x, std::span<double> u) const noexcept;
  /// Half-width of the box along coordinate k, i.e. dx/du.
  double scale(std::size_t k) const noexcept { return half_[k]; }
  std::span<const double> lower() const noexcept { return lo_; }
  std::span<const double> upper() const noexcept { return hi_; }

 private:
  std::vector<double> lo_, hi_, half_;
};

std::vector<double> rescale_to_domain(std::span<const double> u, std::span<const double> lo,
                                      std::span<const double> hi);
std::vector<double> rescale_from_domain(std::span<const double> x, std::span<const double> lo,
                                        std::span<const double> hi);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class Diffusion { isotropic, anisotropic };

/// How Nanbu picks collision partners.
enum class Pairing {
  random_partner,  // independent uniform partner per particle
  permutation,     // disjoint pairs from a random permutation
};

struct ReductionConfig {
  double mu = 0.0;
  std::size_t t_r = 10;
  std::size_t n_min = 10;
};

struct KboConfig {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double sigma1 = 0.1;
  double sigma2 = 6.0;
  double alpha = 5e6;
  double beta = 5e6;
  double epsilon = 0.01;
  Diffusion diffusion = Diffusion::anisotropic;
  std::size_t n_stall = 500;
  double delta_stall = 1e-4;
  std::size_t max_iters = 10000;
  ReductionConfig reduction{};
  std::uint64_t seed = 0;

  // Driver options.
  bool rescale = false;
  Pairing pairing = Pairing::random_partner;
  std::size_t record_every = 1;

  /// Throws ConfigError on violated invariants.
  void validate() const;
  /// Non-fatal findings, e.g. eps*(lambda1+lambda2) > 1.
  std::vector<std::string> warnings() const;
};

std::string to_string(Diffusion d);
std::string to_string(Pairing p);
Diffusion parse_diffusion(const std::string& s);
Pairing parse_pairing(const std::string& s);

}  // namespace kbo
