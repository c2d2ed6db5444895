#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kbo {

/// Bounds used by the convergence diagnostics: c1 >= sup |grad E|, c2 >= sup |d_ii E|.
struct Smoothness {
  double c1 = 0.0;
  double c2 = 0.0;
  bool estimated = false;
};

/// A black-box cost function on R^d with its search box and, when known, its minimizer.
/// Immutable after construction and safe to evaluate concurrently.
class Objective {
 public:
  using Fn = std::function<double(std::span<const double>)>;

  Objective(std::string name, std::size_t dim, Fn fn, std::vector<double> lower, std::vector<double> upper);

  double operator()(std::span<const double> x) const { return fn_(x); }

  const std::string& name() const noexcept { return name_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> lower() const noexcept { return lower_; }
  std::span<const double> upper() const noexcept { return upper_; }
  const std::optional<std::vector<double>>& minimizer() const noexcept { return minimizer_; }
  const std::optional<double>& min_value() const noexcept { return min_value_; }
  const std::optional<Smoothness>& smoothness() const noexcept { return smoothness_; }

  Objective& set_minimizer(std::vector<double> x, double value);
  Objective& set_smoothness(Smoothness s);

 private:
  std::string name_;
  std::size_t dim_;
  Fn fn_;
  std::vector<double> lower_, upper_;
  std::optional<std::vector<double>> minimizer_;
  std::optional<double> min_value_;
  std::optional<Smoothness> smoothness_;
};

enum class Benchmark {
  sphere,
  styblinski_tang,
  ackley,
  griewank,
  neg_exponential,
  rastrigin,
  schwefel222,
  schwefel223,
  salomon,
  sum_of_squares,
};

struct BenchmarkOptions {
  /// When set, Sphere and Negative Exponential draw their shift b from U[-5,5]^d with this seed.
  /// Otherwise b = 0.
  std::optional<std::uint64_t> shift_seed;
};

/// Lowercase registry names accepted by the CLI, e.g. "rastrigin", "schwefel222".
const std::vector<std::string>& benchmark_names();
std::optional<Benchmark> parse_benchmark(std::string_view name);
std::string benchmark_name(Benchmark b);

Objective benchmark(Benchmark which, std::size_t dim, const BenchmarkOptions& opts = {});
/// Throws ConfigError for unknown names.
Objective benchmark(std::string_view name, std::size_t dim, const BenchmarkOptions& opts = {});

/// Monte Carlo estimate of (c1, c2) from central differences at uniformly sampled domain points.
Smoothness estimate_smoothness(const Objective& obj, std::size_t samples, std::uint64_t seed);

/// L(x) = (1/n) sum_i exp(sin(2x^2)) + (x - xi_i - pi/2)^2 / 10 with xi_i ~ N(0, 0.01) frozen at
/// construction. Exposes per-sample values and gradients for SGD.
class SampleObjective {
 public:
  SampleObjective(std::size_t n, double noise_std, std::uint64_t seed);

  std::size_t size() const noexcept { return xi_.size(); }
  std::span<const double> samples() const noexcept { return xi_; }

  static double sample_value(double x, double xi);
  static double sample_gradient(double x, double xi);
  double sample_value(double x, std::size_t i) const { return sample_value(x, xi_[i]); }
  double sample_gradient(double x, std::size_t i) const { return sample_gradient(x, xi_[i]); }

  /// Full-sample mean value and gradient, O(1) via the sample moments of xi.
  double value(double x) const;
  double gradient(double x) const;
  /// Same quantities by direct summation over all samples.
  double value_direct(double x) const;

  /// Global minimizer on [-3, 3], located by a dense scan refined with golden-section search.
  double minimizer() const noexcept { return x_star_; }

  /// 1-D Objective view over [-3, 3] with the minimizer recorded.
  Objective as_objective() const;

 private:
  std::vector<double> xi_;
  double mean_xi_ = 0.0;
  double mean_xi2_ = 0.0;
  double x_star_ = 0.0;
};

}  // namespace kbo
