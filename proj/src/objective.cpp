#include "kbo/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kbo/core.hpp"

namespace kbo {

Objective::Objective(std::string name, std::size_t dim, Fn fn, std::vector<double> lower, std::vector<double> upper)
    : name_(std::move(name)), dim_(dim), fn_(std::move(fn)), lower_(std::move(lower)), upper_(std::move(upper)) {
  if (dim_ == 0) throw ConfigError("objective dimension must be >= 1");
  if (lower_.size() != dim_ || upper_.size() != dim_) throw ConfigError("objective bounds have wrong length");
  for (std::size_t k = 0; k < dim_; ++k) {
    if (!(lower_[k] < upper_[k])) throw ConfigError("objective domain has lo >= hi");
  }
}

Objective& Objective::set_minimizer(std::vector<double> x, double value) {
  if (x.size() != dim_) throw ConfigError("minimizer has wrong dimension");
  minimizer_ = std::move(x);
  min_value_ = value;
  return *this;
}

Objective& Objective::set_smoothness(Smoothness s) {
  smoothness_ = s;
  return *this;
}

namespace {

using std::numbers::e;
using std::numbers::pi;

struct Entry {
  Benchmark id;
  const char* name;
};

constexpr Entry kRegistry[] = {
    {Benchmark::sphere, "sphere"},
    {Benchmark::styblinski_tang, "styblinskitang"},
    {Benchmark::ackley, "ackley"},
    {Benchmark::griewank, "griewank"},
    {Benchmark::neg_exponential, "negexp"},
    {Benchmark::rastrigin, "rastrigin"},
    {Benchmark::schwefel222, "schwefel222"},
    {Benchmark::schwefel223, "schwefel223"},
    {Benchmark::salomon, "salomon"},
    {Benchmark::sum_of_squares, "sumsquares"},
};

// Minimizer of 0.5 (x^4 - 16 x^2 + 5 x), refined to double precision.
constexpr double kStyblinskiTangArgmin = -2.9035340277711771;

std::vector<double> draw_shift(std::size_t dim, const BenchmarkOptions& opts) {
  std::vector<double> b(dim, 0.0);
  if (opts.shift_seed) {
    RngStream rng(*opts.shift_seed, stream_id(0x5b1f7));
    for (double& v : b) v = rng.uniform(-5.0, 5.0);
  }
  return b;
}

std::vector<double> box(std::size_t dim, double h) { return std::vector<double>(dim, h); }

}  // namespace

const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& entry : kRegistry) out.emplace_back(entry.name);
    return out;
  }();
  return names;
}

std::optional<Benchmark> parse_benchmark(std::string_view name) {
  for (const auto& entry : kRegistry) {
    if (name == entry.name) return entry.id;
  }
  // A few common aliases.
  if (name == "styblinski_tang" || name == "styblinski-tang") return Benchmark::styblinski_tang;
  if (name == "neg_exponential" || name == "negative_exponential") return Benchmark::neg_exponential;
  if (name == "sum_of_squares" || name == "sumofsquares") return Benchmark::sum_of_squares;
  return std::nullopt;
}

std::string benchmark_name(Benchmark b) {
  for (const auto& entry : kRegistry) {
    if (entry.id == b) return entry.name;
  }
  return "unknown";
}

Objective benchmark(std::string_view name, std::size_t dim, const BenchmarkOptions& opts) {
  auto id = parse_benchmark(name);
  if (!id) throw ConfigError("unknown benchmark: " + std::string(name));
  return benchmark(*id, dim, opts);
}

Objective benchmark(Benchmark which, std::size_t dim, const BenchmarkOptions& opts) {
  if (dim < 1) throw ConfigError("benchmark dimension must be >= 1");
  const auto d = static_cast<double>(dim);
  const std::string name = benchmark_name(which);
  switch (which) {
    case Benchmark::sphere: {
      auto b = draw_shift(dim, opts);
      Objective obj(name, dim,
                    [b](std::span<const double> x) {
                      double s = 0.0;
                      for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - b[i]) * (x[i] - b[i]);
                      return s;
                    },
                    box(dim, -5.0), box(dim, 5.0));
      double far = 0.0;
      for (double bi : b) far += std::pow(std::max(std::abs(-5.0 - bi), std::abs(5.0 - bi)), 2);
      obj.set_minimizer(b, 0.0).set_smoothness({2.0 * std::sqrt(far), 2.0, false});
      return obj;
    }
    case Benchmark::styblinski_tang: {
      Objective obj(name, dim,
                    [](std::span<const double> x) {
                      double s = 0.0;
                      for (double v : x) s += v * v * v * v - 16.0 * v * v + 5.0 * v;
                      return 0.5 * s;
                    },
                    box(dim, -5.0), box(dim, 5.0));
      std::vector<double> xs(dim, kStyblinskiTangArgmin);
      const double fmin = obj(xs);
      obj.set_minimizer(std::move(xs), fmin);
      return obj;
    }
    case Benchmark::ackley: {
      Objective obj(name, dim,
                    [d](std::span<const double> x) {
                      double sq = 0.0, cs = 0.0;
                      for (double v : x) {
                        sq += v * v;
                        cs += std::cos(2.0 * pi * v);
                      }
                      return -20.0 * std::exp(-0.2 * std::sqrt(sq / d)) - std::exp(cs / d) + 20.0 + e;
                    },
                    box(dim, -32.0), box(dim, 32.0));
      obj.set_minimizer(std::vector<double>(dim, 0.0), 0.0);
      return obj;
    }
    case Benchmark::griewank: {
      Objective obj(name, dim,
                    [](std::span<const double> x) {
                      double s = 0.0, p = 1.0;
                      for (std::size_t i = 0; i < x.size(); ++i) {
                        s += x[i] * x[i] / 4000.0;
                        p *= std::cos(x[i] / std::sqrt(static_cast<double>(i + 1)));
                      }
                      return 1.0 + s - p;
                    },
                    box(dim, -600.0), box(dim, 600.0));
      obj.set_minimizer(std::vector<double>(dim, 0.0), 0.0);
      return obj;
    }
    case Benchmark::neg_exponential: {
      auto b = draw_shift(dim, opts);
      Objective obj(name, dim,
                    [b](std::span<const double> x) {
                      double s = 0.0;
                      for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - b[i]) * (x[i] - b[i]);
                      return -std::exp(-0.5 * s);
                    },
                    box(dim, -5.0), box(dim, 5.0));
      obj.set_minimizer(b, -1.0);
      return obj;
    }
    case Benchmark::rastrigin: {
      // Carries the 1/d prefactor; the common textbook form omits it and adds 10 d instead.
      Objective obj(name, dim,
                    [d](std::span<const double> x) {
                      double s = 0.0;
                      for (double v : x) s += v * v - 10.0 * std::cos(2.0 * pi * v);
                      return s / d + 10.0;
                    },
                    box(dim, -5.12), box(dim, 5.12));
      obj.set_minimizer(std::vector<double>(dim, 0.0), 0.0);
      return obj;
    }
    case Benchmark::schwefel222: {
      Objective obj(name, dim,
                    [](std::span<const double> x) {
                      double s = 0.0, p = 1.0;
                      for (double v : x) {
                        s += std::abs(v);
                        p *= std::abs(v);
                      }
                      return s + p;
                    },
                    box(dim, -100.0), box(dim, 100.0));
      obj.set_minimizer(std::vector<double>(dim, 0.0), 0.0);
      return obj;
    }
    case Benchmark::schwefel223: {
      Objective obj(name, dim,
                    [](std::span<const double> x) {
                      double s = 0.0;
                      for (double v : x) {
                        const double v2 = v * v;
                        const double v4 = v2 * v2;
                        s += v4 * v4 * v2;
                      }
                      return s;
                    },
                    box(dim, -100.0), box(dim, 100.0));
      obj.set_minimizer(std::vector<double>(dim, 0.0), 0.0);
      return obj;
    }
    case Benchmark::salomon: {
      Objective obj(name, dim,
                    [](std::span<const double> x) {
                      double sq = 0.0;
                      for (double v : x) sq += v * v;
                      const double r = std::sqrt(sq);
                      return 1.0 - std::cos(2.0 * pi * r) + 0.1 * r;
                    },
                    box(dim, -100.0), box(dim, 100.0));
      obj.set_minimizer(std::vector<double>(dim, 0.0), 0.0);
      return obj;
    }
    case Benchmark::sum_of_squares: {
      Objective obj(name, dim,
                    [](std::span<const double> x) {
                      double s = 0.0;
                      for (std::size_t i = 0; i < x.size(); ++i) s += static_cast<double>(i + 1) * x[i] * x[i];
                      return s;
                    },
                    box(dim, -10.0), box(dim, 10.0));
      double g = 0.0;
      for (std::size_t i = 0; i < dim; ++i) g += std::pow(2.0 * static_cast<double>(i + 1) * 10.0, 2);
      obj.set_minimizer(std::vector<double>(dim, 0.0), 0.0).set_smoothness({std::sqrt(g), 2.0 * d, false});
      return obj;
    }
  }
  throw ConfigError("unhandled benchmark");
}

Smoothness estimate_smoothness(const Objective& obj, std::size_t samples, std::uint64_t seed) {
  const std::size_t dim = obj.dim();
  Smoothness out{0.0, 0.0, true};
  std::vector<double> x(dim), probe(dim);
  RngStream rng(seed, stream_id(0x5300));
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t k = 0; k < dim; ++k) x[k] = rng.uniform(obj.lower()[k], obj.upper()[k]);
    const double f0 = obj(x);
    double grad2 = 0.0;
    probe = x;
    for (std::size_t k = 0; k < dim; ++k) {
      const double h = 1e-5 * std::max(1.0, std::abs(x[k]));
      probe[k] = x[k] + h;
      const double fp = obj(probe);
      probe[k] = x[k] - h;
      const double fm = obj(probe);
      probe[k] = x[k];
      const double g = (fp - fm) / (2.0 * h);
      grad2 += g * g;
      // Second differences need a larger step to stay above roundoff.
      const double h2 = 1e-3 * std::max(1.0, std::abs(x[k]));
      probe[k] = x[k] + h2;
      const double fpp = obj(probe);
      probe[k] = x[k] - h2;
      const double fmm = obj(probe);
      probe[k] = x[k];
      out.c2 = std::max(out.c2, std::abs(fpp - 2.0 * f0 + fmm) / (h2 * h2));
    }
    out.c1 = std::max(out.c1, std::sqrt(grad2));
  }
  return out;
}

// ---------------------------------------------------------------------------

SampleObjective::SampleObjective(std::size_t n, double noise_std, std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample objective needs n >= 1");
  if (!(noise_std >= 0.0)) throw ConfigError("noise std must be >= 0");
  xi_.resize(n);
  RngStream rng(seed, stream_id(0x534f));
  for (double& v : xi_) v = noise_std * rng.normal();
  for (double v : xi_) {
    mean_xi_ += v;
    mean_xi2_ += v * v;
  }
  mean_xi_ /= static_cast<double>(n);
  mean_xi2_ /= static_cast<double>(n);

  // Dense scan, then golden-section refinement around the best grid point.
  constexpr int kGrid = 60000;
  double best_x = -3.0, best_f = value(-3.0);
  for (int i = 1; i <= kGrid; ++i) {
    const double x = -3.0 + 6.0 * i / kGrid;
    const double f = value(x);
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
  }
  double a = best_x - 6.0 / kGrid, b = best_x + 6.0 / kGrid;
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
    const double c = b - ratio * (b - a);
    const double d = a + ratio * (b - a);
    if (value(c) < value(d)) {
      b = d;
    } else {
      a = c;
    }
  }
  x_star_ = 0.5 * (a + b);
}

double SampleObjective::sample_value(double x, double xi) {
  const double r = x - xi - pi / 2.0;
  return std::exp(std::sin(2.0 * x * x)) + 0.1 * r * r;
}

double SampleObjective::sample_gradient(double x, double xi) {
  const double u = 2.0 * x * x;
  return std::exp(std::sin(u)) * std::cos(u) * 4.0 * x + 0.2 * (x - xi - pi / 2.0);
}

double SampleObjective::value(double x) const {
  const double c = x - pi / 2.0;
  return std::exp(std::sin(2.0 * x * x)) + 0.1 * (c * c - 2.0 * c * mean_xi_ + mean_xi2_);
}

double SampleObjective::gradient(double x) const {
  const double u = 2.0 * x * x;
  return std::exp(std::sin(u)) * std::cos(u) * 4.0 * x + 0.2 * (x - mean_xi_ - pi / 2.0);
}

double SampleObjective::value_direct(double x) const {
  double s = 0.0;
  for (double v : xi_) s += sample_value(x, v);
  return s / static_cast<double>(xi_.size());
}

Objective SampleObjective::as_objective() const {
  auto self = std::make_shared<SampleObjective>(*this);
  Objective obj("sgdtest", 1, [self](std::span<const double> x) { return self->value(x[0]); }, {-3.0}, {3.0});
  obj.set_minimizer({x_star_}, value(x_star_));
  return obj;
}

}  // namespace kbo
