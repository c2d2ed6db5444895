#include "kbo/core.hpp"

#include <cmath>
#include <numeric>

namespace kbo {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t stream_id(std::uint64_t tag, std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t h = mix64(tag + kGolden);
  h = mix64(h ^ (a + 0x632be59bd9b4e019ULL));
  h = mix64(h ^ (b + 0x85157af5ULL * kGolden));
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) noexcept
    : seed_(seed), stream_(stream), state_(mix64(seed ^ mix64(stream + kGolden))) {}

RngStream::result_type RngStream::operator()() noexcept {
  state_ += kGolden;
  return mix64(state_);
}

double RngStream::uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

double RngStream::normal() { return normal_(*this); }

std::size_t RngStream::index(std::size_t n) noexcept {
  const unsigned __int128 product = static_cast<unsigned __int128>((*this)()) * n;
  return static_cast<std::size_t>(product >> 64);
}

// ---------------------------------------------------------------------------

ParticleEnsemble::ParticleEnsemble(std::size_t count, std::size_t dim)
    : count_(count), dim_(dim), positions_(count * dim, 0.0), energies_(count, 0.0) {}

ParticleEnsemble::ParticleEnsemble(std::vector<double> positions, std::size_t dim)
    : dim_(dim), positions_(std::move(positions)) {
  if (dim == 0 || positions_.size() % dim != 0) {
    throw ConfigError("position buffer size is not a multiple of dim");
  }
  count_ = positions_.size() / dim;
  energies_.assign(count_, 0.0);
}

void ParticleEnsemble::keep(std::span<const std::size_t> indices) {
  std::vector<double> pos;
  std::vector<double> en;
  pos.reserve(indices.size() * dim_);
  en.reserve(indices.size());
  for (std::size_t i : indices) {
    auto p = position(i);
    pos.insert(pos.end(), p.begin(), p.end());
    en.push_back(energies_[i]);
  }
  positions_ = std::move(pos);
  energies_ = std::move(en);
  count_ = indices.size();
}

bool ParticleEnsemble::all_finite() const noexcept {
  for (double x : positions_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

ParticleEnsemble ensemble_init(std::size_t n, std::size_t dim, const InitLaw& law, std::uint64_t seed) {
  if (n < 1 || dim < 1) throw ConfigError("ensemble_init: need n >= 1 and dim >= 1");
  if (law.kind == InitLaw::Kind::uniform && !(law.a < law.b)) {
    throw ConfigError("ensemble_init: uniform law needs lo < hi");
  }
  if (law.kind == InitLaw::Kind::gaussian && !(law.b > 0.0)) {
    throw ConfigError("ensemble_init: gaussian law needs std > 0");
  }
  ParticleEnsemble ens(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(seed, stream_id(0x1417, i));
    for (double& x : ens.position(i)) {
      x = law.kind == InitLaw::Kind::uniform ? rng.uniform(law.a, law.b) : law.a + law.b * rng.normal();
    }
  }
  ens.mark_stale();
  return ens;
}

// ---------------------------------------------------------------------------

DomainMap::DomainMap(std::vector<double> lo, std::vector<double> hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size()) throw ConfigError("domain bounds differ in length");
  half_.resize(lo_.size());
  for (std::size_t k = 0; k < lo_.size(); ++k) {
    if (!(lo_[k] < hi_[k])) {
      throw ConfigError("domain bound lo >= hi in coordinate " + std::to_string(k));
    }
    half_[k] = 0.5 * (hi_[k] - lo_[k]);
  }
}

void DomainMap::to_domain(std::span<const double> u, std::span<double> x) const noexcept {
  for (std::size_t k = 0; k < lo_.size(); ++k) x[k] = lo_[k] + (u[k] + 1.0) * half_[k];
}

void DomainMap::from_domain(std::span<const double> x, std::span<double> u) const noexcept {
  for (std::size_t k = 0; k < lo_.size(); ++k) u[k] = (x[k] - lo_[k]) / half_[k] - 1.0;
}

std::vector<double> rescale_to_domain(std::span<const double> u, std::span<const double> lo,
                                      std::span<const double> hi) {
  DomainMap map({lo.begin(), lo.end()}, {hi.begin(), hi.end()});
  if (u.size() != map.dim()) throw ConfigError("rescale_to_domain: dimension mismatch");
  std::vector<double> x(u.size());
  map.to_domain(u, x);
  return x;
}

std::vector<double> rescale_from_domain(std::span<const double> x, std::span<const double> lo,
                                        std::span<const double> hi) {
  DomainMap map({lo.begin(), lo.end()}, {hi.begin(), hi.end()});
  if (x.size() != map.dim()) throw ConfigError("rescale_from_domain: dimension mismatch");
  std::vector<double> u(x.size());
  map.from_domain(x, u);
  return u;
}

// ---------------------------------------------------------------------------

void KboConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(lambda1 >= 0.0 && lambda2 >= 0.0, "lambda1 and lambda2 must be >= 0");
  require(sigma1 >= 0.0 && sigma2 >= 0.0, "sigma1 and sigma2 must be >= 0");
  require(epsilon > 0.0, "epsilon must be > 0");
  require(alpha > 0.0 && beta > 0.0, "alpha and beta must be > 0");
  require(reduction.mu >= 0.0 && reduction.mu <= 1.0, "reduction mu must lie in [0,1]");
  require(reduction.n_min >= 2, "reduction n_min must be >= 2");
  require(reduction.t_r >= 1, "reduction t_r must be >= 1");
  require(n_stall >= 1, "n_stall must be >= 1");
  require(delta_stall >= 0.0, "delta_stall must be >= 0");
  require(record_every >= 1, "record_every must be >= 1");
}

std::vector<std::string> KboConfig::warnings() const {
  std::vector<std::string> out;
  if (epsilon * (lambda1 + lambda2) > 1.0) {
    out.push_back("epsilon*(lambda1+lambda2) > 1: collisions are not contractive in mean");
  }
  return out;
}

std::string to_string(Diffusion d) { return d == Diffusion::isotropic ? "isotropic" : "anisotropic"; }

std::string to_string(Pairing p) { return p == Pairing::random_partner ? "random" : "permutation"; }

Diffusion parse_diffusion(const std::string& s) {
  if (s == "isotropic" || s == "iso") return Diffusion::isotropic;
  if (s == "anisotropic" || s == "aniso") return Diffusion::anisotropic;
  throw ConfigError("unknown diffusion mode: " + s);
}

Pairing parse_pairing(const std::string& s) {
  if (s == "random") return Pairing::random_partner;
  if (s == "permutation") return Pairing::permutation;
  throw ConfigError("unknown pairing mode: " + s);
}

}  // namespace kbo
