#include "kbo/dynamics.hpp"

#include <cmath>

#include "kbo/estimators.hpp"

namespace kbo {

CollisionParams CollisionParams::from(const KboConfig& cfg) {
  return {cfg.lambda1, cfg.lambda2, cfg.sigma1, cfg.sigma2, cfg.epsilon, cfg.beta, cfg.diffusion};
}

void diffusion_scale(Diffusion mode, std::span<const double> diff, std::span<double> amplitude) {
  if (mode == Diffusion::isotropic) {
    double s = 0.0;
    for (double x : diff) s += x * x;
    const double norm = std::sqrt(s);
    for (double& a : amplitude) a = norm;
  } else {
    for (std::size_t k = 0; k < diff.size(); ++k) amplitude[k] = std::abs(diff[k]);
  }
}

std::vector<double> diffusion_scale(Diffusion mode, std::span<const double> diff) {
  std::vector<double> out(diff.size());
  diffusion_scale(mode, diff, out);
  return out;
}

namespace {

// Applies drift + noise given the two drift directions. Draws xi1 (dim) then xi2 (dim).
void apply(std::span<const double> v, std::span<const double> d_beta, std::span<const double> d_alpha,
           double drift1, double drift2, double noise1, double noise2, Diffusion mode, RngStream& rng,
           std::span<double> out) {
  const std::size_t dim = v.size();
  double norm_b = 0.0, norm_a = 0.0;
  if (mode == Diffusion::isotropic) {
    for (std::size_t k = 0; k < dim; ++k) {
      norm_b += d_beta[k] * d_beta[k];
      norm_a += d_alpha[k] * d_alpha[k];
    }
    norm_b = std::sqrt(norm_b);
    norm_a = std::sqrt(norm_a);
  }
  for (std::size_t k = 0; k < dim; ++k) {
    const double amp = mode == Diffusion::isotropic ? norm_b : std::abs(d_beta[k]);
    out[k] = v[k] + drift1 * d_beta[k] + drift2 * d_alpha[k] + noise1 * amp * rng.normal();
  }
  for (std::size_t k = 0; k < dim; ++k) {
    const double amp = mode == Diffusion::isotropic ? norm_a : std::abs(d_alpha[k]);
    out[k] += noise2 * amp * rng.normal();
  }
}

}  // namespace

void interact(std::span<const double> v, std::span<const double> partner, double e_v, double e_partner,
              std::span<const double> v_alpha, const CollisionParams& p, RngStream& rng, std::span<double> out) {
  const std::size_t dim = v.size();
  thread_local std::vector<double> scratch;
  scratch.resize(2 * dim);
  std::span<double> d_beta(scratch.data(), dim);
  std::span<double> d_alpha(scratch.data() + dim, dim);
  pair_best(v, partner, e_v, e_partner, p.beta, d_beta);
  for (std::size_t k = 0; k < dim; ++k) {
    d_beta[k] -= v[k];
    d_alpha[k] = v_alpha[k] - v[k];
  }
  const double sq = std::sqrt(p.epsilon);
  apply(v, d_beta, d_alpha, p.epsilon * p.lambda1, p.epsilon * p.lambda2, sq * p.sigma1, sq * p.sigma2,
        p.diffusion, rng, out);
}

CollisionResult collide(std::span<const double> v, std::span<const double> v_star, double e_v, double e_star,
                        std::span<const double> v_alpha, const CollisionParams& p, RngStream& rng) {
  CollisionResult r{std::vector<double>(v.size()), std::vector<double>(v.size())};
  interact(v, v_star, e_v, e_star, v_alpha, p, rng, r.v);
  interact(v_star, v, e_star, e_v, v_alpha, p, rng, r.v_star);
  return r;
}

CollisionResult collide_micro(std::span<const double> v, std::span<const double> v_star, double e_v,
                              double e_star, const CollisionParams& p, RngStream& rng) {
  const std::size_t dim = v.size();
  const std::vector<double> zero(dim, 0.0);
  std::vector<double> d(dim);
  const double sq = std::sqrt(p.epsilon);
  CollisionResult r{std::vector<double>(dim), std::vector<double>(dim)};

  const double g = gamma_weight(e_v, e_star, p.beta);
  for (std::size_t k = 0; k < dim; ++k) d[k] = g * (v_star[k] - v[k]);
  apply(v, d, zero, p.epsilon * p.lambda1, 0.0, sq * p.sigma1, 0.0, p.diffusion, rng, r.v);

  const double g_star = gamma_weight(e_star, e_v, p.beta);
  for (std::size_t k = 0; k < dim; ++k) d[k] = g_star * (v[k] - v_star[k]);
  apply(v_star, d, zero, p.epsilon * p.lambda1, 0.0, sq * p.sigma1, 0.0, p.diffusion, rng, r.v_star);
  return r;
}

CollisionResult collide_macro(std::span<const double> v, std::span<const double> v_star,
                              std::span<const double> v_alpha, const CollisionParams& p, RngStream& rng) {
  const std::size_t dim = v.size();
  const std::vector<double> zero(dim, 0.0);
  std::vector<double> d(dim);
  const double sq = std::sqrt(p.epsilon);
  CollisionResult r{std::vector<double>(dim), std::vector<double>(dim)};

  for (std::size_t k = 0; k < dim; ++k) d[k] = v_alpha[k] - v[k];
  apply(v, zero, d, 0.0, p.epsilon * p.lambda2, 0.0, sq * p.sigma2, p.diffusion, rng, r.v);
  for (std::size_t k = 0; k < dim; ++k) d[k] = v_alpha[k] - v_star[k];
  apply(v_star, zero, d, 0.0, p.epsilon * p.lambda2, 0.0, sq * p.sigma2, p.diffusion, rng, r.v_star);
  return r;
}

}  // namespace kbo
