#pragma once

#include <span>
#include <vector>

#include "kbo/core.hpp"

namespace kbo {

/// Collision coefficients. The kernel applies eps*lambda to the drifts and sqrt(eps)*sigma
/// to the noise, so eps = 1 gives the unscaled binary rule.
struct CollisionParams {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double epsilon = 1.0;
  double beta = 1.0;
  Diffusion diffusion = Diffusion::anisotropic;

  static CollisionParams from(const KboConfig& cfg);
};

/// Per-coordinate noise amplitude for a drift difference: ||diff||_2 on every coordinate
/// (isotropic) or |diff_k| (anisotropic; the sign is irrelevant under symmetric noise).
void diffusion_scale(Diffusion mode, std::span<const double> diff, std::span<double> amplitude);
std::vector<double> diffusion_scale(Diffusion mode, std::span<const double> diff);

/// Post-collision state of v against a partner, with the consensus point held fixed:
///   v' = v + eps l1 (v_beta - v) + eps l2 (v_alpha - v) + sqrt(eps) s1 D1 xi1 + sqrt(eps) s2 D2 xi2.
/// Always draws xi1 then xi2 (dim normals each) from rng, whatever the coefficients.
void interact(std::span<const double> v, std::span<const double> partner, double e_v, double e_partner,
              std::span<const double> v_alpha, const CollisionParams& p, RngStream& rng, std::span<double> out);

struct CollisionResult {
  std::vector<double> v;
  std::vector<double> v_star;
};

/// Full binary collision. v consumes (xi1, xi2) first, then v* consumes (xi1*, xi2*).
CollisionResult collide(std::span<const double> v, std::span<const double> v_star, double e_v, double e_star,
                        std::span<const double> v_alpha, const CollisionParams& p, RngStream& rng);

/// Microscopic-only collision (lambda2 = sigma2 = 0) written with the gamma weight:
///   v' = v + eps l1 gamma(v, v*) (v* - v) + sqrt(eps) s1 D(gamma (v* - v)) xi1.
/// Consumes the same draws as collide().
CollisionResult collide_micro(std::span<const double> v, std::span<const double> v_star, double e_v,
                              double e_star, const CollisionParams& p, RngStream& rng);

/// Macroscopic-only collision (lambda1 = sigma1 = 0). Consumes the same draws as collide().
CollisionResult collide_macro(std::span<const double> v, std::span<const double> v_star,
                              std::span<const double> v_alpha, const CollisionParams& p, RngStream& rng);

}  // namespace kbo
