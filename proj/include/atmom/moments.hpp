#pragma once

#include <cstdint>
#include <span>

#include "atmom/numerics.hpp"

namespace atmom {

inline constexpr double kDefaultEps = 1e-8;

struct EmaState {
  Vec m;
  double beta = 0.9;
  std::uint64_t t = 0;

  static EmaState zeros(std::size_t dim, double beta) { return {Vec(dim, 0.0), beta, 0}; }
};

// m <- beta m + (1 - beta) g
void ema_update(EmaState& state, std::span<const double> g);

// How the accumulated weight W is decayed.
//   modified: W <- beta (W + w)
//   original: W <- ((2 beta - 1) / beta) W + w
enum class WeightDecay { modified, original };

struct TMomentState {
  Vec m;
  double W = 0.0;
  Vec sigma2;
  double beta = 0.9;
  double eps = kDefaultEps;
  WeightDecay decay = WeightDecay::modified;
  std::uint64_t t = 0;

  // W starts at beta / (1 - beta), the fixed point of both decay rules under w = 1,
  // so the first Gaussian-limit step has beta_w = beta exactly like the plain EMA.
  static TMomentState zeros(std::size_t dim, double beta, double eps = kDefaultEps,
                            WeightDecay decay = WeightDecay::modified);
};

struct TMomentStep {
  double distance = 0.0;  // squared Mahalanobis distance D
  double w = 0.0;
  double beta_w = 0.0;
};

// D = sum_j (g_j - m_j)^2 / (variance_j + eps)
double mahalanobis_sq(std::span<const double> m, std::span<const double> variance, double eps,
                      std::span<const double> g);
double mahalanobis_sq(const TMomentState& state, std::span<const double> g);

// w = (nu + d) / (nu + D); nu = +inf gives w = 1 exactly.
double t_weight(double nu, double dim, double distance);

// Full t-momentum step with nu fixed; D is computed against state.sigma2.
TMomentStep t_momentum_update(TMomentState& state, std::span<const double> g, double nu);

// Same, but with D supplied by the caller (used when the gate variance differs from
// state.sigma2, e.g. during warmup).
TMomentStep t_momentum_update_with_distance(TMomentState& state, std::span<const double> g,
                                            double nu, double distance);

// sigma2 <- beta2 sigma2 + (1 - beta2) g*g
void ema_variance_update(TMomentState& state, std::span<const double> g, double beta2);

}  // namespace atmom
