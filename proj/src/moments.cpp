#include "atmom/moments.hpp"

#include <cmath>
#include <limits>

#include "atmom/error.hpp"

namespace atmom {

void ema_update(EmaState& state, std::span<const double> g) {
  require_same_size(g.size(), state.m.size(), "ema_update");
  const double beta = state.beta;
  for (std::size_t j = 0; j < g.size(); ++j) state.m[j] = beta * state.m[j] + (1.0 - beta) * g[j];
  ++state.t;
}

TMomentState TMomentState::zeros(std::size_t dim, double beta, double eps, WeightDecay decay) {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("TMomentState: beta must lie in (0, 1)");
  TMomentState s;
  s.m.assign(dim, 0.0);
  s.sigma2.assign(dim, 0.0);
  s.beta = beta;
  s.eps = eps;
  s.decay = decay;
  s.W = beta / (1.0 - beta);
  return s;
}

double mahalanobis_sq(std::span<const double> m, std::span<const double> variance, double eps,
                      std::span<const double> g) {
  require_same_size(g.size(), m.size(), "mahalanobis_sq");
  require_same_size(variance.size(), m.size(), "mahalanobis_sq");
  double d = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double dev = g[j] - m[j];
    d += dev * dev / (variance[j] + eps);
  }
  return d;
}

double mahalanobis_sq(const TMomentState& state, std::span<const double> g) {
  return mahalanobis_sq(state.m, state.sigma2, state.eps, g);
}

double t_weight(double nu, double dim, double distance) {
  if (!(nu > 0.0)) throw DomainError("t-momentum: nu must be positive");
  if (std::isinf(nu)) return 1.0;
  return (nu + dim) / (nu + distance);
}

TMomentStep t_momentum_update_with_distance(TMomentState& state, std::span<const double> g,
                                            double nu, double distance) {
  require_same_size(g.size(), state.m.size(), "t_momentum_update");
  TMomentStep step;
  step.distance = distance;
  step.w = t_weight(nu, static_cast<double>(g.size()), distance);
  step.beta_w = state.W / (state.W + step.w);

  const double bw = step.beta_w;
  for (std::size_t j = 0; j < g.size(); ++j) state.m[j] = bw * state.m[j] + (1.0 - bw) * g[j];

  switch (state.decay) {
    case WeightDecay::modified:
      state.W = state.beta * (state.W + step.w);
      break;
    case WeightDecay::original:
      state.W = ((2.0 * state.beta - 1.0) / state.beta) * state.W + step.w;
      break;
  }
  ++state.t;
  return step;
}

TMomentStep t_momentum_update(TMomentState& state, std::span<const double> g, double nu) {
  if (!(nu > 0.0)) throw DomainError("t-momentum: nu must be positive");
  const double distance = mahalanobis_sq(state, g);
  return t_momentum_update_with_distance(state, g, nu, distance);
}

void ema_variance_update(TMomentState& state, std::span<const double> g, double beta2) {
  require_same_size(g.size(), state.sigma2.size(), "ema_variance_update");
  for (std::size_t j = 0; j < g.size(); ++j)
    state.sigma2[j] = beta2 * state.sigma2[j] + (1.0 - beta2) * g[j] * g[j];
}

}  // namespace atmom
