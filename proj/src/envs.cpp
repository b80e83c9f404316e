#include "atmom/envs.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "atmom/error.hpp"

namespace atmom {

Vec Env::reset(Rng& rng) {
  steps_ = 0;
  done_ = false;
  return do_reset(rng);
}

StepResult Env::step(std::span<const double> action) {
  if (done_) throw PreconditionError("Env::step: episode is over, call reset()");
  require_same_size(action.size(), action_dim(), "Env::step (action)");
  auto [state, success] = do_step(action);
  ++steps_;
  done_ = success || steps_ >= budget_;
  return {std::move(state), success, done_};
}

// ---------------------------------------------------------------------------

PointMassPickDrop::PointMassPickDrop(PointMassParams params) : Env(params.budget), params_(params) {
  if (!(params_.max_step > 0.0)) throw DomainError("PointMassPickDrop: max_step must be positive");
  if (!(params_.r_pick > 0.0) || !(params_.r_drop > 0.0))
    throw DomainError("PointMassPickDrop: radii must be positive");
  if (!(params_.layout_jitter >= 0.0) || !std::isfinite(params_.layout_jitter))
    throw DomainError("PointMassPickDrop: layout_jitter must be finite and >= 0");
}

namespace {

double dist(const double* a, const double* b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

// Scales (dx, dy) down to at most max_len in Euclidean norm.
void clip_norm(double& dx, double& dy, double max_len) {
  const double n = std::hypot(dx, dy);
  if (n > max_len) {
    dx *= max_len / n;
    dy *= max_len / n;
  }
}

}  // namespace

Vec PointMassPickDrop::observe() const {
  return {agent_[0],  agent_[1], object_[0], object_[1], carried_ ? 1.0 : 0.0,
          goal_[0],   goal_[1],  goal_[0] - object_[0], goal_[1] - object_[1]};
}

Vec PointMassPickDrop::do_reset(Rng& rng) {
  agent_[0] = rng.uniform();
  agent_[1] = rng.uniform();
  if (params_.random_layout) {
    for (double* p : {object_, goal_}) {
      p[0] = rng.uniform();
      p[1] = rng.uniform();
    }
  } else {
    const double j = params_.layout_jitter;
    for (int i = 0; i < 2; ++i) object_[i] = kObjectHome[i] + j * (2.0 * rng.uniform() - 1.0);
    for (int i = 0; i < 2; ++i) goal_[i] = kGoalHome[i] + j * (2.0 * rng.uniform() - 1.0);
  }
  carried_ = dist(agent_, object_) <= params_.r_pick;
  if (carried_) {
    object_[0] = agent_[0];
    object_[1] = agent_[1];
  }
  return observe();
}

Vec PointMassPickDrop::executed_action(std::span<const double> action) const {
  require_same_size(action.size(), 2, "PointMassPickDrop::executed_action");
  double dx = action[0], dy = action[1];
  if (!std::isfinite(dx) || !std::isfinite(dy)) dx = dy = 0.0;
  clip_norm(dx, dy, params_.max_step);
  return {dx, dy};
}

std::pair<Vec, bool> PointMassPickDrop::do_step(std::span<const double> action) {
  const Vec a = executed_action(action);
  const double dx = a[0], dy = a[1];
  agent_[0] += dx;
  agent_[1] += dy;
  if (!carried_ && dist(agent_, object_) <= params_.r_pick) carried_ = true;
  bool success = false;
  if (carried_) {
    object_[0] = agent_[0];
    object_[1] = agent_[1];
    if (dist(object_, goal_) <= params_.r_drop) {
      carried_ = false;
      success = true;
    }
  }
  return {observe(), success};
}

Vec PointMassPickDrop::controller(std::span<const double> state) const {
  require_same_size(state.size(), 9, "PointMassPickDrop::controller");
  const bool carried = state[4] > 0.5;
  const double tx = carried ? state[5] : state[2];
  const double ty = carried ? state[6] : state[3];
  double dx = tx - state[0];
  double dy = ty - state[1];
  clip_norm(dx, dy, params_.max_step);
  return {dx, dy};
}

Vec PointMassPickDrop::expert_action(std::span<const double> state, Rng&) const {
  return controller(state);
}

std::unique_ptr<Env> PointMassPickDrop::clone() const {
  return std::make_unique<PointMassPickDrop>(params_);
}

std::unique_ptr<Env> pointmass_pickdrop_env(PointMassParams params) {
  return std::make_unique<PointMassPickDrop>(params);
}

// ---------------------------------------------------------------------------

LinGaussEnv::LinGaussEnv(LinGaussParams params) : Env(1), params_(std::move(params)) {
  if (params_.state_dim == 0 || params_.action_dim == 0)
    throw ShapeError("LinGaussEnv: dimensions must be positive");
  if (params_.noise_std < 0.0) throw DomainError("LinGaussEnv: noise_std must be >= 0");
  if (params_.matrix.empty()) {
    params_.matrix.assign(params_.action_dim * params_.state_dim, 0.0);
    for (std::size_t i = 0; i < std::min(params_.action_dim, params_.state_dim); ++i)
      params_.matrix[i * params_.state_dim + i] = 1.0;
  }
  require_same_size(params_.matrix.size(), params_.action_dim * params_.state_dim,
                    "LinGaussEnv (matrix)");
}

Vec LinGaussEnv::optimal_action(std::span<const double> state) const {
  require_same_size(state.size(), params_.state_dim, "LinGaussEnv::optimal_action");
  Vec a(params_.action_dim, 0.0);
  for (std::size_t i = 0; i < params_.action_dim; ++i)
    for (std::size_t j = 0; j < params_.state_dim; ++j)
      a[i] += params_.matrix[i * params_.state_dim + j] * state[j];
  return a;
}

Vec LinGaussEnv::expert_action(std::span<const double> state, Rng& rng) const {
  Vec a = optimal_action(state);
  for (auto& v : a) v += params_.noise_std * rng.normal();
  return a;
}

double LinGaussEnv::nll_floor_per_dim() const {
  // Differential entropy of N(0, noise_std^2); -inf when the noise vanishes.
  const double var = params_.noise_std * params_.noise_std;
  return 0.5 * std::log(2.0 * std::numbers::pi * var) + 0.5;
}

Vec LinGaussEnv::do_reset(Rng& rng) {
  state_.resize(params_.state_dim);
  for (auto& v : state_) v = rng.normal();
  return state_;
}

std::pair<Vec, bool> LinGaussEnv::do_step(std::span<const double> action) {
  const Vec target = optimal_action(state_);
  bool ok = true;
  for (std::size_t i = 0; i < target.size(); ++i)
    ok = ok && std::abs(action[i] - target[i]) < params_.success_threshold;
  return {state_, ok};
}

std::unique_ptr<Env> LinGaussEnv::clone() const { return std::make_unique<LinGaussEnv>(params_); }

std::unique_ptr<Env> lingauss_env(LinGaussParams params) {
  return std::make_unique<LinGaussEnv>(std::move(params));
}

// ---------------------------------------------------------------------------

ScriptedDemonstrator ScriptedDemonstrator::amateur(std::optional<HeavyTailNoise> noise,
                                                   std::optional<Hesitation> hesitation) {
  ScriptedDemonstrator d;
  d.kind = Provenance::amateur;
  d.heavy_tail = noise;
  d.hesitation = hesitation;
  return d;
}

Vec ScriptedDemonstrator::act(const Env& env, std::span<const double> state, Rng& rng) const {
  Vec a = env.expert_action(state, rng);
  if (kind == Provenance::expert) return a;
  if (hesitation) {
    const double u = rng.uniform();
    if (u < hesitation->p_pause) {
      for (auto& v : a) v = 0.0;
      return a;
    }
    if (u < hesitation->p_pause + hesitation->p_wrong) {
      for (auto& v : a) v = -v;
      return a;
    }
  }
  if (heavy_tail && rng.uniform() < heavy_tail->prob) {
    for (auto& v : a) v += heavy_tail->scale * sample_student_t(rng, heavy_tail->nu, 1)[0];
  }
  return a;
}

std::vector<Trajectory> record_demos(Env& env, const ScriptedDemonstrator& demonstrator,
                                     std::size_t n, Rng& rng, bool successful_only) {
  if (n == 0) throw PreconditionError("record_demos: n must be at least 1");
  if (demonstrator.kind == Provenance::expert &&
      (demonstrator.heavy_tail || demonstrator.hesitation))
    throw PreconditionError("record_demos: expert demonstrators carry no corruption");
  std::vector<Trajectory> out;
  const std::size_t max_attempts = successful_only ? 100 * n : n;
  for (std::size_t attempt = 0; attempt < max_attempts && out.size() < n; ++attempt) {
    Trajectory traj;
    traj.provenance = demonstrator.kind;
    Vec state = env.reset(rng);
    while (!env.done()) {
      Vec action = demonstrator.act(env, state, rng);
      StepResult r = env.step(action);
      traj.pairs.push_back({std::move(state), env.executed_action(action)});
      state = std::move(r.state);
      traj.success = r.success;
    }
    if (successful_only && !traj.success) continue;
    out.push_back(std::move(traj));
  }
  if (out.size() < n)
    throw DomainError("record_demos: could not collect enough successful episodes");
  return out;
}

}  // namespace atmom
