#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "atmom/demos.hpp"
#include "atmom/numerics.hpp"

namespace atmom {

struct StepResult {
  Vec state;
  bool success = false;
  bool done = false;
};

// Episodic environment. step() after done is a precondition error and success
// always ends the episode.
class Env {
 public:
  virtual ~Env() = default;

  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  std::size_t budget() const { return budget_; }

  Vec reset(Rng& rng);
  StepResult step(std::span<const double> action);
  bool done() const { return done_; }

  // What the expert demonstrator does in `state`. The rng carries any noise that is
  // inherent to the expert's behaviour (none for the point-mass task).
  virtual Vec expert_action(std::span<const double> state, Rng& rng) const = 0;

  virtual std::unique_ptr<Env> clone() const = 0;

  // The command the environment actually executes for `action`; this is what a
  // demonstration log records.
  virtual Vec executed_action(std::span<const double> action) const {
    return {action.begin(), action.end()};
  }

 protected:
  explicit Env(std::size_t budget) : budget_(budget) {}
  virtual Vec do_reset(Rng& rng) = 0;
  // Returns (state, success).
  virtual std::pair<Vec, bool> do_step(std::span<const double> action) = 0;

 private:
  std::size_t budget_;
  std::size_t steps_ = 0;
  bool done_ = true;
};

struct PointMassParams {
  double max_step = 0.1;
  double r_pick = 0.05;
  double r_drop = 0.1;
  std::size_t budget = 40;
  // Object and drop zone sit at fixed spots, each jittered uniformly by up to
  // layout_jitter per axis. random_layout draws them anywhere in the unit square.
  bool random_layout = false;
  double layout_jitter = 0.05;
};

inline constexpr double kObjectHome[2] = {0.25, 0.75};
inline constexpr double kGoalHome[2] = {0.75, 0.25};

// Kinematic 2-D pick-and-drop in the unit square. The agent starts uniformly at random.
// State (9): agent xy, object xy, carried flag, goal xy, goal - object xy.
// Action (2): desired displacement, clipped to max_step in Euclidean norm.
// The object is picked up when the agent comes within r_pick, moves with the agent,
// and is released (success) once it lies within r_drop of the goal.
class PointMassPickDrop final : public Env {
 public:
  explicit PointMassPickDrop(PointMassParams params = {});

  std::size_t state_dim() const override { return 9; }
  std::size_t action_dim() const override { return 2; }
  const PointMassParams& params() const { return params_; }

  // Proportional controller toward the current sub-goal, clipped to max_step.
  Vec expert_action(std::span<const double> state, Rng& rng) const override;
  Vec controller(std::span<const double> state) const;
  // Non-finite commands become zero, then the norm is clipped to max_step.
  Vec executed_action(std::span<const double> action) const override;

  std::unique_ptr<Env> clone() const override;

 private:
  Vec do_reset(Rng& rng) override;
  std::pair<Vec, bool> do_step(std::span<const double> action) override;
  Vec observe() const;

  PointMassParams params_;
  double agent_[2] = {0, 0};
  double object_[2] = {0, 0};
  double goal_[2] = {0, 0};
  bool carried_ = false;
};

std::unique_ptr<Env> pointmass_pickdrop_env(PointMassParams params = {});

struct LinGaussParams {
  std::size_t state_dim = 2;
  std::size_t action_dim = 2;
  Vec matrix;  // action_dim x state_dim row-major; empty means identity
  double noise_std = 0.1;
  double success_threshold = 0.3;  // per-coordinate bound on |a - M s|
};

// Single-step task: s ~ N(0, I); the expert acts a = M s + noise_std * N(0, I).
class LinGaussEnv final : public Env {
 public:
  explicit LinGaussEnv(LinGaussParams params);

  std::size_t state_dim() const override { return params_.state_dim; }
  std::size_t action_dim() const override { return params_.action_dim; }
  const LinGaussParams& params() const { return params_; }

  Vec optimal_action(std::span<const double> state) const;
  Vec expert_action(std::span<const double> state, Rng& rng) const override;
  // Expected per-dimension NLL of the true conditional density.
  double nll_floor_per_dim() const;

  std::unique_ptr<Env> clone() const override;

 private:
  Vec do_reset(Rng& rng) override;
  std::pair<Vec, bool> do_step(std::span<const double> action) override;

  LinGaussParams params_;
  Vec state_;
};

std::unique_ptr<Env> lingauss_env(LinGaussParams params);

struct HeavyTailNoise {
  double nu = 1.0;
  double scale = 0.05;
  double prob = 0.5;  // per-step probability of adding the noise
};

struct Hesitation {
  double p_pause = 0.1;  // zero action
  double p_wrong = 0.05; // negated controller output
};

struct ScriptedDemonstrator {
  Provenance kind = Provenance::expert;
  std::optional<HeavyTailNoise> heavy_tail;
  std::optional<Hesitation> hesitation;

  static ScriptedDemonstrator expert() { return {}; }
  static ScriptedDemonstrator amateur(std::optional<HeavyTailNoise> noise,
                                      std::optional<Hesitation> hesitation);

  // Applies this demonstrator's corruption to the expert action.
  Vec act(const Env& env, std::span<const double> state, Rng& rng) const;
};

// Rolls out n episodes of the demonstrator. With successful_only, failed episodes are
// discarded and re-drawn (up to 100 n attempts).
std::vector<Trajectory> record_demos(Env& env, const ScriptedDemonstrator& demonstrator,
                                     std::size_t n, Rng& rng, bool successful_only = false);

}  // namespace atmom
