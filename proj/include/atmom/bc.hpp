#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "atmom/demos.hpp"
#include "atmom/envs.hpp"
#include "atmom/nn.hpp"
#include "atmom/optim.hpp"

namespace atmom {

enum class AlphaBound {
  enforce,  // alpha must stay below 0.5
  relaxed,  // amateur-only or amateur-majority studies
};

// All expert trajectories plus the first n_amateur amateur ones.
DemoSet mix_demos(std::span<const Trajectory> expert, std::span<const Trajectory> amateur,
                  std::size_t n_amateur, AlphaBound bound = AlphaBound::enforce);

// s + eta * N(0, I)
Vec augment_state(std::span<const double> s, double eta, Rng& rng);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double eta = 0.03;
  // Keep one diagnostics record per tensor every diag_stride optimizer steps
  // (0 keeps none). The k trace used for medians is always complete.
  std::size_t diag_stride = 50;
};

struct TrainMetrics {
  std::vector<double> train_nll;       // per epoch, on augmented minibatches
  std::vector<double> validation_nll;  // per epoch, NaN without a validation set
  std::vector<DiagRecord> diagnostics;
  std::vector<std::string> tensor_names;
  std::vector<std::vector<double>> k_trace;  // [tensor][step], at_adam/t_adam only
  std::size_t steps = 0;

  // Median of k over the final `fraction` of steps, per tensor.
  std::vector<double> median_k_tail(double fraction) const;
};

// Minibatch training on the batch-mean NLL. Pairs are reshuffled every epoch and
// states are augmented before each step; validation never sees augmentation.
TrainMetrics train(PolicyNet& net, const DemoSet& demos, const OptimConfig& cfg,
                   const TrainConfig& train_cfg, std::span<const Sample> validation, Rng& rng);

using Policy = std::function<Vec(std::span<const double>)>;

// Deterministic policy: the Gaussian mean.
Policy mean_policy(const PolicyNet& net);

// Fraction of n_runs episodes that succeed within `budget` steps.
double evaluate_success(const Policy& policy, const Env& env, std::size_t n_runs,
                        std::size_t budget, Rng& rng);

}  // namespace atmom
