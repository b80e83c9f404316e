#include "atmom/bc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "atmom/error.hpp"

namespace atmom {

DemoSet mix_demos(std::span<const Trajectory> expert, std::span<const Trajectory> amateur,
                  std::size_t n_amateur, AlphaBound bound) {
  if (n_amateur > amateur.size())
    throw PreconditionError("mix_demos: asked for more amateur trajectories than available");
  DemoSet set;
  set.trajectories.assign(expert.begin(), expert.end());
  set.trajectories.insert(set.trajectories.end(), amateur.begin(),
                          amateur.begin() + static_cast<std::ptrdiff_t>(n_amateur));
  std::size_t total = 0, am = 0;
  for (const auto& t : set.trajectories) {
    total += t.pairs.size();
    if (t.provenance == Provenance::amateur) am += t.pairs.size();
  }
  set.alpha = total == 0 ? 0.0 : static_cast<double>(am) / static_cast<double>(total);
  if (bound == AlphaBound::enforce && set.alpha >= 0.5)
    throw DomainError("mix_demos: amateur proportion " + std::to_string(set.alpha) +
                      " is not below 0.5");
  return set;
}

Vec augment_state(std::span<const double> s, double eta, Rng& rng) {
  Vec out(s.begin(), s.end());
  if (eta == 0.0) return out;
  if (eta < 0.0) throw DomainError("augment_state: eta must be >= 0");
  for (auto& v : out) v += eta * rng.normal();
  return out;
}

std::vector<double> TrainMetrics::median_k_tail(double fraction) const {
  std::vector<double> out;
  for (const auto& trace : k_trace) {
    if (trace.empty()) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(trace.size()))));
    out.push_back(median({trace.end() - static_cast<std::ptrdiff_t>(keep), trace.end()}));
  }
  return out;
}

TrainMetrics train(PolicyNet& net, const DemoSet& demos, const OptimConfig& cfg,
                   const TrainConfig& train_cfg, std::span<const Sample> validation, Rng& rng) {
  if (train_cfg.batch_size == 0) throw PreconditionError("train: batch_size must be >= 1");
  const std::vector<Sample> pairs = demos.pairs();
  if (pairs.empty()) throw PreconditionError("train: no demonstration pairs");

  TrainMetrics metrics;
  if (train_cfg.epochs == 0) return metrics;

  Optimizer opt(cfg, net.params());
  metrics.tensor_names = opt.names();
  if (cfg.kind != OptimKind::adam) metrics.k_trace.resize(net.params().size());

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Sample> batch;

  for (std::size_t epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    // Fisher-Yates with the run's generator.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += train_cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + train_cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) {
        const Sample& p = pairs[order[i]];
        batch.push_back({augment_state(p.state, train_cfg.eta, rng), p.action});
      }
      const Gradients g = net.backward(batch);
      loss_sum += g.loss * static_cast<double>(batch.size());
      auto diag = opt.step(net.params(), g.grads);
      ++metrics.steps;
      for (std::size_t t = 0; t < diag.size(); ++t) metrics.k_trace[t].push_back(diag[t].diag.k);
      if (train_cfg.diag_stride > 0 && metrics.steps % train_cfg.diag_stride == 0)
        for (auto& r : diag) metrics.diagnostics.push_back(std::move(r));
    }
    metrics.train_nll.push_back(loss_sum / static_cast<double>(pairs.size()));
    metrics.validation_nll.push_back(validation.empty()
                                         ? std::numeric_limits<double>::quiet_NaN()
                                         : net.mean_loss(validation));
  }
  return metrics;
}

Policy mean_policy(const PolicyNet& net) {
  return [&net](std::span<const double> s) { return net.forward(s).mean; };
}

double evaluate_success(const Policy& policy, const Env& env, std::size_t n_runs,
                        std::size_t budget, Rng& rng) {
  if (n_runs == 0) throw PreconditionError("evaluate_success: n_runs must be >= 1");
  if (budget == 0) throw PreconditionError("evaluate_success: budget must be >= 1");
  std::size_t successes = 0;
  auto episode_env = env.clone();
  for (std::size_t run = 0; run < n_runs; ++run) {
    try {
      Vec state = episode_env->reset(rng);
      for (std::size_t t = 0; t < budget && !episode_env->done(); ++t) {
        const StepResult r = episode_env->step(policy(state));
        if (r.success) {
          ++successes;
          break;
        }
        state = r.state;
      }
    } catch (const std::exception&) {
      // A failing rollout counts as a failed episode.
    }
  }
  return static_cast<double>(successes) / static_cast<double>(n_runs);
}

}  // namespace atmom
