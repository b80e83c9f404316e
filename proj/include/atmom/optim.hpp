#pragma once

#include <cstdint>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "atmom/dof.hpp"
#include "atmom/moments.hpp"

namespace atmom {

enum class OptimKind { adam, t_adam, at_adam };

std::string to_string(OptimKind kind);
OptimKind parse_optim_kind(const std::string& name);

struct OptimConfig {
  OptimKind kind = OptimKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = kDefaultEps;
  double fixed_k = 1.0;    // t_adam
  double lambda = 0.999;   // at_adam
  WeightDecay decay_variant = WeightDecay::modified;
  // For the first warmup_steps steps the gate variance is max(sigma2, g*g).
  std::uint64_t warmup_steps = 10;
  // at_adam only: pin k instead of estimating it.
  std::optional<double> frozen_k;

  void validate() const;
};

struct AdamMoments {
  EmaState first;
  Vec second;
};

struct SlotState {
  std::variant<AdamMoments, TMomentState> moments;
  std::optional<DofState> dof;  // present iff at_adam
  std::uint64_t step = 0;

  static SlotState create(std::size_t dim, const OptimConfig& cfg);
  std::size_t dim() const;
};

// One named parameter tensor with its gradient and optimizer state.
struct ParamSlot {
  std::string name;
  Vec value;
  Vec grad;
  SlotState state;

  static ParamSlot create(std::string name, Vec value, const OptimConfig& cfg);
};

// Per-tensor step. Returns the robust-momentum diagnostics for t_adam/at_adam.
std::optional<AtMomentumDiagnostics> optimizer_step(SlotState& state, std::span<double> value,
                                                    std::span<const double> grad,
                                                    const OptimConfig& cfg);

void adam_step(ParamSlot& slot, const OptimConfig& cfg);
AtMomentumDiagnostics t_adam_step(ParamSlot& slot, const OptimConfig& cfg);
AtMomentumDiagnostics at_adam_step(ParamSlot& slot, const OptimConfig& cfg);

struct DiagRecord {
  std::uint64_t step = 0;
  std::string tensor;
  AtMomentumDiagnostics diag;
};

// Thread-safe append-only record store.
class DiagnosticsSink {
 public:
  void append(DiagRecord record);
  void append(std::vector<DiagRecord> records);
  std::vector<DiagRecord> records() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::vector<DiagRecord> records_;
};

// Named parameter tensor as owned by a model.
struct Tensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec value;

  std::size_t size() const { return value.size(); }
};

// Steps a whole collection of tensors. Slots are independent and are updated in
// parallel when OpenMP is available.
class Optimizer {
 public:
  Optimizer(const OptimConfig& cfg, std::span<const Tensor> params);

  // Returns the per-tensor diagnostics of this step, in tensor order (empty for adam).
  std::vector<DiagRecord> step(std::span<Tensor> params, std::span<const Vec> grads);

  const OptimConfig& config() const { return cfg_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<SlotState>& states() const { return states_; }
  std::uint64_t steps_taken() const { return steps_; }

  // Versioned text snapshot; values are written as hex floats so reload is exact.
  void save(std::ostream& out) const;
  static Optimizer load(std::istream& in);

 private:
  Optimizer() = default;

  OptimConfig cfg_;
  std::vector<std::string> names_;
  std::vector<SlotState> states_;
  std::uint64_t steps_ = 0;
};

}  // namespace atmom
