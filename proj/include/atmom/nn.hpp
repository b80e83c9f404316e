#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "atmom/demos.hpp"
#include "atmom/kernels.hpp"
#include "atmom/numerics.hpp"
#include "atmom/optim.hpp"

namespace atmom {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

struct NetArchitecture {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::vector<std::size_t> hidden = {100, 100, 100, 100, 100};

  std::size_t parameter_count() const;
  friend bool operator==(const NetArchitecture&, const NetArchitecture&) = default;
};

struct GaussianPolicyOutput {
  Vec mean;
  Vec log_var;  // clamped to [kLogVarMin, kLogVarMax]
};

// sum_j 0.5 * (log 2pi + log_var_j + (a_j - mean_j)^2 / exp(log_var_j))
double nll_loss(const GaussianPolicyOutput& out, std::span<const double> action);

struct Gradients {
  double loss = 0.0;       // batch-mean NLL
  std::vector<Vec> grads;  // aligned with PolicyNet::params()
};

// Feedforward Gaussian policy:
//   [affine -> layer norm (gain, bias) -> ReLU] x hidden.size()  -> affine head
// The head emits action_dim means followed by action_dim log-variances.
class PolicyNet {
 public:
  // Weights and biases of affine layers ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in));
  // layer-norm gains 1, biases 0.
  PolicyNet(NetArchitecture arch, Rng& rng);

  const NetArchitecture& architecture() const { return arch_; }
  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  const Tensor& param(const std::string& name) const;
  Tensor& param(const std::string& name);
  std::size_t param_index(const std::string& name) const;

  void set_backend(kernels::Backend be) { backend_ = be; }
  kernels::Backend backend() const { return backend_; }

  GaussianPolicyOutput forward(std::span<const double> state) const;
  std::vector<GaussianPolicyOutput> forward_batch(std::span<const Sample> batch) const;

  // Mean NLL over the batch; no gradient.
  double mean_loss(std::span<const Sample> batch) const;
  // Gradient of the batch-mean NLL with respect to every parameter.
  Gradients backward(std::span<const Sample> batch) const;

  Vec flatten() const;
  void assign_flat(std::span<const double> flat);

  void save(std::ostream& out) const;
  static PolicyNet load(std::istream& in);

 private:
  PolicyNet() = default;
  struct Cache;
  void build_tensors();
  void run_forward(std::span<const Sample> batch, Cache& cache) const;

  NetArchitecture arch_;
  std::vector<Tensor> params_;
  kernels::Backend backend_ = kernels::Backend::parallel;
};

}  // namespace atmom
