#include "atmom/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>

#include "atmom/error.hpp"

namespace atmom {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double clamp_log_var(double raw) { return std::clamp(raw, kLogVarMin, kLogVarMax); }

}  // namespace

std::size_t NetArchitecture::parameter_count() const {
  std::size_t count = 0;
  std::size_t in = state_dim;
  for (std::size_t h : hidden) {
    count += h * in + h + 2 * h;
    in = h;
  }
  count += 2 * action_dim * in + 2 * action_dim;
  return count;
}

double nll_loss(const GaussianPolicyOutput& out, std::span<const double> action) {
  require_same_size(action.size(), out.mean.size(), "nll_loss");
  require_same_size(out.log_var.size(), out.mean.size(), "nll_loss");
  double loss = 0.0;
  for (std::size_t j = 0; j < action.size(); ++j) {
    const double dev = action[j] - out.mean[j];
    loss += 0.5 * (kLog2Pi + out.log_var[j] + dev * dev / std::exp(out.log_var[j]));
  }
  if (!std::isfinite(loss)) throw NumericError("nll_loss: non-finite value");
  return loss;
}

struct PolicyNet::Cache {
  std::size_t batch = 0;
  Vec input;
  struct Layer {
    Vec pre;       // affine output
    Vec xhat;
    Vec inv_std;
    Vec normed;    // after gain/bias
    Vec act;       // after ReLU
  };
  std::vector<Layer> layers;
  Vec head;  // raw head output, batch x 2A
};

void PolicyNet::build_tensors() {
  params_.clear();
  std::size_t in = arch_.state_dim;
  for (std::size_t l = 0; l < arch_.hidden.size(); ++l) {
    const std::size_t h = arch_.hidden[l];
    const std::string p = "hidden" + std::to_string(l) + ".";
    params_.push_back({p + "weight", h, in, Vec(h * in)});
    params_.push_back({p + "bias", h, 1, Vec(h)});
    params_.push_back({p + "ln_gain", h, 1, Vec(h, 1.0)});
    params_.push_back({p + "ln_bias", h, 1, Vec(h, 0.0)});
    in = h;
  }
  params_.push_back({"head.weight", 2 * arch_.action_dim, in, Vec(2 * arch_.action_dim * in)});
  params_.push_back({"head.bias", 2 * arch_.action_dim, 1, Vec(2 * arch_.action_dim)});
}

PolicyNet::PolicyNet(NetArchitecture arch, Rng& rng) : arch_(std::move(arch)) {
  if (arch_.state_dim == 0 || arch_.action_dim == 0)
    throw ShapeError("PolicyNet: state_dim and action_dim must be positive");
  for (std::size_t h : arch_.hidden)
    if (h == 0) throw ShapeError("PolicyNet: hidden widths must be positive");
  build_tensors();

  auto init_affine = [&rng](Tensor& w, Tensor& b) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols));
    for (auto& v : w.value) v = bound * (2.0 * rng.uniform() - 1.0);
    for (auto& v : b.value) v = bound * (2.0 * rng.uniform() - 1.0);
  };
  for (std::size_t l = 0; l < arch_.hidden.size(); ++l) init_affine(params_[4 * l], params_[4 * l + 1]);
  const std::size_t head = 4 * arch_.hidden.size();
  init_affine(params_[head], params_[head + 1]);
}

std::size_t PolicyNet::param_index(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  throw PreconditionError("PolicyNet: no parameter named '" + name + "'");
}

const Tensor& PolicyNet::param(const std::string& name) const { return params_[param_index(name)]; }
Tensor& PolicyNet::param(const std::string& name) { return params_[param_index(name)]; }

void PolicyNet::run_forward(std::span<const Sample> batch, Cache& cache) const {
  const std::size_t B = batch.size();
  const std::size_t S = arch_.state_dim;
  cache.batch = B;
  cache.input.resize(B * S);
  for (std::size_t b = 0; b < B; ++b) {
    require_same_size(batch[b].state.size(), S, "PolicyNet::forward (state)");
    for (std::size_t i = 0; i < S; ++i) {
      const double v = batch[b].state[i];
      if (!std::isfinite(v)) throw NumericError("PolicyNet::forward: non-finite input");
      cache.input[b * S + i] = v;
    }
  }

  cache.layers.resize(arch_.hidden.size());
  const Vec* x = &cache.input;
  std::size_t in = S;
  for (std::size_t l = 0; l < arch_.hidden.size(); ++l) {
    const std::size_t h = arch_.hidden[l];
    auto& L = cache.layers[l];
    L.pre.resize(B * h);
    L.xhat.resize(B * h);
    L.inv_std.resize(B);
    L.normed.resize(B * h);
    L.act.resize(B * h);
    kernels::affine_forward(backend_, {B, in, h}, *x, params_[4 * l].value,
                            params_[4 * l + 1].value, L.pre);
    kernels::layernorm_forward(backend_, B, h, L.pre, params_[4 * l + 2].value,
                               params_[4 * l + 3].value, kLayerNormEps, L.xhat, L.inv_std,
                               L.normed);
    kernels::relu_forward(backend_, L.normed, L.act);
    x = &L.act;
    in = h;
  }
  const std::size_t out = 2 * arch_.action_dim;
  const std::size_t head = 4 * arch_.hidden.size();
  cache.head.resize(B * out);
  kernels::affine_forward(backend_, {B, in, out}, *x, params_[head].value, params_[head + 1].value,
                          cache.head);
}

std::vector<GaussianPolicyOutput> PolicyNet::forward_batch(std::span<const Sample> batch) const {
  Cache cache;
  run_forward(batch, cache);
  const std::size_t A = arch_.action_dim;
  std::vector<GaussianPolicyOutput> outs(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double* row = cache.head.data() + b * 2 * A;
    outs[b].mean.assign(row, row + A);
    outs[b].log_var.resize(A);
    for (std::size_t j = 0; j < A; ++j) outs[b].log_var[j] = clamp_log_var(row[A + j]);
  }
  return outs;
}

GaussianPolicyOutput PolicyNet::forward(std::span<const double> state) const {
  const Sample s{Vec(state.begin(), state.end()), {}};
  return forward_batch(std::span(&s, 1)).front();
}

double PolicyNet::mean_loss(std::span<const Sample> batch) const {
  if (batch.empty()) throw PreconditionError("PolicyNet::mean_loss: empty batch");
  const auto outs = forward_batch(batch);
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) total += nll_loss(outs[b], batch[b].action);
  return total / static_cast<double>(batch.size());
}

Gradients PolicyNet::backward(std::span<const Sample> batch) const {
  if (batch.empty()) throw PreconditionError("PolicyNet::backward: empty batch");
  Cache cache;
  run_forward(batch, cache);

  const std::size_t B = batch.size();
  const std::size_t A = arch_.action_dim;
  const double inv_b = 1.0 / static_cast<double>(B);

  Gradients g;
  g.grads.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) g.grads[i].assign(params_[i].size(), 0.0);

  // Head output gradient of the batch-mean NLL.
  Vec d_head(B * 2 * A);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    require_same_size(batch[b].action.size(), A, "PolicyNet::backward (action)");
    const double* row = cache.head.data() + b * 2 * A;
    double* drow = d_head.data() + b * 2 * A;
    for (std::size_t j = 0; j < A; ++j) {
      const double raw = row[A + j];
      const double log_var = clamp_log_var(raw);
      const double inv_var = std::exp(-log_var);
      const double dev = batch[b].action[j] - row[j];
      total += 0.5 * (kLog2Pi + log_var + dev * dev * inv_var);
      drow[j] = -dev * inv_var * inv_b;
      const bool inside = raw >= kLogVarMin && raw <= kLogVarMax;
      drow[A + j] = inside ? 0.5 * (1.0 - dev * dev * inv_var) * inv_b : 0.0;
    }
  }
  if (!std::isfinite(total)) throw NumericError("PolicyNet::backward: non-finite loss");
  g.loss = total * inv_b;

  const std::size_t L = arch_.hidden.size();
  const std::size_t head = 4 * L;
  std::size_t in = L == 0 ? arch_.state_dim : arch_.hidden.back();
  const Vec& head_in = L == 0 ? cache.input : cache.layers.back().act;

  Vec d_x(B * in);
  kernels::affine_backward(backend_, {B, in, 2 * A}, head_in, params_[head].value, d_head,
                           L == 0 ? std::span<double>() : std::span<double>(d_x),
                           g.grads[head], g.grads[head + 1]);

  Vec d_normed, d_pre;
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t h = arch_.hidden[l];
    const std::size_t fan_in = l == 0 ? arch_.state_dim : arch_.hidden[l - 1];
    const auto& C = cache.layers[l];
    d_normed.resize(B * h);
    d_pre.resize(B * h);
    kernels::relu_backward(backend_, C.act, d_x, d_normed);
    kernels::layernorm_backward(backend_, B, h, C.xhat, C.inv_std, params_[4 * l + 2].value,
                                d_normed, d_pre, g.grads[4 * l + 2], g.grads[4 * l + 3]);
    const Vec& layer_in = l == 0 ? cache.input : cache.layers[l - 1].act;
    Vec d_in(l == 0 ? 0 : B * fan_in);
    kernels::affine_backward(backend_, {B, fan_in, h}, layer_in, params_[4 * l].value, d_pre,
                             d_in, g.grads[4 * l], g.grads[4 * l + 1]);
    d_x = std::move(d_in);
  }
  return g;
}

Vec PolicyNet::flatten() const {
  Vec flat;
  flat.reserve(arch_.parameter_count());
  for (const auto& p : params_) flat.insert(flat.end(), p.value.begin(), p.value.end());
  return flat;
}

void PolicyNet::assign_flat(std::span<const double> flat) {
  require_same_size(flat.size(), arch_.parameter_count(), "PolicyNet::assign_flat");
  std::size_t off = 0;
  for (auto& p : params_) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), p.size(), p.value.begin());
    off += p.size();
  }
}

// Snapshot: text header with the architecture, then every tensor as hex floats.
namespace {
constexpr const char* kModelMagic = "atmom-model";
constexpr int kModelVersion = 1;
}  // namespace

void PolicyNet::save(std::ostream& out) const {
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << "arch " << arch_.state_dim << ' ' << arch_.action_dim << ' ' << arch_.hidden.size();
  for (std::size_t h : arch_.hidden) out << ' ' << h;
  out << '\n';
  char buf[64];
  for (const auto& p : params_) {
    out << "tensor " << p.name << ' ' << p.rows << ' ' << p.cols << '\n';
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%a", p.value[i]);
      out << (i ? " " : "") << buf;
    }
    out << '\n';
  }
}

PolicyNet PolicyNet::load(std::istream& in) {
  std::string tok;
  int version = 0;
  if (!(in >> tok >> version) || tok != kModelMagic)
    throw IoError("model snapshot: bad header");
  if (version != kModelVersion) throw IoError("model snapshot: unsupported version");
  PolicyNet net;
  std::size_t n_hidden = 0;
  if (!(in >> tok) || tok != "arch" ||
      !(in >> net.arch_.state_dim >> net.arch_.action_dim >> n_hidden))
    throw IoError("model snapshot: bad architecture line");
  net.arch_.hidden.resize(n_hidden);
  for (auto& h : net.arch_.hidden)
    if (!(in >> h)) throw IoError("model snapshot: bad hidden width");
  net.build_tensors();
  for (auto& p : net.params_) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(in >> tok >> name >> rows >> cols) || tok != "tensor" || name != p.name ||
        rows != p.rows || cols != p.cols)
      throw IoError("model snapshot: tensor header mismatch for " + p.name);
    for (auto& v : p.value) {
      if (!(in >> tok)) throw IoError("model snapshot: truncated tensor " + p.name);
      char* end = nullptr;
      v = std::strtod(tok.c_str(), &end);
      if (*end != '\0') throw IoError("model snapshot: bad number in " + p.name);
    }
  }
  return net;
}

}  // namespace atmom
