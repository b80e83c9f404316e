#include "atmom/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "atmom/error.hpp"

namespace atmom {

std::string to_string(OptimKind kind) {
  switch (kind) {
    case OptimKind::adam: return "adam";
    case OptimKind::t_adam: return "t_adam";
    case OptimKind::at_adam: return "at_adam";
  }
  return "?";
}

OptimKind parse_optim_kind(const std::string& name) {
  if (name == "adam") return OptimKind::adam;
  if (name == "t_adam") return OptimKind::t_adam;
  if (name == "at_adam") return OptimKind::at_adam;
  throw ConfigError("kind", "unknown optimizer '" + name + "'");
}

void OptimConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr", "must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "must lie in (0, 1)");
  if (!(eps > 0.0)) throw ConfigError("eps", "must be positive");
  if (kind == OptimKind::t_adam && !(fixed_k > 0.0))
    throw ConfigError("fixed_k", "must be positive");
  if (kind == OptimKind::at_adam && !(lambda > 0.0 && lambda < 1.0))
    throw ConfigError("lambda", "must lie in (0, 1)");
  if (frozen_k && !(*frozen_k > 0.0)) throw ConfigError("frozen_k", "must be positive");
}

SlotState SlotState::create(std::size_t dim, const OptimConfig& cfg) {
  SlotState s;
  if (cfg.kind == OptimKind::adam) {
    s.moments = AdamMoments{EmaState::zeros(dim, cfg.beta1), Vec(dim, 0.0)};
  } else {
    s.moments = TMomentState::zeros(dim, cfg.beta1, cfg.eps, cfg.decay_variant);
  }
  if (cfg.kind == OptimKind::at_adam) {
    s.dof = cfg.frozen_k ? DofState::frozen(dim, *cfg.frozen_k) : DofState::init(dim, cfg.lambda);
  }
  return s;
}

std::size_t SlotState::dim() const {
  return std::visit(
      [](const auto& m) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, AdamMoments>)
          return m.first.m.size();
        else
          return m.m.size();
      },
      moments);
}

ParamSlot ParamSlot::create(std::string name, Vec value, const OptimConfig& cfg) {
  ParamSlot slot;
  slot.name = std::move(name);
  slot.grad.assign(value.size(), 0.0);
  slot.state = SlotState::create(value.size(), cfg);
  slot.value = std::move(value);
  return slot;
}

namespace {

void apply_update(std::span<double> value, std::span<const double> m, std::span<const double> v,
                  std::uint64_t t, const OptimConfig& cfg) {
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t j = 0; j < value.size(); ++j) {
    const double m_hat = m[j] / c1;
    const double v_hat = v[j] / c2;
    value[j] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

void check_step_inputs(const SlotState& state, std::span<double> value,
                       std::span<const double> grad) {
  if (grad.empty() || grad.size() != value.size())
    throw PreconditionError("optimizer step: gradient not populated");
  require_same_size(value.size(), state.dim(), "optimizer step");
}

}  // namespace

std::optional<AtMomentumDiagnostics> optimizer_step(SlotState& state, std::span<double> value,
                                                    std::span<const double> grad,
                                                    const OptimConfig& cfg) {
  check_step_inputs(state, value, grad);
  ++state.step;

  if (auto* adam = std::get_if<AdamMoments>(&state.moments)) {
    if (cfg.kind != OptimKind::adam) throw PreconditionError("optimizer step: state/kind mismatch");
    ema_update(adam->first, grad);
    for (std::size_t j = 0; j < grad.size(); ++j)
      adam->second[j] = cfg.beta2 * adam->second[j] + (1.0 - cfg.beta2) * grad[j] * grad[j];
    apply_update(value, adam->first.m, adam->second, state.step, cfg);
    return std::nullopt;
  }

  auto& tm = std::get<TMomentState>(state.moments);
  if (cfg.kind == OptimKind::adam) throw PreconditionError("optimizer step: state/kind mismatch");

  // Gate variance is the previous step's raw second moment.
  double distance = 0.0;
  if (state.step <= cfg.warmup_steps) {
    for (std::size_t j = 0; j < grad.size(); ++j) {
      const double dev = grad[j] - tm.m[j];
      const double var = std::max(tm.sigma2[j], grad[j] * grad[j]);
      distance += dev * dev / (var + tm.eps);
    }
  } else {
    distance = mahalanobis_sq(tm, grad);
  }

  AtMomentumDiagnostics diag;
  if (cfg.kind == OptimKind::t_adam) {
    const double nu = cfg.fixed_k * static_cast<double>(grad.size());
    const TMomentStep s = t_momentum_update_with_distance(tm, grad, nu, distance);
    diag.distance = distance;
    diag.k = cfg.fixed_k;
    diag.nu = nu;
    diag.w = s.w;
    diag.beta_w = s.beta_w;
  } else {
    if (!state.dof) throw PreconditionError("at_adam step: missing DoF state");
    diag = at_momentum_step_with_distance(tm, *state.dof, grad, distance);
  }
  ema_variance_update(tm, grad, cfg.beta2);
  apply_update(value, tm.m, tm.sigma2, state.step, cfg);
  return diag;
}

void adam_step(ParamSlot& slot, const OptimConfig& cfg) {
  if (cfg.kind != OptimKind::adam) throw PreconditionError("adam_step: config kind is not adam");
  optimizer_step(slot.state, slot.value, slot.grad, cfg);
}

AtMomentumDiagnostics t_adam_step(ParamSlot& slot, const OptimConfig& cfg) {
  if (cfg.kind != OptimKind::t_adam)
    throw PreconditionError("t_adam_step: config kind is not t_adam");
  return *optimizer_step(slot.state, slot.value, slot.grad, cfg);
}

AtMomentumDiagnostics at_adam_step(ParamSlot& slot, const OptimConfig& cfg) {
  if (cfg.kind != OptimKind::at_adam)
    throw PreconditionError("at_adam_step: config kind is not at_adam");
  return *optimizer_step(slot.state, slot.value, slot.grad, cfg);
}

void DiagnosticsSink::append(DiagRecord record) {
  std::lock_guard lock(mutex_);
  records_.push_back(std::move(record));
}

void DiagnosticsSink::append(std::vector<DiagRecord> records) {
  std::lock_guard lock(mutex_);
  for (auto& r : records) records_.push_back(std::move(r));
}

std::vector<DiagRecord> DiagnosticsSink::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t DiagnosticsSink::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

Optimizer::Optimizer(const OptimConfig& cfg, std::span<const Tensor> params) : cfg_(cfg) {
  cfg_.validate();
  names_.reserve(params.size());
  states_.reserve(params.size());
  for (const auto& p : params) {
    names_.push_back(p.name);
    states_.push_back(SlotState::create(p.size(), cfg_));
  }
}

std::vector<DiagRecord> Optimizer::step(std::span<Tensor> params, std::span<const Vec> grads) {
  require_same_size(params.size(), states_.size(), "Optimizer::step (tensors)");
  require_same_size(grads.size(), states_.size(), "Optimizer::step (gradients)");
  ++steps_;
  const auto n = static_cast<std::ptrdiff_t>(states_.size());
  std::vector<std::optional<AtMomentumDiagnostics>> diags(states_.size());
#pragma omp parallel for schedule(dynamic) if (n > 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    diags[u] = optimizer_step(states_[u], params[u].value, grads[u], cfg_);
  }
  std::vector<DiagRecord> out;
  if (cfg_.kind == OptimKind::adam) return out;
  out.reserve(diags.size());
  for (std::size_t i = 0; i < diags.size(); ++i) out.push_back({steps_, names_[i], *diags[i]});
  return out;
}

// ---------------------------------------------------------------------------
// Snapshot

namespace {

constexpr const char* kSnapshotMagic = "atmom-optimizer";
constexpr int kSnapshotVersion = 1;

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double read_double(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw IoError("optimizer snapshot: unexpected end of input");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw IoError("optimizer snapshot: bad number '" + tok + "'");
  return v;
}

template <typename T>
T read_value(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) throw IoError(std::string("optimizer snapshot: cannot read ") + what);
  return v;
}

void expect(std::istream& in, const std::string& word) {
  std::string tok;
  if (!(in >> tok) || tok != word)
    throw IoError("optimizer snapshot: expected '" + word + "', got '" + tok + "'");
}

void write_vec(std::ostream& out, const Vec& v) {
  for (double x : v) out << ' ' << hex(x);
  out << '\n';
}

Vec read_vec(std::istream& in, std::size_t n) {
  Vec v(n);
  for (auto& x : v) x = read_double(in);
  return v;
}

}  // namespace

void Optimizer::save(std::ostream& out) const {
  out << kSnapshotMagic << ' ' << kSnapshotVersion << '\n';
  out << "config " << to_string(cfg_.kind) << ' ' << hex(cfg_.lr) << ' ' << hex(cfg_.beta1) << ' '
      << hex(cfg_.beta2) << ' ' << hex(cfg_.eps) << ' ' << hex(cfg_.fixed_k) << ' '
      << hex(cfg_.lambda) << ' '
      << (cfg_.decay_variant == WeightDecay::modified ? "modified" : "original") << ' '
      << cfg_.warmup_steps << ' ' << (cfg_.frozen_k ? hex(*cfg_.frozen_k) : "none") << '\n';
  out << "steps " << steps_ << '\n';
  out << "tensors " << states_.size() << '\n';
  for (std::size_t i = 0; i < states_.size(); ++i) {
    const auto& s = states_[i];
    out << "tensor " << names_[i] << ' ' << s.dim() << ' ' << s.step << '\n';
    if (const auto* a = std::get_if<AdamMoments>(&s.moments)) {
      out << "adam " << a->first.t << '\n';
      write_vec(out, a->first.m);
      write_vec(out, a->second);
    } else {
      const auto& t = std::get<TMomentState>(s.moments);
      out << "tmoment " << t.t << ' ' << hex(t.W) << '\n';
      write_vec(out, t.m);
      write_vec(out, t.sigma2);
    }
    if (s.dof) {
      const auto& d = *s.dof;
      out << "dof " << hex(d.z_bar) << ' ' << hex(d.z_tilde) << ' ' << hex(d.k) << ' '
          << hex(d.nu) << '\n';
    }
  }
}

Optimizer Optimizer::load(std::istream& in) {
  expect(in, kSnapshotMagic);
  if (read_value<int>(in, "version") != kSnapshotVersion)
    throw IoError("optimizer snapshot: unsupported version");
  Optimizer o;
  expect(in, "config");
  o.cfg_.kind = parse_optim_kind(read_value<std::string>(in, "kind"));
  o.cfg_.lr = read_double(in);
  o.cfg_.beta1 = read_double(in);
  o.cfg_.beta2 = read_double(in);
  o.cfg_.eps = read_double(in);
  o.cfg_.fixed_k = read_double(in);
  o.cfg_.lambda = read_double(in);
  const auto decay = read_value<std::string>(in, "decay variant");
  if (decay != "modified" && decay != "original")
    throw IoError("optimizer snapshot: bad decay variant");
  o.cfg_.decay_variant = decay == "modified" ? WeightDecay::modified : WeightDecay::original;
  o.cfg_.warmup_steps = read_value<std::uint64_t>(in, "warmup");
  const auto frozen = read_value<std::string>(in, "frozen_k");
  if (frozen != "none") o.cfg_.frozen_k = std::strtod(frozen.c_str(), nullptr);
  o.cfg_.validate();

  expect(in, "steps");
  o.steps_ = read_value<std::uint64_t>(in, "steps");
  expect(in, "tensors");
  const auto n = read_value<std::size_t>(in, "tensor count");
  for (std::size_t i = 0; i < n; ++i) {
    expect(in, "tensor");
    o.names_.push_back(read_value<std::string>(in, "tensor name"));
    const auto dim = read_value<std::size_t>(in, "dim");
    SlotState s = SlotState::create(dim, o.cfg_);
    s.step = read_value<std::uint64_t>(in, "step");
    if (auto* a = std::get_if<AdamMoments>(&s.moments)) {
      expect(in, "adam");
      a->first.t = read_value<std::uint64_t>(in, "t");
      a->first.m = read_vec(in, dim);
      a->second = read_vec(in, dim);
    } else {
      auto& t = std::get<TMomentState>(s.moments);
      expect(in, "tmoment");
      t.t = read_value<std::uint64_t>(in, "t");
      t.W = read_double(in);
      t.m = read_vec(in, dim);
      t.sigma2 = read_vec(in, dim);
    }
    if (s.dof) {
      expect(in, "dof");
      s.dof->z_bar = read_double(in);
      s.dof->z_tilde = read_double(in);
      s.dof->k = read_double(in);
      s.dof->nu = read_double(in);
    }
    o.states_.push_back(std::move(s));
  }
  return o;
}

}  // namespace atmom
