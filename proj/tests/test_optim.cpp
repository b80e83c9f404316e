#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "atmom/checks.hpp"
#include "atmom/error.hpp"
#include "atmom/optim.hpp"

using namespace atmom;

namespace {

OptimConfig make(OptimKind kind, double lr = 1e-3) {
  OptimConfig c;
  c.kind = kind;
  c.lr = lr;
  return c;
}

const OptimKind kAll[] = {OptimKind::adam, OptimKind::t_adam, OptimKind::at_adam};

// f(theta) = theta^2 / 2 from theta = 1; `noise(rng)` is added to every gradient.
template <typename Noise>
double bowl(const OptimConfig& cfg, std::uint64_t seed, Noise noise, int steps = 5000) {
  Rng rng(seed);
  ParamSlot s = ParamSlot::create("theta", Vec{1.0}, cfg);
  for (int t = 0; t < steps; ++t) {
    s.grad[0] = s.value[0] + noise(rng);
    optimizer_step(s.state, s.value, s.grad, cfg);
  }
  return 0.5 * s.value[0] * s.value[0];
}

double outliers(Rng& rng) {
  if (rng.uniform() < 0.3) return rng.uniform() < 0.5 ? 100.0 : -100.0;
  return 0.0;
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(OptimConfig{}.validate());
  OptimConfig c;
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.beta1 = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.kind = OptimKind::t_adam;
  c.fixed_k = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.kind = OptimKind::at_adam;
  c.lambda = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_optim_kind("at_adam") == OptimKind::at_adam);
  CHECK(to_string(OptimKind::t_adam) == "t_adam");
  CHECK_THROWS_AS(parse_optim_kind("sgd"), ConfigError);
}

TEST_CASE("slot state matches the kind") {
  for (OptimKind k : kAll) {
    const SlotState s = SlotState::create(4, make(k));
    CHECK(s.dim() == 4);
    CHECK(s.dof.has_value() == (k == OptimKind::at_adam));
  }
}

TEST_CASE("first step moves each coordinate by about lr against the gradient") {
  for (OptimKind k : kAll) {
    const OptimConfig cfg = make(k);
    ParamSlot s = ParamSlot::create("p", Vec{0.0, 0.0, 0.0}, cfg);
    s.grad = {0.3, -2.0, 1e-3};
    optimizer_step(s.state, s.value, s.grad, cfg);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(std::signbit(s.value[j]) != std::signbit(s.grad[j]));
      CHECK(std::abs(s.value[j]) == doctest::Approx(cfg.lr).epsilon(1e-3));
    }
  }
}

TEST_CASE("zero gradients leave parameters unchanged") {
  for (OptimKind k : kAll) {
    const OptimConfig cfg = make(k);
    ParamSlot s = ParamSlot::create("p", Vec{0.5, -0.25}, cfg);
    s.grad = {0.0, 0.0};
    for (int t = 0; t < 100; ++t) optimizer_step(s.state, s.value, s.grad, cfg);
    CHECK(s.value == Vec{0.5, -0.25});
  }
}

TEST_CASE("unpopulated gradient") {
  const OptimConfig cfg = make(OptimKind::adam);
  ParamSlot s = ParamSlot::create("p", Vec{1.0, 2.0}, cfg);
  Vec empty;
  CHECK_THROWS_AS(optimizer_step(s.state, s.value, empty, cfg), PreconditionError);
  Vec short_grad{1.0};
  CHECK_THROWS_AS(optimizer_step(s.state, s.value, short_grad, cfg), PreconditionError);
  CHECK_THROWS_AS(t_adam_step(s, cfg), PreconditionError);
}

TEST_CASE("adam converges on the clean bowl") {
  const double loss = bowl(make(OptimKind::adam, 0.01), 1, [](Rng&) { return 0.0; });
  CHECK(std::sqrt(2.0 * loss) < 1e-3);
}

TEST_CASE("first t-Adam step without warmup nearly ignores the gradient") {
  OptimConfig cfg = make(OptimKind::t_adam);
  cfg.warmup_steps = 0;
  ParamSlot s = ParamSlot::create("p", Vec{0.0}, cfg);
  s.grad = {1.0};
  const auto d = optimizer_step(s.state, s.value, s.grad, cfg);
  REQUIRE(d);
  CHECK(d->distance == doctest::Approx(1e8).epsilon(1e-12));
  CHECK(d->w == doctest::Approx(2.0 / (1.0 + 1e8)).epsilon(1e-12));
  CHECK(d->w < 3e-8);
}

TEST_CASE("warmup keeps the first gradient") {
  const OptimConfig cfg = make(OptimKind::t_adam);
  ParamSlot s = ParamSlot::create("p", Vec{0.0}, cfg);
  s.grad = {1.0};
  const auto d = optimizer_step(s.state, s.value, s.grad, cfg);
  CHECK(d->w > 0.5);
}

TEST_CASE("robust optimizers beat Adam on the outlier bowl") {
  const OptimConfig adam = make(OptimKind::adam, 0.01);
  OptimConfig tadam = make(OptimKind::t_adam, 0.01);
  OptimConfig atadam = make(OptimKind::at_adam, 0.01);
  std::vector<double> la, lt, lat;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    la.push_back(bowl(adam, seed, outliers));
    lt.push_back(bowl(tadam, seed, outliers));
    lat.push_back(bowl(atadam, seed, outliers));
  }
  CHECK(median(lt) < median(la));
  CHECK(median(lat) < median(la));
}

TEST_CASE("At-Adam is not worse than Adam on Gaussian gradient noise") {
  const OptimConfig adam = make(OptimKind::adam, 0.01);
  const OptimConfig atadam = make(OptimKind::at_adam, 0.01);
  const auto gauss = [](Rng& r) { return r.normal(); };
  std::vector<double> la, lat;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    la.push_back(bowl(adam, seed, gauss));
    lat.push_back(bowl(atadam, seed, gauss));
  }
  CHECK(median(lat) <= 1.1 * median(la));
}

TEST_CASE("gaussian-limit equivalence with Adam") {
  const auto r = checks::gaussian_limit_equivalence(1000);
  INFO(r.detail);
  CHECK(r.passed);
}

TEST_CASE("At-Adam k trace stays finite and positive") {
  const OptimConfig cfg = make(OptimKind::at_adam, 0.01);
  ParamSlot s = ParamSlot::create("p", Vec(20, 1.0), cfg);
  Rng rng(3);
  for (int t = 0; t < 2000; ++t) {
    for (std::size_t j = 0; j < 20; ++j) s.grad[j] = s.value[j] + rng.normal() + outliers(rng);
    const auto d = at_adam_step(s, cfg);
    REQUIRE(std::isfinite(d.k));
    REQUIRE(d.k > 0.0);
  }
}

namespace {

std::vector<Tensor> tensors() {
  return {{"a", 2, 3, Vec{0.1, 0.2, 0.3, -0.1, -0.2, -0.3}}, {"b", 1, 1, Vec{1.0}}};
}

std::vector<Vec> grads_for(const std::vector<Tensor>& ts, Rng& rng) {
  std::vector<Vec> g;
  for (const auto& t : ts) {
    Vec v(t.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = t.value[i] + rng.normal();
    g.push_back(std::move(v));
  }
  return g;
}

}  // namespace

TEST_CASE("optimizer snapshot round trip is exact") {
  for (OptimKind k : kAll) {
    OptimConfig cfg = make(k, 0.01);
    auto p = tensors();
    Optimizer opt(cfg, p);
    Rng rng(5);
    for (int t = 0; t < 30; ++t) opt.step(p, grads_for(p, rng));

    std::stringstream ss;
    opt.save(ss);
    Optimizer copy = Optimizer::load(ss);
    CHECK(copy.steps_taken() == opt.steps_taken());
    CHECK(copy.names() == opt.names());

    auto p2 = p;
    Rng r1 = rng, r2 = rng;
    for (int t = 0; t < 30; ++t) {
      opt.step(p, grads_for(p, r1));
      copy.step(p2, grads_for(p2, r2));
    }
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i].value == p2[i].value);
  }
}

TEST_CASE("snapshot rejects garbage") {
  std::stringstream bad("atmom-optimizer 99\n");
  CHECK_THROWS_AS(Optimizer::load(bad), IoError);
  std::stringstream empty;
  CHECK_THROWS_AS(Optimizer::load(empty), IoError);
}

TEST_CASE("optimizer steps are deterministic and report diagnostics in tensor order") {
  const OptimConfig cfg = make(OptimKind::at_adam, 0.01);
  auto p1 = tensors(), p2 = tensors();
  Optimizer o1(cfg, p1), o2(cfg, p2);
  Rng r1(9), r2(9);
  for (int t = 0; t < 50; ++t) {
    const auto d1 = o1.step(p1, grads_for(p1, r1));
    const auto d2 = o2.step(p2, grads_for(p2, r2));
    REQUIRE(d1.size() == 2);
    CHECK(d1[0].tensor == "a");
    CHECK(d1[1].tensor == "b");
    CHECK(d1[0].diag.k == d2[0].diag.k);
  }
  CHECK(p1[0].value == p2[0].value);
}

TEST_CASE("diagnostics sink") {
  DiagnosticsSink sink;
  sink.append(DiagRecord{1, "a", {}});
  sink.append(std::vector<DiagRecord>{{2, "b", {}}, {3, "c", {}}});
  CHECK(sink.size() == 3);
  CHECK(sink.records()[2].tensor == "c");
}
