#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "atmom/checks.hpp"
#include "atmom/error.hpp"
#include "atmom/nn.hpp"

using namespace atmom;

namespace {

std::vector<Sample> random_batch(Rng& rng, std::size_t n, std::size_t s, std::size_t a) {
  std::vector<Sample> batch(n);
  for (auto& x : batch) {
    x.state.resize(s);
    x.action.resize(a);
    for (auto& v : x.state) v = rng.normal();
    for (auto& v : x.action) v = rng.normal();
  }
  return batch;
}

}  // namespace

TEST_CASE("parameter count") {
  const NetArchitecture arch{9, 2};
  // Per hidden layer: weights, bias, layer-norm gain and bias.
  const std::size_t expected = (9 * 100 + 3 * 100) + 4 * (100 * 100 + 3 * 100) + (100 * 4 + 4);
  CHECK(arch.parameter_count() == expected);
  Rng rng(1);
  const PolicyNet net(arch, rng);
  CHECK(net.flatten().size() == expected);
  CHECK(net.params().size() == 4 * 5 + 2);
  CHECK(net.param("head.weight").rows == 4);
  CHECK(net.param_index("hidden0.ln_gain") == 2);
  CHECK_THROWS_AS(net.param("nope"), PreconditionError);
}

TEST_CASE("forward shape, purity and zero head") {
  Rng rng(2);
  PolicyNet net(NetArchitecture{3, 2, {8, 8}}, rng);
  const Vec s{0.1, -0.4, 2.0};
  const auto a = net.forward(s), b = net.forward(s);
  CHECK(a.mean.size() == 2);
  CHECK(a.log_var.size() == 2);
  CHECK(a.mean == b.mean);
  CHECK(a.log_var == b.log_var);

  for (auto& v : net.param("head.weight").value) v = 0.0;
  for (auto& v : net.param("head.bias").value) v = 0.0;
  for (const Vec& in : {Vec{0, 0, 0}, Vec{5, -3, 1}}) {
    const auto out = net.forward(in);
    CHECK(out.mean == Vec{0.0, 0.0});
    CHECK(out.log_var == Vec{0.0, 0.0});
  }
  CHECK_THROWS_AS(net.forward(Vec{1.0}), ShapeError);
  CHECK_THROWS_AS(net.forward(Vec{1.0, std::numeric_limits<double>::quiet_NaN(), 0.0}),
                  NumericError);
}

TEST_CASE("nll_loss") {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  CHECK(nll_loss({{1.0, 2.0}, {0.0, 0.0}}, Vec{1.0, 2.0}) == doctest::Approx(2.0 * half_log_2pi));
  CHECK(nll_loss({{0.0}, {0.0}}, Vec{1.0}) == doctest::Approx(1.418939).epsilon(1e-6));
  // Shrinking the variance around an exact mean drives the NLL down without bound.
  CHECK(nll_loss({{0.0}, {-20.0}}, Vec{0.0}) < nll_loss({{0.0}, {-10.0}}, Vec{0.0}));
  CHECK_THROWS_AS(nll_loss({{0.0}, {0.0}}, Vec{1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(nll_loss({{0.0}, {0.0}}, Vec{std::numeric_limits<double>::infinity()}),
                  NumericError);
}

TEST_CASE("log-variance is clamped and the clamp stops the gradient") {
  Rng rng(3);
  PolicyNet net(NetArchitecture{2, 1, {4}}, rng);
  for (auto& v : net.param("head.weight").value) v = 0.0;
  net.param("head.bias").value = {0.0, 50.0};
  const std::vector<Sample> batch{{{0.3, 0.1}, {1.0}}};
  CHECK(net.forward(batch[0].state).log_var[0] == kLogVarMax);
  const Gradients g = net.backward(batch);
  CHECK(g.grads[net.param_index("head.bias")][1] == 0.0);
}

TEST_CASE("backprop matches finite differences") {
  const auto r = checks::gradient_check(20);
  INFO(r.detail);
  CHECK(r.passed);
}

TEST_CASE("backends produce identical losses and gradients") {
  Rng rng(4);
  PolicyNet net(NetArchitecture{5, 3, {16, 16, 16}}, rng);
  const auto batch = random_batch(rng, 32, 5, 3);
  net.set_backend(kernels::Backend::serial);
  const Gradients a = net.backward(batch);
  net.set_backend(kernels::Backend::parallel);
  const Gradients b = net.backward(batch);
  CHECK(a.loss == b.loss);
  CHECK(a.grads == b.grads);
  CHECK(a.loss == doctest::Approx(net.mean_loss(batch)).epsilon(1e-14));
}

TEST_CASE("same seed gives the same initialization") {
  Rng r1(7), r2(7);
  const PolicyNet a(NetArchitecture{4, 2}, r1), b(NetArchitecture{4, 2}, r2);
  CHECK(a.flatten() == b.flatten());
  CHECK(a.param("hidden2.ln_gain").value == Vec(100, 1.0));
  CHECK(a.param("hidden2.ln_bias").value == Vec(100, 0.0));
}

TEST_CASE("flatten and assign_flat round trip") {
  Rng rng(5);
  PolicyNet net(NetArchitecture{3, 1, {6, 5}}, rng);
  Vec flat = net.flatten();
  for (auto& v : flat) v *= 2.0;
  net.assign_flat(flat);
  CHECK(net.flatten() == flat);
  CHECK_THROWS_AS(net.assign_flat(Vec(3, 0.0)), ShapeError);
}

TEST_CASE("model snapshot reload is exact") {
  Rng rng(6);
  const PolicyNet net(NetArchitecture{9, 2}, rng);
  std::stringstream ss;
  net.save(ss);
  const PolicyNet back = PolicyNet::load(ss);
  CHECK(back.architecture() == net.architecture());
  CHECK(back.flatten() == net.flatten());
  std::stringstream bad("atmom-model 7\n");
  CHECK_THROWS_AS(PolicyNet::load(bad), IoError);
}

TEST_CASE("empty batch") {
  Rng rng(8);
  const PolicyNet net(NetArchitecture{2, 1, {3}}, rng);
  CHECK_THROWS_AS(net.backward({}), PreconditionError);
}
