// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include "atmom/kernels.hpp"
#include "atmom/nn.hpp"
#include "atmom/numerics.hpp"

using namespace atmom;
using kernels::Backend;

namespace {

Vec random_vec(Rng& rng, std::size_t n) {
  Vec v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

Backend backend_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Backend::serial : Backend::parallel;
}

void BM_AffineForward(benchmark::State& state) {
  Rng rng(1);
  const kernels::Shape s{32, 100, 100};
  const Vec x = random_vec(rng, s.batch * s.in), w = random_vec(rng, s.out * s.in),
            b = random_vec(rng, s.out);
  Vec y(s.batch * s.out);
  for (auto _ : state) {
    kernels::affine_forward(backend_of(state), s, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_AffineBackward(benchmark::State& state) {
  Rng rng(2);
  const kernels::Shape s{32, 100, 100};
  const Vec x = random_vec(rng, s.batch * s.in), w = random_vec(rng, s.out * s.in),
            dy = random_vec(rng, s.batch * s.out);
  Vec dx(x.size()), dw(w.size()), db(s.out);
  for (auto _ : state) {
    kernels::affine_backward(backend_of(state), s, x, w, dy, dx, dw, db);
    benchmark::DoNotOptimize(dw.data());
  }
}

void BM_LayerNormForward(benchmark::State& state) {
  Rng rng(3);
  const std::size_t batch = 32, n = 100;
  const Vec x = random_vec(rng, batch * n), gain(n, 1.0), bias(n, 0.0);
  Vec xhat(batch * n), inv_std(batch), y(batch * n);
  for (auto _ : state) {
    kernels::layernorm_forward(backend_of(state), batch, n, x, gain, bias, 1e-5, xhat, inv_std, y);
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_PolicyBackward(benchmark::State& state) {
  Rng rng(4);
  PolicyNet net(NetArchitecture{9, 2}, rng);
  net.set_backend(backend_of(state));
  std::vector<Sample> batch(32);
  for (auto& smp : batch) {
    smp.state = random_vec(rng, 9);
    smp.action = random_vec(rng, 2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(net.backward(batch).loss);
}

}  // namespace

// Argument 0 is the serial reference, 1 the OpenMP backend.
BENCHMARK(BM_AffineForward)->Arg(0)->Arg(1);
BENCHMARK(BM_AffineBackward)->Arg(0)->Arg(1);
BENCHMARK(BM_LayerNormForward)->Arg(0)->Arg(1);
BENCHMARK(BM_PolicyBackward)->Arg(0)->Arg(1);

BENCHMARK_MAIN();
