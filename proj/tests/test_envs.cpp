#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "atmom/bc.hpp"
#include "atmom/envs.hpp"
#include "atmom/error.hpp"

using namespace atmom;

namespace {

double controller_deviation(const PointMassPickDrop& env, const std::vector<Trajectory>& demos,
                            std::size_t* corrupted = nullptr, std::size_t* total = nullptr) {
  double sum = 0.0;
  std::size_t n = 0, bad = 0;
  for (const auto& t : demos)
    for (const auto& p : t.pairs) {
      const Vec c = env.executed_action(env.controller(p.state));
      const double dev = std::hypot(c[0] - p.action[0], c[1] - p.action[1]);
      sum += dev;
      if (dev != 0.0) ++bad;
      ++n;
    }
  if (corrupted) *corrupted = bad;
  if (total) *total = n;
  return sum / static_cast<double>(n);
}

}  // namespace

TEST_CASE("scripted expert solves every point-mass episode") {
  PointMassPickDrop env;
  const Policy expert = [&](std::span<const double> s) { return env.controller(s); };
  int successes = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    successes += evaluate_success(expert, env, 1, 40, rng) == 1.0;
  }
  CHECK(successes == 100);
}

TEST_CASE("zero policy never succeeds") {
  PointMassPickDrop env;
  Rng rng(1);
  const Policy zero = [](std::span<const double>) { return Vec{0.0, 0.0}; };
  CHECK(evaluate_success(zero, env, 50, 40, rng) == 0.0);
}

TEST_CASE("infinite pick radius reduces the task to reaching the drop zone") {
  PointMassParams p;
  p.r_pick = std::numeric_limits<double>::infinity();
  PointMassPickDrop env(p);
  Rng rng(3);
  const Vec s = env.reset(rng);
  CHECK(s[4] == 1.0);
  // The object rides with the agent from the start.
  CHECK(s[0] == s[2]);
  CHECK(s[1] == s[3]);
}

TEST_CASE("point-mass state layout and action clipping") {
  PointMassPickDrop env;
  Rng rng(4);
  const Vec s = env.reset(rng);
  REQUIRE(s.size() == 9);
  CHECK(s[7] == doctest::Approx(s[5] - s[2]));
  CHECK(s[8] == doctest::Approx(s[6] - s[3]));
  const StepResult r = env.step(Vec{10.0, 0.0});
  CHECK(r.state[0] - s[0] == doctest::Approx(0.1));
  CHECK(env.executed_action(Vec{std::numeric_limits<double>::quiet_NaN(), 1.0}) == Vec{0.0, 0.0});
  CHECK_THROWS_AS(env.step(Vec{1.0}), ShapeError);
}

TEST_CASE("stepping after the episode ends is an error") {
  PointMassParams p;
  p.budget = 3;
  PointMassPickDrop env(p);
  Rng rng(5);
  CHECK_THROWS_AS(env.step(Vec{0.0, 0.0}), PreconditionError);
  env.reset(rng);
  for (int i = 0; i < 3; ++i) env.step(Vec{0.0, 0.0});
  CHECK(env.done());
  CHECK_THROWS_AS(env.step(Vec{0.0, 0.0}), PreconditionError);
}

TEST_CASE("episodes are deterministic given the seed") {
  PointMassPickDrop env;
  Rng r1(9), r2(9);
  const auto a = record_demos(env, ScriptedDemonstrator::amateur(HeavyTailNoise{}, Hesitation{}), 5, r1);
  const auto b = record_demos(env, ScriptedDemonstrator::amateur(HeavyTailNoise{}, Hesitation{}), 5, r2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].pairs.size() == b[i].pairs.size());
    for (std::size_t j = 0; j < a[i].pairs.size(); ++j) {
      CHECK(a[i].pairs[j].state == b[i].pairs[j].state);
      CHECK(a[i].pairs[j].action == b[i].pairs[j].action);
    }
  }
}

TEST_CASE("expert demonstrations") {
  PointMassPickDrop env;
  Rng rng(36);
  const auto demos = record_demos(env, ScriptedDemonstrator::expert(), 36, rng);
  CHECK(demos.size() == 36);
  std::size_t ok = 0;
  for (const auto& t : demos) {
    CHECK(t.provenance == Provenance::expert);
    ok += t.success;
  }
  CHECK(ok >= 35);
  CHECK(controller_deviation(env, demos) == 0.0);
  CHECK_THROWS_AS(record_demos(env, ScriptedDemonstrator::expert(), 0, rng), PreconditionError);
  ScriptedDemonstrator noisy_expert;
  noisy_expert.heavy_tail = HeavyTailNoise{};
  CHECK_THROWS_AS(record_demos(env, noisy_expert, 1, rng), PreconditionError);
}

TEST_CASE("amateur demonstrations mix clean and corrupted pairs") {
  PointMassPickDrop env;
  Rng rng(7);
  const auto demos =
      record_demos(env, ScriptedDemonstrator::amateur(HeavyTailNoise{}, Hesitation{}), 20, rng);
  std::size_t corrupted = 0, total = 0;
  controller_deviation(env, demos, &corrupted, &total);
  CHECK(corrupted > 0);
  CHECK(corrupted < total);
  for (const auto& t : demos) CHECK(t.provenance == Provenance::amateur);
}

TEST_CASE("heavy-tailed amateur deviates far more than the expert") {
  PointMassPickDrop env;
  Rng r1(8), r2(8);
  const auto expert = record_demos(env, ScriptedDemonstrator::expert(), 10, r1);
  const auto amateur = record_demos(
      env, ScriptedDemonstrator::amateur(HeavyTailNoise{1.0, 1.0, 1.0}, std::nullopt), 10, r2);
  const double de = controller_deviation(env, expert);
  const double da = controller_deviation(env, amateur);
  CHECK(da > 0.0);
  CHECK(da >= 10.0 * de);
}

TEST_CASE("successful-only recording") {
  PointMassPickDrop env;
  Rng rng(10);
  const auto demos = record_demos(
      env, ScriptedDemonstrator::amateur(HeavyTailNoise{1.0, 0.2, 1.0}, Hesitation{}), 10, rng,
      true);
  CHECK(demos.size() == 10);
  for (const auto& t : demos) CHECK(t.success);
}

TEST_CASE("linear-Gaussian task") {
  LinGaussEnv env(LinGaussParams{});
  CHECK(env.state_dim() == 2);
  CHECK(env.budget() == 1);
  // Expected NLL of the true conditional: the Gaussian differential entropy.
  const double floor = 0.5 * std::log(2.0 * std::numbers::pi * 0.01) + 0.5;
  CHECK(env.nll_floor_per_dim() == doctest::Approx(floor));
  CHECK(floor == doctest::Approx(-0.8836).epsilon(1e-3));

  Rng rng(11);
  const Policy expert = [&](std::span<const double> s) { return env.expert_action(s, rng); };
  Rng eval(12);
  const double rate = evaluate_success(expert, env, 10000, 1, eval);
  // Three-sigma box per coordinate: 0.9973^2.
  CHECK(rate == doctest::Approx(0.9973 * 0.9973).epsilon(0.004));

  const Policy exact = [&](std::span<const double> s) { return env.optimal_action(s); };
  CHECK(evaluate_success(exact, env, 100, 1, eval) == 1.0);
  CHECK_THROWS_AS(LinGaussEnv(LinGaussParams{2, 2, {}, -1.0, 0.3}), DomainError);
  CHECK_THROWS_AS(LinGaussEnv(LinGaussParams{2, 2, {1.0}, 0.1, 0.3}), ShapeError);
}

TEST_CASE("linear-Gaussian matrix is applied row-major") {
  LinGaussEnv env(LinGaussParams{2, 1, {2.0, -1.0}, 0.0, 0.3});
  CHECK(env.optimal_action(Vec{1.0, 3.0}) == Vec{-1.0});
}

TEST_CASE("demo file round trip") {
  PointMassPickDrop env;
  Rng rng(13);
  auto demos = record_demos(env, ScriptedDemonstrator::amateur(HeavyTailNoise{}, Hesitation{}), 4, rng);
  demos.front().provenance = Provenance::expert;
  std::stringstream ss;
  write_demos(ss, demos);
  const auto back = read_demos(ss);
  REQUIRE(back.size() == demos.size());
  for (std::size_t i = 0; i < demos.size(); ++i) {
    CHECK(back[i].provenance == demos[i].provenance);
    CHECK(back[i].success == demos[i].success);
    REQUIRE(back[i].pairs.size() == demos[i].pairs.size());
    for (std::size_t j = 0; j < demos[i].pairs.size(); ++j) {
      CHECK(back[i].pairs[j].state == demos[i].pairs[j].state);
      CHECK(back[i].pairs[j].action == demos[i].pairs[j].action);
    }
  }
  std::stringstream bad("# atmom-demos 1\nfoo,bar\n");
  CHECK_THROWS_AS(read_demos(bad), IoError);
}
