#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "atmom/checks.hpp"
#include "atmom/dof.hpp"
#include "atmom/error.hpp"
#include "atmom/moments.hpp"

using namespace atmom;

TEST_CASE("dof_z") {
  CHECK(dof_z(1.0) == 0.0);
  CHECK(dof_z(std::exp(2.0)) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(dof_z(0.0) == doctest::Approx(std::log(1e-8)).epsilon(1e-15));
  CHECK(dof_z(0.0) == doctest::Approx(-18.42).epsilon(1e-3));
  CHECK(dof_z(-5.0) == dof_z(0.0));
}

TEST_CASE("dof_factor") {
  CHECK(dof_factor(2.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(dof_factor(6.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(dof_factor(1e-8) == doctest::Approx(2e8).epsilon(1e-7));
  double prev = std::numeric_limits<double>::infinity();
  for (double b = 1e-6; b < 1e4; b *= 1.3) {
    const double k = dof_factor(b);
    CHECK(k > 0.0);
    CHECK(k < prev);
    prev = k;
  }
}

TEST_CASE("dof_update floors b and keeps nu = k d") {
  DofState s = DofState::init(10, 0.9);
  CHECK(s.z_tilde == doctest::Approx(trigamma(5.0)));
  // D = 1 gives z = 0, so z_tilde only shrinks and b hits the floor.
  DofState f = s;
  const auto u = dof_update(f, 1.0);
  CHECK(u.b == kDofFloor);
  CHECK(f.k == doctest::Approx(dof_factor(kDofFloor)));
  CHECK(f.nu == doctest::Approx(f.k * 10.0).epsilon(1e-15));

  const double l10 = std::log(10.0);
  const auto v = dof_update(s, 10.0);
  CHECK(v.b == doctest::Approx(0.9 * trigamma(5.0) + 0.09 * l10 * l10 - trigamma(5.0)).epsilon(1e-14));
  CHECK(s.nu == doctest::Approx(dof_factor(v.b) * 10.0).epsilon(1e-15));
}

TEST_CASE("dof_update ordering: variance uses the previous mean") {
  DofState s = DofState::init(1, 0.5);
  s.z_bar = 1.0;
  s.z_tilde = 0.0;
  dof_update(s, std::exp(3.0));
  // z = 3, old mean 1: z_tilde = 0.5 * 0 + 0.25 * 4 = 1; z_bar = 0.5 + 1.5 = 2.
  CHECK(s.z_tilde == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.z_bar == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("dof state invariants on random distance streams") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.below(50);
    DofState s = DofState::init(d, rng.uniform() < 0.5 ? 0.9 : 0.999);
    for (int step = 0; step < 500; ++step) {
      const double dist = rng.uniform() < 0.05 ? 0.0 : std::exp(6.0 * rng.normal());
      dof_update(s, dist);
      CHECK(s.z_tilde >= 0.0);
      CHECK(s.k > 0.0);
      CHECK(s.nu == doctest::Approx(s.k * static_cast<double>(d)).epsilon(1e-15));
    }
  }
}

TEST_CASE("batch_dof_reference") {
  CHECK_THROWS_AS(batch_dof_reference(std::vector<std::vector<double>>{{1.0}}), DomainError);
  Rng rng(1);
  std::vector<std::vector<double>> gauss(100000);
  for (auto& p : gauss) p = {rng.normal()};
  const double est = batch_dof_reference(gauss);
  CHECK((est >= 50.0 || std::isinf(est)));
}

TEST_CASE("batch_dof_reference agrees with the likelihood grid") {
  for (double nu : {3.0, 5.0}) {
    Rng rng(static_cast<std::uint64_t>(40 + nu));
    std::vector<std::vector<double>> pts(100000);
    std::vector<double> flat(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      pts[i] = sample_student_t(rng, nu, 1);
      flat[i] = pts[i][0];
    }
    const double est = batch_dof_reference(pts);
    const double mle = checks::student_t_mle_grid(flat);
    CHECK(std::abs(est - mle) / mle <= 0.2);
    CHECK(std::abs(mle - nu) <= 0.3 * nu);
  }
}

TEST_CASE("at_momentum_step with zero deviation") {
  TMomentState m = TMomentState::zeros(2, 0.9);
  m.m = {1.0, -1.0};
  m.sigma2 = {1.0, 1.0};
  DofState dof = DofState::init(2, 0.9);
  const auto diag = at_momentum_step(m, dof, Vec{1.0, -1.0});
  CHECK(diag.distance == 0.0);
  CHECK(diag.z == doctest::Approx(std::log(kDofFloor)));
  CHECK(diag.w == doctest::Approx((diag.nu + 2.0) / diag.nu).epsilon(1e-15));
  CHECK(m.m == Vec{1.0, -1.0});
}

TEST_CASE("at_momentum_step uses the fresh nu") {
  TMomentState m = TMomentState::zeros(1, 0.9);
  m.sigma2 = {1.0};
  DofState dof = DofState::init(1, 0.9);
  dof.z_tilde = 50.0;  // forces a small k on this very step
  const auto diag = at_momentum_step(m, dof, Vec{3.0});
  CHECK(diag.nu == dof.nu);
  CHECK(diag.w == doctest::Approx((dof.nu + 1.0) / (dof.nu + diag.distance)).epsilon(1e-15));
  CHECK(diag.k < 1.0);
}

TEST_CASE("frozen estimator matches the fixed-nu t-momentum") {
  Rng rng(6);
  const std::size_t d = 5;
  TMomentState a = TMomentState::zeros(d, 0.9), b = a;
  DofState frozen = DofState::frozen(d, 1e12);
  for (int step = 0; step < 1000; ++step) {
    Vec g(d);
    for (auto& v : g) v = rng.normal() * (rng.uniform() < 0.1 ? 30.0 : 1.0);
    at_momentum_step(a, frozen, g);
    t_momentum_update(b, g, 1e12 * static_cast<double>(d));
    ema_variance_update(a, g, 0.999);
    ema_variance_update(b, g, 0.999);
    for (std::size_t j = 0; j < d; ++j) REQUIRE(std::abs(a.m[j] - b.m[j]) <= 1e-9);
  }
}

TEST_CASE("gaussian gradient stream keeps k above 1") {
  Rng rng(2024);
  const std::size_t d = 100;
  TMomentState m = TMomentState::zeros(d, 0.9);
  m.sigma2.assign(d, 1.0);
  DofState dof = DofState::init(d, 0.999);
  std::vector<double> ks;
  for (int step = 0; step < 10000; ++step) {
    Vec g(d);
    for (auto& v : g) v = rng.normal();
    const auto diag = at_momentum_step(m, dof, g);
    ema_variance_update(m, g, 0.999);
    if (step >= 9000) ks.push_back(diag.k);
  }
  CHECK(median(ks) > 1.0);
}

TEST_CASE("gross outliers receive smaller weights") {
  Rng rng(77);
  const std::size_t d = 10;
  TMomentState m = TMomentState::zeros(d, 0.9);
  DofState dof = DofState::init(d, 0.999);
  std::vector<double> w_out, w_clean;
  for (int step = 0; step < 5000; ++step) {
    const bool outlier = rng.uniform() < 0.3;
    Vec g(d);
    for (auto& v : g) v = outlier ? 100.0 * sample_student_t(rng, 1.0, 1)[0] : rng.normal();
    const auto diag = at_momentum_step(m, dof, g);
    ema_variance_update(m, g, 0.999);
    CHECK(std::isfinite(diag.k));
    CHECK(diag.k > 0.0);
    if (step >= 100) (outlier ? w_out : w_clean).push_back(diag.w);
  }
  CHECK(median(w_out) < median(w_clean));
}

TEST_CASE("three-step trace") {
  const auto r = checks::at_momentum_hand_trace();
  INFO(r.detail);
  CHECK(r.passed);
}
