#include "atmom/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "atmom/dof.hpp"
#include "atmom/experiment.hpp"
#include "atmom/moments.hpp"
#include "atmom/nn.hpp"
#include "atmom/numerics.hpp"
#include "atmom/optim.hpp"

namespace atmom::checks {

namespace {

template <typename Body>
CheckResult timed(std::string name, Body&& body) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r;
  r.name = std::move(name);
  std::ostringstream detail;
  try {
    r.passed = body(detail);
  } catch (const std::exception& e) {
    r.passed = false;
    detail << "exception: " << e.what();
  }
  r.detail = detail.str();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

CheckResult gradient_check(int n_nets) {
  return timed("backprop matches central finite differences", [&](std::ostream& os) {
    double worst = 0.0;
    for (int seed = 1; seed <= n_nets; ++seed) {
      Rng rng(static_cast<std::uint64_t>(seed));
      NetArchitecture arch;
      arch.state_dim = 1 + rng.below(4);
      arch.action_dim = 1 + rng.below(3);
      arch.hidden.assign(1 + rng.below(3), 0);
      for (auto& h : arch.hidden) h = 3 + rng.below(6);
      PolicyNet net(arch, rng);
      // Non-trivial layer-norm parameters.
      for (auto& p : net.params())
        if (p.name.find("ln_") != std::string::npos)
          for (auto& v : p.value) v += 0.3 * rng.normal();

      std::vector<Sample> batch(4);
      for (auto& s : batch) {
        s.state.resize(arch.state_dim);
        s.action.resize(arch.action_dim);
        for (auto& v : s.state) v = rng.normal();
        for (auto& v : s.action) v = rng.normal();
      }
      const Gradients g = net.backward(batch);
      Vec analytic;
      for (const auto& t : g.grads) analytic.insert(analytic.end(), t.begin(), t.end());

      PolicyNet probe = net;
      const Vec x0 = net.flatten();
      const Vec fd = finite_difference_gradient(
          [&](std::span<const double> x) {
            probe.assign_flat(x);
            return probe.mean_loss(batch);
          },
          x0, 1e-5);
      Vec diff(fd.size());
      for (std::size_t i = 0; i < fd.size(); ++i) diff[i] = analytic[i] - fd[i];
      const double rel = max_abs(diff) / (max_abs(fd) + 1e-8);
      worst = std::max(worst, rel);
    }
    os << n_nets << " nets, worst relative error " << worst << " (tolerance 1e-5)";
    return worst <= 1e-5;
  });
}

// ---------------------------------------------------------------------------

namespace {

// Noisy quadratic: g = diag(curv) * theta + noise, noise drawn from a shared stream so
// that every optimizer sees the same perturbations.
std::vector<Vec> run_noisy_quadratic(const OptimConfig& cfg, int steps, std::uint64_t seed) {
  const std::size_t d = 8;
  Rng noise(seed);
  Vec curv(d);
  for (std::size_t j = 0; j < d; ++j) curv[j] = 0.5 + 0.25 * static_cast<double>(j);
  ParamSlot slot = ParamSlot::create("theta", Vec(d, 1.0), cfg);
  std::vector<Vec> trajectory;
  for (int t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < d; ++j) slot.grad[j] = curv[j] * slot.value[j] + noise.normal();
    optimizer_step(slot.state, slot.value, slot.grad, cfg);
    trajectory.push_back(slot.value);
  }
  return trajectory;
}

double max_trajectory_gap(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  double gap = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t j = 0; j < a[t].size(); ++j) gap = std::max(gap, std::abs(a[t][j] - b[t][j]));
  return gap;
}

}  // namespace

CheckResult gaussian_limit_equivalence(int steps) {
  return timed("t-Adam / At-Adam reduce to Adam in the Gaussian limit", [&](std::ostream& os) {
    OptimConfig adam;
    adam.lr = 1e-2;
    OptimConfig tadam = adam;
    tadam.kind = OptimKind::t_adam;
    tadam.fixed_k = 1e12;
    OptimConfig atadam = adam;
    atadam.kind = OptimKind::at_adam;
    atadam.frozen_k = 1e12;

    const auto ref = run_noisy_quadratic(adam, steps, 7);
    const double gap_t = max_trajectory_gap(ref, run_noisy_quadratic(tadam, steps, 7));
    const double gap_at = max_trajectory_gap(ref, run_noisy_quadratic(atadam, steps, 7));
    os << steps << " steps, max gap t-Adam " << gap_t << ", At-Adam " << gap_at
       << " (tolerance 1e-9)";
    return gap_t <= 1e-9 && gap_at <= 1e-9;
  });
}

// ---------------------------------------------------------------------------

CheckResult at_momentum_hand_trace() {
  return timed("At-momentum three-step trace", [](std::ostream& os) {
    // Produced by tests/oracles/at_momentum_trace.py (50-digit arithmetic).
    // Columns: D, z, z_tilde, z_bar, b, nu, w, beta_w, m, W.
    static constexpr double kExpected[3][10] = {
        {0.249999997500000025, -1.3862943711198905688, 4.6142850679960937379,
         -0.13862943711198905688, 1.0e-8, 200000001.99999998, 1.0000000037499999703,
         0.8999999996625000028, 0.050000000168749998601, 9.0000000033749999733},
        {897.00249101986696489, 6.7990586391116479795, 8.4846929870642910441,
         0.55513937051037464676, 3.5498907865196117347, 1.3799471608506770679,
         0.0026491470221415096995, 0.99970573694721573753, 0.058813178599589002606,
         8.1023842353574273347},
        {1.1210853359653117994, 0.11429726605022136784, 7.6537144468536990423,
         0.51105516006435931887, 2.7189122463090197329, 1.6352518759834212774,
         0.9560702023539041692, 0.89445548256293260319, -0.052938747391712074749,
         8.1526089939401983535},
    };
    TMomentState moment = TMomentState::zeros(1, 0.9);
    moment.sigma2 = {1.0};
    DofState dof = DofState::init(1, 0.9);
    const double grads[3] = {0.5, 30.0, -1.0};
    double worst = 0.0;
    for (int t = 0; t < 3; ++t) {
      const double g[1] = {grads[t]};
      const auto d = at_momentum_step(moment, dof, g);
      const double got[10] = {d.distance, d.z,      dof.z_tilde,   dof.z_bar,    d.b,
                              d.nu,       d.w,      d.beta_w,      moment.m[0],  moment.W};
      for (int c = 0; c < 10; ++c) {
        const double err = std::abs(got[c] - kExpected[t][c]) / std::max(1.0, std::abs(kExpected[t][c]));
        worst = std::max(worst, err);
      }
    }
    os << "worst error " << worst << " (tolerance 1e-12, relative above magnitude 1)";
    return worst <= 1e-12;
  });
}

// ---------------------------------------------------------------------------

double student_t_mle_grid(const std::vector<double>& samples) {
  double best_nu = 0.0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int i = 5; i <= 500; ++i) {
    const double nu = 0.1 * i;
    const double norm = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                        0.5 * std::log(nu * std::numbers::pi);
    double ll = 0.0;
    for (double x : samples) ll += norm - 0.5 * (nu + 1.0) * std::log1p(x * x / nu);
    if (ll > best_ll) {
      best_ll = ll;
      best_nu = nu;
    }
  }
  return best_nu;
}

CheckResult dof_recovery() {
  return timed("batch DoF estimator recovers nu on Student-t data", [](std::ostream& os) {
    bool ok = true;
    const char* sep = "";
    struct Case {
      double nu, lo, hi;
    };
    for (const Case c : {Case{3.0, 2.4, 3.6}, Case{5.0, 4.0, 6.0}}) {
      Rng rng(static_cast<std::uint64_t>(100 + c.nu));
      std::vector<std::vector<double>> points(100000);
      std::vector<double> flat(points.size());
      for (std::size_t i = 0; i < points.size(); ++i) {
        points[i] = sample_student_t(rng, c.nu, 1);
        flat[i] = points[i][0];
      }
      const double est = batch_dof_reference(points);
      const double mle = student_t_mle_grid(flat);
      const double rel = std::abs(est - mle) / mle;
      const bool pass = est >= c.lo && est <= c.hi && rel <= 0.2;
      os << sep << "nu=" << c.nu << ": estimate " << est << " in [" << c.lo << ", " << c.hi
         << "], MLE " << mle << ", rel diff " << rel << (pass ? "" : " FAIL");
      sep = "; ";
      ok = ok && pass;
    }
    return ok;
  });
}

// ---------------------------------------------------------------------------

namespace {

// f(theta) = theta^2 / 2 from theta = 1. With probability 0.3 a step's gradient
// carries an additive outlier of magnitude 100 with random sign.
double bowl_final_loss(const OptimConfig& cfg, std::uint64_t seed, int steps = 5000) {
  Rng rng(seed);
  ParamSlot slot = ParamSlot::create("theta", Vec{1.0}, cfg);
  for (int t = 0; t < steps; ++t) {
    double g = slot.value[0];
    if (rng.uniform() < 0.3) g += rng.uniform() < 0.5 ? 100.0 : -100.0;
    slot.grad[0] = g;
    optimizer_step(slot.state, slot.value, slot.grad, cfg);
  }
  return 0.5 * slot.value[0] * slot.value[0];
}

}  // namespace

CheckResult outlier_suppression() {
  return timed("t-Adam / At-Adam suppress outlier gradients on a quadratic bowl",
               [](std::ostream& os) {
    OptimConfig adam;
    adam.lr = 0.01;
    OptimConfig tadam = adam;
    tadam.kind = OptimKind::t_adam;
    tadam.fixed_k = 1.0;
    OptimConfig atadam = adam;
    atadam.kind = OptimKind::at_adam;

    std::vector<double> la, lt, lat;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      la.push_back(bowl_final_loss(adam, seed));
      lt.push_back(bowl_final_loss(tadam, seed));
      lat.push_back(bowl_final_loss(atadam, seed));
    }
    const double ma = median(la), mt = median(lt), mat = median(lat);
    os << "median final loss: Adam " << ma << ", t-Adam " << mt << " (ratio " << mt / ma
       << "), At-Adam " << mat << " (ratio " << mat / ma << "); required ratio <= 0.1";
    return mt <= 0.1 * ma && mat <= 0.1 * ma;
  });
}

// ---------------------------------------------------------------------------

CheckResult trigamma_accuracy() {
  return timed("trigamma identities and recurrence", [](std::ostream& os) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double e1 = std::abs(trigamma(0.5) - pi2 / 2.0);
    const double e2 = std::abs(trigamma(1.0) - pi2 / 6.0);
    const double e3 = std::abs(trigamma(2.0) - (pi2 / 6.0 - 1.0));
    const double identity = std::max({e1, e2, e3});
    Rng rng(42);
    double residual = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double x = 0.1 + 99.9 * rng.uniform();
      residual = std::max(residual, std::abs(trigamma(x) - trigamma(x + 1.0) - 1.0 / (x * x)));
    }
    os << "identity error " << identity << " (tol 1e-10), recurrence residual " << residual
       << " (tol 1e-12)";
    return identity <= 1e-10 && residual <= 1e-12;
  });
}

// ---------------------------------------------------------------------------
// Behavioural-cloning studies

namespace {

ArmSpec arm(const std::string& name, OptimKind kind, double lambda = 0.999, double k = 1.0) {
  ArmSpec a;
  a.name = name;
  a.optim.kind = kind;
  a.optim.lambda = lambda;
  a.optim.fixed_k = k;
  return a;
}

const RunRecord& find_run(const RunResult& r, const std::string& arm, std::uint64_t seed,
                          std::size_t count) {
  for (const auto& run : r.runs)
    if (run.arm == arm && run.seed == seed && run.amateur_count == count) return run;
  throw std::runtime_error("missing run " + arm);
}

}  // namespace

ExperimentConfig bc_robustness_config() {
  ExperimentConfig cfg;
  cfg.name = "lingauss-heavy-tail";
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.env.type = "lingauss";
  cfg.env.lingauss = LinGaussParams{2, 2, {}, 0.1, 0.3};
  cfg.amateur = ScriptedDemonstrator::amateur(HeavyTailNoise{1.0, 10.0, 1.0}, std::nullopt);
  cfg.demos.expert_train = 700;
  cfg.demos.expert_validation = 300;
  cfg.demos.amateur_pool = 300;
  cfg.demos.amateur_counts = {300};
  cfg.arms = {arm("adam", OptimKind::adam), arm("t_adam", OptimKind::t_adam),
              arm("at_adam_0.9", OptimKind::at_adam, 0.9),
              arm("at_adam_0.999", OptimKind::at_adam, 0.999)};
  cfg.training.epochs = 60;
  cfg.training.batch_size = 32;
  cfg.training.eta = 0.0;
  cfg.training.diag_stride = 0;
  cfg.eval.n_runs = 100;
  cfg.eval.budget = 1;
  return cfg;
}

CheckResult bc_robustness() {
  return timed("BC with heavy-tailed amateur actions: robust arms beat Adam", [](std::ostream& os) {
    const RunResult r = run_experiment(bc_robustness_config());
    int ordered = 0, ordered_slow = 0;
    std::vector<double> va, vt, vat, vslow;
    for (std::uint64_t seed : r.config.seeds) {
      const double a = find_run(r, "adam", seed, 300).final_validation_nll();
      const double t = find_run(r, "t_adam", seed, 300).final_validation_nll();
      const double at = find_run(r, "at_adam_0.9", seed, 300).final_validation_nll();
      const double slow = find_run(r, "at_adam_0.999", seed, 300).final_validation_nll();
      va.push_back(a);
      vt.push_back(t);
      vat.push_back(at);
      vslow.push_back(slow);
      if (t < a && at < a) ++ordered;
      if (t < a && slow < a) ++ordered_slow;
    }
    const double ma = median(va), mt = median(vt), mat = median(vat);
    os << "median validation NLL: Adam " << ma << ", t-Adam " << mt << ", At-Adam(0.9) " << mat
       << "; strict ordering in " << ordered << "/5 seeds (need >= 4); At-Adam(0.999) "
       << median(vslow) << ", ordering " << ordered_slow << "/5";
    return mt < ma && mat < ma && ordered >= 4;
  });
}

ExperimentConfig amateur_utility_config() {
  ExperimentConfig cfg;
  cfg.name = "pointmass-amateur-utility";
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.env.type = "pointmass";
  cfg.demos.expert_train = 5;
  cfg.demos.expert_validation = 5;
  cfg.demos.amateur_pool = 10;
  cfg.demos.amateur_counts = {0, 10};
  // Amateur trajectories run longer than expert ones, so 10 of them outweigh 5
  // expert trajectories pair-wise.
  cfg.demos.alpha_bound = AlphaBound::relaxed;
  cfg.arms = {arm("at_adam_0.9", OptimKind::at_adam, 0.9),
              arm("at_adam_0.999", OptimKind::at_adam, 0.999)};
  cfg.training.epochs = 150;
  cfg.training.batch_size = 32;
  cfg.training.eta = 0.03;
  cfg.training.diag_stride = 0;
  cfg.eval.n_runs = 20;
  cfg.eval.budget = 40;
  return cfg;
}

CheckResult amateur_utility() {
  return timed("amateur trajectories help At-Adam with few experts", [](std::ostream& os) {
    const RunResult r = run_experiment(amateur_utility_config());
    bool ok = true;
    for (const char* name : {"at_adam_0.9", "at_adam_0.999"}) {
      int increased = 0;
      double mean0 = 0.0, mean10 = 0.0;
      os << name << " success (0 -> 10 amateurs):";
      for (std::uint64_t seed : r.config.seeds) {
        const double s0 = find_run(r, name, seed, 0).success_rate;
        const double s10 = find_run(r, name, seed, 10).success_rate;
        mean0 += s0 / 5.0;
        mean10 += s10 / 5.0;
        if (s10 > s0) ++increased;
        os << ' ' << s0 << "->" << s10;
      }
      os << ", mean " << mean0 << " -> " << mean10 << ", increased in " << increased << "/5; ";
      if (std::string(name) == "at_adam_0.9") ok = mean10 >= mean0 && increased >= 3;
    }
    os << "judged on at_adam_0.9 (need mean not lower and >= 3/5 increases)";
    return ok;
  });
}

ExperimentConfig adaptivity_config() {
  ExperimentConfig cfg;
  cfg.name = "pointmass-expert-only";
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.env.type = "pointmass";
  cfg.demos.expert_train = 10;
  cfg.demos.expert_validation = 5;
  cfg.demos.amateur_pool = 0;
  cfg.demos.amateur_counts = {0};
  cfg.arms = {arm("t_adam", OptimKind::t_adam), arm("at_adam_0.9", OptimKind::at_adam, 0.9),
              arm("at_adam_0.999", OptimKind::at_adam, 0.999)};
  cfg.training.epochs = 150;
  cfg.training.batch_size = 32;
  cfg.training.eta = 0.0;
  cfg.training.diag_stride = 0;
  cfg.eval.n_runs = 20;
  cfg.eval.budget = 40;
  return cfg;
}

CheckResult adaptivity() {
  return timed("clean data: At-Adam at least as good as t-Adam(k=1), median k > 1",
               [](std::ostream& os) {
    const RunResult r = run_experiment(adaptivity_config());
    double st = 0.0;
    for (std::uint64_t seed : r.config.seeds) st += find_run(r, "t_adam", seed, 0).success_rate / 5.0;
    os << "mean success t-Adam(k=1) " << st;
    bool ok = true;
    for (const char* name : {"at_adam_0.9", "at_adam_0.999"}) {
      double sat = 0.0;
      std::vector<double> ks;
      for (std::uint64_t seed : r.config.seeds) {
        const auto& at = find_run(r, name, seed, 0);
        sat += at.success_rate / 5.0;
        ks.insert(ks.end(), at.median_k.begin(), at.median_k.end());
      }
      const double mk = median(ks);
      os << "; " << name << " success " << sat << ", median k over final third " << mk;
      if (std::string(name) == "at_adam_0.9") ok = sat >= st && mk > 1.0;
    }
    os << "; judged on at_adam_0.9 (need success >= t-Adam and median k > 1)";
    return ok;
  });
}

std::vector<NamedCheck> registry() {
  return {
      {"gradients", [] { return gradient_check(); }, false},
      {"gaussian-limit", [] { return gaussian_limit_equivalence(); }, false},
      {"hand-trace", at_momentum_hand_trace, false},
      {"dof-recovery", dof_recovery, false},
      {"outliers", outlier_suppression, false},
      {"trigamma", trigamma_accuracy, false},
      {"bc-robustness", bc_robustness, true},
      {"amateur-utility", amateur_utility, true},
      {"adaptivity", adaptivity, true},
  };
}

}  // namespace atmom::checks
