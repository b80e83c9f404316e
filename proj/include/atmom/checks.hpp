#pragma once

#include <functional>
#include <string>
#include <vector>

// Oracle and invariant checks shared by the `check` subcommand and the acceptance
// binary. Every check compares the library against an independent route (finite
// differences, a likelihood grid search, frozen high-precision traces, closed forms).
namespace atmom::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

CheckResult gradient_check(int n_nets = 20);
CheckResult gaussian_limit_equivalence(int steps = 1000);
CheckResult at_momentum_hand_trace();
CheckResult dof_recovery();
CheckResult outlier_suppression();
CheckResult trigamma_accuracy();

// Behavioural-cloning studies (minutes).
CheckResult bc_robustness();
CheckResult amateur_utility();
CheckResult adaptivity();

struct NamedCheck {
  std::string id;
  std::function<CheckResult()> run;
  bool slow = false;
};

std::vector<NamedCheck> registry();

// Grid-search maximum likelihood of nu for standard (loc 0, scale 1) 1-D Student-t
// data over {0.5, 0.6, ..., 50}.
double student_t_mle_grid(const std::vector<double>& samples);

}  // namespace atmom::checks
