// One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "atmom/checks.hpp"

namespace fs = std::filesystem;
using atmom::checks::CheckResult;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return rc;
}

// Sweep from the config, then again from the emitted manifest.
CheckResult manifest_determinism() {
  CheckResult r;
  r.name = "determinism";
  const fs::path work = fs::temp_directory_path() / "atmom_acceptance_determinism";
  fs::remove_all(work);
  const std::string cli = ATMOM_CLI_PATH;
  const std::string cfg = ATMOM_SMOKE_CONFIG;
  const fs::path a = work / "from_config", b = work / "from_manifest";
  if (run(cli + " sweep --config " + cfg + " --out " + a.string()) != 0) {
    r.detail = "sweep from config failed";
    return r;
  }
  if (run(cli + " sweep --manifest " + (a / "manifest.json").string() + " --out " + b.string()) !=
      0) {
    r.detail = "sweep from manifest failed";
    return r;
  }
  const std::string sa = slurp(a / "summary.csv"), sb = slurp(b / "summary.csv");
  r.passed = !sa.empty() && sa == sb;
  r.detail = "summary.csv " + std::to_string(sa.size()) + " bytes, " +
             (sa == sb ? "identical" : "differs");
  return r;
}

}  // namespace

int main() {
  namespace c = atmom::checks;
  const std::vector<std::pair<std::string, std::function<CheckResult()>>> criteria = {
      {"gradient correctness", [] { return c::gradient_check(); }},
      {"gaussian-limit equivalence", [] { return c::gaussian_limit_equivalence(); }},
      {"at-momentum hand trace", [] { return c::at_momentum_hand_trace(); }},
      {"dof recovery", [] { return c::dof_recovery(); }},
      {"outlier suppression", [] { return c::outlier_suppression(); }},
      {"bc robustness", [] { return c::bc_robustness(); }},
      {"amateur-data utility", [] { return c::amateur_utility(); }},
      {"adaptivity", [] { return c::adaptivity(); }},
      {"trigamma accuracy", [] { return c::trigamma_accuracy(); }},
      {"sweep determinism", manifest_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2zu %s (%.1fs): %s\n", r.passed ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), secs, r.detail.c_str());
    std::fflush(stdout);
    failed += !r.passed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
