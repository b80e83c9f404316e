// Command-line experiment runner.
//
// Exit codes: 0 ok, 1 unexpected failure, 2 usage, 3 config, 4 I/O,
// 5 numeric/domain/shape, 6 a check failed, 130 interrupted.

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "atmom/checks.hpp"
#include "atmom/error.hpp"
#include "atmom/experiment.hpp"

namespace fs = std::filesystem;
using namespace atmom;

namespace {

enum Exit : int {
  kOk = 0,
  kOther = 1,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kNumeric = 5,
  kCheckFailed = 6,
  kInterrupted = 130,
};

extern "C" void on_sigint(int) { stop_flag().store(true); }

// --out wins, then ATMOM_OUTPUT_DIR, then the config's output_dir.
fs::path output_dir(const std::string& flag, const ExperimentConfig& cfg) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("ATMOM_OUTPUT_DIR"); env && *env) return env;
  return cfg.output_dir;
}

ExperimentConfig read_config(const std::string& config, const std::string& manifest) {
  if (!config.empty() && !manifest.empty())
    throw CLI::ValidationError("--config and --manifest are mutually exclusive");
  if (!manifest.empty()) return load_manifest(manifest);
  if (config.empty()) throw CLI::RequiredError("--config or --manifest");
  return load_config(config);
}

const ArmSpec& find_arm(const ExperimentConfig& cfg, const std::string& name) {
  for (const auto& a : cfg.arms)
    if (a.name == name) return a;
  throw ConfigError("arms", "no arm named '" + name + "'");
}

int cmd_generate(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& out) {
  const SeedData data = generate_seed_data(cfg, seed);
  std::error_code ec;
  fs::create_directories(out, ec);
  const auto write = [&](const char* file, const std::vector<Trajectory>& t) {
    std::ofstream f(out / file, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + (out / file).string());
    write_demos(f, t);
  };
  write("expert_train.csv", data.expert_train);
  write("expert_validation.csv", data.expert_validation);
  write("amateur_pool.csv", data.amateur_pool);
  std::cout << "wrote " << data.expert_train.size() << " expert, "
            << data.expert_validation.size() << " validation and " << data.amateur_pool.size()
            << " amateur trajectories to " << out.string() << '\n';
  return kOk;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& arm_name, std::uint64_t seed,
              std::size_t count, const fs::path& out) {
  const ArmSpec& arm = find_arm(cfg, arm_name);
  ExperimentConfig single = cfg;
  single.arms = {arm};
  single.seeds = {seed};
  single.demos.amateur_counts = {count};
  single.validate();

  const SeedData data = generate_seed_data(single, seed);
  NetArchitecture arch{1, 1, {1}};
  Rng dummy(0);
  PolicyNet net(arch, dummy);
  RunResult result;
  result.config = single;
  result.runs.push_back(run_single(single, arm, seed, count, data, &net));
  emit_tables(result, out);
  std::ofstream model(out / "model.txt", std::ios::binary | std::ios::trunc);
  if (!model) throw IoError("cannot write " + (out / "model.txt").string());
  net.save(model);
  const auto& r = result.runs.front();
  std::cout << arm.name << " seed " << seed << " amateurs " << count << ": success "
            << format_number(r.success_rate) << ", final validation NLL "
            << format_number(r.final_validation_nll()) << '\n';
  return kOk;
}

int cmd_sweep(const ExperimentConfig& cfg, const fs::path& out) {
  std::signal(SIGINT, on_sigint);
  const RunResult result = run_experiment(cfg);
  emit_tables(result, out);
  for (const auto& row : summarize(result))
    std::cout << row.arm << " amateurs=" << row.amateur_count << " success "
              << format_number(row.mean_success) << " +/- " << format_number(row.ci_half_width)
              << " val_nll " << format_number(row.mean_final_validation_nll) << '\n';
  std::cout << "tables written to " << out.string() << '\n';
  if (result.interrupted) {
    std::cerr << "interrupted: partial results flushed\n";
    return kInterrupted;
  }
  return kOk;
}

int cmd_check(bool full, const std::vector<std::string>& only) {
  bool all_ok = true;
  for (const auto& c : checks::registry()) {
    const bool selected =
        only.empty() ? (full || !c.slow) : std::find(only.begin(), only.end(), c.id) != only.end();
    if (!selected) continue;
    const auto r = c.run();
    std::cout << (r.passed ? "PASS " : "FAIL ") << c.id << ": " << r.name << " [" << r.detail
              << "] (" << format_number(r.seconds) << " s)" << std::endl;
    all_ok = all_ok && r.passed;
  }
  return all_ok ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"atmom: robust-momentum optimizers and behavioural-cloning experiments"};
  app.require_subcommand(1);

  std::string config, manifest, out, arm;
  std::uint64_t seed = 1;
  std::size_t count = 0;
  bool full = false;
  std::vector<std::string> only;

  auto* gen = app.add_subcommand("generate", "Record demonstrations for one seed");
  gen->add_option("--config", config, "Experiment config (JSON)")->required();
  gen->add_option("--seed", seed, "Seed");
  gen->add_option("--out", out, "Output directory");

  auto* train = app.add_subcommand("train", "Train and evaluate one arm on one seed");
  train->add_option("--config", config, "Experiment config (JSON)")->required();
  train->add_option("--arm", arm, "Arm name from the config")->required();
  train->add_option("--seed", seed, "Seed");
  train->add_option("--amateurs", count, "Number of amateur trajectories mixed in");
  train->add_option("--out", out, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Run every seed x arm x amateur count");
  sweep->add_option("--config", config, "Experiment config (JSON)");
  sweep->add_option("--manifest", manifest, "Re-run from a manifest.json");
  sweep->add_option("--out", out, "Output directory");

  auto* check = app.add_subcommand("check", "Run oracle and invariant checks");
  check->add_flag("--full", full, "Include the behavioural-cloning studies (minutes)");
  check->add_option("--only", only, "Run only these check ids (comma separated)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*check) return cmd_check(full, only);
    const ExperimentConfig cfg = read_config(config, manifest);
    if (*gen) return cmd_generate(cfg, seed, output_dir(out, cfg));
    if (*train) return cmd_train(cfg, arm, seed, count, output_dir(out, cfg));
    return cmd_sweep(cfg, output_dir(out, cfg));
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return kNumeric;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
}
