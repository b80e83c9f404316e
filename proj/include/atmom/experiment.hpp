#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "atmom/bc.hpp"
#include "atmom/envs.hpp"
#include "atmom/nn.hpp"
#include "atmom/optim.hpp"

namespace atmom {

inline constexpr int kManifestVersion = 1;

struct EnvSpec {
  std::string type = "pointmass";  // "pointmass" | "lingauss"
  PointMassParams pointmass;
  LinGaussParams lingauss;

  std::unique_ptr<Env> make() const;
};

struct DemoSpec {
  std::size_t expert_train = 36;
  std::size_t expert_validation = 20;
  std::size_t amateur_pool = 34;
  std::vector<std::size_t> amateur_counts = {0, 34};
  bool successful_only = false;
  AlphaBound alpha_bound = AlphaBound::enforce;
};

struct ArmSpec {
  std::string name;
  OptimConfig optim;
};

struct EvalSpec {
  std::size_t n_runs = 10;
  std::size_t budget = 40;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  EnvSpec env;
  ScriptedDemonstrator amateur = ScriptedDemonstrator::amateur(HeavyTailNoise{}, Hesitation{});
  DemoSpec demos;
  std::vector<ArmSpec> arms;
  std::vector<std::size_t> hidden = {100, 100, 100, 100, 100};
  TrainConfig training;
  EvalSpec eval;
  std::string output_dir = "results";
  // Worker threads for seed x arm runs; 0 uses the OpenMP default.
  int workers = 0;

  void validate() const;
};

// Parses a JSON config. Missing fields take defaults; unknown fields and invalid
// values raise ConfigError naming the field.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Fully resolved config (every default materialized) as JSON text.
std::string config_to_json(const ExperimentConfig& cfg, int indent = 2);

// Arms as used throughout: adam, t_adam (k), at_adam (lambda = 0.9 / 0.999).
std::vector<ArmSpec> default_arms();

struct RunRecord {
  std::string arm;
  std::uint64_t seed = 0;
  std::size_t amateur_count = 0;
  double alpha = 0.0;
  std::vector<double> train_nll;
  std::vector<double> validation_nll;
  double success_rate = 0.0;
  std::vector<std::string> tensor_names;
  std::vector<double> median_k;  // per tensor, final third of training
  std::vector<DiagRecord> diagnostics;
  double wall_seconds = 0.0;
  bool completed = false;

  double final_validation_nll() const;
  double final_train_nll() const;
  // Median over tensors of the per-tensor medians (NaN for adam).
  double median_k_overall() const;
};

struct RunResult {
  ExperimentConfig config;
  std::vector<RunRecord> runs;  // sorted: arm (config order), amateur count, seed
  bool interrupted = false;
};

struct SummaryRow {
  std::string arm;
  std::size_t amateur_count = 0;
  std::size_t n_seeds = 0;
  double mean_success = 0.0;
  double ci_half_width = 0.0;  // 95 % Student-t interval over seeds
  double mean_final_validation_nll = 0.0;
};

std::vector<SummaryRow> summarize(const RunResult& result);

// Set to request a graceful stop; runs not yet started are skipped.
std::atomic<bool>& stop_flag();

// Every seed x arm x amateur-count combination.
RunResult run_experiment(const ExperimentConfig& cfg);

// Writes summary.csv, runs.csv, dof_summary.csv, diagnostics.csv, timing.csv and
// manifest.json into dir.
void emit_tables(const RunResult& result, const std::filesystem::path& dir);

// The manifest's "config" entry parsed back into an ExperimentConfig.
ExperimentConfig load_manifest(const std::filesystem::path& path);

// Demonstration data for one seed, shared by every arm.
struct SeedData {
  std::vector<Trajectory> expert_train;
  std::vector<Trajectory> expert_validation;
  std::vector<Trajectory> amateur_pool;
};

SeedData generate_seed_data(const ExperimentConfig& cfg, std::uint64_t seed);

// Trains and evaluates one arm on one seed's data.
RunRecord run_single(const ExperimentConfig& cfg, const ArmSpec& arm, std::uint64_t seed,
                     std::size_t amateur_count, const SeedData& data,
                     PolicyNet* trained_out = nullptr);

std::string format_number(double v);

}  // namespace atmom
