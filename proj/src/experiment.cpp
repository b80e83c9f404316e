#include "atmom/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "atmom/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace atmom {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(where.empty() ? key : where + "." + key, "unknown field");
  }
}

std::string field_path(const std::string& where, const char* key) {
  return where.empty() ? key : where + "." + key;
}

double get_real(const json& obj, const std::string& where, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
  }
  throw ConfigError(field_path(where, key), "expected a number");
}

std::size_t get_count(const json& obj, const std::string& where, const char* key,
                      std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(field_path(where, key), "expected a non-negative integer");
  return v.get<std::size_t>();
}

json real_to_json(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

OptimConfig parse_optim(const json& j, const std::string& where) {
  reject_unknown(j, where, {"name", "kind", "lr", "beta1", "beta2", "eps", "fixed_k", "lambda",
                            "decay_variant", "warmup_steps", "frozen_k"});
  OptimConfig c;
  if (!j.contains("kind")) throw ConfigError(field_path(where, "kind"), "missing");
  try {
    c.kind = parse_optim_kind(j.at("kind").get<std::string>());
  } catch (const ConfigError& e) {
    throw ConfigError(field_path(where, "kind"), e.what());
  }
  c.lr = get_real(j, where, "lr", c.lr);
  c.beta1 = get_real(j, where, "beta1", c.beta1);
  c.beta2 = get_real(j, where, "beta2", c.beta2);
  c.eps = get_real(j, where, "eps", c.eps);
  c.fixed_k = get_real(j, where, "fixed_k", c.fixed_k);
  c.lambda = get_real(j, where, "lambda", c.lambda);
  c.warmup_steps = get_count(j, where, "warmup_steps", c.warmup_steps);
  if (j.contains("decay_variant")) {
    const auto v = j.at("decay_variant").get<std::string>();
    if (v == "modified")
      c.decay_variant = WeightDecay::modified;
    else if (v == "original")
      c.decay_variant = WeightDecay::original;
    else
      throw ConfigError(field_path(where, "decay_variant"), "expected 'modified' or 'original'");
  }
  if (j.contains("frozen_k") && !j.at("frozen_k").is_null())
    c.frozen_k = get_real(j, where, "frozen_k", 0.0);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(field_path(where, e.field().c_str()), e.what());
  }
  return c;
}

json optim_to_json(const std::string& name, const OptimConfig& c) {
  json j;
  j["name"] = name;
  j["kind"] = to_string(c.kind);
  j["lr"] = c.lr;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["eps"] = c.eps;
  j["fixed_k"] = real_to_json(c.fixed_k);
  j["lambda"] = real_to_json(c.lambda);
  j["decay_variant"] = c.decay_variant == WeightDecay::modified ? "modified" : "original";
  j["warmup_steps"] = c.warmup_steps;
  j["frozen_k"] = c.frozen_k ? real_to_json(*c.frozen_k) : json(nullptr);
  return j;
}

}  // namespace

std::vector<ArmSpec> default_arms() {
  std::vector<ArmSpec> arms;
  arms.push_back({"adam", OptimConfig{}});
  OptimConfig t;
  t.kind = OptimKind::t_adam;
  arms.push_back({"t_adam", t});
  OptimConfig a9;
  a9.kind = OptimKind::at_adam;
  a9.lambda = 0.9;
  arms.push_back({"at_adam_0.9", a9});
  OptimConfig a999 = a9;
  a999.lambda = 0.999;
  arms.push_back({"at_adam_0.999", a999});
  return arms;
}

std::unique_ptr<Env> EnvSpec::make() const {
  if (type == "pointmass") return pointmass_pickdrop_env(pointmass);
  if (type == "lingauss") return lingauss_env(lingauss);
  throw ConfigError("env.type", "unknown environment '" + type + "'");
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds", "at least one seed required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("seeds", "seeds must be unique");
  if (arms.empty()) throw ConfigError("arms", "at least one arm required");
  std::set<std::string> names;
  for (const auto& a : arms) {
    if (a.name.empty()) throw ConfigError("arms.name", "must not be empty");
    if (!names.insert(a.name).second) throw ConfigError("arms.name", "duplicate arm '" + a.name + "'");
  }
  if (env.type != "pointmass" && env.type != "lingauss")
    throw ConfigError("env.type", "unknown environment '" + env.type + "'");
  if (demos.amateur_counts.empty())
    throw ConfigError("demos.amateur_counts", "at least one count required");
  for (std::size_t n : demos.amateur_counts) {
    if (n > demos.amateur_pool)
      throw ConfigError("demos.amateur_counts", "count exceeds demos.amateur_pool");
    if (n == 0 && demos.expert_train == 0)
      throw ConfigError("demos.amateur_counts", "no training data when expert_train = 0");
  }
  if (training.batch_size == 0) throw ConfigError("training.batch_size", "must be >= 1");
  if (training.eta < 0.0) throw ConfigError("training.eta", "must be >= 0");
  if (eval.n_runs == 0) throw ConfigError("eval.n_runs", "must be >= 1");
  if (eval.budget == 0) throw ConfigError("eval.budget", "must be >= 1");
  for (std::size_t h : hidden)
    if (h == 0) throw ConfigError("hidden", "widths must be positive");
}

namespace {

ExperimentConfig parse_config_impl(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  // A manifest carries the resolved config under "config".
  if (root.contains("format_version") && root.contains("config")) root = root.at("config");

  reject_unknown(root, "", {"name", "seeds", "env", "amateur", "demos", "arms", "hidden",
                            "training", "eval", "output_dir", "workers"});
  ExperimentConfig cfg;
  try {
    if (root.contains("name")) cfg.name = root.at("name").get<std::string>();
    if (root.contains("seeds")) cfg.seeds = root.at("seeds").get<std::vector<std::uint64_t>>();
    if (root.contains("output_dir")) cfg.output_dir = root.at("output_dir").get<std::string>();
    if (root.contains("workers")) cfg.workers = root.at("workers").get<int>();
    if (root.contains("hidden")) cfg.hidden = root.at("hidden").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw ConfigError("<top-level>", e.what());
  }

  if (root.contains("env")) {
    const json& e = root.at("env");
    const std::string w = "env";
    if (!e.is_object() || !e.contains("type")) throw ConfigError("env.type", "missing");
    cfg.env.type = e.at("type").get<std::string>();
    if (cfg.env.type == "pointmass") {
      reject_unknown(e, w, {"type", "max_step", "r_pick", "r_drop", "budget", "random_layout",
                            "layout_jitter"});
      auto& p = cfg.env.pointmass;
      p.max_step = get_real(e, w, "max_step", p.max_step);
      p.r_pick = get_real(e, w, "r_pick", p.r_pick);
      p.r_drop = get_real(e, w, "r_drop", p.r_drop);
      p.budget = get_count(e, w, "budget", p.budget);
      if (e.contains("random_layout")) p.random_layout = e.at("random_layout").get<bool>();
      p.layout_jitter = get_real(e, w, "layout_jitter", p.layout_jitter);
    } else if (cfg.env.type == "lingauss") {
      reject_unknown(e, w, {"type", "state_dim", "action_dim", "matrix", "noise_std",
                            "success_threshold"});
      auto& p = cfg.env.lingauss;
      p.state_dim = get_count(e, w, "state_dim", p.state_dim);
      p.action_dim = get_count(e, w, "action_dim", p.action_dim);
      if (e.contains("matrix")) p.matrix = e.at("matrix").get<std::vector<double>>();
      p.noise_std = get_real(e, w, "noise_std", p.noise_std);
      p.success_threshold = get_real(e, w, "success_threshold", p.success_threshold);
    } else {
      throw ConfigError("env.type", "unknown environment '" + cfg.env.type + "'");
    }
  }

  if (root.contains("amateur")) {
    const json& a = root.at("amateur");
    reject_unknown(a, "amateur", {"heavy_tail", "hesitation"});
    cfg.amateur = ScriptedDemonstrator::amateur(std::nullopt, std::nullopt);
    if (a.contains("heavy_tail") && !a.at("heavy_tail").is_null()) {
      const json& h = a.at("heavy_tail");
      const std::string w = "amateur.heavy_tail";
      reject_unknown(h, w, {"nu", "scale", "prob"});
      HeavyTailNoise n;
      n.nu = get_real(h, w, "nu", n.nu);
      n.scale = get_real(h, w, "scale", n.scale);
      n.prob = get_real(h, w, "prob", n.prob);
      if (!(n.nu > 0.0)) throw ConfigError(w + ".nu", "must be positive");
      if (n.prob < 0.0 || n.prob > 1.0) throw ConfigError(w + ".prob", "must lie in [0, 1]");
      cfg.amateur.heavy_tail = n;
    }
    if (a.contains("hesitation") && !a.at("hesitation").is_null()) {
      const json& h = a.at("hesitation");
      const std::string w = "amateur.hesitation";
      reject_unknown(h, w, {"p_pause", "p_wrong"});
      Hesitation hz;
      hz.p_pause = get_real(h, w, "p_pause", hz.p_pause);
      hz.p_wrong = get_real(h, w, "p_wrong", hz.p_wrong);
      if (hz.p_pause < 0.0 || hz.p_wrong < 0.0 || hz.p_pause + hz.p_wrong > 1.0)
        throw ConfigError(w, "probabilities must be non-negative and sum to at most 1");
      cfg.amateur.hesitation = hz;
    }
  }

  if (root.contains("demos")) {
    const json& d = root.at("demos");
    const std::string w = "demos";
    reject_unknown(d, w, {"expert_train", "expert_validation", "amateur_pool", "amateur_counts",
                          "successful_only", "alpha_bound"});
    cfg.demos.expert_train = get_count(d, w, "expert_train", cfg.demos.expert_train);
    cfg.demos.expert_validation = get_count(d, w, "expert_validation", cfg.demos.expert_validation);
    cfg.demos.amateur_pool = get_count(d, w, "amateur_pool", cfg.demos.amateur_pool);
    if (d.contains("amateur_counts"))
      cfg.demos.amateur_counts = d.at("amateur_counts").get<std::vector<std::size_t>>();
    if (d.contains("successful_only")) cfg.demos.successful_only = d.at("successful_only").get<bool>();
    if (d.contains("alpha_bound")) {
      const auto v = d.at("alpha_bound").get<std::string>();
      if (v == "enforce")
        cfg.demos.alpha_bound = AlphaBound::enforce;
      else if (v == "relaxed")
        cfg.demos.alpha_bound = AlphaBound::relaxed;
      else
        throw ConfigError("demos.alpha_bound", "expected 'enforce' or 'relaxed'");
    }
  }
  // Amateur-only studies necessarily sit above the mixture bound.
  if (cfg.demos.expert_train == 0) cfg.demos.alpha_bound = AlphaBound::relaxed;

  if (root.contains("arms")) {
    const json& arms = root.at("arms");
    if (!arms.is_array()) throw ConfigError("arms", "expected an array");
    for (std::size_t i = 0; i < arms.size(); ++i) {
      const std::string w = "arms[" + std::to_string(i) + "]";
      if (!arms[i].contains("name")) throw ConfigError(w + ".name", "missing");
      cfg.arms.push_back({arms[i].at("name").get<std::string>(), parse_optim(arms[i], w)});
    }
  } else {
    cfg.arms = default_arms();
  }

  if (root.contains("training")) {
    const json& t = root.at("training");
    const std::string w = "training";
    reject_unknown(t, w, {"epochs", "batch_size", "eta", "diag_stride"});
    cfg.training.epochs = get_count(t, w, "epochs", cfg.training.epochs);
    cfg.training.batch_size = get_count(t, w, "batch_size", cfg.training.batch_size);
    cfg.training.eta = get_real(t, w, "eta", cfg.training.eta);
    cfg.training.diag_stride = get_count(t, w, "diag_stride", cfg.training.diag_stride);
  }
  if (root.contains("eval")) {
    const json& e = root.at("eval");
    reject_unknown(e, "eval", {"n_runs", "budget"});
    cfg.eval.n_runs = get_count(e, "eval", "n_runs", cfg.eval.n_runs);
    cfg.eval.budget = get_count(e, "eval", "budget", cfg.eval.budget);
  }
  cfg.validate();
  return cfg;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  try {
    return parse_config_impl(json_text);
  } catch (const json::exception& e) {
    // Type mismatches deep inside a section.
    throw ConfigError("<config>", e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

ExperimentConfig load_manifest(const std::filesystem::path& path) { return load_config(path); }

namespace {

json config_json(const ExperimentConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["seeds"] = cfg.seeds;
  json env;
  env["type"] = cfg.env.type;
  if (cfg.env.type == "pointmass") {
    const auto& p = cfg.env.pointmass;
    env["max_step"] = real_to_json(p.max_step);
    env["r_pick"] = real_to_json(p.r_pick);
    env["r_drop"] = real_to_json(p.r_drop);
    env["budget"] = p.budget;
    env["random_layout"] = p.random_layout;
    env["layout_jitter"] = real_to_json(p.layout_jitter);
  } else {
    const LinGaussEnv resolved(cfg.env.lingauss);
    const auto& p = resolved.params();
    env["state_dim"] = p.state_dim;
    env["action_dim"] = p.action_dim;
    env["matrix"] = p.matrix;
    env["noise_std"] = p.noise_std;
    env["success_threshold"] = p.success_threshold;
  }
  j["env"] = env;
  json am;
  if (cfg.amateur.heavy_tail)
    am["heavy_tail"] = {{"nu", cfg.amateur.heavy_tail->nu},
                        {"scale", cfg.amateur.heavy_tail->scale},
                        {"prob", cfg.amateur.heavy_tail->prob}};
  else
    am["heavy_tail"] = nullptr;
  if (cfg.amateur.hesitation)
    am["hesitation"] = {{"p_pause", cfg.amateur.hesitation->p_pause},
                        {"p_wrong", cfg.amateur.hesitation->p_wrong}};
  else
    am["hesitation"] = nullptr;
  j["amateur"] = am;
  j["demos"] = {{"expert_train", cfg.demos.expert_train},
                {"expert_validation", cfg.demos.expert_validation},
                {"amateur_pool", cfg.demos.amateur_pool},
                {"amateur_counts", cfg.demos.amateur_counts},
                {"successful_only", cfg.demos.successful_only},
                {"alpha_bound", cfg.demos.alpha_bound == AlphaBound::enforce ? "enforce" : "relaxed"}};
  json arms = json::array();
  for (const auto& a : cfg.arms) arms.push_back(optim_to_json(a.name, a.optim));
  j["arms"] = arms;
  j["hidden"] = cfg.hidden;
  j["training"] = {{"epochs", cfg.training.epochs},
                   {"batch_size", cfg.training.batch_size},
                   {"eta", cfg.training.eta},
                   {"diag_stride", cfg.training.diag_stride}};
  j["eval"] = {{"n_runs", cfg.eval.n_runs}, {"budget", cfg.eval.budget}};
  j["output_dir"] = cfg.output_dir;
  j["workers"] = cfg.workers;
  return j;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg, int indent) {
  return config_json(cfg).dump(indent);
}

// ---------------------------------------------------------------------------
// Runs

double RunRecord::final_validation_nll() const {
  return validation_nll.empty() ? std::numeric_limits<double>::quiet_NaN() : validation_nll.back();
}

double RunRecord::final_train_nll() const {
  return train_nll.empty() ? std::numeric_limits<double>::quiet_NaN() : train_nll.back();
}

double RunRecord::median_k_overall() const {
  std::vector<double> finite;
  for (double k : median_k)
    if (!std::isnan(k)) finite.push_back(k);
  return finite.empty() ? std::numeric_limits<double>::quiet_NaN() : median(finite);
}

std::atomic<bool>& stop_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

namespace {
// Stream ids for deriving per-purpose generators from a run seed.
enum SeedStream : std::uint64_t { kData = 1, kInit = 2, kTrain = 3, kEval = 4 };
}  // namespace

SeedData generate_seed_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedData data;
  auto env = cfg.env.make();
  Rng rng(mix_seed(seed, kData));
  const auto expert = ScriptedDemonstrator::expert();
  const bool ok_only = cfg.demos.successful_only;
  if (cfg.demos.expert_train > 0)
    data.expert_train = record_demos(*env, expert, cfg.demos.expert_train, rng, ok_only);
  if (cfg.demos.expert_validation > 0)
    data.expert_validation = record_demos(*env, expert, cfg.demos.expert_validation, rng, ok_only);
  if (cfg.demos.amateur_pool > 0)
    data.amateur_pool = record_demos(*env, cfg.amateur, cfg.demos.amateur_pool, rng, ok_only);
  return data;
}

RunRecord run_single(const ExperimentConfig& cfg, const ArmSpec& arm, std::uint64_t seed,
                     std::size_t amateur_count, const SeedData& data, PolicyNet* trained_out) {
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.arm = arm.name;
  rec.seed = seed;
  rec.amateur_count = amateur_count;

  const DemoSet demos =
      mix_demos(data.expert_train, data.amateur_pool, amateur_count, cfg.demos.alpha_bound);
  rec.alpha = demos.alpha;

  auto env = cfg.env.make();
  NetArchitecture arch{env->state_dim(), env->action_dim(), cfg.hidden};
  // Same initialization for every arm of a seed.
  Rng init_rng(mix_seed(seed, kInit));
  PolicyNet net(arch, init_rng);
#ifdef _OPENMP
  // Inside an active worker team the kernels stay serial.
  if (omp_in_parallel()) net.set_backend(kernels::Backend::serial);
#endif

  std::vector<Sample> validation;
  for (const auto& t : data.expert_validation)
    validation.insert(validation.end(), t.pairs.begin(), t.pairs.end());

  Rng train_rng(mix_seed(seed, kTrain));
  const TrainMetrics m = train(net, demos, arm.optim, cfg.training, validation, train_rng);
  rec.train_nll = m.train_nll;
  rec.validation_nll = m.validation_nll;
  rec.tensor_names = m.tensor_names;
  rec.median_k = m.median_k_tail(1.0 / 3.0);
  rec.diagnostics = m.diagnostics;

  Rng eval_rng(mix_seed(seed, kEval));
  rec.success_rate =
      evaluate_success(mean_policy(net), *env, cfg.eval.n_runs, cfg.eval.budget, eval_rng);
  rec.completed = true;
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (trained_out) *trained_out = std::move(net);
  return rec;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  RunResult result;
  result.config = cfg;

  std::vector<SeedData> data;
  data.reserve(cfg.seeds.size());
  for (std::uint64_t seed : cfg.seeds) data.push_back(generate_seed_data(cfg, seed));

  struct Job {
    std::size_t arm, seed, count;
  };
  std::vector<Job> jobs;
  for (std::size_t a = 0; a < cfg.arms.size(); ++a)
    for (std::size_t c = 0; c < cfg.demos.amateur_counts.size(); ++c)
      for (std::size_t s = 0; s < cfg.seeds.size(); ++s) jobs.push_back({a, s, c});

  std::vector<RunRecord> records(jobs.size());
  std::vector<std::string> errors(jobs.size());
  const auto n = static_cast<std::ptrdiff_t>(jobs.size());
#ifdef _OPENMP
  const int workers = cfg.workers > 0 ? cfg.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(workers)
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (stop_flag().load()) continue;
    const Job& j = jobs[static_cast<std::size_t>(i)];
    try {
      records[static_cast<std::size_t>(i)] =
          run_single(cfg, cfg.arms[j.arm], cfg.seeds[j.seed], cfg.demos.amateur_counts[j.count],
                     data[j.seed]);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw NumericError("run failed: " + e);

  for (auto& r : records) {
    if (r.completed)
      result.runs.push_back(std::move(r));
    else
      result.interrupted = true;
  }
  // Jobs were laid out in (arm, count, seed) order, which is the emission order.
  return result;
}

std::vector<SummaryRow> summarize(const RunResult& result) {
  std::vector<SummaryRow> rows;
  const auto& cfg = result.config;
  for (const auto& arm : cfg.arms) {
    for (std::size_t count : cfg.demos.amateur_counts) {
      std::vector<const RunRecord*> group;
      for (const auto& r : result.runs)
        if (r.arm == arm.name && r.amateur_count == count) group.push_back(&r);
      if (group.empty()) continue;
      SummaryRow row;
      row.arm = arm.name;
      row.amateur_count = count;
      row.n_seeds = group.size();
      double sum = 0.0, nll = 0.0;
      for (const auto* r : group) {
        sum += r->success_rate;
        nll += r->final_validation_nll();
      }
      const double n = static_cast<double>(group.size());
      row.mean_success = sum / n;
      row.mean_final_validation_nll = nll / n;
      if (group.size() > 1) {
        double ss = 0.0;
        for (const auto* r : group) ss += (r->success_rate - row.mean_success) * (r->success_rate - row.mean_success);
        const double sd = std::sqrt(ss / (n - 1.0));
        const boost::math::students_t dist(n - 1.0);
        row.ci_half_width = boost::math::quantile(dist, 0.975) * sd / std::sqrt(n);
      }
      rows.push_back(row);
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Tables

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace {

std::ofstream open_table(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

void emit_tables(const RunResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

  {
    auto out = open_table(dir / "summary.csv");
    out << "arm,amateur_count,n_seeds,mean_success_rate,ci95_half_width,mean_final_validation_nll\n";
    for (const auto& r : summarize(result))
      out << r.arm << ',' << r.amateur_count << ',' << r.n_seeds << ','
          << format_number(r.mean_success) << ',' << format_number(r.ci_half_width) << ','
          << format_number(r.mean_final_validation_nll) << '\n';
  }
  {
    auto out = open_table(dir / "runs.csv");
    out << "arm,seed,amateur_count,alpha,success_rate,final_train_nll,final_validation_nll,"
           "median_k_final_third\n";
    for (const auto& r : result.runs)
      out << r.arm << ',' << r.seed << ',' << r.amateur_count << ',' << format_number(r.alpha)
          << ',' << format_number(r.success_rate) << ',' << format_number(r.final_train_nll())
          << ',' << format_number(r.final_validation_nll()) << ','
          << format_number(r.median_k_overall()) << '\n';
  }
  {
    auto out = open_table(dir / "dof_summary.csv");
    out << "arm,seed,amateur_count,tensor,median_k_final_third\n";
    for (const auto& r : result.runs)
      for (std::size_t t = 0; t < r.median_k.size(); ++t)
        out << r.arm << ',' << r.seed << ',' << r.amateur_count << ',' << r.tensor_names[t] << ','
            << format_number(r.median_k[t]) << '\n';
  }
  {
    auto out = open_table(dir / "diagnostics.csv");
    out << "arm,seed,amateur_count,step,tensor,D,b,k,nu,w,beta_w\n";
    for (const auto& r : result.runs)
      for (const auto& d : r.diagnostics)
        out << r.arm << ',' << r.seed << ',' << r.amateur_count << ',' << d.step << ','
            << d.tensor << ',' << format_number(d.diag.distance) << ','
            << format_number(d.diag.b) << ',' << format_number(d.diag.k) << ','
            << format_number(d.diag.nu) << ',' << format_number(d.diag.w) << ','
            << format_number(d.diag.beta_w) << '\n';
  }
  {
    auto out = open_table(dir / "timing.csv");
    out << "arm,seed,amateur_count,wall_seconds\n";
    for (const auto& r : result.runs)
      out << r.arm << ',' << r.seed << ',' << r.amateur_count << ','
          << format_number(r.wall_seconds) << '\n';
  }
  {
    json manifest;
    manifest["format_version"] = kManifestVersion;
    manifest["interrupted"] = result.interrupted;
    manifest["seeds"] = result.config.seeds;
    manifest["config"] = config_json(result.config);
    auto out = open_table(dir / "manifest.json");
    out << manifest.dump(2) << '\n';
  }
}

}  // namespace atmom
