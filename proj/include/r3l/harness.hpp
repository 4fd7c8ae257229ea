#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "r3l/analysis.hpp"
#include "r3l/bc.hpp"
#include "r3l/common.hpp"
#include "r3l/env.hpp"
#include "r3l/planner.hpp"
#include "r3l/policy.hpp"
#include "r3l/rl.hpp"
#include "r3l/trajectory.hpp"

namespace r3l::harness {

using nlohmann::json;

inline long default_budget(const std::string& env_id) {
  if (env_id == "mountaincar") return 50000;
  if (env_id == "pendulum") return 50000;
  if (env_id == "acrobot") return 200000;
  if (env_id == "cartpole_swingup") return 300000;
  throw std::invalid_argument("no default budget for env: " + env_id);
}

// ---------------------------------------------------------------------------
// Ablation study: env x steering mode x goal bias, n independent seeds per cell.

struct AblationConfig {
  std::vector<std::string> envs = {"mountaincar"};
  std::vector<std::string> steering_modes = {"learned", "random"};
  std::vector<double> goal_biases = {0.05, 0.0};
  int n_runs = 20;
  std::uint64_t master_seed = 20240817;
  std::map<std::string, long> budgets;  // falls back to default_budget

  void validate() const {
    if (envs.empty() || steering_modes.empty() || goal_biases.empty() || n_runs <= 0) {
      throw std::invalid_argument("ablation config: empty axis or nonpositive n_runs");
    }
  }

  long budget_for(const std::string& env_id) const {
    auto it = budgets.find(env_id);
    return it != budgets.end() ? it->second : default_budget(env_id);
  }

  static AblationConfig from_json(const json& j) {
    AblationConfig c;
    if (j.contains("envs")) c.envs = j["envs"].get<std::vector<std::string>>();
    if (j.contains("steering_modes")) c.steering_modes = j["steering_modes"].get<std::vector<std::string>>();
    if (j.contains("goal_biases")) c.goal_biases = j["goal_biases"].get<std::vector<double>>();
    if (j.contains("n_runs")) c.n_runs = j["n_runs"].get<int>();
    if (j.contains("master_seed")) c.master_seed = j["master_seed"].get<std::uint64_t>();
    if (j.contains("budgets")) {
      for (auto it = j["budgets"].begin(); it != j["budgets"].end(); ++it) {
        c.budgets[it.key()] = it.value().get<long>();
      }
    }
    return c;
  }

  json to_json() const {
    json j;
    j["envs"] = envs;
    j["steering_modes"] = steering_modes;
    j["goal_biases"] = goal_biases;
    j["n_runs"] = n_runs;
    j["master_seed"] = master_seed;
    json b = json::object();
    for (const auto& [k, v] : budgets) b[k] = v;
    j["budgets"] = b;
    return j;
  }
};

struct CellSummary {
  std::string env_id;
  std::string steering_mode;
  double goal_bias = 0.0;
  int n_runs = 0;
  double traj_len_mean = 0.0, traj_len_std = 0.0;
  double timesteps_mean = 0.0, timesteps_std = 0.0;
  double success_fraction = 0.0;
};

struct AblationResult {
  std::vector<planner::RunStats> runs;
  std::vector<CellSummary> cells;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace detail

inline CellSummary summarize_cell(const std::vector<planner::RunStats>& runs) {
  if (runs.empty()) throw std::invalid_argument("summarize_cell: no runs");
  CellSummary c;
  c.env_id = runs.front().env_id;
  c.steering_mode = runs.front().steering_mode;
  c.goal_bias = runs.front().goal_bias;
  c.n_runs = static_cast<int>(runs.size());
  std::vector<double> lens, steps;
  long succ = 0;
  for (const auto& r : runs) {
    lens.push_back(static_cast<double>(r.traj_len));
    steps.push_back(static_cast<double>(r.timesteps));
    if (r.success) ++succ;
  }
  std::tie(c.traj_len_mean, c.traj_len_std) = detail::mean_std(lens);
  std::tie(c.timesteps_mean, c.timesteps_std) = detail::mean_std(steps);
  c.success_fraction = static_cast<double>(succ) / static_cast<double>(runs.size());
  return c;
}

// Cells and runs are sequenced deterministically; each run draws a seed from
// the master seed by (cell, run) counter and owns its env, steering, and RNG.
inline AblationResult run_ablation(const AblationConfig& config) {
  config.validate();
  AblationResult out;
  std::uint64_t cell_index = 0;
  for (const auto& env_id : config.envs) {
    for (const auto& mode : config.steering_modes) {
      for (double pg : config.goal_biases) {
        const std::uint64_t cell_seed = derive_seed(config.master_seed, cell_index++);
        std::vector<planner::RunStats> cell_runs;
        for (int run = 0; run < config.n_runs; ++run) {
          auto e = env::make_env(env_id);
          planner::RunConfig rc;
          rc.steering_mode = mode;
          rc.budget = config.budget_for(env_id);
          rc.goal_bias = pg;
          rc.seed = derive_seed(cell_seed, static_cast<std::uint64_t>(run));
          const auto t0 = std::chrono::steady_clock::now();
          auto res = planner::run_exploration(*e, rc);
          res.stats.wall_time =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          cell_runs.push_back(res.stats);
        }
        out.cells.push_back(summarize_cell(cell_runs));
        out.runs.insert(out.runs.end(), cell_runs.begin(), cell_runs.end());
      }
    }
  }
  return out;
}

inline void write_runs_csv(std::ostream& os, const std::vector<planner::RunStats>& runs) {
  os << "env,steering_mode,p_g,seed,traj_len,timesteps,success\n";
  for (const auto& r : runs) {
    os << r.env_id << ',' << r.steering_mode << ',' << r.goal_bias << ',' << r.seed << ','
       << r.traj_len << ',' << r.timesteps << ',' << (r.success ? 1 : 0) << "\n";
  }
}

inline std::string format_ablation_table(const AblationResult& res) {
  std::ostringstream os;
  os << std::left << std::setw(18) << "env" << std::setw(10) << "steering" << std::setw(8) << "p_g"
     << std::setw(22) << "|tau| (mean+-std)" << std::setw(26) << "timesteps (mean+-std)"
     << "success\n";
  os << std::string(90, '-') << "\n";
  auto fmt = [](double m, double s) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(2) << m << " +- " << s;
    return o.str();
  };
  for (const auto& c : res.cells) {
    os << std::left << std::setw(18) << c.env_id << std::setw(10) << c.steering_mode << std::setw(8)
       << c.goal_bias << std::setw(22) << fmt(c.traj_len_mean, c.traj_len_std) << std::setw(26)
       << fmt(c.timesteps_mean, c.timesteps_std) << std::fixed << std::setprecision(2)
       << c.success_fraction << "\n";
  }
  return os.str();
}

inline json ablation_to_json(const AblationResult& res) {
  json cells = json::array();
  for (const auto& c : res.cells) {
    cells.push_back({{"env", c.env_id},
                     {"steering_mode", c.steering_mode},
                     {"goal_bias", c.goal_bias},
                     {"n_runs", c.n_runs},
                     {"traj_len_mean", c.traj_len_mean},
                     {"traj_len_std", c.traj_len_std},
                     {"timesteps_mean", c.timesteps_mean},
                     {"timesteps_std", c.timesteps_std},
                     {"success_fraction", c.success_fraction}});
  }
  return {{"cells", cells}};
}

// ---------------------------------------------------------------------------
// Failure-tail sweep: one max-budget exploration per seed; the failure fraction
// at a smaller budget k reads off whether the success iteration exceeded k
// (behavior is budget-independent until the stop, so nesting is exact).

struct TailSweepConfig {
  std::string env_id = "mountaincar";
  std::vector<long> budgets = {250, 500, 1000, 2000, 4000};
  int n_seeds = 50;
  std::uint64_t master_seed = 7;
  std::string steering_mode = "learned";
  double goal_bias = 0.05;
};

inline std::vector<analysis::BudgetOutcome> run_tail_sweep(const TailSweepConfig& config) {
  if (config.budgets.empty() || config.n_seeds <= 0) {
    throw std::invalid_argument("tail sweep: empty budgets or nonpositive seed count");
  }
  std::vector<long> budgets = config.budgets;
  std::sort(budgets.begin(), budgets.end());
  const long max_budget = budgets.back();

  std::vector<long> success_iter(static_cast<std::size_t>(config.n_seeds));
  for (int s = 0; s < config.n_seeds; ++s) {
    auto e = env::make_env(config.env_id);
    planner::RunConfig rc;
    rc.steering_mode = config.steering_mode;
    rc.budget = max_budget;
    rc.goal_bias = config.goal_bias;
    rc.seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(s));
    const auto res = planner::run_exploration(*e, rc);
    success_iter[static_cast<std::size_t>(s)] =
        res.stats.success ? res.stats.timesteps : std::numeric_limits<long>::max();
  }

  std::vector<analysis::BudgetOutcome> out;
  for (long k : budgets) {
    analysis::BudgetOutcome o;
    o.budget = k;
    o.total = config.n_seeds;
    for (long it : success_iter) {
      if (it > k) ++o.failures;
    }
    out.push_back(o);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full pipeline comparison: exploration -> demos -> cloning -> refinement
// against refinement from scratch, on shared seed indices.

struct PipelineConfig {
  std::string env_id = "mountaincar";
  std::vector<std::string> methods = {"r3l_pg", "vanilla_pg"};
  int n_seeds = 10;
  std::uint64_t master_seed = 123;
  int n_demos = 10;
  long explore_budget = 0;  // 0: default_budget(env)
  double goal_bias = 0.05;
  std::string steering_mode = "learned";
  bc::BcConfig bc;
  rl::RefineConfig refine;
  std::vector<int> hidden = {32, 32};
  double sigma = 0.3;

  void validate() const {
    for (const auto& m : methods) {
      if (m != "r3l_pg" && m != "vanilla_pg") {
        throw std::invalid_argument("pipeline: unknown method '" + m + "'");
      }
    }
    if (methods.empty() || n_seeds <= 0 || n_demos <= 0) {
      throw std::invalid_argument("pipeline: empty methods or nonpositive counts");
    }
  }

  static PipelineConfig from_json(const json& j) {
    PipelineConfig c;
    if (j.contains("env")) c.env_id = j["env"].get<std::string>();
    if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
    if (j.contains("n_seeds")) c.n_seeds = j["n_seeds"].get<int>();
    if (j.contains("master_seed")) c.master_seed = j["master_seed"].get<std::uint64_t>();
    if (j.contains("n_demos")) c.n_demos = j["n_demos"].get<int>();
    if (j.contains("explore_budget")) c.explore_budget = j["explore_budget"].get<long>();
    if (j.contains("goal_bias")) c.goal_bias = j["goal_bias"].get<double>();
    if (j.contains("steering")) c.steering_mode = j["steering"].get<std::string>();
    if (j.contains("bc_epochs")) c.bc.epochs = j["bc_epochs"].get<int>();
    if (j.contains("iterations")) c.refine.iterations = j["iterations"].get<int>();
    if (j.contains("batch_timesteps")) c.refine.batch_timesteps = j["batch_timesteps"].get<long>();
    if (j.contains("kl_limit")) c.refine.pg.kl_limit = j["kl_limit"].get<double>();
    return c;
  }

  json to_json() const {
    return {{"env", env_id},
            {"methods", methods},
            {"n_seeds", n_seeds},
            {"master_seed", master_seed},
            {"n_demos", n_demos},
            {"explore_budget", explore_budget},
            {"goal_bias", goal_bias},
            {"steering", steering_mode},
            {"bc_epochs", bc.epochs},
            {"iterations", refine.iterations},
            {"batch_timesteps", refine.batch_timesteps},
            {"kl_limit", refine.pg.kl_limit}};
  }
};

struct NamedCurve {
  std::string env_id;
  std::string method;
  std::uint64_t seed = 0;
  std::vector<rl::CurvePoint> points;
};

struct PipelineResult {
  std::vector<NamedCurve> curves;
  std::vector<planner::RunStats> exploration_runs;
};

inline std::vector<int> policy_layers(const env::EnvSpec& spec, const std::vector<int>& hidden) {
  std::vector<int> sizes;
  sizes.push_back(static_cast<int>(spec.state_bounds.dim()));
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(static_cast<int>(spec.action_bounds.dim()));
  return sizes;
}

inline PipelineResult run_pipeline(const PipelineConfig& config) {
  config.validate();
  PipelineResult out;
  for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
    const std::string& method = config.methods[mi];
    const std::uint64_t method_seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(mi));
    for (int si = 0; si < config.n_seeds; ++si) {
      const std::uint64_t run_seed = derive_seed(method_seed, static_cast<std::uint64_t>(si));
      auto e = env::make_env(config.env_id);
      Rng policy_rng = make_rng(derive_seed(run_seed, 1));
      PolicyNet policy = PolicyNet::glorot(policy_layers(e->spec(), config.hidden),
                                           e->spec().action_bounds, policy_rng, config.sigma);
      rl::RefineConfig rcfg = config.refine;

      if (method == "r3l_pg") {
        planner::RunConfig explore_cfg;
        explore_cfg.steering_mode = config.steering_mode;
        explore_cfg.budget =
            config.explore_budget > 0 ? config.explore_budget : default_budget(config.env_id);
        explore_cfg.goal_bias = config.goal_bias;
        explore_cfg.seed = derive_seed(run_seed, 0);
        auto collected = planner::collect_demos(*e, explore_cfg, config.n_demos);
        out.exploration_runs.insert(out.exploration_runs.end(), collected.runs.begin(),
                                    collected.runs.end());
        const auto dataset = bc::build_dataset(collected.demos, *e);
        Rng bc_rng = make_rng(derive_seed(run_seed, 2));
        bc::train_bc(policy, dataset, config.bc, bc_rng);
      }

      Rng refine_rng = make_rng(derive_seed(run_seed, 3));
      NamedCurve curve;
      curve.env_id = config.env_id;
      curve.method = method;
      curve.seed = run_seed;
      curve.points = rl::refine(policy, *e, rcfg, refine_rng);
      out.curves.push_back(std::move(curve));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Curve CSV and summaries.

inline void write_curve_csv(std::ostream& os, const NamedCurve& curve) {
  os << "seed,iteration,cumulative_timesteps,mean_return,kl,success_rate\n";
  for (const auto& p : curve.points) {
    os << curve.seed << ',' << p.iteration << ',' << p.cumulative_timesteps << ','
       << std::setprecision(17) << p.mean_return << ',' << p.kl << ',' << p.success_rate << "\n";
  }
}

inline NamedCurve read_curve_csv(std::istream& is, const std::string& env_id,
                                 const std::string& method) {
  NamedCurve curve;
  curve.env_id = env_id;
  curve.method = method;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("curve csv: empty stream");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    rl::CurvePoint p;
    std::getline(ls, field, ',');
    curve.seed = static_cast<std::uint64_t>(std::stoull(field));
    std::getline(ls, field, ',');
    p.iteration = std::stoi(field);
    std::getline(ls, field, ',');
    p.cumulative_timesteps = std::stol(field);
    std::getline(ls, field, ',');
    p.mean_return = std::stod(field);
    std::getline(ls, field, ',');
    p.kl = std::stod(field);
    std::getline(ls, field, ',');
    p.success_rate = std::stod(field);
    curve.points.push_back(p);
  }
  return curve;
}

// Percentile with linear interpolation between order statistics.
inline double percentile(std::vector<double> xs, double p) {
  if (xs.empty()) throw std::invalid_argument("percentile: empty sample");
  std::sort(xs.begin(), xs.end());
  const double h = (static_cast<double>(xs.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= xs.size()) return xs.back();
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[lo + 1] - xs[lo]);
}

// Step interpolation: a curve holds its last value between checkpoints and past
// the end; it is undefined before its first checkpoint.
inline std::optional<double> step_value(const std::vector<rl::CurvePoint>& points, long t) {
  if (points.empty() || t < points.front().cumulative_timesteps) return std::nullopt;
  double v = points.front().mean_return;
  for (const auto& p : points) {
    if (p.cumulative_timesteps > t) break;
    v = p.mean_return;
  }
  return v;
}

// Median and quartiles per timestep bin across seeds. Bins are the union of all
// checkpoint timesteps; a curve contributes to a bin once defined there.
inline json summarize(const std::vector<NamedCurve>& curves) {
  if (curves.empty()) throw std::invalid_argument("summarize: no curves");
  const std::string env_id = curves.front().env_id;
  for (const auto& c : curves) {
    if (c.env_id != env_id) {
      throw std::invalid_argument("summarize: mismatched env ids ('" + env_id + "' vs '" +
                                  c.env_id + "')");
    }
    if (c.points.empty()) throw std::invalid_argument("summarize: empty curve");
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      if (c.points[i].cumulative_timesteps <= c.points[i - 1].cumulative_timesteps) {
        throw std::invalid_argument("summarize: cumulative timesteps must increase");
      }
    }
  }
  std::vector<long> bins;
  for (const auto& c : curves) {
    for (const auto& p : c.points) bins.push_back(p.cumulative_timesteps);
  }
  std::sort(bins.begin(), bins.end());
  bins.erase(std::unique(bins.begin(), bins.end()), bins.end());

  json out;
  out["env"] = env_id;
  out["n_curves"] = curves.size();
  json jb = json::array(), jm = json::array(), jq25 = json::array(), jq75 = json::array(),
       jn = json::array();
  for (long t : bins) {
    std::vector<double> vals;
    for (const auto& c : curves) {
      if (auto v = step_value(c.points, t)) vals.push_back(*v);
    }
    if (vals.empty()) continue;
    jb.push_back(t);
    jm.push_back(percentile(vals, 0.5));
    jq25.push_back(percentile(vals, 0.25));
    jq75.push_back(percentile(vals, 0.75));
    jn.push_back(vals.size());
  }
  out["bins"] = jb;
  out["median"] = jm;
  out["q25"] = jq25;
  out["q75"] = jq75;
  out["n_at_bin"] = jn;
  return out;
}

inline json make_manifest(const std::string& env_id, const json& config,
                          const json& extra = json::object()) {
  json m;
  m["version"] = r3l::version();
  m["env"] = env_id;
  m["config"] = config;
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  return m;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << content;
}

}  // namespace r3l::harness
