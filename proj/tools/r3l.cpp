// Command-line front end: exploration runs, benchmark tables, behavior cloning,
// policy refinement, the full pipeline comparison, and the analysis utilities.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "r3l/r3l.hpp"

namespace fs = std::filesystem;
using r3l::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  json j;
  f >> j;
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << j.dump(2) << "\n";
}

std::vector<long> parse_longs(const std::string& csv) {
  std::vector<long> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stol(item));
  }
  return out;
}

int cmd_explore(const std::string& env_id, std::uint64_t seed, long budget, double goal_bias,
                const std::string& steering, int n_demos, const std::string& out_dir) {
  fs::create_directories(out_dir);
  auto e = r3l::env::make_env(env_id);
  r3l::planner::RunConfig rc;
  rc.steering_mode = steering;
  rc.budget = budget > 0 ? budget : r3l::harness::default_budget(env_id);
  rc.goal_bias = goal_bias;
  rc.seed = seed;

  std::vector<r3l::planner::RunStats> runs;
  if (n_demos > 0) {
    auto collected = r3l::planner::collect_demos(*e, rc, n_demos);
    runs = collected.runs;
    r3l::save_demoset(out_dir + "/demos.jsonl", collected.demos);
    std::cout << "wrote " << collected.demos.trajectories.size() << " demos to " << out_dir
              << "/demos.jsonl\n";
  } else {
    auto res = r3l::planner::run_exploration(*e, rc);
    runs.push_back(res.stats);
    std::ofstream tf(out_dir + "/trajectory.jsonl");
    r3l::write_trajectory(tf, res.trajectory);
    std::cout << (res.stats.success ? "success" : "failure") << ": |tau|=" << res.stats.traj_len
              << " timesteps=" << res.stats.timesteps << "\n";
  }
  std::ofstream rf(out_dir + "/runs.csv");
  r3l::harness::write_runs_csv(rf, runs);
  json cfg = {{"env", env_id},      {"seed", seed},           {"budget", rc.budget},
              {"goal_bias", goal_bias}, {"steering", steering}, {"n_demos", n_demos}};
  write_json_file(out_dir + "/manifest.json", r3l::harness::make_manifest(env_id, cfg));
  return 0;
}

int cmd_bench(const std::string& config_path, const std::string& out_dir) {
  auto config = r3l::harness::AblationConfig::from_json(read_json_file(config_path));
  fs::create_directories(out_dir);
  auto res = r3l::harness::run_ablation(config);
  std::ofstream rf(out_dir + "/runs.csv");
  r3l::harness::write_runs_csv(rf, res.runs);
  const std::string table = r3l::harness::format_ablation_table(res);
  r3l::harness::write_text_file(out_dir + "/table.txt", table);
  write_json_file(out_dir + "/summary.json", r3l::harness::ablation_to_json(res));
  write_json_file(out_dir + "/manifest.json",
                  r3l::harness::make_manifest(config.envs.size() == 1 ? config.envs[0] : "multi",
                                              config.to_json()));
  std::cout << table;
  return 0;
}

int cmd_bc(const std::string& demos_path, const std::string& out_path, int epochs,
           std::uint64_t seed) {
  auto demos = r3l::load_demoset(demos_path);
  auto e = r3l::env::make_env(demos.env_id);
  auto dataset = r3l::bc::build_dataset(demos, *e);
  r3l::Rng init_rng = r3l::make_rng(r3l::derive_seed(seed, 1));
  auto policy = r3l::PolicyNet::glorot(
      r3l::harness::policy_layers(e->spec(), {32, 32}), e->spec().action_bounds, init_rng);
  r3l::bc::BcConfig cfg;
  cfg.epochs = epochs;
  r3l::Rng rng = r3l::make_rng(r3l::derive_seed(seed, 2));
  auto report = r3l::bc::train_bc(policy, dataset, cfg, rng);
  policy.save(out_path);
  std::cout << "trained on " << dataset.size() << " transitions: loss " << report.initial_loss
            << " -> " << report.final_loss << "; saved " << out_path << "\n";
  return 0;
}

int cmd_refine(const std::string& env_id, const std::string& init, int iterations,
               long batch_timesteps, double kl_limit, long offset, std::uint64_t seed,
               const std::string& out_dir) {
  fs::create_directories(out_dir);
  auto e = r3l::env::make_env(env_id);
  r3l::Rng init_rng = r3l::make_rng(r3l::derive_seed(seed, 1));
  r3l::PolicyNet policy =
      init == "random"
          ? r3l::PolicyNet::glorot(r3l::harness::policy_layers(e->spec(), {32, 32}),
                                   e->spec().action_bounds, init_rng)
          : r3l::PolicyNet::load(init);
  r3l::rl::RefineConfig cfg;
  cfg.iterations = iterations;
  cfg.batch_timesteps = batch_timesteps;
  cfg.timestep_offset = offset;
  cfg.pg.kl_limit = kl_limit;
  r3l::Rng rng = r3l::make_rng(r3l::derive_seed(seed, 3));
  auto points = r3l::rl::refine(policy, *e, cfg, rng);

  r3l::harness::NamedCurve curve;
  curve.env_id = env_id;
  curve.method = init == "random" ? "vanilla_pg" : "r3l_pg";
  curve.seed = seed;
  curve.points = points;
  std::ofstream cf(out_dir + "/curve.csv");
  r3l::harness::write_curve_csv(cf, curve);
  policy.save(out_dir + "/policy_final.json");
  json cfg_json = {{"env", env_id},   {"init", init},       {"iterations", iterations},
                   {"kl_limit", kl_limit}, {"seed", seed}, {"offset", offset}};
  write_json_file(out_dir + "/manifest.json", r3l::harness::make_manifest(env_id, cfg_json));
  if (!points.empty()) {
    std::cout << "final mean return " << points.back().mean_return << " at "
              << points.back().cumulative_timesteps << " timesteps\n";
  }
  return 0;
}

int cmd_pipeline(const std::string& config_path, const std::string& out_dir) {
  auto config = r3l::harness::PipelineConfig::from_json(read_json_file(config_path));
  fs::create_directories(out_dir);
  auto res = r3l::harness::run_pipeline(config);

  std::map<std::string, std::vector<r3l::harness::NamedCurve>> by_method;
  std::map<std::string, int> counters;
  json files = json::array();
  for (const auto& curve : res.curves) {
    const int idx = counters[curve.method]++;
    const std::string name = "curve_" + curve.method + "_" + std::to_string(idx) + ".csv";
    std::ofstream cf(out_dir + "/" + name);
    r3l::harness::write_curve_csv(cf, curve);
    files.push_back({{"file", name}, {"method", curve.method}, {"seed", curve.seed}});
    by_method[curve.method].push_back(curve);
  }
  for (const auto& [method, curves] : by_method) {
    write_json_file(out_dir + "/summary_" + method + ".json", r3l::harness::summarize(curves));
  }
  write_json_file(out_dir + "/manifest.json",
                  r3l::harness::make_manifest(config.env_id, config.to_json(),
                                              {{"curves", files}}));
  std::cout << "wrote " << res.curves.size() << " curves to " << out_dir << "\n";
  return 0;
}

int cmd_analyze_hitting(int d, double r, double R, long walks, std::uint64_t seed,
                        const std::string& out) {
  json j;
  j["formula"] = r3l::analysis::hitting_probability(r, R, d);
  j["monte_carlo"] =
      r3l::analysis::random_walk_hit_fraction(d, r, R, walks, r / 20.0, 1000000, seed);
  j["d"] = d;
  j["r"] = r;
  j["R"] = R;
  j["walks"] = walks;
  const std::string s = j.dump(2);
  if (!out.empty()) r3l::harness::write_text_file(out, s + "\n");
  std::cout << s << "\n";
  return 0;
}

int cmd_analyze_complexity(double a, double b, long terms, const std::string& out) {
  json j;
  j["bound"] = r3l::analysis::sampling_complexity_bound(a, b);
  j["series"] = r3l::analysis::complexity_series(a, b, terms);
  j["a"] = a;
  j["b"] = b;
  j["terms"] = terms;
  const std::string s = j.dump(2);
  if (!out.empty()) r3l::harness::write_text_file(out, s + "\n");
  std::cout << s << "\n";
  return 0;
}

int cmd_analyze_tail(const std::string& env_id, const std::string& budgets_csv, int seeds,
                     std::uint64_t master_seed, const std::string& steering, double goal_bias,
                     const std::string& out_dir) {
  fs::create_directories(out_dir);
  r3l::harness::TailSweepConfig cfg;
  cfg.env_id = env_id;
  if (!budgets_csv.empty()) cfg.budgets = parse_longs(budgets_csv);
  cfg.n_seeds = seeds;
  cfg.master_seed = master_seed;
  cfg.steering_mode = steering;
  cfg.goal_bias = goal_bias;
  const auto outcomes = r3l::harness::run_tail_sweep(cfg);

  std::ofstream cf(out_dir + "/failure_fractions.csv");
  cf << "budget,failures,total,failure_fraction\n";
  for (const auto& o : outcomes) {
    cf << o.budget << ',' << o.failures << ',' << o.total << ','
       << (static_cast<double>(o.failures) / static_cast<double>(o.total)) << "\n";
  }
  json j;
  try {
    const auto fit = r3l::analysis::fit_failure_tail(outcomes);
    j["a"] = fit.a;
    j["b"] = fit.b;
    j["points_used"] = fit.points_used;
    j["expected_iterations_bound"] = r3l::analysis::sampling_complexity_bound(fit.a, fit.b);
  } catch (const std::exception& ex) {
    j["error"] = ex.what();
  }
  j["budgets"] = json::array();
  for (const auto& o : outcomes) {
    j["budgets"].push_back({{"budget", o.budget},
                            {"failures", o.failures},
                            {"total", o.total}});
  }
  write_json_file(out_dir + "/tail_fit.json", j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse-reward exploration toolkit"};
  app.require_subcommand(1);

  // explore
  std::string env_id = "mountaincar", steering = "learned", out_dir = "out";
  std::uint64_t seed = 0;
  long budget = 0;
  double goal_bias = 0.05;
  int n_demos = 0;
  auto* explore = app.add_subcommand("explore", "run tree exploration, optionally collect demos");
  explore->add_option("--env", env_id, "environment id");
  explore->add_option("--seed", seed, "run seed");
  explore->add_option("--budget", budget, "exploration budget (0: env default)");
  explore->add_option("--goal-bias", goal_bias, "goal sampling probability");
  explore->add_option("--steering", steering, "learned|random");
  explore->add_option("--n-demos", n_demos, "collect this many successful demos (0: single run)");
  explore->add_option("--out", out_dir, "output directory");

  // bench
  std::string bench_config, bench_out = "bench_out";
  auto* bench = app.add_subcommand("bench", "ablation benchmark from a JSON config");
  bench->add_option("--config", bench_config, "JSON config path")->required();
  bench->add_option("--out", bench_out, "output directory");

  // bc
  std::string demos_path, bc_out = "policy.json";
  int bc_epochs = 500;
  std::uint64_t bc_seed = 0;
  auto* bcc = app.add_subcommand("bc", "behavior-clone a policy from demos");
  bcc->add_option("--demos", demos_path, "demo JSONL path")->required();
  bcc->add_option("--out", bc_out, "output checkpoint path");
  bcc->add_option("--epochs", bc_epochs, "training epochs");
  bcc->add_option("--seed", bc_seed, "training seed");

  // refine
  std::string refine_env = "mountaincar", refine_init = "random", refine_out = "refine_out";
  int refine_iters = 100;
  long refine_batch = 0, refine_offset = 0;
  double refine_kl = 0.01;
  std::uint64_t refine_seed = 0;
  auto* refine = app.add_subcommand("refine", "policy-gradient refinement");
  refine->add_option("--env", refine_env, "environment id");
  refine->add_option("--init", refine_init, "checkpoint path or 'random'");
  refine->add_option("--iterations", refine_iters, "update iterations");
  refine->add_option("--batch-timesteps", refine_batch, "timesteps per batch (0: 10*horizon)");
  refine->add_option("--kl-limit", refine_kl, "trust-region KL limit");
  refine->add_option("--offset", refine_offset, "timestep offset from earlier phases");
  refine->add_option("--seed", refine_seed, "run seed");
  refine->add_option("--out", refine_out, "output directory");

  // pipeline
  std::string pipe_config, pipe_out = "pipeline_out";
  auto* pipe = app.add_subcommand("pipeline", "full method comparison from a JSON config");
  pipe->add_option("--config", pipe_config, "JSON config path")->required();
  pipe->add_option("--out", pipe_out, "output directory");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "analysis utilities");
  analyze->require_subcommand(1);
  int hit_d = 3;
  double hit_r = 1.0, hit_R = 2.0;
  long hit_walks = 10000;
  std::uint64_t hit_seed = 0;
  std::string hit_out;
  auto* hitting = analyze->add_subcommand("hitting", "hitting probability: formula vs Monte Carlo");
  hitting->add_option("--d", hit_d, "dimension (>= 3)");
  hitting->add_option("--r", hit_r, "ball radius");
  hitting->add_option("--R", hit_R, "start distance");
  hitting->add_option("--walks", hit_walks, "Monte Carlo walks");
  hitting->add_option("--seed", hit_seed, "Monte Carlo seed");
  hitting->add_option("--out", hit_out, "optional JSON output path");

  double cx_a = 1.0, cx_b = 0.6931471805599453;
  long cx_terms = 1000000;
  std::string cx_out;
  auto* complexity = analyze->add_subcommand("complexity", "expected-iterations bound vs series");
  complexity->add_option("--a", cx_a, "tail amplitude");
  complexity->add_option("--b", cx_b, "tail decay rate");
  complexity->add_option("--terms", cx_terms, "series terms");
  complexity->add_option("--out", cx_out, "optional JSON output path");

  std::string tail_env = "mountaincar", tail_budgets, tail_steering = "learned",
              tail_out = "tail_out";
  int tail_seeds = 50;
  std::uint64_t tail_master = 7;
  double tail_pg = 0.05;
  auto* tail = analyze->add_subcommand("tail", "failure-tail sweep and exponential fit");
  tail->add_option("--env", tail_env, "environment id");
  tail->add_option("--budgets", tail_budgets, "comma-separated budgets");
  tail->add_option("--seeds", tail_seeds, "number of seeds");
  tail->add_option("--master-seed", tail_master, "master seed");
  tail->add_option("--steering", tail_steering, "learned|random");
  tail->add_option("--goal-bias", tail_pg, "goal sampling probability");
  tail->add_option("--out", tail_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (explore->parsed()) {
      return cmd_explore(env_id, seed, budget, goal_bias, steering, n_demos, out_dir);
    }
    if (bench->parsed()) return cmd_bench(bench_config, bench_out);
    if (bcc->parsed()) return cmd_bc(demos_path, bc_out, bc_epochs, bc_seed);
    if (refine->parsed()) {
      return cmd_refine(refine_env, refine_init, refine_iters, refine_batch, refine_kl,
                        refine_offset, refine_seed, refine_out);
    }
    if (pipe->parsed()) return cmd_pipeline(pipe_config, pipe_out);
    if (analyze->parsed()) {
      if (hitting->parsed()) {
        return cmd_analyze_hitting(hit_d, hit_r, hit_R, hit_walks, hit_seed, hit_out);
      }
      if (complexity->parsed()) return cmd_analyze_complexity(cx_a, cx_b, cx_terms, cx_out);
      if (tail->parsed()) {
        return cmd_analyze_tail(tail_env, tail_budgets, tail_seeds, tail_master, tail_steering,
                                tail_pg, tail_out);
      }
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
