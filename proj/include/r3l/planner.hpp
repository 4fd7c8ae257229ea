#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "r3l/common.hpp"
#include "r3l/env.hpp"
#include "r3l/steering.hpp"
#include "r3l/trajectory.hpp"

namespace r3l::planner {

struct TreeNode {
  StateVec state;
  StateVec norm_state;  // cached normalized coordinates for nearest()
  int parent = -1;      // -1 marks the root
  ActionVec action_from_parent;
  double reward_from_parent = 0.0;
  int depth = 0;
  double cum_return = 0.0;  // sum of gamma^t * r along the root path
};

class ExplorationTree {
 public:
  ExplorationTree() = default;

  int init_root(StateVec state, StateVec norm_state) {
    nodes_.clear();
    TreeNode root;
    root.state = std::move(state);
    root.norm_state = std::move(norm_state);
    nodes_.push_back(std::move(root));
    return 0;
  }

  int add(TreeNode node) {
    if (node.parent < 0 || node.parent >= static_cast<int>(nodes_.size())) {
      throw std::invalid_argument("ExplorationTree: parent index out of range");
    }
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
  }

  const TreeNode& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  int size() const { return static_cast<int>(nodes_.size()); }
  bool empty() const { return nodes_.empty(); }

 private:
  std::vector<TreeNode> nodes_;
};

// Nearest expandable node (depth < horizon) by Euclidean distance on normalized
// states; ties resolve to the lowest index. Empty optional: nothing expandable.
inline std::optional<int> nearest_expandable(const ExplorationTree& tree, const StateVec& query_norm,
                                             int horizon) {
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < tree.size(); ++i) {
    const TreeNode& n = tree.node(i);
    if (n.depth >= horizon) continue;
    const double d2 = (n.norm_state - query_norm).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  if (best < 0) return std::nullopt;
  return best;
}

inline int nearest(const ExplorationTree& tree, const StateVec& query_norm, int horizon) {
  auto idx = nearest_expandable(tree, query_norm, horizon);
  if (!idx) throw std::runtime_error("nearest: no expandable node (all at horizon depth)");
  return *idx;
}

// Root path of a leaf. The caller owns the success flag.
inline Trajectory extract_trajectory(const ExplorationTree& tree, int leaf_index) {
  if (leaf_index < 0 || leaf_index >= tree.size()) {
    throw std::invalid_argument("extract_trajectory: leaf index out of range");
  }
  std::vector<int> path;
  for (int i = leaf_index; i >= 0; i = tree.node(i).parent) path.push_back(i);
  Trajectory tr;
  tr.states.reserve(path.size());
  tr.actions.reserve(path.size() - 1);
  tr.rewards.reserve(path.size() - 1);
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    const TreeNode& n = tree.node(*it);
    tr.states.push_back(n.state);
    if (n.parent >= 0) {
      tr.actions.push_back(n.action_from_parent);
      tr.rewards.push_back(n.reward_from_parent);
    }
  }
  tr.validate();
  return tr;
}

struct RunStats {
  std::string env_id;
  std::string steering_mode;
  double goal_bias = 0.0;
  std::uint64_t seed = 0;
  long traj_len = 0;
  long timesteps = 0;
  bool success = false;
  double wall_time = 0.0;  // seconds
};

struct ExploreConfig {
  long budget = 0;
  double goal_bias = 0.05;
  std::optional<StateVec> root;  // default: a fresh env reset

  void validate() const {
    if (budget <= 0) throw std::invalid_argument("explore: budget must be positive");
    if (!(goal_bias >= 0.0 && goal_bias <= 1.0)) {
      throw std::invalid_argument("explore: goal_bias must lie in [0, 1]");
    }
  }
};

struct ExploreResult {
  Trajectory trajectory;
  RunStats stats;
  ExplorationTree tree;
  int best_node = -1;
};

// Kinodynamic tree exploration. Each iteration samples a target state (goal set
// with probability goal_bias, otherwise uniform), extends the nearest expandable
// node with one steered env step, and feeds the achieved displacement back into
// the steering model. Stops at the first goal-reaching node; on budget
// exhaustion the argmax-cum_return path is returned, flagged unsuccessful.
inline ExploreResult explore(env::Environment& e, steering::Steering& steer,
                             const ExploreConfig& config, Rng& rng) {
  config.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const auto& spec = e.spec();
  const double gamma = spec.discount;
  const int horizon = spec.horizon;

  ExploreResult res;
  res.stats.env_id = spec.id;
  res.stats.steering_mode = steer.mode();
  res.stats.goal_bias = config.goal_bias;

  StateVec root = config.root ? *config.root : e.reset(rng);
  if (config.root) e.set_state(root);
  res.tree.init_root(root, e.normalize(root));

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const std::uint64_t steps_before = e.steps_taken();
  int goal_node = -1;

  if (spec.goal_defined && e.in_goal(root)) {
    goal_node = 0;
  } else {
    for (long it = 0; it < config.budget; ++it) {
      StateVec target;
      if (spec.goal_defined && config.goal_bias > 0.0 && coin(rng) < config.goal_bias) {
        target = e.sample_goal_state(rng);
      } else {
        target = e.sample_state_uniform(rng);
      }
      const StateVec target_norm = e.normalize(target);

      const auto near_idx = nearest_expandable(res.tree, target_norm, horizon);
      if (!near_idx) break;  // every node sits at horizon depth
      const TreeNode& near = res.tree.node(*near_idx);

      const steering::SteeringInput plan_in{near.norm_state, target_norm - near.norm_state};
      const ActionVec action = steer.sample(plan_in, rng);

      e.set_state(near.state);
      const env::Transition tr = e.step(action);
      const StateVec next_norm = e.normalize(tr.next_state);
      steer.update({near.norm_state, next_norm - near.norm_state}, tr.action);

      TreeNode child;
      child.state = tr.next_state;
      child.norm_state = next_norm;
      child.parent = *near_idx;
      child.action_from_parent = tr.action;
      child.reward_from_parent = tr.reward;
      child.depth = near.depth + 1;
      child.cum_return = near.cum_return + std::pow(gamma, near.depth) * tr.reward;
      const int child_idx = res.tree.add(std::move(child));

      if (spec.goal_defined && e.in_goal(tr.next_state)) {
        goal_node = child_idx;
        break;
      }
    }
  }

  res.stats.timesteps = static_cast<long>(e.steps_taken() - steps_before);
  res.stats.success = goal_node >= 0;
  if (goal_node >= 0) {
    res.best_node = goal_node;
  } else {
    int best = 0;
    for (int i = 1; i < res.tree.size(); ++i) {
      if (res.tree.node(i).cum_return > res.tree.node(best).cum_return) best = i;
    }
    res.best_node = best;
  }
  res.trajectory = extract_trajectory(res.tree, res.best_node);
  res.trajectory.successful = res.stats.success;
  res.stats.traj_len = static_cast<long>(res.trajectory.length());
  res.stats.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

struct RunConfig {
  std::string steering_mode = "learned";
  long budget = 0;
  double goal_bias = 0.05;
  std::uint64_t seed = 0;
  steering::LearnedSteering::Hyper hyper;
};

inline std::unique_ptr<steering::Steering> make_run_steering(const env::EnvSpec& spec,
                                                             const RunConfig& config, Rng& rng) {
  return steering::make_steering(config.steering_mode, static_cast<int>(spec.state_bounds.dim()),
                                 spec.action_bounds, rng, config.hyper);
}

// One self-contained exploration run: the seed fixes the RNG stream that draws
// the feature map, the start state, and every sampling decision.
inline ExploreResult run_exploration(env::Environment& e, const RunConfig& config) {
  Rng rng = make_rng(config.seed);
  auto steer = make_run_steering(e.spec(), config, rng);
  ExploreConfig ec;
  ec.budget = config.budget;
  ec.goal_bias = config.goal_bias;
  ExploreResult res = explore(e, *steer, ec, rng);
  res.stats.seed = config.seed;
  return res;
}

class ExplorationFailure : public std::runtime_error {
 public:
  ExplorationFailure(const std::string& msg, std::vector<RunStats> runs)
      : std::runtime_error(msg), runs_(std::move(runs)) {}
  const std::vector<RunStats>& runs() const { return runs_; }

 private:
  std::vector<RunStats> runs_;
};

struct CollectResult {
  DemoSet demos;
  std::vector<RunStats> runs;  // every attempt, including failed ones
};

// n successful demonstrations from distinct resets; each attempt gets a fresh
// seed, tree, and steering model. At most 10 attempts per demonstration.
inline CollectResult collect_demos(env::Environment& e, const RunConfig& config, int n_demos) {
  if (n_demos <= 0) throw std::invalid_argument("collect_demos: n_demos must be positive");
  constexpr int kMaxAttempts = 10;
  CollectResult out;
  out.demos.env_id = e.id();
  out.demos.config = {{"budget", config.budget},
                      {"goal_bias", config.goal_bias},
                      {"steering", config.steering_mode}};
  for (int demo = 0; demo < n_demos; ++demo) {
    bool got = false;
    for (int attempt = 0; attempt < kMaxAttempts && !got; ++attempt) {
      RunConfig rc = config;
      rc.seed = derive_seed(config.seed, static_cast<std::uint64_t>(demo * kMaxAttempts + attempt));
      ExploreResult res = run_exploration(e, rc);
      out.runs.push_back(res.stats);
      if (res.stats.success) {
        out.demos.trajectories.push_back(std::move(res.trajectory));
        out.demos.seeds.push_back(rc.seed);
        got = true;
      }
    }
    if (!got) {
      throw ExplorationFailure(
          "collect_demos: exceeded retry cap (" + std::to_string(kMaxAttempts) +
              ") for demonstration " + std::to_string(demo) + " on " + e.id(),
          std::move(out.runs));
    }
  }
  return out;
}

}  // namespace r3l::planner
