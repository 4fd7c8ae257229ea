#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "r3l/common.hpp"

namespace r3l {

using json = nlohmann::json;

inline json to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Eigen::VectorXd vector_from_json(const json& arr) {
  if (!arr.is_array()) throw std::runtime_error("expected JSON array for vector");
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

// One rollout: T transitions, T+1 states. Deterministic envs make every
// transition replayable from (state, action) alone.
struct Trajectory {
  std::vector<StateVec> states;
  std::vector<ActionVec> actions;
  std::vector<double> rewards;
  bool successful = false;

  std::size_t length() const { return actions.size(); }

  double discounted_return(double gamma) const {
    double g = 0.0, scale = 1.0;
    for (double r : rewards) {
      g += scale * r;
      scale *= gamma;
    }
    return g;
  }

  double undiscounted_return() const {
    double g = 0.0;
    for (double r : rewards) g += r;
    return g;
  }

  void validate() const {
    if (states.size() != actions.size() + 1 || rewards.size() != actions.size()) {
      throw std::runtime_error("trajectory: inconsistent lengths");
    }
  }
};

// JSON-lines: one record per transition {state, action, reward, done}; a closing
// line with "action": null carries the final state and the success flag.
inline void write_trajectory(std::ostream& os, const Trajectory& tr, bool goal_done_last = false) {
  tr.validate();
  for (std::size_t t = 0; t < tr.actions.size(); ++t) {
    const bool done = goal_done_last && t + 1 == tr.actions.size() && tr.successful;
    json rec = {{"state", to_json(tr.states[t])},
                {"action", to_json(tr.actions[t])},
                {"reward", tr.rewards[t]},
                {"done", done}};
    os << rec.dump() << "\n";
  }
  json tail = {{"state", to_json(tr.states.back())}, {"action", nullptr}, {"successful", tr.successful}};
  os << tail.dump() << "\n";
}

inline std::vector<Trajectory> read_trajectories(std::istream& is) {
  std::vector<Trajectory> out;
  Trajectory cur;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    if (!rec.contains("state")) throw std::runtime_error("trajectory record missing state");
    if (rec.contains("action") && !rec["action"].is_null()) {
      cur.states.push_back(vector_from_json(rec["state"]));
      cur.actions.push_back(vector_from_json(rec["action"]));
      cur.rewards.push_back(rec.at("reward").get<double>());
    } else {
      cur.states.push_back(vector_from_json(rec["state"]));
      cur.successful = rec.value("successful", false);
      cur.validate();
      out.push_back(std::move(cur));
      cur = Trajectory{};
    }
  }
  if (!cur.states.empty()) throw std::runtime_error("trajectory stream truncated (no terminal record)");
  return out;
}

// Demonstration bundle: trajectories from distinct exploration runs of one env.
struct DemoSet {
  std::string env_id;
  std::vector<std::uint64_t> seeds;
  json config = json::object();
  std::vector<Trajectory> trajectories;
};

inline void write_demoset(std::ostream& os, const DemoSet& demos) {
  json header = {{"env", demos.env_id}, {"seeds", demos.seeds}, {"config", demos.config}};
  os << header.dump() << "\n";
  for (const auto& tr : demos.trajectories) write_trajectory(os, tr);
}

inline DemoSet read_demoset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("demo set: empty stream");
  json header = json::parse(line);
  DemoSet demos;
  demos.env_id = header.at("env").get<std::string>();
  if (header.contains("seeds")) demos.seeds = header["seeds"].get<std::vector<std::uint64_t>>();
  if (header.contains("config")) demos.config = header["config"];
  demos.trajectories = read_trajectories(is);
  return demos;
}

inline void save_demoset(const std::string& path, const DemoSet& demos) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  write_demoset(f, demos);
}

inline DemoSet load_demoset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  return read_demoset(f);
}

}  // namespace r3l
