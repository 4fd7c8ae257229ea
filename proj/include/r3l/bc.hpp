#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "r3l/common.hpp"
#include "r3l/env.hpp"
#include "r3l/policy.hpp"
#include "r3l/trajectory.hpp"

namespace r3l::bc {

// Supervised pairs: normalized visited state -> action taken there.
struct Dataset {
  Eigen::MatrixXd inputs;   // n_samples x state_dim
  Eigen::MatrixXd targets;  // n_samples x action_dim

  Eigen::Index size() const { return inputs.rows(); }
};

inline Dataset build_dataset(const DemoSet& demos, const env::Environment& e) {
  if (demos.env_id != e.id()) {
    throw std::invalid_argument("build_dataset: demo env '" + demos.env_id +
                                "' does not match environment '" + e.id() + "'");
  }
  std::size_t n = 0;
  for (const auto& tr : demos.trajectories) n += tr.length();
  if (n == 0) throw std::invalid_argument("build_dataset: demonstrations contain no transitions");

  const Eigen::Index state_dim = e.spec().state_bounds.dim();
  const Eigen::Index action_dim = e.spec().action_bounds.dim();
  Dataset ds;
  ds.inputs.resize(static_cast<Eigen::Index>(n), state_dim);
  ds.targets.resize(static_cast<Eigen::Index>(n), action_dim);
  Eigen::Index row = 0;
  for (const auto& tr : demos.trajectories) {
    tr.validate();
    for (std::size_t t = 0; t < tr.actions.size(); ++t) {
      ds.inputs.row(row) = e.normalize(tr.states[t]).transpose();
      ds.targets.row(row) = tr.actions[t].transpose();
      ++row;
    }
  }
  return ds;
}

struct BcConfig {
  int epochs = 500;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct BcReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> epoch_losses;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& msg, int epoch, double loss)
      : std::runtime_error(msg + " (epoch " + std::to_string(epoch) +
                           ", loss " + std::to_string(loss) + ")"),
        epoch_(epoch),
        loss_(loss) {}
  int epoch() const { return epoch_; }
  double loss() const { return loss_; }

 private:
  int epoch_;
  double loss_;
};

inline double mse_loss(const PolicyNet& net, const Dataset& ds) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    sum += (net.mean(ds.inputs.row(i).transpose()) - ds.targets.row(i).transpose()).squaredNorm();
  }
  return sum / static_cast<double>(ds.size());
}

// Gradient of mse_loss over the given sample rows, flat parameter layout.
inline Eigen::VectorXd mse_gradient(const PolicyNet& net, const Dataset& ds,
                                    const std::vector<int>& rows) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.param_count());
  for (int i : rows) {
    const Eigen::VectorXd x = ds.inputs.row(i).transpose();
    const Eigen::VectorXd err = net.mean(x) - ds.targets.row(i).transpose();
    net.accumulate_vjp(x, 2.0 * err, grad);
  }
  return grad / static_cast<double>(rows.size());
}

// Minibatch Adam on the regression loss. Deterministic for a fixed RNG state.
inline BcReport train_bc(PolicyNet& net, const Dataset& ds, const BcConfig& config, Rng& rng) {
  if (ds.size() == 0) throw std::invalid_argument("train_bc: empty dataset");
  if (config.epochs < 0 || config.batch_size <= 0 || !(config.learning_rate > 0.0)) {
    throw std::invalid_argument("train_bc: invalid config");
  }

  BcReport report;
  report.initial_loss = mse_loss(net, ds);
  report.epoch_losses.reserve(static_cast<std::size_t>(config.epochs));

  Eigen::VectorXd m = Eigen::VectorXd::Zero(net.param_count());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(net.param_count());
  long t = 0;

  std::vector<int> order(static_cast<std::size_t>(ds.size()));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(stop));
      const Eigen::VectorXd grad = mse_gradient(net, ds, batch);
      ++t;
      m = config.beta1 * m + (1.0 - config.beta1) * grad;
      v = config.beta2 * v + (1.0 - config.beta2) * grad.array().square().matrix();
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
      Eigen::VectorXd step =
          (m.array() / bc1) / ((v.array() / bc2).sqrt() + config.adam_eps);
      net.set_params(net.params() - config.learning_rate * step.matrix());
    }
    const double loss = mse_loss(net, ds);
    if (!std::isfinite(loss)) {
      throw TrainingError("train_bc: loss diverged", epoch, loss);
    }
    report.epoch_losses.push_back(loss);
  }
  report.final_loss = report.epoch_losses.empty() ? report.initial_loss : report.epoch_losses.back();
  return report;
}

}  // namespace r3l::bc
