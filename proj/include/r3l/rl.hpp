#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "r3l/common.hpp"
#include "r3l/env.hpp"
#include "r3l/policy.hpp"

namespace r3l::rl {

struct EpisodeData {
  std::vector<StateVec> states;   // raw states, length T+1
  std::vector<ActionVec> actions; // raw Gaussian samples (env clips on execution)
  std::vector<double> rewards;
  bool reached_goal = false;
};

struct RolloutBatch {
  std::vector<EpisodeData> episodes;
  Eigen::MatrixXd obs;        // n_steps x state_dim, normalized
  Eigen::MatrixXd actions;    // n_steps x action_dim, raw samples
  Eigen::VectorXd returns_to_go;  // discounted
  Eigen::VectorXd time_frac;      // t / horizon per step
  Eigen::VectorXd advantages;     // filled by the caller after the baseline fit
  long total_steps = 0;
  double mean_return = 0.0;   // undiscounted, averaged over episodes
  double success_rate = 0.0;
};

// Whole episodes until at least min_timesteps steps are gathered.
inline RolloutBatch collect_rollouts(env::Environment& e, const PolicyNet& policy,
                                     long min_timesteps, Rng& rng) {
  const auto& spec = e.spec();
  if (min_timesteps < spec.horizon) {
    throw std::invalid_argument("collect_rollouts: min_timesteps must cover at least one horizon");
  }
  RolloutBatch batch;
  double return_sum = 0.0;
  long successes = 0;
  while (batch.total_steps < min_timesteps) {
    EpisodeData ep;
    StateVec s = e.reset(rng);
    ep.states.push_back(s);
    for (int t = 0; t < spec.horizon; ++t) {
      const ActionVec a = policy.act(e.normalize(s), rng);
      const env::Transition tr = e.step(a);
      ep.actions.push_back(a);
      ep.rewards.push_back(tr.reward);
      ep.states.push_back(tr.next_state);
      if (spec.goal_defined && e.in_goal(tr.next_state)) ep.reached_goal = true;
      s = tr.next_state;
      if (tr.done) break;
    }
    batch.total_steps += static_cast<long>(ep.actions.size());
    double ret = 0.0;
    for (double r : ep.rewards) ret += r;
    return_sum += ret;
    if (ep.reached_goal) ++successes;
    batch.episodes.push_back(std::move(ep));
  }

  const Eigen::Index n = static_cast<Eigen::Index>(batch.total_steps);
  batch.obs.resize(n, spec.state_bounds.dim());
  batch.actions.resize(n, spec.action_bounds.dim());
  batch.returns_to_go.resize(n);
  batch.time_frac.resize(n);
  Eigen::Index row = 0;
  const double gamma = spec.discount;
  for (const auto& ep : batch.episodes) {
    const std::size_t T = ep.actions.size();
    std::vector<double> rtg(T);
    double acc = 0.0;
    for (std::size_t t = T; t-- > 0;) {
      acc = ep.rewards[t] + gamma * acc;
      rtg[t] = acc;
    }
    for (std::size_t t = 0; t < T; ++t) {
      batch.obs.row(row) = e.normalize(ep.states[t]).transpose();
      batch.actions.row(row) = ep.actions[t].transpose();
      batch.returns_to_go[row] = rtg[t];
      batch.time_frac[row] = static_cast<double>(t) / static_cast<double>(spec.horizon);
      ++row;
    }
  }
  batch.mean_return = return_sum / static_cast<double>(batch.episodes.size());
  batch.success_rate =
      static_cast<double>(successes) / static_cast<double>(batch.episodes.size());
  return batch;
}

// Least-squares value predictor on handcrafted features
// [s, s^2, t, t^2, t^3, 1] with t the in-episode time fraction.
class LinearBaseline {
 public:
  static Eigen::VectorXd features(const Eigen::VectorXd& obs, double tfrac) {
    Eigen::VectorXd f(2 * obs.size() + 4);
    f.head(obs.size()) = obs;
    f.segment(obs.size(), obs.size()) = obs.array().square().matrix();
    f[2 * obs.size()] = tfrac;
    f[2 * obs.size() + 1] = tfrac * tfrac;
    f[2 * obs.size() + 2] = tfrac * tfrac * tfrac;
    f[2 * obs.size() + 3] = 1.0;
    return f;
  }

  void fit(const Eigen::MatrixXd& obs, const Eigen::VectorXd& tfrac, const Eigen::VectorXd& y) {
    if (obs.rows() != tfrac.size() || obs.rows() != y.size() || obs.rows() == 0) {
      throw std::invalid_argument("LinearBaseline: inconsistent or empty fit data");
    }
    const Eigen::Index f_dim = 2 * obs.cols() + 4;
    Eigen::MatrixXd phi(obs.rows(), f_dim);
    for (Eigen::Index i = 0; i < obs.rows(); ++i) {
      phi.row(i) = features(obs.row(i).transpose(), tfrac[i]).transpose();
    }
    const Eigen::MatrixXd gram = phi.transpose() * phi;
    const Eigen::VectorXd rhs = phi.transpose() * y;

    used_ridge_ = false;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    bool bad = ldlt.info() != Eigen::Success;
    if (!bad) {
      // A PSD Gram matrix with a vanishing (or negative, i.e. round-off) pivot
      // is numerically rank deficient; fall back before dividing by dust.
      const Eigen::VectorXd d = ldlt.vectorD();
      const double dmax = d.maxCoeff();
      bad = !(dmax > 0.0) || d.minCoeff() < dmax * 1e-12;
    }
    if (!bad) {
      weights_ = ldlt.solve(rhs);
      bad = !weights_.allFinite() ||
            (gram * weights_ - rhs).norm() > 1e-6 * (rhs.norm() + 1.0);
    }
    if (bad) {
      used_ridge_ = true;
      const Eigen::MatrixXd reg =
          gram + kRidge * Eigen::MatrixXd::Identity(f_dim, f_dim);
      weights_ = Eigen::LDLT<Eigen::MatrixXd>(reg).solve(rhs);
    }
    if (!weights_.allFinite()) throw std::runtime_error("LinearBaseline: fit produced non-finite weights");
  }

  double predict(const Eigen::VectorXd& obs, double tfrac) const {
    if (weights_.size() == 0) return 0.0;
    return features(obs, tfrac).dot(weights_);
  }

  Eigen::VectorXd predict_batch(const Eigen::MatrixXd& obs, const Eigen::VectorXd& tfrac) const {
    Eigen::VectorXd out(obs.rows());
    for (Eigen::Index i = 0; i < obs.rows(); ++i) out[i] = predict(obs.row(i).transpose(), tfrac[i]);
    return out;
  }

  const Eigen::VectorXd& weights() const { return weights_; }
  bool used_ridge() const { return used_ridge_; }

  static constexpr double kRidge = 1e-8;

 private:
  Eigen::VectorXd weights_;
  bool used_ridge_ = false;
};

// Advantages = returns-to-go minus baseline, normalized to zero mean and unit
// variance (variance guard 1e-6).
inline void compute_advantages(RolloutBatch& batch, const LinearBaseline& baseline) {
  Eigen::VectorXd adv = batch.returns_to_go - baseline.predict_batch(batch.obs, batch.time_frac);
  const double mean = adv.mean();
  adv.array() -= mean;
  const double sd = std::sqrt(adv.squaredNorm() / static_cast<double>(adv.size()));
  batch.advantages = adv / (sd + 1e-6);
}

struct PgConfig {
  double kl_limit = 0.01;
  int cg_iterations = 10;
  double cg_damping = 0.1;
  double backtrack_coeff = 0.8;
  int max_backtracks = 10;
};

struct UpdateStats {
  bool accepted = false;
  double kl = 0.0;
  double improvement = 0.0;
  double grad_norm = 0.0;
  int backtracks = 0;
};

namespace detail {

inline Eigen::MatrixXd policy_means(const PolicyNet& net, const Eigen::MatrixXd& obs) {
  Eigen::MatrixXd mu(obs.rows(), net.output_dim());
  for (Eigen::Index i = 0; i < obs.rows(); ++i) mu.row(i) = net.mean(obs.row(i).transpose()).transpose();
  return mu;
}

// Surrogate objective: mean importance ratio times advantage, evaluated against
// the snapshot means mu_old under the fixed-sigma Gaussian policy.
inline double surrogate(const PolicyNet& net, const RolloutBatch& batch,
                        const Eigen::MatrixXd& mu_old) {
  const double inv2s2 = 1.0 / (2.0 * net.sigma() * net.sigma());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < batch.obs.rows(); ++i) {
    const Eigen::VectorXd mu = net.mean(batch.obs.row(i).transpose());
    const double logp_new = -(batch.actions.row(i).transpose() - mu).squaredNorm() * inv2s2;
    const double logp_old =
        -(batch.actions.row(i) - mu_old.row(i)).squaredNorm() * inv2s2;
    acc += std::exp(logp_new - logp_old) * batch.advantages[i];
  }
  return acc / static_cast<double>(batch.obs.rows());
}

// KL(old || new) for fixed-sigma Gaussians: mean squared mean shift / (2 sigma^2).
inline double mean_kl(const PolicyNet& net, const Eigen::MatrixXd& obs,
                      const Eigen::MatrixXd& mu_old, double sigma) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < obs.rows(); ++i) {
    acc += (net.mean(obs.row(i).transpose()) - mu_old.row(i).transpose()).squaredNorm();
  }
  return acc / (2.0 * sigma * sigma * static_cast<double>(obs.rows()));
}

}  // namespace detail

// One natural-gradient step with KL trust region: conjugate gradients on
// Fisher-vector products, then a backtracking line search that must both
// improve the surrogate and respect the KL limit. No acceptable step leaves
// the parameters unchanged.
inline UpdateStats pg_update(PolicyNet& net, const RolloutBatch& batch, const PgConfig& config) {
  if (batch.advantages.size() != batch.obs.rows()) {
    throw std::invalid_argument("pg_update: advantages not computed");
  }
  UpdateStats stats;
  const Eigen::Index n = batch.obs.rows();
  const double sigma = net.sigma();
  const double inv_s2 = 1.0 / (sigma * sigma);

  const Eigen::MatrixXd mu_old = detail::policy_means(net, batch.obs);

  // Stacked Jacobian of every sample mean w.r.t. the parameters (rows are
  // sample-major, action-dim minor); one reverse pass per row. The surrogate
  // gradient and Fisher-vector products then reduce to dense matrix products.
  const Eigen::Index d_a = mu_old.cols();
  Eigen::MatrixXd jac(n * d_a, net.param_count());
  {
    Eigen::VectorXd row(net.param_count());
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd x = batch.obs.row(i).transpose();
      for (Eigen::Index k = 0; k < d_a; ++k) {
        row.setZero();
        net.accumulate_vjp(x, Eigen::VectorXd::Unit(d_a, k), row);
        jac.row(i * d_a + k) = row.transpose();
      }
    }
  }

  // Policy gradient of the surrogate at the snapshot: E[grad log pi * A].
  Eigen::VectorXd residual(n * d_a);
  for (Eigen::Index i = 0; i < n; ++i) {
    residual.segment(i * d_a, d_a) =
        (batch.actions.row(i) - mu_old.row(i)).transpose() * (inv_s2 * batch.advantages[i]);
  }
  const Eigen::VectorXd grad = jac.transpose() * residual / static_cast<double>(n);
  stats.grad_norm = grad.norm();
  if (!grad.allFinite() || stats.grad_norm < 1e-12) return stats;

  // Fisher-vector product for the fixed-sigma Gaussian head:
  // F v = E[J^T J v] / sigma^2, plus damping.
  const auto fvp = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return jac.transpose() * (jac * v) * (inv_s2 / static_cast<double>(n)) +
           config.cg_damping * v;
  };

  // Conjugate gradients on F x = g.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(grad.size());
  Eigen::VectorXd r = grad;
  Eigen::VectorXd p = grad;
  double rr = r.squaredNorm();
  for (int it = 0; it < config.cg_iterations && rr > 1e-20; ++it) {
    const Eigen::VectorXd fp = fvp(p);
    const double alpha = rr / p.dot(fp);
    x += alpha * p;
    r -= alpha * fp;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }

  const double xfx = x.dot(fvp(x));
  if (!(xfx > 0.0) || !x.allFinite()) return stats;
  const double beta_full = std::sqrt(2.0 * config.kl_limit / xfx);

  const Eigen::VectorXd theta_old = net.params();
  const double surr_old = detail::surrogate(net, batch, mu_old);
  double scale = beta_full;
  for (int bt = 0; bt < config.max_backtracks; ++bt, scale *= config.backtrack_coeff) {
    net.set_params(theta_old + scale * x);
    const double kl = detail::mean_kl(net, batch.obs, mu_old, sigma);
    const double improvement = detail::surrogate(net, batch, mu_old) - surr_old;
    if (std::isfinite(kl) && kl <= config.kl_limit && improvement > 0.0) {
      stats.accepted = true;
      stats.kl = kl;
      stats.improvement = improvement;
      stats.backtracks = bt;
      return stats;
    }
  }
  net.set_params(theta_old);
  stats.backtracks = config.max_backtracks;
  return stats;
}

struct RefineConfig {
  int iterations = 100;
  long batch_timesteps = 0;  // default: 10 * horizon
  long timestep_offset = 0;  // steps spent on other env instances (exploration, demos)
  PgConfig pg;
};

struct CurvePoint {
  int iteration = 0;
  long cumulative_timesteps = 0;
  double mean_return = 0.0;
  double kl = 0.0;
  double success_rate = 0.0;
};

// Iterative refinement loop; the returned curve counts every env.step ever taken
// on this env instance plus the configured offset.
inline std::vector<CurvePoint> refine(PolicyNet& net, env::Environment& e,
                                      const RefineConfig& config, Rng& rng) {
  if (config.iterations < 0) throw std::invalid_argument("refine: negative iteration count");
  const long batch_ts =
      config.batch_timesteps > 0 ? config.batch_timesteps : 10L * e.spec().horizon;
  std::vector<CurvePoint> curve;
  curve.reserve(static_cast<std::size_t>(config.iterations));
  for (int it = 0; it < config.iterations; ++it) {
    RolloutBatch batch = collect_rollouts(e, net, batch_ts, rng);
    LinearBaseline baseline;
    baseline.fit(batch.obs, batch.time_frac, batch.returns_to_go);
    compute_advantages(batch, baseline);
    const UpdateStats stats = pg_update(net, batch, config.pg);
    CurvePoint pt;
    pt.iteration = it;
    pt.cumulative_timesteps = config.timestep_offset + static_cast<long>(e.steps_taken());
    pt.mean_return = batch.mean_return;
    pt.kl = stats.kl;
    pt.success_rate = batch.success_rate;
    curve.push_back(pt);
  }
  return curve;
}

}  // namespace r3l::rl
