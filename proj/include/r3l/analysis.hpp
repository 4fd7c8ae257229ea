#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "r3l/common.hpp"

namespace r3l::analysis {

// Probability that an unbiased random walk in dimension d >= 3 ever enters a
// ball of radius r started at distance R from its center: (r/R)^(d-2).
inline double hitting_probability(double r, double R, int d) {
  if (!(r > 0.0) || !(r < R)) throw std::domain_error("hitting_probability: need 0 < r < R");
  if (d < 3) throw std::domain_error("hitting_probability: transient regime needs d >= 3");
  return std::pow(r / R, static_cast<double>(d - 2));
}

// Expected hitting count bound a / (4 sinh^2(b/2)) for a failure tail a e^{-bk};
// equals sum_{k>=1} k a e^{-bk} in closed form.
inline double sampling_complexity_bound(double a, double b) {
  if (!(b > 0.0)) throw std::domain_error("sampling_complexity_bound: decay rate must be positive");
  if (!(a >= 0.0)) throw std::domain_error("sampling_complexity_bound: amplitude must be nonnegative");
  const double s = std::sinh(0.5 * b);
  return a / (4.0 * s * s);
}

inline double complexity_series(double a, double b, long n_terms) {
  if (!(b > 0.0) || n_terms <= 0) throw std::domain_error("complexity_series: invalid arguments");
  long double acc = 0.0L;
  for (long k = 1; k <= n_terms; ++k) {
    const long double term =
        static_cast<long double>(k) * static_cast<long double>(a) * std::exp(-static_cast<long double>(b) * k);
    acc += term;
    if (term < 1e-300L && k > 64) break;  // geometric underflow; tail is zero
  }
  return static_cast<double>(acc);
}

// Stochastic-process view of a training run: theta' = theta - eps*g(theta) +
// (eps/n_mb) * B * dW, run until theta enters the target ball or the cap.
struct RandomWalkConfig {
  Eigen::VectorXd start;
  Eigen::VectorXd center;
  double radius = 0.0;
  double learning_rate = 1.0;   // eps
  double minibatch_size = 1.0;  // n_mb; noise scale is eps/n_mb
  Eigen::MatrixXd noise_factor; // B (d x d); empty means identity
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift;  // empty means zero (flat regime)
  long max_steps = 1000000;

  void validate() const {
    if (start.size() == 0 || start.size() != center.size()) {
      throw std::invalid_argument("random walk: start/center dimension mismatch");
    }
    if (!(radius > 0.0)) throw std::invalid_argument("random walk: radius must be positive");
    if (!(minibatch_size > 0.0)) throw std::invalid_argument("random walk: minibatch size must be positive");
    if (max_steps <= 0) throw std::invalid_argument("random walk: step cap must be positive");
    if (noise_factor.size() != 0 &&
        (noise_factor.rows() != start.size() || noise_factor.cols() != start.size())) {
      throw std::invalid_argument("random walk: noise factor must be d x d");
    }
  }
};

struct WalkResult {
  bool hit = false;
  long steps = 0;
};

namespace detail {

inline Eigen::VectorXd standard_normal(Eigen::Index d, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < d; ++i) z[i] = gauss(rng);
  return z;
}

// Flat-regime walk with isotropic steps. Far from the ball, j consecutive
// i.i.d. N(0, s^2 I) increments are drawn as one N(0, j s^2 I) jump with the
// block std kept below a tenth of the gap, which leaves the hit/miss law
// unchanged up to a Brownian-bridge tail of order exp(-200) while still
// counting j elementary steps against the cap.
inline WalkResult walk_isotropic(const Eigen::VectorXd& start, const Eigen::VectorXd& center,
                                 double radius, double sigma, long max_steps, Rng& rng) {
  if ((start - center).norm() < radius) return {true, 0};
  if (sigma == 0.0) return {false, max_steps};
  Eigen::VectorXd theta = start;
  long n = 0;
  while (n < max_steps) {
    const double gap = (theta - center).norm() - radius;
    long j = 1;
    if (gap > 10.0 * sigma) {
      const double blocks = (gap / (10.0 * sigma)) * (gap / (10.0 * sigma));
      j = std::min<long>(static_cast<long>(blocks), max_steps - n);
      if (j < 1) j = 1;
    }
    theta += sigma * std::sqrt(static_cast<double>(j)) * standard_normal(theta.size(), rng);
    n += j;
    if ((theta - center).norm() < radius) return {true, n};
  }
  return {false, max_steps};
}

}  // namespace detail

inline WalkResult simulate_sgd_process(const RandomWalkConfig& config, Rng& rng) {
  config.validate();
  const double scale = config.learning_rate / config.minibatch_size;

  if (!config.drift && config.noise_factor.size() == 0) {
    return detail::walk_isotropic(config.start, config.center, config.radius, scale,
                                  config.max_steps, rng);
  }

  if ((config.start - config.center).norm() < config.radius) return {true, 0};
  Eigen::VectorXd theta = config.start;
  for (long n = 1; n <= config.max_steps; ++n) {
    if (config.drift) theta -= config.learning_rate * config.drift(theta);
    if (scale != 0.0) {
      const Eigen::VectorXd z = detail::standard_normal(theta.size(), rng);
      if (config.noise_factor.size() != 0) {
        theta += scale * (config.noise_factor * z);
      } else {
        theta += scale * z;
      }
    }
    if ((theta - config.center).norm() < config.radius) return {true, n};
  }
  return {false, config.max_steps};
}

// Monte Carlo estimate of the ball-hitting fraction for the flat regime,
// started at distance R on the first axis with step std r/20 by convention.
inline double random_walk_hit_fraction(int d, double r, double R, long n_walks, double step_std,
                                       long max_steps, std::uint64_t seed) {
  if (d < 1 || n_walks <= 0) throw std::invalid_argument("random_walk_hit_fraction: bad arguments");
  RandomWalkConfig cfg;
  cfg.start = Eigen::VectorXd::Zero(d);
  cfg.start[0] = R;
  cfg.center = Eigen::VectorXd::Zero(d);
  cfg.radius = r;
  cfg.learning_rate = step_std;
  cfg.minibatch_size = 1.0;
  cfg.max_steps = max_steps;
  long hits = 0;
  for (long w = 0; w < n_walks; ++w) {
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(w)));
    if (simulate_sgd_process(cfg, rng).hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n_walks);
}

// Failure-tail fit: least squares of log failure fraction against budget,
// using only budgets with at least one failure. Model f(k) = a e^{-bk}.
struct BudgetOutcome {
  long budget = 0;
  long failures = 0;
  long total = 0;
};

struct TailFit {
  double a = 0.0;
  double b = 0.0;
  std::vector<long> budgets;
  std::vector<double> fractions;  // all budgets, including zero-failure ones
  int points_used = 0;
};

inline TailFit fit_failure_tail(const std::vector<BudgetOutcome>& outcomes) {
  TailFit fit;
  std::vector<double> ks, logs;
  for (const auto& o : outcomes) {
    if (o.total <= 0 || o.failures < 0 || o.failures > o.total || o.budget <= 0) {
      throw std::invalid_argument("fit_failure_tail: malformed budget outcome");
    }
    const double frac = static_cast<double>(o.failures) / static_cast<double>(o.total);
    fit.budgets.push_back(o.budget);
    fit.fractions.push_back(frac);
    if (o.failures > 0) {
      ks.push_back(static_cast<double>(o.budget));
      logs.push_back(std::log(frac));
    }
  }
  bool distinct = false;
  for (std::size_t i = 1; i < ks.size(); ++i) distinct |= ks[i] != ks[0];
  if (ks.size() < 2 || !distinct) {
    throw std::runtime_error(
        "fit_failure_tail: insufficient data (need >= 2 distinct budgets with nonzero failures)");
  }
  const double n = static_cast<double>(ks.size());
  double sk = 0, sl = 0, skk = 0, skl = 0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    sk += ks[i];
    sl += logs[i];
    skk += ks[i] * ks[i];
    skl += ks[i] * logs[i];
  }
  const double slope = (n * skl - sk * sl) / (n * skk - sk * sk);
  const double intercept = (sl - slope * sk) / n;
  fit.a = std::exp(intercept);
  fit.b = -slope;
  fit.points_used = static_cast<int>(ks.size());
  return fit;
}

}  // namespace r3l::analysis
