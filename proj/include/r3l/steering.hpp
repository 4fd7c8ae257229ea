#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "r3l/common.hpp"

namespace r3l::steering {

// Random Fourier feature map for a squared-exponential kernel with lengthscale ell:
// phi(x) = sqrt(2/m) * cos(W x + b), W ~ N(0, 1/ell^2), b ~ U[0, 2pi).
// Frozen after construction so features are a pure function of the input.
class RffMap {
 public:
  RffMap(int input_dim, int n_features, double lengthscale, Rng& rng)
      : lengthscale_(lengthscale) {
    if (input_dim <= 0 || n_features <= 0 || !(lengthscale > 0.0)) {
      throw std::invalid_argument("RffMap: dimensions and lengthscale must be positive");
    }
    std::normal_distribution<double> gauss(0.0, 1.0 / lengthscale);
    std::uniform_real_distribution<double> unif(0.0, 2.0 * M_PI);
    freq_.resize(n_features, input_dim);
    phase_.resize(n_features);
    for (int i = 0; i < n_features; ++i) {
      for (int j = 0; j < input_dim; ++j) freq_(i, j) = gauss(rng);
      phase_[i] = unif(rng);
    }
    scale_ = std::sqrt(2.0 / static_cast<double>(n_features));
  }

  int input_dim() const { return static_cast<int>(freq_.cols()); }
  int n_features() const { return static_cast<int>(freq_.rows()); }
  double lengthscale() const { return lengthscale_; }
  const Eigen::MatrixXd& frequencies() const { return freq_; }
  const Eigen::VectorXd& phases() const { return phase_; }

  Eigen::VectorXd features(const Eigen::VectorXd& x) const {
    if (x.size() != freq_.cols()) throw std::invalid_argument("RffMap: input dimension mismatch");
    return (scale_ * ((freq_ * x + phase_).array().cos())).matrix();
  }

 private:
  Eigen::MatrixXd freq_;
  Eigen::VectorXd phase_;
  double lengthscale_;
  double scale_;
};

namespace detail {

// In-place rank-1 Cholesky update: L L^T + x x^T -> L' L'^T.
inline void chol_rank1_update(Eigen::MatrixXd& L, Eigen::VectorXd x) {
  const Eigen::Index n = L.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double lkk = L(k, k);
    const double r = std::hypot(lkk, x[k]);
    const double c = r / lkk;
    const double s = x[k] / lkk;
    L(k, k) = r;
    const Eigen::Index tail = n - k - 1;
    if (tail > 0) {
      L.col(k).tail(tail) = (L.col(k).tail(tail) + s * x.tail(tail)) / c;
      x.tail(tail) = c * x.tail(tail) - s * L.col(k).tail(tail);
    }
  }
}

}  // namespace detail

// Bayesian linear regression on a shared feature vector with one head per output
// dimension. Precision Lambda = alpha I + beta * sum(phi phi^T) is target-independent,
// so all heads share it; a Cholesky factor is maintained by rank-1 updates and must
// agree with a from-scratch factorization of Lambda (checked in tests).
class BlrModel {
 public:
  BlrModel(int n_features, int n_outputs, double alpha, double beta)
      : alpha_(alpha), beta_(beta) {
    if (n_features <= 0 || n_outputs <= 0 || !(alpha > 0.0) || !(beta > 0.0)) {
      throw std::invalid_argument("BlrModel: invalid shape or precision");
    }
    lambda_ = alpha * Eigen::MatrixXd::Identity(n_features, n_features);
    chol_ = std::sqrt(alpha) * Eigen::MatrixXd::Identity(n_features, n_features);
    b_ = Eigen::MatrixXd::Zero(n_features, n_outputs);
  }

  int n_features() const { return static_cast<int>(lambda_.rows()); }
  int n_outputs() const { return static_cast<int>(b_.cols()); }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  long observations() const { return n_obs_; }
  const Eigen::MatrixXd& precision() const { return lambda_; }
  const Eigen::MatrixXd& mean_term() const { return b_; }

  void update(const Eigen::VectorXd& phi, const Eigen::VectorXd& y) {
    if (phi.size() != lambda_.rows() || y.size() != b_.cols()) {
      throw std::invalid_argument("BlrModel: update dimension mismatch");
    }
    lambda_.selfadjointView<Eigen::Lower>().rankUpdate(phi, beta_);
    lambda_.triangularView<Eigen::StrictlyUpper>() = lambda_.transpose();
    detail::chol_rank1_update(chol_, std::sqrt(beta_) * phi);
    b_ += phi * (beta_ * y.transpose());
    ++n_obs_;
  }

  // Posterior predictive at phi: mean_j = mu_j . phi, var = 1/beta + phi^T Lambda^-1 phi
  // (variance is shared across heads).
  struct Predictive {
    Eigen::VectorXd mean;
    double variance = 0.0;
  };

  Predictive predict(const Eigen::VectorXd& phi) const {
    Predictive out;
    const Eigen::VectorXd z = chol_.triangularView<Eigen::Lower>().solve(phi);
    out.variance = 1.0 / beta_ + z.squaredNorm();
    out.mean.resize(b_.cols());
    for (Eigen::Index j = 0; j < b_.cols(); ++j) {
      out.mean[j] = chol_.triangularView<Eigen::Lower>().solve(b_.col(j)).dot(z);
    }
    return out;
  }

  // Reference route: factorize the accumulated precision from scratch per solve.
  Predictive predict_reference(const Eigen::VectorXd& phi) const {
    Eigen::LLT<Eigen::MatrixXd> llt(lambda_);
    if (llt.info() != Eigen::Success) throw std::runtime_error("BlrModel: precision not SPD");
    Predictive out;
    const Eigen::VectorXd lam_inv_phi = llt.solve(phi);
    out.variance = 1.0 / beta_ + phi.dot(lam_inv_phi);
    out.mean.resize(b_.cols());
    for (Eigen::Index j = 0; j < b_.cols(); ++j) out.mean[j] = lam_inv_phi.dot(b_.col(j));
    return out;
  }

  Eigen::MatrixXd posterior_mean() const {
    Eigen::LLT<Eigen::MatrixXd> llt(lambda_);
    return llt.solve(b_);
  }

 private:
  double alpha_, beta_;
  Eigen::MatrixXd lambda_;  // alpha I + beta sum(phi phi^T)
  Eigen::MatrixXd chol_;    // lower Cholesky factor of lambda_
  Eigen::MatrixXd b_;       // beta sum(phi y^T), one column per output
  long n_obs_ = 0;
};

// Local steering input: where the tree node is and where the sampled target lies,
// both in normalized coordinates.
struct SteeringInput {
  StateVec state;
  StateVec delta;

  Eigen::VectorXd concat() const {
    Eigen::VectorXd x(state.size() + delta.size());
    x << state, delta;
    return x;
  }
};

class Steering {
 public:
  virtual ~Steering() = default;
  virtual ActionVec sample(const SteeringInput& in, Rng& rng) = 0;
  virtual void update(const SteeringInput& in, const ActionVec& action) { (void)in, (void)action; }
  virtual std::string mode() const = 0;
};

inline ActionVec random_steer(const Box& action_bounds, Rng& rng) {
  return action_bounds.sample_uniform(rng);
}

class RandomSteering final : public Steering {
 public:
  explicit RandomSteering(Box action_bounds) : bounds_(std::move(action_bounds)) {}
  ActionVec sample(const SteeringInput&, Rng& rng) override { return random_steer(bounds_, rng); }
  std::string mode() const override { return "random"; }

 private:
  Box bounds_;
};

// Online-learned inverse local model: draws actions from the BLR posterior
// predictive over RFF features of (state, delta), clipped to the action box.
class LearnedSteering final : public Steering {
 public:
  struct Hyper {
    int n_features = 300;
    double lengthscale = 0.3;
    double alpha = 0.1;
    double beta = 1.0;
  };

  LearnedSteering(int state_dim, Box action_bounds, Rng& rng)
      : LearnedSteering(state_dim, std::move(action_bounds), rng, Hyper()) {}

  LearnedSteering(int state_dim, Box action_bounds, Rng& rng, Hyper hyper)
      : hyper_(hyper),
        bounds_(std::move(action_bounds)),
        map_(2 * state_dim, hyper.n_features, hyper.lengthscale, rng),
        blr_(hyper.n_features, static_cast<int>(bounds_.dim()), hyper.alpha, hyper.beta) {}

  ActionVec sample(const SteeringInput& in, Rng& rng) override {
    const auto pred = blr_.predict(map_.features(in.concat()));
    const double sd = std::sqrt(pred.variance);
    ActionVec a(pred.mean.size());
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index j = 0; j < a.size(); ++j) a[j] = pred.mean[j] + sd * gauss(rng);
    return bounds_.clip(a);
  }

  void update(const SteeringInput& in, const ActionVec& action) override {
    blr_.update(map_.features(in.concat()), action);
  }

  std::string mode() const override { return "learned"; }

  const RffMap& feature_map() const { return map_; }
  const BlrModel& model() const { return blr_; }

  nlohmann::json dump() const {
    nlohmann::json j;
    j["alpha"] = hyper_.alpha;
    j["beta"] = hyper_.beta;
    j["lengthscale"] = hyper_.lengthscale;
    j["m"] = hyper_.n_features;
    j["frequencies"] = nlohmann::json::array();
    for (int i = 0; i < map_.n_features(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int k = 0; k < map_.input_dim(); ++k) row.push_back(map_.frequencies()(i, k));
      j["frequencies"].push_back(row);
    }
    j["phases"] = nlohmann::json::array();
    for (int i = 0; i < map_.n_features(); ++i) j["phases"].push_back(map_.phases()[i]);
    j["heads"] = nlohmann::json::array();
    for (int d = 0; d < blr_.n_outputs(); ++d) {
      nlohmann::json head;
      head["lambda"] = nlohmann::json::array();
      for (int r = 0; r < blr_.n_features(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < blr_.n_features(); ++c) row.push_back(blr_.precision()(r, c));
        head["lambda"].push_back(row);
      }
      head["b"] = nlohmann::json::array();
      for (int r = 0; r < blr_.n_features(); ++r) head["b"].push_back(blr_.mean_term()(r, d));
      j["heads"].push_back(head);
    }
    return j;
  }

 private:
  Hyper hyper_;
  Box bounds_;
  RffMap map_;
  BlrModel blr_;
};

inline std::unique_ptr<Steering> make_steering(const std::string& mode, int state_dim,
                                               const Box& action_bounds, Rng& rng,
                                               LearnedSteering::Hyper hyper = LearnedSteering::Hyper()) {
  if (mode == "learned") return std::make_unique<LearnedSteering>(state_dim, action_bounds, rng, hyper);
  if (mode == "random") return std::make_unique<RandomSteering>(action_bounds);
  throw std::invalid_argument("unknown steering mode: " + mode);
}

}  // namespace r3l::steering
