#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "r3l/common.hpp"

namespace r3l {

// Small tanh MLP policy head with a fixed-variance Gaussian over actions.
// Consumes normalized states. Parameters expose a flat view so optimizers can
// treat the network as a single vector; hand-rolled reverse (vjp) and forward
// (jvp) passes supply the derivatives the trainers need.
class PolicyNet {
 public:
  PolicyNet(std::vector<int> layer_sizes, Box action_bounds, double sigma = 0.3)
      : sizes_(std::move(layer_sizes)), bounds_(std::move(action_bounds)), sigma_(sigma) {
    if (sizes_.size() < 2) throw std::invalid_argument("PolicyNet: need at least input and output sizes");
    for (int s : sizes_) {
      if (s <= 0) throw std::invalid_argument("PolicyNet: layer sizes must be positive");
    }
    if (sizes_.back() != static_cast<int>(bounds_.dim())) {
      throw std::invalid_argument("PolicyNet: output size must match action dimension");
    }
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      weights_.emplace_back(Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]));
      biases_.emplace_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
    }
  }

  static PolicyNet glorot(std::vector<int> layer_sizes, Box action_bounds, Rng& rng,
                          double sigma = 0.3) {
    PolicyNet net(std::move(layer_sizes), std::move(action_bounds), sigma);
    for (std::size_t l = 0; l < net.weights_.size(); ++l) {
      const double fan_in = static_cast<double>(net.weights_[l].cols());
      const double fan_out = static_cast<double>(net.weights_[l].rows());
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (Eigen::Index i = 0; i < net.weights_[l].rows(); ++i) {
        for (Eigen::Index j = 0; j < net.weights_[l].cols(); ++j) net.weights_[l](i, j) = u(rng);
      }
    }
    return net;
  }

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  double sigma() const { return sigma_; }
  const Box& action_bounds() const { return bounds_; }
  const std::vector<int>& layer_sizes() const { return sizes_; }

  int param_count() const {
    int n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      n += static_cast<int>(weights_[l].size() + biases_[l].size());
    }
    return n;
  }

  Eigen::VectorXd params() const {
    Eigen::VectorXd p(param_count());
    int o = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      p.segment(o, weights_[l].size()) = Eigen::Map<const Eigen::VectorXd>(weights_[l].data(), weights_[l].size());
      o += static_cast<int>(weights_[l].size());
      p.segment(o, biases_[l].size()) = biases_[l];
      o += static_cast<int>(biases_[l].size());
    }
    return p;
  }

  void set_params(const Eigen::VectorXd& p) {
    if (p.size() != param_count()) throw std::invalid_argument("PolicyNet: parameter size mismatch");
    int o = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Eigen::Map<Eigen::VectorXd>(weights_[l].data(), weights_[l].size()) = p.segment(o, weights_[l].size());
      o += static_cast<int>(weights_[l].size());
      biases_[l] = p.segment(o, biases_[l].size());
      o += static_cast<int>(biases_[l].size());
    }
  }

  // Unclipped network output (the Gaussian mean).
  Eigen::VectorXd mean(const Eigen::VectorXd& x) const {
    Eigen::VectorXd h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      h = weights_[l] * h + biases_[l];
      if (l + 1 < weights_.size()) h = h.array().tanh().matrix();
    }
    return h;
  }

  Eigen::VectorXd act_deterministic(const Eigen::VectorXd& x) const { return bounds_.clip(mean(x)); }

  // Raw Gaussian sample; the env clips when executing it.
  Eigen::VectorXd act(const Eigen::VectorXd& x, Rng& rng) const {
    Eigen::VectorXd a = mean(x);
    std::normal_distribution<double> gauss(0.0, sigma_);
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] += gauss(rng);
    return a;
  }

  // Accumulates d(u . mean(x))/d(params) into grad (flat layout of params()).
  void accumulate_vjp(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                      Eigen::VectorXd& grad) const {
    std::vector<Eigen::VectorXd> acts;  // post-activation per layer, acts[0] = x
    acts.reserve(weights_.size() + 1);
    acts.push_back(x);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Eigen::VectorXd h = weights_[l] * acts.back() + biases_[l];
      if (l + 1 < weights_.size()) h = h.array().tanh().matrix();
      acts.push_back(std::move(h));
    }
    Eigen::VectorXd delta = u;
    int offset = param_count();
    for (std::size_t li = weights_.size(); li-- > 0;) {
      offset -= static_cast<int>(weights_[li].size() + biases_[li].size());
      // grad_W = delta * acts[li]^T, grad_b = delta
      Eigen::Map<Eigen::MatrixXd> gw(grad.data() + offset, weights_[li].rows(), weights_[li].cols());
      gw.noalias() += delta * acts[li].transpose();
      grad.segment(offset + weights_[li].size(), biases_[li].size()) += delta;
      if (li > 0) {
        Eigen::VectorXd back = weights_[li].transpose() * delta;
        delta = (back.array() * (1.0 - acts[li].array().square())).matrix();
      }
    }
  }

  // Directional derivative of mean(x) along the flat parameter tangent v.
  Eigen::VectorXd jvp(const Eigen::VectorXd& x, const Eigen::VectorXd& v) const {
    if (v.size() != param_count()) throw std::invalid_argument("PolicyNet: tangent size mismatch");
    Eigen::VectorXd h = x;
    Eigen::VectorXd dh = Eigen::VectorXd::Zero(x.size());
    int offset = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Eigen::Map<const Eigen::MatrixXd> dW(v.data() + offset, weights_[l].rows(), weights_[l].cols());
      offset += static_cast<int>(weights_[l].size());
      const auto db = v.segment(offset, biases_[l].size());
      offset += static_cast<int>(biases_[l].size());
      Eigen::VectorXd z = weights_[l] * h + biases_[l];
      Eigen::VectorXd dz = dW * h + weights_[l] * dh + db;
      if (l + 1 < weights_.size()) {
        h = z.array().tanh().matrix();
        dh = (dz.array() * (1.0 - h.array().square())).matrix();
      } else {
        h = std::move(z);
        dh = std::move(dz);
      }
    }
    return dh;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["layers"] = sizes_;
    j["activation"] = "tanh";
    j["sigma"] = sigma_;
    j["action_low"] = std::vector<double>(bounds_.low.data(), bounds_.low.data() + bounds_.low.size());
    j["action_high"] = std::vector<double>(bounds_.high.data(), bounds_.high.data() + bounds_.high.size());
    const Eigen::VectorXd p = params();
    j["params"] = std::vector<double>(p.data(), p.data() + p.size());
    return j;
  }

  static PolicyNet from_json(const nlohmann::json& j) {
    std::vector<int> sizes = j.at("layers").get<std::vector<int>>();
    const auto lo = j.at("action_low").get<std::vector<double>>();
    const auto hi = j.at("action_high").get<std::vector<double>>();
    Box bounds(Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size())),
               Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size())));
    PolicyNet net(std::move(sizes), std::move(bounds), j.at("sigma").get<double>());
    const auto pv = j.at("params").get<std::vector<double>>();
    net.set_params(Eigen::Map<const Eigen::VectorXd>(pv.data(), static_cast<Eigen::Index>(pv.size())));
    return net;
  }

  void save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << to_json().dump(2) << "\n";
  }

  static PolicyNet load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    nlohmann::json j;
    f >> j;
    return from_json(j);
  }

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
  Box bounds_;
  double sigma_;
};

}  // namespace r3l
