#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

#include "r3l/common.hpp"

namespace r3l::env {

struct EnvSpec {
  std::string id;
  Box state_bounds;
  Box action_bounds;
  int horizon = 0;
  double discount = 0.99;
  bool goal_defined = true;
  bool terminating = true;  // goal ends the episode (vs. goal states that only shape reward)
};

struct Transition {
  StateVec state;
  ActionVec action;  // as executed (clipped to bounds)
  StateVec next_state;
  double reward = 0.0;
  bool done = false;
};

// Deterministic, fully observable control environment with settable state.
// One instance is owned by exactly one run; steps_taken() audits every interaction.
class Environment {
 public:
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }
  const std::string& id() const { return spec_.id; }
  const StateVec& state() const { return state_; }
  std::uint64_t steps_taken() const { return steps_; }

  StateVec reset(Rng& rng) {
    state_ = draw_start(rng);
    return state_;
  }

  void set_state(const StateVec& s) {
    if (s.size() != spec_.state_bounds.dim() || !s.allFinite() || !spec_.state_bounds.contains(s)) {
      throw std::invalid_argument(spec_.id + ": set_state rejected out-of-bounds state");
    }
    state_ = s;
  }

  Transition step(const ActionVec& action) {
    if (action.size() != spec_.action_bounds.dim() || !action.allFinite()) {
      throw std::invalid_argument(spec_.id + ": step rejected non-finite or mis-sized action");
    }
    const ActionVec a = spec_.action_bounds.clip(action);
    StateVec next = dynamics(state_, a);
    const double r = reward_for(next);
    const bool done = spec_.terminating && spec_.goal_defined && in_goal(next);
    Transition tr{state_, a, std::move(next), r, done};
    state_ = tr.next_state;
    ++steps_;
    return tr;
  }

  StateVec sample_state_uniform(Rng& rng) const { return spec_.state_bounds.sample_uniform(rng); }

  virtual StateVec sample_goal_state(Rng& rng) const {
    (void)rng;
    throw std::logic_error(spec_.id + ": goal set not defined, cannot sample goal state");
  }

  virtual bool in_goal(const StateVec& s) const {
    (void)s;
    return false;
  }

  StateVec normalize(const StateVec& s) const { return spec_.state_bounds.normalize(s); }
  StateVec denormalize(const StateVec& z) const { return spec_.state_bounds.denormalize(z); }

 protected:
  explicit Environment(EnvSpec spec) : spec_(std::move(spec)) {
    state_ = spec_.state_bounds.midpoint();
  }

  virtual StateVec draw_start(Rng& rng) = 0;
  virtual StateVec dynamics(const StateVec& s, const ActionVec& a) const = 0;
  virtual double reward_for(const StateVec& next) const {
    (void)next;
    return -1.0;
  }

  EnvSpec spec_;

 private:
  StateVec state_;
  std::uint64_t steps_ = 0;
};

namespace detail {
inline Eigen::Vector2d vec2(double a, double b) { return Eigen::Vector2d(a, b); }
inline Eigen::Vector4d vec4(double a, double b, double c, double d) {
  Eigen::Vector4d v;
  v << a, b, c, d;
  return v;
}
}  // namespace detail

// Underpowered car in a valley; the engine alone cannot climb the right hill.
class MountainCar final : public Environment {
 public:
  static constexpr double kPower = 0.0015;
  static constexpr double kGravity = 0.0025;
  static constexpr double kGoalX = 0.45;

  explicit MountainCar(double start_half_width = 0.1)
      : Environment(make_spec()), start_half_width_(start_half_width) {}

  bool in_goal(const StateVec& s) const override { return s[0] >= kGoalX; }

  StateVec sample_goal_state(Rng& rng) const override {
    std::uniform_real_distribution<double> ux(kGoalX, spec_.state_bounds.high[0]);
    std::uniform_real_distribution<double> uv(spec_.state_bounds.low[1], spec_.state_bounds.high[1]);
    return detail::vec2(ux(rng), uv(rng));
  }

 protected:
  StateVec draw_start(Rng& rng) override {
    std::uniform_real_distribution<double> u(-0.5 - start_half_width_, -0.5 + start_half_width_);
    return detail::vec2(u(rng), 0.0);
  }

  StateVec dynamics(const StateVec& s, const ActionVec& a) const override {
    const double v = clip(s[1] + kPower * a[0] - kGravity * std::cos(3.0 * s[0]), -0.07, 0.07);
    const double x = clip(s[0] + v, -1.2, 0.6);
    return detail::vec2(x, v);
  }

 private:
  static EnvSpec make_spec() {
    EnvSpec sp;
    sp.id = "mountaincar";
    sp.state_bounds = Box(detail::vec2(-1.2, -0.07), detail::vec2(0.6, 0.07));
    sp.action_bounds = Box(Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0));
    sp.horizon = 200;
    sp.terminating = true;
    return sp;
  }

  double start_half_width_;
};

// Torque-limited pendulum; theta measured from upright, theta = pi hangs at rest.
class Pendulum final : public Environment {
 public:
  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;
  static constexpr double kDt = 0.05;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kGoalCos = 0.99;

  Pendulum() : Environment(make_spec()) {}

  bool in_goal(const StateVec& s) const override { return std::cos(s[0]) > kGoalCos; }

  StateVec sample_goal_state(Rng& rng) const override {
    const double half = std::acos(kGoalCos);
    std::uniform_real_distribution<double> ut(-half, half);
    std::uniform_real_distribution<double> uw(-kMaxSpeed, kMaxSpeed);
    double theta = ut(rng);
    while (!(std::cos(theta) > kGoalCos)) theta = ut(rng);
    return detail::vec2(theta, uw(rng));
  }

 protected:
  StateVec draw_start(Rng& rng) override {
    std::uniform_real_distribution<double> ut(-M_PI, M_PI);
    std::uniform_real_distribution<double> uw(-1.0, 1.0);
    return detail::vec2(ut(rng), uw(rng));
  }

  StateVec dynamics(const StateVec& s, const ActionVec& a) const override {
    const double accel = 1.5 * kGravity / kLength * std::sin(s[0]) +
                         3.0 / (kMass * kLength * kLength) * a[0];
    const double omega = clip(s[1] + accel * kDt, -kMaxSpeed, kMaxSpeed);
    const double theta = wrap_angle(s[0] + omega * kDt);
    return detail::vec2(theta, omega);
  }

  double reward_for(const StateVec& next) const override {
    return in_goal(next) ? std::cos(next[0]) : -1.0;
  }

 private:
  static EnvSpec make_spec() {
    EnvSpec sp;
    sp.id = "pendulum";
    sp.state_bounds = Box(detail::vec2(-M_PI, -kMaxSpeed), detail::vec2(M_PI, kMaxSpeed));
    sp.action_bounds = Box(Eigen::VectorXd::Constant(1, -2.0), Eigen::VectorXd::Constant(1, 2.0));
    sp.horizon = 100;
    sp.terminating = false;
    return sp;
  }
};

// Two-link underactuated arm, torque on the elbow only. State [th0, th1, om0, om1],
// angles measured from hanging. Integrated with one RK4 step per control step.
class Acrobot final : public Environment {
 public:
  static constexpr double kDt = 0.2;
  static constexpr double kM1 = 1.0, kM2 = 1.0;
  static constexpr double kL1 = 1.0;
  static constexpr double kLc1 = 0.5, kLc2 = 0.5;
  static constexpr double kI1 = 1.0, kI2 = 1.0;
  static constexpr double kGravity = 9.8;
  static constexpr double kGoalHeight = 1.9;
  static constexpr double kMaxOmega0 = 4.0 * M_PI;
  static constexpr double kMaxOmega1 = 9.0 * M_PI;

  Acrobot() : Environment(make_spec()) {}

  bool in_goal(const StateVec& s) const override {
    return -std::cos(s[0]) - std::cos(s[0] + s[1]) > kGoalHeight;
  }

  StateVec sample_goal_state(Rng& rng) const override {
    std::uniform_real_distribution<double> ua(-M_PI, M_PI);
    std::uniform_real_distribution<double> u0(-kMaxOmega0, kMaxOmega0);
    std::uniform_real_distribution<double> u1(-kMaxOmega1, kMaxOmega1);
    for (int tries = 0; tries < 1000000; ++tries) {
      const double th0 = ua(rng), th1 = ua(rng);
      if (-std::cos(th0) - std::cos(th0 + th1) > kGoalHeight) {
        return detail::vec4(th0, th1, u0(rng), u1(rng));
      }
    }
    throw std::runtime_error("acrobot: goal-state rejection sampling exhausted");
  }

 protected:
  StateVec draw_start(Rng& rng) override {
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    return detail::vec4(u(rng), u(rng), u(rng), u(rng));
  }

  StateVec dynamics(const StateVec& s, const ActionVec& a) const override {
    const double u = a[0];
    const auto deriv = [u](const Eigen::Vector4d& y) {
      const double th1 = y[0], th2 = y[1], om1 = y[2], om2 = y[3];
      const double d1 = kM1 * kLc1 * kLc1 +
                        kM2 * (kL1 * kL1 + kLc2 * kLc2 + 2.0 * kL1 * kLc2 * std::cos(th2)) + kI1 +
                        kI2;
      const double d2 = kM2 * (kLc2 * kLc2 + kL1 * kLc2 * std::cos(th2)) + kI2;
      const double phi2 = kM2 * kLc2 * kGravity * std::cos(th1 + th2 - M_PI / 2.0);
      const double phi1 = -kM2 * kL1 * kLc2 * om2 * om2 * std::sin(th2) -
                          2.0 * kM2 * kL1 * kLc2 * om2 * om1 * std::sin(th2) +
                          (kM1 * kLc1 + kM2 * kL1) * kGravity * std::cos(th1 - M_PI / 2.0) + phi2;
      const double dd2 =
          (u + d2 / d1 * phi1 - kM2 * kL1 * kLc2 * om1 * om1 * std::sin(th2) - phi2) /
          (kM2 * kLc2 * kLc2 + kI2 - d2 * d2 / d1);
      const double dd1 = -(d2 * dd2 + phi1) / d1;
      Eigen::Vector4d dy;
      dy << om1, om2, dd1, dd2;
      return dy;
    };

    const Eigen::Vector4d y0 = s.head<4>();
    const Eigen::Vector4d k1 = deriv(y0);
    const Eigen::Vector4d k2 = deriv(y0 + 0.5 * kDt * k1);
    const Eigen::Vector4d k3 = deriv(y0 + 0.5 * kDt * k2);
    const Eigen::Vector4d k4 = deriv(y0 + kDt * k3);
    Eigen::Vector4d y = y0 + kDt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    return detail::vec4(wrap_angle(y[0]), wrap_angle(y[1]), clip(y[2], -kMaxOmega0, kMaxOmega0),
                        clip(y[3], -kMaxOmega1, kMaxOmega1));
  }

 private:
  static EnvSpec make_spec() {
    EnvSpec sp;
    sp.id = "acrobot";
    sp.state_bounds = Box(detail::vec4(-M_PI, -M_PI, -kMaxOmega0, -kMaxOmega1),
                          detail::vec4(M_PI, M_PI, kMaxOmega0, kMaxOmega1));
    sp.action_bounds = Box(Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0));
    sp.horizon = 500;
    sp.terminating = true;
    return sp;
  }
};

// Cart on a bounded rail with a hanging pole to swing up. State [x, theta, xdot, thetadot],
// theta measured from upright. Hitting a rail end arrests the cart.
class CartpoleSwingup final : public Environment {
 public:
  static constexpr double kDt = 0.02;
  static constexpr double kGravity = 9.8;
  static constexpr double kMassCart = 1.0;
  static constexpr double kMassPole = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kMaxX = 2.4;
  static constexpr double kMaxXDot = 4.0;
  static constexpr double kMaxThetaDot = 8.0;
  static constexpr double kGoalCos = 0.9;

  CartpoleSwingup() : Environment(make_spec()) {}

  bool in_goal(const StateVec& s) const override { return std::cos(s[1]) > kGoalCos; }

  StateVec sample_goal_state(Rng& rng) const override {
    const double half = std::acos(kGoalCos);
    std::uniform_real_distribution<double> ut(-half, half);
    std::uniform_real_distribution<double> ux(-kMaxX, kMaxX);
    std::uniform_real_distribution<double> uxd(-kMaxXDot, kMaxXDot);
    std::uniform_real_distribution<double> utd(-kMaxThetaDot, kMaxThetaDot);
    double theta = ut(rng);
    while (!(std::cos(theta) > kGoalCos)) theta = ut(rng);
    return detail::vec4(ux(rng), theta, uxd(rng), utd(rng));
  }

 protected:
  StateVec draw_start(Rng& rng) override {
    std::uniform_real_distribution<double> u(-0.01, 0.01);
    return detail::vec4(0.0, M_PI + u(rng), 0.0, 0.0);
  }

  StateVec dynamics(const StateVec& s, const ActionVec& a) const override {
    const double x = s[0], theta = s[1], xd = s[2], td = s[3];
    const double force = a[0];
    const double total_mass = kMassCart + kMassPole;
    const double pole_ml = kMassPole * kHalfLength;
    const double cos_t = std::cos(theta), sin_t = std::sin(theta);

    const double temp = (force + pole_ml * td * td * sin_t) / total_mass;
    const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                             (kHalfLength * (4.0 / 3.0 - kMassPole * cos_t * cos_t / total_mass));
    const double x_acc = temp - pole_ml * theta_acc * cos_t / total_mass;

    double x_next = x + kDt * xd;
    double xd_next = clip(xd + kDt * x_acc, -kMaxXDot, kMaxXDot);
    if (x_next <= -kMaxX || x_next >= kMaxX) {
      x_next = clip(x_next, -kMaxX, kMaxX);
      xd_next = 0.0;
    }
    const double theta_next = wrap_angle(theta + kDt * td);
    const double td_next = clip(td + kDt * theta_acc, -kMaxThetaDot, kMaxThetaDot);
    return detail::vec4(x_next, theta_next, xd_next, td_next);
  }

  double reward_for(const StateVec& next) const override {
    return in_goal(next) ? std::cos(next[1]) : -1.0;
  }

 private:
  static EnvSpec make_spec() {
    EnvSpec sp;
    sp.id = "cartpole_swingup";
    sp.state_bounds = Box(detail::vec4(-kMaxX, -M_PI, -kMaxXDot, -kMaxThetaDot),
                          detail::vec4(kMaxX, M_PI, kMaxXDot, kMaxThetaDot));
    sp.action_bounds = Box(Eigen::VectorXd::Constant(1, -10.0), Eigen::VectorXd::Constant(1, 10.0));
    sp.horizon = 500;
    sp.terminating = false;
    return sp;
  }
};

inline std::unique_ptr<Environment> make_env(const std::string& id) {
  if (id == "mountaincar") return std::make_unique<MountainCar>();
  if (id == "pendulum") return std::make_unique<Pendulum>();
  if (id == "acrobot") return std::make_unique<Acrobot>();
  if (id == "cartpole_swingup") return std::make_unique<CartpoleSwingup>();
  throw std::invalid_argument("unknown environment id: " + id);
}

}  // namespace r3l::env
