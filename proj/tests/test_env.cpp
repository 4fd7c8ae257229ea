// Environment contracts: pinned dynamics oracles, goal predicates, bounds
// closure, replay determinism, normalization, and trajectory serialization.

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <vector>

#include "r3l/env.hpp"
#include "r3l/trajectory.hpp"

using r3l::ActionVec;
using r3l::StateVec;

namespace {

StateVec s2(double a, double b) {
  StateVec v(2);
  v << a, b;
  return v;
}

StateVec s4(double a, double b, double c, double d) {
  StateVec v(4);
  v << a, b, c, d;
  return v;
}

ActionVec a1(double a) {
  ActionVec v(1);
  v << a;
  return v;
}

}  // namespace

TEST(Common, WrapAngleKeepsEndpoints) {
  EXPECT_EQ(r3l::wrap_angle(M_PI), M_PI);
  EXPECT_EQ(r3l::wrap_angle(-M_PI), -M_PI);
  EXPECT_NEAR(r3l::wrap_angle(3.0 * M_PI), -M_PI, 1e-15);
  EXPECT_NEAR(r3l::wrap_angle(2.0 * M_PI + 0.3), 0.3, 1e-12);
  EXPECT_NEAR(r3l::wrap_angle(-2.0 * M_PI - 0.3), -0.3, 1e-12);
  for (double t = -20.0; t <= 20.0; t += 0.37) {
    const double w = r3l::wrap_angle(t);
    EXPECT_GE(w, -M_PI);
    EXPECT_LE(w, M_PI);
    EXPECT_NEAR(std::sin(w), std::sin(t), 1e-9);
    EXPECT_NEAR(std::cos(w), std::cos(t), 1e-9);
  }
}

TEST(Common, DeriveSeedStreamsDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t c = 0; c < 1000; ++c) seen.insert(r3l::derive_seed(42, c));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_NE(r3l::derive_seed(1, 0), r3l::derive_seed(2, 0));
}

TEST(Common, BoxNormalizeMapsToUnitCube) {
  r3l::Box box(s2(-1.2, -0.07), s2(0.6, 0.07));
  const StateVec lo_n = box.normalize(box.low);
  const StateVec hi_n = box.normalize(box.high);
  const StateVec mid_n = box.normalize(box.midpoint());
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(lo_n[i], -1.0, 1e-15);
    EXPECT_NEAR(hi_n[i], 1.0, 1e-15);
    EXPECT_NEAR(mid_n[i], 0.0, 1e-15);
  }
  r3l::Rng rng(7);
  for (int k = 0; k < 100; ++k) {
    const StateVec s = box.sample_uniform(rng);
    const StateVec round = box.denormalize(box.normalize(s));
    EXPECT_LT((round - s).cwiseAbs().maxCoeff(), 1e-12);
  }
  // Degenerate dimension normalizes to zero.
  r3l::Box flat(s2(0.3, -1.0), s2(0.3, 1.0));
  EXPECT_EQ(flat.normalize(s2(0.3, 0.0))[0], 0.0);
}

TEST(MountainCar, PinnedDynamicsOracle) {
  r3l::env::MountainCar e;
  e.set_state(s2(-0.5, 0.0));
  auto tr = e.step(a1(0.0));
  EXPECT_NEAR(tr.next_state[1], -0.00017684300416925727, 1e-15);
  EXPECT_NEAR(tr.next_state[0], -0.5001768430041692, 1e-15);
  EXPECT_EQ(tr.reward, -1.0);
  EXPECT_FALSE(tr.done);

  e.set_state(s2(-0.5, 0.0));
  tr = e.step(a1(1.0));
  EXPECT_NEAR(tr.next_state[1], 0.0013231569958307428, 1e-15);
  EXPECT_NEAR(tr.next_state[0], -0.49867684300416926, 1e-15);
}

TEST(MountainCar, VelocityAndPositionClipped) {
  r3l::env::MountainCar e;
  e.set_state(s2(0.3, 0.07));
  for (int i = 0; i < 50; ++i) {
    auto tr = e.step(a1(1.0));
    EXPECT_LE(tr.next_state[1], 0.07);
    EXPECT_GE(tr.next_state[1], -0.07);
    EXPECT_LE(tr.next_state[0], 0.6);
    if (tr.done) break;
  }
  e.set_state(s2(-1.15, -0.07));
  auto tr = e.step(a1(-1.0));
  EXPECT_GE(tr.next_state[0], -1.2);
}

TEST(MountainCar, GoalPredicateBoundaryInclusive) {
  r3l::env::MountainCar e;
  EXPECT_TRUE(e.in_goal(s2(0.45, 0.0)));
  EXPECT_TRUE(e.in_goal(s2(0.5, 0.0)));
  EXPECT_FALSE(e.in_goal(s2(0.44, 0.0)));
}

TEST(MountainCar, GoalTerminatesWithSparseReward) {
  r3l::env::MountainCar e;
  e.set_state(s2(0.44, 0.07));
  auto tr = e.step(a1(1.0));
  EXPECT_GE(tr.next_state[0], 0.45);
  EXPECT_TRUE(tr.done);
  EXPECT_EQ(tr.reward, -1.0);  // sparse: always -1, even on the goal step
}

TEST(MountainCar, ResetWithinStartBand) {
  r3l::env::MountainCar e;
  r3l::Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const StateVec s = e.reset(rng);
    EXPECT_GE(s[0], -0.6);
    EXPECT_LE(s[0], -0.4);
    EXPECT_EQ(s[1], 0.0);
  }
  r3l::env::MountainCar fixed(0.0);
  const StateVec s = fixed.reset(rng);
  EXPECT_EQ(s[0], -0.5);
}

TEST(MountainCar, SpecValues) {
  r3l::env::MountainCar e;
  EXPECT_EQ(e.spec().horizon, 200);
  EXPECT_EQ(e.spec().discount, 0.99);
  EXPECT_TRUE(e.spec().goal_defined);
  EXPECT_TRUE(e.spec().terminating);
  EXPECT_EQ(e.spec().action_bounds.low[0], -1.0);
  EXPECT_EQ(e.spec().action_bounds.high[0], 1.0);
}

TEST(Pendulum, PinnedDynamicsOracle) {
  r3l::env::Pendulum e;
  e.set_state(s2(1.0, 0.5));
  auto tr = e.step(a1(1.0));
  EXPECT_NEAR(tr.next_state[1], 1.2811032386059225, 1e-14);
  EXPECT_NEAR(tr.next_state[0], 1.064055161930296, 1e-14);
  EXPECT_EQ(tr.reward, -1.0);
  EXPECT_FALSE(tr.done);
}

TEST(Pendulum, HangingStateIsNearFixedPoint) {
  r3l::env::Pendulum e;
  e.set_state(s2(M_PI, 0.0));
  auto tr = e.step(a1(0.0));
  // sin(pi) is ~1e-16 in floating point, so the state moves by at most ~1e-16.
  EXPECT_NEAR(tr.next_state[0], M_PI, 1e-14);
  EXPECT_NEAR(tr.next_state[1], 0.0, 1e-15);
}

TEST(Pendulum, GoalShapedRewardNonTerminating) {
  r3l::env::Pendulum e;
  EXPECT_FALSE(e.spec().terminating);
  e.set_state(s2(0.05, 0.0));
  auto tr = e.step(a1(0.0));
  ASSERT_TRUE(e.in_goal(tr.next_state));
  EXPECT_FALSE(tr.done);  // non-terminating even in goal
  EXPECT_EQ(tr.reward, std::cos(tr.next_state[0]));
  EXPECT_GT(tr.reward, 0.99);
}

TEST(Pendulum, GoalPredicateStrict) {
  r3l::env::Pendulum e;
  EXPECT_TRUE(e.in_goal(s2(0.0, 3.0)));
  EXPECT_FALSE(e.in_goal(s2(0.2, 0.0)));  // cos(0.2) ~ 0.980 <= 0.99
}

TEST(Pendulum, ResetRanges) {
  r3l::env::Pendulum e;
  r3l::Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const StateVec s = e.reset(rng);
    EXPECT_GE(s[0], -M_PI);
    EXPECT_LE(s[0], M_PI);
    EXPECT_GE(s[1], -1.0);
    EXPECT_LE(s[1], 1.0);
  }
  EXPECT_EQ(e.spec().horizon, 100);
}

TEST(Acrobot, MatchesIndependentRk4Transcription) {
  // Re-derivation of the two-link dynamics written separately from the header.
  const auto rhs = [](const Eigen::Vector4d& y, double u) {
    const double m1 = 1.0, m2 = 1.0, l1 = 1.0, lc1 = 0.5, lc2 = 0.5, i1 = 1.0, i2 = 1.0, g = 9.8;
    const double t1 = y[0], t2 = y[1], w1 = y[2], w2 = y[3];
    const double d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2 * l1 * lc2 * std::cos(t2)) + i1 + i2;
    const double d2 = m2 * (lc2 * lc2 + l1 * lc2 * std::cos(t2)) + i2;
    const double phi2 = m2 * lc2 * g * std::cos(t1 + t2 - M_PI / 2);
    const double phi1 = -m2 * l1 * lc2 * w2 * w2 * std::sin(t2) - 2 * m2 * l1 * lc2 * w2 * w1 * std::sin(t2) +
                        (m1 * lc1 + m2 * l1) * g * std::cos(t1 - M_PI / 2) + phi2;
    const double a2 = (u + d2 / d1 * phi1 - m2 * l1 * lc2 * w1 * w1 * std::sin(t2) - phi2) /
                      (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    const double a1v = -(d2 * a2 + phi1) / d1;
    return Eigen::Vector4d(w1, w2, a1v, a2);
  };
  const auto rk4 = [&](Eigen::Vector4d y, double u, double dt) {
    const Eigen::Vector4d k1 = rhs(y, u);
    const Eigen::Vector4d k2 = rhs(y + 0.5 * dt * k1, u);
    const Eigen::Vector4d k3 = rhs(y + 0.5 * dt * k2, u);
    const Eigen::Vector4d k4 = rhs(y + dt * k3, u);
    return (y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)).eval();
  };

  r3l::env::Acrobot e;
  const StateVec starts[] = {s4(0.05, -0.03, 0.1, -0.2), s4(1.0, 0.5, 2.0, -3.0),
                             s4(-2.0, 2.5, -1.0, 4.0)};
  for (const auto& s0 : starts) {
    for (double u : {-1.0, 0.0, 0.5}) {
      e.set_state(s0);
      const auto tr = e.step(a1(u));
      Eigen::Vector4d expect = rk4(s0.head<4>(), u, 0.2);
      expect[0] = r3l::wrap_angle(expect[0]);
      expect[1] = r3l::wrap_angle(expect[1]);
      expect[2] = r3l::clip(expect[2], -4 * M_PI, 4 * M_PI);
      expect[3] = r3l::clip(expect[3], -9 * M_PI, 9 * M_PI);
      EXPECT_LT((tr.next_state - expect).cwiseAbs().maxCoeff(), 1e-12)
          << "state " << s0.transpose() << " u=" << u;
    }
  }
}

TEST(Acrobot, GoalPredicateAndSampling) {
  r3l::env::Acrobot e;
  EXPECT_TRUE(e.in_goal(s4(M_PI, 0.0, 0.0, 0.0)));   // both links up: height 2
  EXPECT_FALSE(e.in_goal(s4(0.0, 0.0, 0.0, 0.0)));   // hanging: height -2
  EXPECT_FALSE(e.in_goal(s4(M_PI / 2, 0.0, 0.0, 0.0)));
  r3l::Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const StateVec g = e.sample_goal_state(rng);
    EXPECT_TRUE(e.in_goal(g));
    EXPECT_TRUE(e.spec().state_bounds.contains(g));
  }
  EXPECT_EQ(e.spec().horizon, 500);
  EXPECT_TRUE(e.spec().terminating);
}

TEST(Acrobot, StartNearHanging) {
  r3l::env::Acrobot e;
  r3l::Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    const StateVec s = e.reset(rng);
    EXPECT_LE(s.cwiseAbs().maxCoeff(), 0.1);
  }
}

TEST(Cartpole, MatchesIndependentEulerTranscription) {
  const auto eulstep = [](const Eigen::Vector4d& s, double f) {
    const double g = 9.8, mc = 1.0, mp = 0.1, half = 0.5, dt = 0.02;
    const double total = mc + mp, pml = mp * half;
    const double x = s[0], th = s[1], xd = s[2], td = s[3];
    const double ct = std::cos(th), st = std::sin(th);
    const double tmp = (f + pml * td * td * st) / total;
    const double tacc = (g * st - ct * tmp) / (half * (4.0 / 3.0 - mp * ct * ct / total));
    const double xacc = tmp - pml * tacc * ct / total;
    double xn = x + dt * xd;
    double xdn = r3l::clip(xd + dt * xacc, -4.0, 4.0);
    if (xn <= -2.4 || xn >= 2.4) {
      xn = r3l::clip(xn, -2.4, 2.4);
      xdn = 0.0;
    }
    const double thn = r3l::wrap_angle(th + dt * td);
    const double tdn = r3l::clip(td + dt * tacc, -8.0, 8.0);
    return Eigen::Vector4d(xn, thn, xdn, tdn);
  };

  r3l::env::CartpoleSwingup e;
  const StateVec starts[] = {s4(0.0, M_PI, 0.0, 0.0), s4(1.0, 0.5, -2.0, 3.0),
                             s4(-2.0, -2.5, 1.0, -4.0)};
  for (const auto& s0 : starts) {
    for (double f : {-10.0, 0.0, 7.5}) {
      e.set_state(s0);
      const auto tr = e.step(a1(f));
      const Eigen::Vector4d expect = eulstep(s0.head<4>(), f);
      EXPECT_LT((tr.next_state - expect).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Cartpole, RailArrestsCart) {
  r3l::env::CartpoleSwingup e;
  e.set_state(s4(2.35, M_PI, 4.0, 0.0));
  const auto tr = e.step(a1(10.0));
  EXPECT_EQ(tr.next_state[0], 2.4);
  EXPECT_EQ(tr.next_state[2], 0.0);
}

TEST(Cartpole, GoalShapedRewardAndStart) {
  r3l::env::CartpoleSwingup e;
  EXPECT_FALSE(e.spec().terminating);
  e.set_state(s4(0.0, 0.01, 0.0, 0.0));
  const auto tr = e.step(a1(0.0));
  ASSERT_TRUE(e.in_goal(tr.next_state));
  EXPECT_FALSE(tr.done);
  EXPECT_EQ(tr.reward, std::cos(tr.next_state[1]));

  r3l::Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const StateVec s = e.reset(rng);
    EXPECT_EQ(s[0], 0.0);
    EXPECT_EQ(s[2], 0.0);
    EXPECT_EQ(s[3], 0.0);
    EXPECT_LT(std::cos(s[1]), -0.9999);  // theta within 0.01 of hanging
  }
  r3l::Rng rng2(6);
  for (int i = 0; i < 50; ++i) {
    EXPECT_TRUE(e.in_goal(e.sample_goal_state(rng2)));
  }
}

TEST(AllEnvs, StepStaysInBoundsAndCounterAudits) {
  for (const auto& id : {"mountaincar", "pendulum", "acrobot", "cartpole_swingup"}) {
    auto e = r3l::env::make_env(id);
    r3l::Rng rng(17);
    e->reset(rng);
    EXPECT_EQ(e->steps_taken(), 0u);
    for (int i = 0; i < 300; ++i) {
      const auto a = e->spec().action_bounds.sample_uniform(rng);
      const auto tr = e->step(a);
      EXPECT_TRUE(e->spec().state_bounds.contains(tr.next_state))
          << id << " escaped bounds: " << tr.next_state.transpose();
      if (tr.done) e->reset(rng);
    }
    EXPECT_EQ(e->steps_taken(), 300u);
  }
}

TEST(AllEnvs, ReplayIsBitExact) {
  for (const auto& id : {"mountaincar", "pendulum", "acrobot", "cartpole_swingup"}) {
    auto e = r3l::env::make_env(id);
    r3l::Rng rng(23);
    std::vector<r3l::env::Transition> log;
    e->reset(rng);
    for (int i = 0; i < 100; ++i) {
      log.push_back(e->step(e->spec().action_bounds.sample_uniform(rng)));
      if (log.back().done) e->reset(rng);
    }
    auto replay = r3l::env::make_env(id);
    for (const auto& tr : log) {
      replay->set_state(tr.state);
      const auto re = replay->step(tr.action);
      ASSERT_EQ(re.next_state.size(), tr.next_state.size());
      for (Eigen::Index k = 0; k < re.next_state.size(); ++k) {
        EXPECT_EQ(re.next_state[k], tr.next_state[k]) << id;
      }
      EXPECT_EQ(re.reward, tr.reward);
      EXPECT_EQ(re.done, tr.done);
    }
  }
}

TEST(AllEnvs, ActionClippedBeforeDynamics) {
  for (const auto& id : {"mountaincar", "pendulum", "acrobot", "cartpole_swingup"}) {
    auto e1 = r3l::env::make_env(id);
    auto e2 = r3l::env::make_env(id);
    r3l::Rng rng(31);
    const StateVec s = e1->sample_state_uniform(rng);
    e1->set_state(s);
    e2->set_state(s);
    const auto hi = e1->spec().action_bounds.high;
    const auto t1 = e1->step(3.0 * hi);
    const auto t2 = e2->step(hi);
    EXPECT_EQ(t1.next_state, t2.next_state) << id;
    EXPECT_EQ(t1.action, t2.action) << id;  // transition records the executed action
  }
}

TEST(AllEnvs, InputValidation) {
  auto e = r3l::env::make_env("mountaincar");
  EXPECT_THROW(e->set_state(s2(0.7, 0.0)), std::invalid_argument);   // out of bounds
  EXPECT_THROW(e->set_state(a1(0.0)), std::invalid_argument);        // wrong size
  StateVec nan_state = s2(0.0, 0.0);
  nan_state[0] = std::nan("");
  EXPECT_THROW(e->set_state(nan_state), std::invalid_argument);
  ActionVec nan_action = a1(std::nan(""));
  EXPECT_THROW(e->step(nan_action), std::invalid_argument);
  ActionVec wide(2);
  wide << 0.0, 0.0;
  EXPECT_THROW(e->step(wide), std::invalid_argument);
  EXPECT_THROW(r3l::env::make_env("lunar_lander"), std::invalid_argument);
}

TEST(AllEnvs, GoalSamplerSoundness) {
  for (const auto& id : {"mountaincar", "pendulum", "acrobot", "cartpole_swingup"}) {
    auto e = r3l::env::make_env(id);
    r3l::Rng rng(41);
    for (int i = 0; i < 100; ++i) {
      const StateVec g = e->sample_goal_state(rng);
      EXPECT_TRUE(e->in_goal(g)) << id;
      EXPECT_TRUE(e->spec().state_bounds.contains(g)) << id;
    }
  }
}

TEST(AllEnvs, UniformSamplerMoments) {
  auto e = r3l::env::make_env("mountaincar");
  r3l::Rng rng(43);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) sum += e->sample_state_uniform(rng)[0];
  EXPECT_NEAR(sum / n, -0.3, 0.02);  // mean of U[-1.2, 0.6]
}

TEST(Trajectory, ReturnsAndValidation) {
  r3l::Trajectory tr;
  tr.states = {s2(0, 0), s2(1, 0), s2(2, 0)};
  tr.actions = {a1(0.5), a1(-0.5)};
  tr.rewards = {-1.0, 2.0};
  tr.validate();
  EXPECT_EQ(tr.length(), 2u);
  EXPECT_EQ(tr.undiscounted_return(), 1.0);
  EXPECT_NEAR(tr.discounted_return(0.5), -1.0 + 0.5 * 2.0, 1e-15);
  tr.rewards.pop_back();
  EXPECT_THROW(tr.validate(), std::runtime_error);
}

TEST(Trajectory, JsonlRoundTrip) {
  r3l::Trajectory tr;
  tr.states = {s2(0.25, -0.5), s2(1.0 / 3.0, 0.125), s2(-0.7, 0.0625)};
  tr.actions = {a1(0.1), a1(-1.0)};
  tr.rewards = {-1.0, -1.0};
  tr.successful = true;

  std::stringstream ss;
  r3l::write_trajectory(ss, tr);
  const auto back = r3l::read_trajectories(ss);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].successful, true);
  ASSERT_EQ(back[0].states.size(), 3u);
  for (int t = 0; t < 3; ++t) EXPECT_EQ(back[0].states[t], tr.states[t]);
  for (int t = 0; t < 2; ++t) {
    EXPECT_EQ(back[0].actions[t], tr.actions[t]);
    EXPECT_EQ(back[0].rewards[t], tr.rewards[t]);
  }
}

TEST(Trajectory, DemoSetRoundTripAndTruncationError) {
  r3l::DemoSet demos;
  demos.env_id = "mountaincar";
  demos.seeds = {1, 2};
  demos.config = {{"budget", 100}};
  for (int k = 0; k < 2; ++k) {
    r3l::Trajectory tr;
    tr.states = {s2(0, 0), s2(0.1 * (k + 1), 0.01)};
    tr.actions = {a1(1.0)};
    tr.rewards = {-1.0};
    tr.successful = k == 1;
    demos.trajectories.push_back(tr);
  }
  std::stringstream ss;
  r3l::write_demoset(ss, demos);
  const auto back = r3l::read_demoset(ss);
  EXPECT_EQ(back.env_id, "mountaincar");
  EXPECT_EQ(back.seeds, demos.seeds);
  EXPECT_EQ(back.config["budget"], 100);
  ASSERT_EQ(back.trajectories.size(), 2u);
  EXPECT_FALSE(back.trajectories[0].successful);
  EXPECT_TRUE(back.trajectories[1].successful);

  std::stringstream truncated;
  truncated << R"({"state":[0.0,0.0],"action":[1.0],"reward":-1.0,"done":false})" << "\n";
  EXPECT_THROW(r3l::read_trajectories(truncated), std::runtime_error);
}
