#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "rlac/env/cartpole.hpp"

using namespace rlac;
using namespace rlac::env;

namespace {

// Accelerations from the Lagrangian mass-matrix form of a cart carrying a
// uniform rod of half-length l.
std::array<double, 2> accelerations(const CartpoleParams& p, const StateVec& s, double f) {
  const double m = p.pole_mass, M = p.cart_mass, l = p.half_pole_length;
  const double c = std::cos(s[2]), sn = std::sin(s[2]);
  Eigen::Matrix2d mass;
  mass << M + m, m * l * c, m * l * c, 4.0 / 3.0 * m * l * l;
  Eigen::Vector2d rhs(f + m * l * sn * s[3] * s[3], m * p.gravity * l * sn);
  const Eigen::Vector2d acc = mass.fullPivLu().solve(rhs);
  return {acc(0), acc(1)};
}

}  // namespace

TEST(Cartpole, EulerStepMatchesMassMatrixSolve) {
  Rng rng(11);
  for (int k = 0; k < 200; ++k) {
    CartpoleParams p;
    p.cart_mass = rng.uniform(0.3, 3.0);
    p.half_pole_length = rng.uniform(0.1, 2.0);
    const StateVec s{rng.uniform(-5, 5), rng.uniform(-2, 2), rng.uniform(-0.3, 0.3), rng.uniform(-2, 2)};
    const double f = rng.uniform(-40, 40);
    const auto [xa, ta] = accelerations(p, s, f);
    const StateVec next = advance(p, s, f);
    EXPECT_NEAR(next[0], s[0] + p.dt * s[1], 1e-12);
    EXPECT_NEAR(next[1], s[1] + p.dt * xa, 1e-12);
    EXPECT_NEAR(next[2], s[2] + p.dt * s[3], 1e-12);
    EXPECT_NEAR(next[3], s[3] + p.dt * ta, 1e-12);
  }
}

TEST(Cartpole, UprightRestIsAnEquilibrium) {
  CartpoleParams p;
  CartpoleState s;
  for (int k = 0; k < 50; ++k) s = step(p, s, 0.0, 0.0).state;
  EXPECT_EQ(s.vec(), (StateVec{0, 0, 0, 0}));
  EXPECT_EQ(s.step, 50);
}

TEST(Cartpole, CostOfPostStepState) {
  CartpoleParams p;
  CartpoleState s{1.0, 0.5, 0.1, -0.2};
  const StepResult r = step(p, s, 3.0, 0.0);
  const double expect = std::pow(r.state.x / 10.0, 2) + 20.0 * std::pow(r.state.theta / 0.349, 2);
  EXPECT_DOUBLE_EQ(r.cost, expect);
  EXPECT_DOUBLE_EQ(cost(p, CartpoleState{10.0, 0, 0.349, 0}), 21.0);
  EXPECT_DOUBLE_EQ(cost(p, CartpoleState{}), 0.0);
}

TEST(Cartpole, ActionIsClippedDisturbanceIsNot) {
  CartpoleParams p;
  CartpoleState s{0.0, 0.0, 0.05, 0.0};
  EXPECT_EQ(step(p, s, 1000.0, 0.0).state, step(p, s, 20.0, 0.0).state);
  EXPECT_EQ(step(p, s, -1000.0, 0.0).state, step(p, s, -20.0, 0.0).state);
  EXPECT_NE(step(p, s, 0.0, 1000.0).state, step(p, s, 0.0, 20.0).state);
  EXPECT_EQ(step(p, s, 15.0, 5.0).state, step(p, s, 20.0, 0.0).state);
}

TEST(Cartpole, TerminationFlags) {
  CartpoleParams p;
  EXPECT_FALSE(out_of_bounds(p, CartpoleState{10.0, 0, 0.349, 0}));
  EXPECT_TRUE(out_of_bounds(p, CartpoleState{10.0001, 0, 0, 0}));
  EXPECT_TRUE(out_of_bounds(p, CartpoleState{0, 0, -0.35, 0}));

  CartpoleState s{0, 0, 0.34, 3.0};
  const StepResult r = step(p, s, 0.0, 0.0);
  EXPECT_TRUE(r.died);
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(r.state.done);
  EXPECT_THROW(step(p, r.state, 0.0, 0.0), ContractError);

  CartpoleState last;
  last.step = p.max_steps - 1;
  const StepResult end = step(p, last, 0.0, 0.0);
  EXPECT_TRUE(end.done);
  EXPECT_FALSE(end.died);
}

TEST(Cartpole, NonFiniteForceRejected) {
  CartpoleParams p;
  EXPECT_THROW(step(p, CartpoleState{}, std::nan(""), 0.0), ContractError);
  EXPECT_THROW(step(p, CartpoleState{}, 0.0, INFINITY), ContractError);
}

TEST(Cartpole, ResetRangesAndDeterminism) {
  CartpoleParams p;
  Rng rng(5);
  for (int k = 0; k < 1000; ++k) {
    const CartpoleState s = reset(p, rng);
    EXPECT_LE(std::abs(s.x), 5.0);
    EXPECT_LE(std::abs(s.x_dot), 0.2);
    EXPECT_LE(std::abs(s.theta), 0.2);
    EXPECT_LE(std::abs(s.theta_dot), 0.2);
    EXPECT_EQ(s.step, 0);
    EXPECT_FALSE(s.done);
  }
  EXPECT_EQ(reset(p, 42), reset(p, 42));
  EXPECT_NE(reset(p, 42), reset(p, 43));
}

TEST(Cartpole, ValidateNamesTheKey) {
  CartpoleParams p;
  p.half_pole_length = -1.0;
  try {
    p.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("env.l"), std::string::npos);
  }
  p = CartpoleParams{};
  p.max_steps = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = CartpoleParams{};
  p.dt = std::nan("");
  EXPECT_THROW(p.validate(), ConfigError);
}
