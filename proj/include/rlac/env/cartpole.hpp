#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "rlac/errors.hpp"
#include "rlac/rng.hpp"

namespace rlac::env {

// Continuous-force cartpole. `half_pole_length` follows the classic
// Barto-Sutton convention (l is half the pole).
struct CartpoleParams {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double half_pole_length = 0.5;
  double dt = 0.02;
  double x_threshold = 10.0;
  double theta_threshold = 0.349;
  double force_limit = 20.0;
  int max_steps = 250;

  void validate() const {
    auto positive = [](double v, const char* key) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("env.") + key, "must be positive");
    };
    positive(gravity, "gravity");
    positive(cart_mass, "m_c");
    positive(pole_mass, "m_p");
    positive(half_pole_length, "l");
    positive(dt, "dt");
    positive(x_threshold, "x_threshold");
    positive(theta_threshold, "theta_threshold");
    positive(force_limit, "force_limit");
    if (max_steps <= 0) throw ConfigError("env.max_steps", "must be positive");
  }

  friend bool operator==(const CartpoleParams&, const CartpoleParams&) = default;
};

inline constexpr std::size_t kStateDim = 4;
using StateVec = std::array<double, kStateDim>;

struct CartpoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;
  int step = 0;
  bool done = false;

  StateVec vec() const { return {x, x_dot, theta, theta_dot}; }
  static CartpoleState from(const StateVec& v, int step = 0) {
    return CartpoleState{v[0], v[1], v[2], v[3], step, false};
  }

  friend bool operator==(const CartpoleState&, const CartpoleState&) = default;
};

struct StepResult {
  CartpoleState state;
  double cost = 0.0;
  bool done = false;
  bool died = false;  // terminated by a threshold before the step limit
};

inline double cost(const CartpoleParams& p, const CartpoleState& s) {
  const double rx = s.x / p.x_threshold;
  const double rt = s.theta / p.theta_threshold;
  return rx * rx + 20.0 * rt * rt;
}

inline bool out_of_bounds(const CartpoleParams& p, const CartpoleState& s) {
  return std::abs(s.x) > p.x_threshold || std::abs(s.theta) > p.theta_threshold;
}

// One explicit Euler step of the equations of motion under total force
// `force` (no clipping, no termination bookkeeping).
inline StateVec advance(const CartpoleParams& p, const StateVec& s, double force) {
  const double total_mass = p.cart_mass + p.pole_mass;
  const double polemass_length = p.pole_mass * p.half_pole_length;
  const double sin_t = std::sin(s[2]);
  const double cos_t = std::cos(s[2]);
  const double temp = (force + polemass_length * s[3] * s[3] * sin_t) / total_mass;
  const double theta_acc =
      (p.gravity * sin_t - cos_t * temp) /
      (p.half_pole_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;
  return {s[0] + p.dt * s[1], s[1] + p.dt * x_acc, s[2] + p.dt * s[3], s[3] + p.dt * theta_acc};
}

// x ~ U[-5, 5]; velocities and angle ~ U[-0.2, 0.2].
inline CartpoleState reset(const CartpoleParams& p, Rng& rng) {
  p.validate();
  CartpoleState s;
  s.x = rng.uniform(-5.0, 5.0);
  s.x_dot = rng.uniform(-0.2, 0.2);
  s.theta = rng.uniform(-0.2, 0.2);
  s.theta_dot = rng.uniform(-0.2, 0.2);
  return s;
}

inline CartpoleState reset(const CartpoleParams& p, std::uint64_t seed) {
  Rng rng(seed);
  return reset(p, rng);
}

// The action is clipped to the actuator limit; the disturbance is added
// unclipped. Cost is evaluated at the post-step state.
inline StepResult step(const CartpoleParams& p, const CartpoleState& s, double action, double disturbance) {
  if (s.done) throw ContractError("step called on a finished episode");
  if (!std::isfinite(action) || !std::isfinite(disturbance)) throw ContractError("non-finite force");
  const double force = std::clamp(action, -p.force_limit, p.force_limit) + disturbance;
  StepResult r;
  r.state = CartpoleState::from(advance(p, s.vec(), force), s.step + 1);
  r.cost = cost(p, r.state);
  r.died = out_of_bounds(p, r.state);
  r.done = r.died || r.state.step >= p.max_steps;
  r.state.done = r.done;
  return r;
}

}  // namespace rlac::env
