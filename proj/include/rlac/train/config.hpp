#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "rlac/errors.hpp"

namespace rlac::train {

struct TrainerConfig {
  std::size_t minibatch = 256;
  double actor_lr = 1e-4;
  double lyapunov_lr = 3e-4;
  int horizon = 10;
  std::size_t collect_steps = 150;  // N_c
  std::size_t update_rounds = 50;   // N_u
  double target_entropy = -1.0;
  double tau = 0.005;
  double gamma = 0.995;
  double eta = 1.0;
  double alpha3 = 1.0;
  bool discounted_target = true;

  double lambda_lr = 3e-4;
  double beta_lr = 3e-4;
  double disturber_lr = 1e-4;
  double initial_lambda = 1.0;
  double initial_beta = 1.0;
  double action_scale = 20.0;
  double disturbance_scale = 5.0;
  bool disturber_enabled = true;
  std::size_t replay_capacity = 1'000'000;
  std::uint64_t total_env_steps = 300'000;

  double target_gamma() const { return discounted_target ? gamma : 1.0; }

  void validate() const {
    auto positive = [](double v, const char* key) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("trainer.") + key, "must be positive");
    };
    positive(static_cast<double>(minibatch), "minibatch");
    positive(actor_lr, "actor_lr");
    positive(lyapunov_lr, "lyapunov_lr");
    positive(horizon, "horizon");
    positive(static_cast<double>(collect_steps), "n_c");
    positive(static_cast<double>(update_rounds), "n_u");
    positive(tau, "tau");
    positive(gamma, "gamma");
    positive(eta, "eta");
    positive(alpha3, "alpha3");
    positive(lambda_lr, "lambda_lr");
    positive(beta_lr, "beta_lr");
    positive(disturber_lr, "disturber_lr");
    positive(action_scale, "action_scale");
    positive(disturbance_scale, "disturbance_scale");
    positive(static_cast<double>(replay_capacity), "replay_capacity");
    if (tau > 1.0) throw ConfigError("trainer.tau", "must be at most 1");
    if (gamma > 1.0) throw ConfigError("trainer.gamma", "must be at most 1");
    if (initial_lambda < 0.0) throw ConfigError("trainer.initial_lambda", "must be nonnegative");
    if (initial_beta < 0.0) throw ConfigError("trainer.initial_beta", "must be nonnegative");
    if (!std::isfinite(target_entropy)) throw ConfigError("trainer.target_entropy", "must be finite");
  }
};

// One row of the per-iteration training log.
struct LogRow {
  std::uint64_t iteration = 0;
  std::uint64_t env_steps = 0;
  double mean_return = 0.0;
  double death_rate = 0.0;
  double mean_delta_l = 0.0;
  double lambda = 0.0;
  double beta = 0.0;
  double entropy = 0.0;
  double critic_loss = 0.0;
  double policy_loss = 0.0;
  double disturber_objective = 0.0;

  friend bool operator==(const LogRow&, const LogRow&) = default;
};

}  // namespace rlac::train
