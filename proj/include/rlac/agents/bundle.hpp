#pragma once

#include <span>
#include <vector>

#include "rlac/agents/policy.hpp"
#include "rlac/diff/mlp.hpp"
#include "rlac/env/cartpole.hpp"
#include "rlac/rng.hpp"

namespace rlac::agents {

// L_c(s, a) = f(s, a)^2, nonnegative by construction.
class LyapunovCritic {
 public:
  LyapunovCritic() = default;
  LyapunovCritic(std::size_t state_dim, std::size_t action_dim, Rng& init,
                 std::vector<std::size_t> hidden = {64, 64})
      : net_(widths(state_dim, action_dim, hidden), init) {}

  static LyapunovCritic zeros(std::size_t state_dim, std::size_t action_dim,
                              std::vector<std::size_t> hidden = {64, 64}) {
    LyapunovCritic c;
    c.net_ = Mlp::zeros(widths(state_dim, action_dim, hidden));
    return c;
  }

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  Var value(Graph& g, Var states, Var actions, ParamMode mode = ParamMode::kTrainable) {
    return diff::square(net_.forward(g, diff::concat_cols(states, actions), mode));
  }
  Var value(Graph& g, Var states, Var actions) const {
    return diff::square(net_.forward(g, diff::concat_cols(states, actions)));
  }

  double evaluate(std::span<const double> state, std::span<const double> action) const {
    std::vector<double> in(state.begin(), state.end());
    in.insert(in.end(), action.begin(), action.end());
    const double f = net_.evaluate(in)[0];
    return f * f;
  }

 private:
  static std::vector<std::size_t> widths(std::size_t s, std::size_t a, const std::vector<std::size_t>& hidden) {
    std::vector<std::size_t> w{s + a};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(1);
    return w;
  }

  Mlp net_;
};

struct BundleConfig {
  double action_scale = 20.0;
  double disturbance_scale = 5.0;
  double initial_lambda = 1.0;
  double initial_beta = 1.0;
  std::vector<std::size_t> hidden = {64, 64};
};

// Everything the trainer learns: policy, adversary,
// Lyapunov critic, their slow copies and the two Lagrange multipliers.
struct AgentBundle {
  SquashedGaussianPolicy actor;
  SquashedGaussianPolicy disturber;
  LyapunovCritic critic;
  LyapunovCritic target_critic;
  SquashedGaussianPolicy target_actor;
  double lambda = 1.0;
  double beta = 1.0;

  static AgentBundle create(const BundleConfig& cfg, Rng init) {
    constexpr std::size_t s = env::kStateDim;
    AgentBundle b;
    Rng actor_rng = init.substream("actor");
    Rng disturber_rng = init.substream("disturber");
    Rng critic_rng = init.substream("critic");
    b.actor = SquashedGaussianPolicy(s, 1, cfg.action_scale, actor_rng, cfg.hidden);
    b.disturber = SquashedGaussianPolicy(s, 1, cfg.disturbance_scale, disturber_rng, cfg.hidden);
    b.critic = LyapunovCritic(s, 1, critic_rng, cfg.hidden);
    b.target_critic = b.critic;
    b.target_actor = b.actor;
    b.lambda = cfg.initial_lambda;
    b.beta = cfg.initial_beta;
    return b;
  }

  void soft_update_targets(double tau) {
    diff::soft_update(target_critic.net(), critic.net(), tau);
    diff::soft_update(target_actor.net(), actor.net(), tau);
  }
};

// Monte-Carlo estimate of L(s) = E_{a~pi} L_c(s, a).
inline double expected_lyapunov(const LyapunovCritic& critic, const SquashedGaussianPolicy& actor,
                                std::span<const double> state, std::size_t samples, Rng& rng) {
  double total = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double a = actor.act(state, ActMode::kStochastic, rng).action;
    total += critic.evaluate(state, std::span<const double>(&a, 1));
  }
  return total / static_cast<double>(samples);
}

}  // namespace rlac::agents
