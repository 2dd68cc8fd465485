#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "rlac/agents/policy.hpp"
#include "rlac/diff/adam.hpp"
#include "rlac/diff/mlp.hpp"
#include "rlac/env/cartpole.hpp"
#include "rlac/train/collector.hpp"
#include "rlac/train/config.hpp"
#include "rlac/train/replay.hpp"
#include "rlac/train/rlac.hpp"

namespace rlac::baselines {

using agents::SquashedGaussianPolicy;
using diff::AdamState;
using diff::Graph;
using diff::Mlp;
using diff::ParamMode;
using diff::Var;
using train::Transition;
using train::TrainerConfig;

// Soft actor-critic on reward = -cost, twin Q critics, no disturber.
struct SacBundle {
  SquashedGaussianPolicy actor;
  Mlp q1, q2;
  Mlp q1_target, q2_target;
  double alpha = 1.0;  // entropy temperature

  static SacBundle create(const TrainerConfig& cfg, Rng init, std::vector<std::size_t> hidden = {64, 64}) {
    constexpr std::size_t s = env::kStateDim;
    std::vector<std::size_t> qw{s + 1};
    qw.insert(qw.end(), hidden.begin(), hidden.end());
    qw.push_back(1);
    Rng actor_rng = init.substream("actor");
    Rng q1_rng = init.substream("q1");
    Rng q2_rng = init.substream("q2");
    SacBundle b;
    b.actor = SquashedGaussianPolicy(s, 1, cfg.action_scale, actor_rng, hidden);
    b.q1 = Mlp(qw, q1_rng);
    b.q2 = Mlp(qw, q2_rng);
    b.q1_target = b.q1;
    b.q2_target = b.q2;
    b.alpha = cfg.initial_beta;
    return b;
  }
};

inline Var q_value(Graph& g, Mlp& q, Var s, Var a, ParamMode mode = ParamMode::kTrainable) {
  return q.forward(g, diff::concat_cols(s, a), mode);
}

// Bellman targets y = -c + gamma (1 - died) (min_i Q_i'(s', a') - alpha log pi(a'|s')),
// with a' = f(noise, s') from the live actor. `noise` holds one draw per row.
inline std::vector<double> q_targets(SacBundle& b, const TrainerConfig& cfg, std::span<const Transition> batch,
                                     std::span<const double> noise) {
  if (noise.size() != batch.size()) throw ContractError("q_targets: one noise draw per transition");
  Graph g;
  Var s_next = train::batch::next_states(g, batch);
  agents::PolicySample next =
      b.actor.sample(g, s_next, g.constant(batch.size(), 1, {noise.begin(), noise.end()}), ParamMode::kFrozen);
  Var q_next = diff::minimum(q_value(g, b.q1_target, s_next, next.action, ParamMode::kFrozen),
                             q_value(g, b.q2_target, s_next, next.action, ParamMode::kFrozen));
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double soft_v = q_next.value()[i] - b.alpha * next.log_prob.value()[i];
    y[i] = -batch[i].c + cfg.gamma * (batch[i].died ? 0.0 : 1.0) * soft_v;
  }
  return y;
}

// Regression of both Q networks on the shared targets; returns the summed loss.
inline double sac_critic_update(SacBundle& b, AdamState& q1_opt, AdamState& q2_opt, const TrainerConfig& cfg,
                                std::span<const Transition> batch, Rng& rng) {
  train::batch::require_nonempty(batch, "sac_critic_update");
  std::vector<double> noise(batch.size());
  for (double& e : noise) e = rng.normal();
  const std::vector<double> y = q_targets(b, cfg, batch, noise);
  double total = 0.0;
  for (auto [q, opt] : {std::pair{&b.q1, &q1_opt}, std::pair{&b.q2, &q2_opt}}) {
    Graph g;
    Var s = train::batch::states(g, batch);
    Var a = train::batch::column(g, batch, [](const Transition& t) { return t.a; });
    Var target = g.constant(batch.size(), 1, y);
    Var loss = diff::scale(diff::mean(diff::square(q_value(g, *q, s, a) - target)), 0.5);
    q->zero_grad();
    g.backward(loss);
    auto params = q->parameters();
    diff::adam_step(*opt, params);
    total += loss.item();
  }
  return total;
}

// Actor step on mean(alpha log pi(f(eps,s)|s) - min_i Q_i(s, f(eps,s))).
inline train::PolicyDiagnostics sac_actor_update(SacBundle& b, AdamState& opt, std::span<const Transition> batch,
                                                 Rng& rng) {
  train::batch::require_nonempty(batch, "sac_actor_update");
  train::ActorStepResult r =
      train::actor_step(b.actor, opt, b.alpha, batch, rng, [&](Graph& g, const agents::PolicySample& cur) {
        Var s = train::batch::states(g, batch);
        Var q = diff::minimum(q_value(g, b.q1, s, cur.action, ParamMode::kFrozen),
                              q_value(g, b.q2, s, cur.action, ParamMode::kFrozen));
        return -q;
      });
  return {0.0, -r.mean_log_prob, r.objective, 0.0, b.alpha};
}

inline void temperature_update(SacBundle& b, const TrainerConfig& cfg, const train::PolicyDiagnostics& d) {
  b.alpha = std::max(0.0, b.alpha - cfg.beta_lr * (d.entropy - cfg.target_entropy));
}

struct SacState {
  TrainerConfig config;
  env::CartpoleParams env;
  std::uint64_t seed = 0;
  SacBundle bundle;
  AdamState actor_opt, q1_opt, q2_opt;
  train::ReplayBuffer replay;
  train::Collector collector;
  std::vector<Transition> recent;
  Rng sample_rng, update_rng;
  std::uint64_t iteration = 0;
  std::uint64_t env_steps = 0;
  std::vector<train::LogRow> log;
};

inline SacState make_sac_state(const TrainerConfig& cfg, const env::CartpoleParams& params, std::uint64_t seed) {
  cfg.validate();
  params.validate();
  Rng root(seed);
  return SacState{cfg,
                  params,
                  seed,
                  SacBundle::create(cfg, root.substream("init")),
                  AdamState(cfg.actor_lr),
                  AdamState(cfg.lyapunov_lr),
                  AdamState(cfg.lyapunov_lr),
                  train::ReplayBuffer(cfg.replay_capacity),
                  train::Collector(params, cfg.horizon, cfg.target_gamma(), root.substream("collect")),
                  {},
                  root.substream("sample"),
                  root.substream("update"),
                  0,
                  0,
                  {}};
}

// Same collection/update cadence and budget as the RLAC trainer.
class SacTrainer {
 public:
  SacTrainer(const TrainerConfig& cfg, const env::CartpoleParams& params, std::uint64_t seed)
      : st_(make_sac_state(cfg, params, seed)) {}
  explicit SacTrainer(SacState state) : st_(std::move(state)) {}

  bool finished() const { return st_.env_steps >= st_.config.total_env_steps; }

  train::LogRow run_iteration() {
    const TrainerConfig& cfg = st_.config;
    const std::size_t steps =
        static_cast<std::size_t>(std::min<std::uint64_t>(cfg.collect_steps, cfg.total_env_steps - st_.env_steps));
    st_.recent.clear();
    st_.collector.collect(steps, st_.bundle.actor, nullptr, st_.replay, st_.recent);
    st_.env_steps += steps;

    train::LogRow row;
    row.iteration = st_.iteration;
    row.env_steps = st_.env_steps;
    std::tie(row.mean_return, row.death_rate) = st_.collector.recent_stats();
    if (st_.replay.size() >= cfg.minibatch) {
      double ent = 0, closs = 0, ploss = 0;
      for (std::size_t i = 0; i < cfg.update_rounds; ++i) {
        const std::vector<Transition> mb = st_.replay.sample(cfg.minibatch, st_.sample_rng);
        const double cl = sac_critic_update(st_.bundle, st_.q1_opt, st_.q2_opt, cfg, mb, st_.update_rng);
        const train::PolicyDiagnostics d = sac_actor_update(st_.bundle, st_.actor_opt, mb, st_.update_rng);
        if (!std::isfinite(cl) || !std::isfinite(d.objective)) {
          throw NumericError("non-finite SAC loss at iteration " + std::to_string(st_.iteration) +
                             " (alpha=" + std::to_string(st_.bundle.alpha) + ")");
        }
        temperature_update(st_.bundle, cfg, d);
        diff::soft_update(st_.bundle.q1_target, st_.bundle.q1, cfg.tau);
        diff::soft_update(st_.bundle.q2_target, st_.bundle.q2, cfg.tau);
        ent += d.entropy;
        closs += cl;
        ploss += d.objective;
      }
      const double n = static_cast<double>(cfg.update_rounds);
      row.entropy = ent / n;
      row.critic_loss = closs / n;
      row.policy_loss = ploss / n;
    }
    row.beta = st_.bundle.alpha;
    st_.log.push_back(row);
    ++st_.iteration;
    return row;
  }

  void train(const std::function<void(const train::LogRow&)>& on_iteration = {}) {
    while (!finished()) {
      const train::LogRow row = run_iteration();
      if (on_iteration) on_iteration(row);
    }
  }

  SacState& state() { return st_; }
  const SacState& state() const { return st_; }
  SacBundle& bundle() { return st_.bundle; }
  const std::vector<train::LogRow>& log() const { return st_.log; }

 private:
  SacState st_;
};

}  // namespace rlac::baselines
