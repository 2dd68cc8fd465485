#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <sstream>
#include <vector>

#include "rlac/agents/bundle.hpp"
#include "rlac/diff/adam.hpp"
#include "rlac/diff/graph.hpp"
#include "rlac/errors.hpp"
#include "rlac/rng.hpp"
#include "rlac/train/collector.hpp"
#include "rlac/train/config.hpp"
#include "rlac/train/replay.hpp"

namespace rlac::train {

using agents::AgentBundle;
using agents::LyapunovCritic;
using agents::SquashedGaussianPolicy;
using diff::AdamState;
using diff::Graph;
using diff::ParamMode;
using diff::Var;

namespace batch {

inline Var states(Graph& g, std::span<const Transition> b) {
  std::vector<double> v;
  v.reserve(b.size() * env::kStateDim);
  for (const auto& t : b) v.insert(v.end(), t.s.begin(), t.s.end());
  return g.constant(b.size(), env::kStateDim, std::move(v));
}

inline Var next_states(Graph& g, std::span<const Transition> b) {
  std::vector<double> v;
  v.reserve(b.size() * env::kStateDim);
  for (const auto& t : b) v.insert(v.end(), t.s_next.begin(), t.s_next.end());
  return g.constant(b.size(), env::kStateDim, std::move(v));
}

template <class F>
Var column(Graph& g, std::span<const Transition> b, F field) {
  std::vector<double> v;
  v.reserve(b.size());
  for (const auto& t : b) v.push_back(field(t));
  return g.constant(b.size(), 1, std::move(v));
}

inline Var normal_noise(Graph& g, std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.normal();
  return g.constant(rows, cols, std::move(v));
}

inline void require_nonempty(std::span<const Transition> b, const char* op) {
  if (b.empty()) throw ContractError(std::string(op) + ": empty minibatch");
}

}  // namespace batch

// Mean of 1/2 (L_c(s,a) - L_target)^2, then one Adam step. Returns the
// loss evaluated before the step.
inline double critic_update(LyapunovCritic& critic, AdamState& opt, std::span<const Transition> b) {
  batch::require_nonempty(b, "critic_update");
  Graph g;
  Var s = batch::states(g, b);
  Var a = batch::column(g, b, [](const Transition& t) { return t.a; });
  Var target = batch::column(g, b, [](const Transition& t) { return t.l_target; });
  Var loss = diff::scale(diff::mean(diff::square(critic.value(g, s, a) - target)), 0.5);
  critic.net().zero_grad();
  g.backward(loss);
  auto params = critic.net().parameters();
  diff::adam_step(opt, params);
  return loss.item();
}

inline double critic_update(AgentBundle& bundle, AdamState& opt, std::span<const Transition> b) {
  return critic_update(bundle.critic, opt, b);
}

struct ActorStepResult {
  double objective = 0.0;
  double mean_log_prob = 0.0;
};

// Entropy-regularized reparameterized actor step shared by RLAC and SAC:
// minimize mean(temperature * log pi(f(eps, s) | s) + value_term), where
// value_term(g, sample_at_s) supplies the algorithm-specific (B x 1) term.
template <class ValueTerm>
ActorStepResult actor_step(SquashedGaussianPolicy& actor, AdamState& opt, double temperature,
                           std::span<const Transition> b, Rng& rng, ValueTerm&& value_term) {
  Graph g;
  Var s = batch::states(g, b);
  agents::PolicySample cur = actor.sample(g, s, batch::normal_noise(g, b.size(), actor.action_dim(), rng));
  Var value = value_term(g, cur);
  Var objective = diff::mean(diff::add(diff::scale(cur.log_prob, temperature), value));
  actor.net().zero_grad();
  g.backward(objective);
  auto params = actor.net().parameters();
  diff::adam_step(opt, params);
  double lp = 0.0;
  for (double v : cur.log_prob.value()) lp += v;
  return {objective.item(), lp / static_cast<double>(b.size())};
}

struct PolicyDiagnostics {
  double mean_delta_l = 0.0;
  double entropy = 0.0;  // -mean log pi of the fresh samples
  double objective = 0.0;
  double lambda = 0.0;
  double beta = 0.0;
};

// Lyapunov drift per transition, with a' = f(eps, s') drawn from the live
// actor and scored by the target critic:
//   dL = L_c'(s', a') - L_c(s, a) + (alpha3 + 1) c - eta^2 |w|.
// The post-death state contributes no Lyapunov value, matching the
// episode-truncated horizon targets. Gradients reach the actor only through a'.
inline Var delta_lyapunov(Graph& g, AgentBundle& bundle, const TrainerConfig& cfg, std::span<const Transition> b,
                          Rng& rng) {
  Var s = batch::states(g, b);
  Var s_next = batch::next_states(g, b);
  Var a = batch::column(g, b, [](const Transition& t) { return t.a; });
  agents::PolicySample next = bundle.actor.sample(g, s_next, batch::normal_noise(g, b.size(), 1, rng));
  Var l_next = bundle.target_critic.value(g, s_next, next.action, ParamMode::kFrozen);
  Var alive = batch::column(g, b, [](const Transition& t) { return t.died ? 0.0 : 1.0; });
  Var l_cur = bundle.critic.value(g, s, a, ParamMode::kFrozen);
  const double k = cfg.alpha3 + 1.0, e2 = cfg.eta * cfg.eta;
  Var rest = batch::column(g, b, [k, e2](const Transition& t) { return k * t.c - e2 * std::abs(t.w); });
  return diff::add(diff::sub(diff::mul(l_next, alive), l_cur), rest);
}

// One gradient step on J(pi) = E[beta log pi(f(eps,s)|s) + lambda dL].
inline PolicyDiagnostics policy_update(AgentBundle& bundle, AdamState& opt, const TrainerConfig& cfg,
                                       std::span<const Transition> b, Rng& rng) {
  batch::require_nonempty(b, "policy_update");
  double mean_dl = 0.0;
  const double lambda = bundle.lambda;
  ActorStepResult r = actor_step(bundle.actor, opt, bundle.beta, b, rng, [&](Graph& g, const agents::PolicySample&) {
    Var dl = delta_lyapunov(g, bundle, cfg, b, rng);
    for (double v : dl.value()) mean_dl += v;
    mean_dl /= static_cast<double>(b.size());
    return diff::scale(dl, lambda);
  });
  return {mean_dl, -r.mean_log_prob, r.objective, bundle.lambda, bundle.beta};
}

// Disturber ascent on J(mu) = E_{s, w~mu}[c - eta^2 |w|] over the states of
// the latest collection phase. The penalty is differentiated pathwise
// through fresh samples w' = f_mu(eps, s). The observed cost c is the cost
// of the post-step state, which under explicit Euler integration does not
// depend on the disturbance applied in that step, so it enters J as a
// constant. Returns the J estimate before the step.
inline double disturber_update(SquashedGaussianPolicy& disturber, AdamState& opt, const TrainerConfig& cfg,
                               std::span<const Transition> on_policy, Rng& rng) {
  batch::require_nonempty(on_policy, "disturber_update");
  Graph g;
  Var s = batch::states(g, on_policy);
  double mean_c = 0.0;
  for (const auto& t : on_policy) mean_c += t.c;
  mean_c /= static_cast<double>(on_policy.size());
  agents::PolicySample fresh = disturber.sample(g, s, batch::normal_noise(g, on_policy.size(), 1, rng));
  Var penalty = diff::scale(diff::mean(diff::row_norm(fresh.action)), cfg.eta * cfg.eta);
  disturber.net().zero_grad();
  g.backward(penalty);
  auto params = disturber.net().parameters();
  diff::adam_step(opt, params);
  return mean_c - penalty.item();
}

// Projected dual ascent: lambda grows while the mean drift is positive,
// beta grows while the policy entropy sits below the target.
inline void multiplier_update(AgentBundle& bundle, const TrainerConfig& cfg, const PolicyDiagnostics& d) {
  bundle.lambda = std::max(0.0, bundle.lambda + cfg.lambda_lr * d.mean_delta_l);
  bundle.beta = std::max(0.0, bundle.beta - cfg.beta_lr * (d.entropy - cfg.target_entropy));
}

// Complete resumable training state.
struct RlacState {
  TrainerConfig config;
  env::CartpoleParams env;
  std::uint64_t seed = 0;
  AgentBundle bundle;
  AdamState actor_opt, critic_opt, disturber_opt;
  ReplayBuffer replay;
  Collector collector;
  std::vector<Transition> recent;
  Rng sample_rng, update_rng;
  std::uint64_t iteration = 0;
  std::uint64_t env_steps = 0;
  std::vector<LogRow> log;
};

inline RlacState make_rlac_state(const TrainerConfig& cfg, const env::CartpoleParams& params, std::uint64_t seed) {
  cfg.validate();
  params.validate();
  Rng root(seed);
  agents::BundleConfig bc;
  bc.action_scale = cfg.action_scale;
  bc.disturbance_scale = cfg.disturbance_scale;
  bc.initial_lambda = cfg.initial_lambda;
  bc.initial_beta = cfg.initial_beta;
  return RlacState{cfg,
                   params,
                   seed,
                   AgentBundle::create(bc, root.substream("init")),
                   AdamState(cfg.actor_lr),
                   AdamState(cfg.lyapunov_lr),
                   AdamState(cfg.disturber_lr),
                   ReplayBuffer(cfg.replay_capacity),
                   Collector(params, cfg.horizon, cfg.target_gamma(), root.substream("collect")),
                   {},
                   root.substream("sample"),
                   root.substream("update"),
                   0,
                   0,
                   {}};
}

inline void check_finite(const RlacState& st, std::initializer_list<std::pair<const char*, double>> values) {
  for (const auto& [name, v] : values) {
    if (std::isfinite(v)) continue;
    std::ostringstream os;
    os << "non-finite " << name << " at iteration " << st.iteration << " (env_steps=" << st.env_steps
       << ", lambda=" << st.bundle.lambda << ", beta=" << st.bundle.beta << ", replay=" << st.replay.size()
       << ")";
    throw NumericError(os.str());
  }
}

// Alternates N_c collection steps with N_u update rounds until the
// environment-step budget is spent.
class RlacTrainer {
 public:
  RlacTrainer(const TrainerConfig& cfg, const env::CartpoleParams& params, std::uint64_t seed)
      : st_(make_rlac_state(cfg, params, seed)) {}
  explicit RlacTrainer(RlacState state) : st_(std::move(state)) {}

  bool finished() const { return st_.env_steps >= st_.config.total_env_steps; }

  LogRow run_iteration() {
    const TrainerConfig& cfg = st_.config;
    const std::size_t steps =
        static_cast<std::size_t>(std::min<std::uint64_t>(cfg.collect_steps, cfg.total_env_steps - st_.env_steps));
    st_.recent.clear();
    st_.collector.collect(steps, st_.bundle.actor, cfg.disturber_enabled ? &st_.bundle.disturber : nullptr,
                          st_.replay, st_.recent);
    st_.env_steps += steps;

    LogRow row;
    row.iteration = st_.iteration;
    row.env_steps = st_.env_steps;
    std::tie(row.mean_return, row.death_rate) = st_.collector.recent_stats();

    if (st_.replay.size() >= cfg.minibatch) {
      double dl = 0, ent = 0, closs = 0, ploss = 0, dobj = 0;
      for (std::size_t i = 0; i < cfg.update_rounds; ++i) {
        const std::vector<Transition> mb = st_.replay.sample(cfg.minibatch, st_.sample_rng);
        const double cl = critic_update(st_.bundle, st_.critic_opt, mb);
        const PolicyDiagnostics d = policy_update(st_.bundle, st_.actor_opt, cfg, mb, st_.update_rng);
        double dob = 0.0;
        if (cfg.disturber_enabled && !st_.recent.empty())
          dob = disturber_update(st_.bundle.disturber, st_.disturber_opt, cfg, st_.recent, st_.update_rng);
        check_finite(st_, {{"critic loss", cl}, {"policy objective", d.objective}, {"disturber objective", dob}});
        multiplier_update(st_.bundle, cfg, d);
        st_.bundle.soft_update_targets(cfg.tau);
        dl += d.mean_delta_l;
        ent += d.entropy;
        closs += cl;
        ploss += d.objective;
        dobj += dob;
      }
      const double n = static_cast<double>(cfg.update_rounds);
      row.mean_delta_l = dl / n;
      row.entropy = ent / n;
      row.critic_loss = closs / n;
      row.policy_loss = ploss / n;
      row.disturber_objective = dobj / n;
    }
    row.lambda = st_.bundle.lambda;
    row.beta = st_.bundle.beta;
    st_.log.push_back(row);
    ++st_.iteration;
    return row;
  }

  void train(const std::function<void(const LogRow&)>& on_iteration = {}) {
    while (!finished()) {
      const LogRow row = run_iteration();
      if (on_iteration) on_iteration(row);
    }
  }

  RlacState& state() { return st_; }
  const RlacState& state() const { return st_; }
  AgentBundle& bundle() { return st_.bundle; }
  const std::vector<LogRow>& log() const { return st_.log; }

 private:
  RlacState st_;
};

}  // namespace rlac::train
