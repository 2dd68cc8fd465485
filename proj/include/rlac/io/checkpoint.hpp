#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rlac/baselines/lqr.hpp"
#include "rlac/baselines/sac.hpp"
#include "rlac/io/archive.hpp"
#include "rlac/io/config.hpp"
#include "rlac/train/rlac.hpp"

namespace rlac::io {

// Field-by-field converters between training state and Archive arrays.
namespace codec {

inline void put_mlp(Archive& ar, const std::string& prefix, const diff::Mlp& m) {
  std::vector<std::uint64_t> widths(m.widths().begin(), m.widths().end());
  ar.put_u64(prefix + ".widths", widths);
  for (std::size_t i = 0; i < m.layers(); ++i) {
    ar.put(prefix + ".layer" + std::to_string(i) + ".weight", m.weight(i).data);
    ar.put(prefix + ".layer" + std::to_string(i) + ".bias", m.bias(i).data);
  }
}

inline diff::Mlp get_mlp(const Archive& ar, const std::string& prefix) {
  const auto& w = ar.get_u64(prefix + ".widths");
  diff::Mlp m = diff::Mlp::zeros(std::vector<std::size_t>(w.begin(), w.end()));
  for (std::size_t i = 0; i < m.layers(); ++i) {
    for (auto [t, name] : {std::pair{&m.weight(i), ".weight"}, std::pair{&m.bias(i), ".bias"}}) {
      const auto& v = ar.get(prefix + ".layer" + std::to_string(i) + name);
      if (v.size() != t->size()) throw IoError("checkpoint array " + prefix + " has the wrong size");
      t->data = v;
    }
  }
  return m;
}

inline void put_policy(Archive& ar, const std::string& prefix, const agents::SquashedGaussianPolicy& p) {
  put_mlp(ar, prefix, p.net());
  ar.put(prefix + ".scale", p.scale());
}

inline agents::SquashedGaussianPolicy get_policy(const Archive& ar, const std::string& prefix) {
  diff::Mlp net = get_mlp(ar, prefix);
  const auto& w = net.widths();
  if (w.back() % 2 != 0) throw IoError("checkpoint policy " + prefix + " has an odd output width");
  std::vector<std::size_t> hidden(w.begin() + 1, w.end() - 1);
  auto p = agents::SquashedGaussianPolicy::zeros(w.front(), w.back() / 2, ar.scalar(prefix + ".scale"), hidden);
  p.net() = std::move(net);
  return p;
}

inline agents::LyapunovCritic get_critic(const Archive& ar, const std::string& prefix) {
  diff::Mlp net = get_mlp(ar, prefix);
  const auto& w = net.widths();
  std::vector<std::size_t> hidden(w.begin() + 1, w.end() - 1);
  auto c = agents::LyapunovCritic::zeros(env::kStateDim, w.front() - env::kStateDim, hidden);
  c.net() = std::move(net);
  return c;
}

inline void put_adam(Archive& ar, const std::string& prefix, const diff::AdamState& s) {
  ar.put(prefix + ".hyper", std::vector<double>{s.learning_rate, s.beta1, s.beta2, s.epsilon});
  ar.put_u64(prefix + ".step", s.step);
  ar.put_u64(prefix + ".buffers", s.first_moment.size());
  for (std::size_t i = 0; i < s.first_moment.size(); ++i) {
    ar.put(prefix + ".m" + std::to_string(i), s.first_moment[i]);
    ar.put(prefix + ".v" + std::to_string(i), s.second_moment[i]);
  }
}

inline diff::AdamState get_adam(const Archive& ar, const std::string& prefix) {
  const auto& h = ar.get(prefix + ".hyper");
  if (h.size() != 4) throw IoError("checkpoint optimizer " + prefix + " is malformed");
  diff::AdamState s(h[0]);
  s.beta1 = h[1];
  s.beta2 = h[2];
  s.epsilon = h[3];
  s.step = ar.scalar_u64(prefix + ".step");
  const std::uint64_t n = ar.scalar_u64(prefix + ".buffers");
  for (std::uint64_t i = 0; i < n; ++i) {
    s.first_moment.push_back(ar.get(prefix + ".m" + std::to_string(i)));
    s.second_moment.push_back(ar.get(prefix + ".v" + std::to_string(i)));
  }
  return s;
}

inline void put_rng(Archive& ar, const std::string& name, const Rng& r) {
  ar.put_u64(name, std::vector<std::uint64_t>{r.key(), r.counter()});
}

inline Rng get_rng(const Archive& ar, const std::string& name) {
  const auto& v = ar.get_u64(name);
  if (v.size() != 2) throw IoError("checkpoint rng " + name + " is malformed");
  return Rng(v[0], v[1]);
}

inline constexpr std::size_t kTransitionWidth = 14;

inline void append_transition(std::vector<double>& out, const train::Transition& t) {
  out.insert(out.end(), t.s.begin(), t.s.end());
  out.push_back(t.a);
  out.push_back(t.w);
  out.push_back(t.c);
  out.insert(out.end(), t.s_next.begin(), t.s_next.end());
  out.push_back(t.done ? 1.0 : 0.0);
  out.push_back(t.died ? 1.0 : 0.0);
  out.push_back(t.l_target);
}

inline train::Transition read_transition(const double* p) {
  train::Transition t;
  std::copy(p, p + 4, t.s.begin());
  t.a = p[4];
  t.w = p[5];
  t.c = p[6];
  std::copy(p + 7, p + 11, t.s_next.begin());
  t.done = p[11] != 0.0;
  t.died = p[12] != 0.0;
  t.l_target = p[13];
  return t;
}

template <class Range>
inline void put_transitions(Archive& ar, const std::string& name, const Range& items) {
  std::vector<double> flat;
  for (const train::Transition& t : items) append_transition(flat, t);
  ar.put(name, flat);
}

inline std::vector<train::Transition> get_transitions(const Archive& ar, const std::string& name) {
  const auto& flat = ar.get(name);
  if (flat.size() % kTransitionWidth != 0) throw IoError("checkpoint array " + name + " is malformed");
  std::vector<train::Transition> out;
  for (std::size_t i = 0; i < flat.size(); i += kTransitionWidth) out.push_back(read_transition(flat.data() + i));
  return out;
}

inline void put_replay(Archive& ar, const std::string& prefix, const train::ReplayBuffer& r) {
  put_transitions(ar, prefix + ".items", r.storage());
  ar.put_u64(prefix + ".head", r.head());
  ar.put_u64(prefix + ".capacity", r.capacity());
}

inline train::ReplayBuffer get_replay(const Archive& ar, const std::string& prefix) {
  train::ReplayBuffer r(ar.scalar_u64(prefix + ".capacity"));
  r.restore(get_transitions(ar, prefix + ".items"), ar.scalar_u64(prefix + ".head"));
  return r;
}

inline void put_collector(Archive& ar, const std::string& prefix, const train::Collector& c) {
  const train::Collector::Snapshot s = c.snapshot();
  ar.put(prefix + ".state", std::vector<double>{s.state.x, s.state.x_dot, s.state.theta, s.state.theta_dot,
                                                static_cast<double>(s.state.step), s.state.done ? 1.0 : 0.0});
  ar.put(prefix + ".episode_cost", s.episode_cost);
  ar.put_u64(prefix + ".counters", std::vector<std::uint64_t>{s.active ? 1u : 0u, s.steps_taken, s.episodes_finished});
  std::vector<double> pending;
  std::vector<std::uint64_t> counts;
  for (const auto& p : s.pending) {
    append_transition(pending, p.t);
    counts.push_back(static_cast<std::uint64_t>(p.count));
  }
  ar.put(prefix + ".pending", pending);
  ar.put_u64(prefix + ".pending_counts", counts);
  std::vector<double> summaries;
  for (const auto& e : s.summaries) {
    summaries.push_back(e.total_cost);
    summaries.push_back(e.length);
    summaries.push_back(e.died ? 1.0 : 0.0);
  }
  ar.put(prefix + ".summaries", summaries);
  put_rng(ar, prefix + ".env_rng", s.env_rng);
  put_rng(ar, prefix + ".action_rng", s.action_rng);
  put_rng(ar, prefix + ".disturb_rng", s.disturb_rng);
}

inline void get_collector(const Archive& ar, const std::string& prefix, train::Collector& c) {
  train::Collector::Snapshot s;
  const auto& st = ar.get(prefix + ".state");
  const auto& counters = ar.get_u64(prefix + ".counters");
  if (st.size() != 6 || counters.size() != 3) throw IoError("checkpoint collector state is malformed");
  s.state = env::CartpoleState{st[0], st[1], st[2], st[3], static_cast<int>(st[4]), st[5] != 0.0};
  s.episode_cost = ar.scalar(prefix + ".episode_cost");
  s.active = counters[0] != 0;
  s.steps_taken = counters[1];
  s.episodes_finished = counters[2];
  const auto pending = get_transitions(ar, prefix + ".pending");
  const auto& counts = ar.get_u64(prefix + ".pending_counts");
  if (counts.size() != pending.size()) throw IoError("checkpoint pending window is malformed");
  for (std::size_t i = 0; i < pending.size(); ++i) s.pending.push_back({pending[i], static_cast<int>(counts[i])});
  const auto& sm = ar.get(prefix + ".summaries");
  if (sm.size() % 3 != 0) throw IoError("checkpoint episode summaries are malformed");
  for (std::size_t i = 0; i < sm.size(); i += 3) s.summaries.push_back({sm[i], static_cast<int>(sm[i + 1]), sm[i + 2] != 0.0});
  s.env_rng = get_rng(ar, prefix + ".env_rng");
  s.action_rng = get_rng(ar, prefix + ".action_rng");
  s.disturb_rng = get_rng(ar, prefix + ".disturb_rng");
  c.restore(s);
}

inline constexpr std::size_t kLogWidth = 11;

inline void put_log(Archive& ar, const std::vector<train::LogRow>& log) {
  std::vector<double> flat;
  for (const auto& r : log) {
    flat.insert(flat.end(), {static_cast<double>(r.iteration), static_cast<double>(r.env_steps), r.mean_return,
                             r.death_rate, r.mean_delta_l, r.lambda, r.beta, r.entropy, r.critic_loss, r.policy_loss,
                             r.disturber_objective});
  }
  ar.put("log", flat);
}

inline std::vector<train::LogRow> get_log(const Archive& ar) {
  const auto& f = ar.get("log");
  if (f.size() % kLogWidth != 0) throw IoError("checkpoint log is malformed");
  std::vector<train::LogRow> out;
  for (std::size_t i = 0; i < f.size(); i += kLogWidth) {
    out.push_back({static_cast<std::uint64_t>(f[i]), static_cast<std::uint64_t>(f[i + 1]), f[i + 2], f[i + 3],
                   f[i + 4], f[i + 5], f[i + 6], f[i + 7], f[i + 8], f[i + 9], f[i + 10]});
  }
  return out;
}

inline RunConfig run_config(const std::string& algo, const train::TrainerConfig& t, const env::CartpoleParams& e,
                            std::uint64_t seed) {
  RunConfig rc;
  rc.algorithm = algo;
  rc.trainer = t;
  rc.env = e;
  rc.seeds = {seed};
  return rc;
}

inline void put_header(Archive& ar, const RunConfig& rc) {
  ar.meta["kind"] = rc.algorithm;
  ar.meta["seed"] = rc.seeds.front();
  ar.meta["config"] = to_text(rc);
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(rc)));
  ar.meta["config_hash"] = hash;
}

// Config stored in the header; the hash guards against hand edits.
inline RunConfig get_header(const Archive& ar, const std::string& expected_kind) {
  const std::string kind = ar.meta.value("kind", "");
  if (kind != expected_kind) throw IoError("checkpoint holds a '" + kind + "' run, expected '" + expected_kind + "'");
  RunConfig rc;
  try {
    rc = parse_config_text(ar.meta.value("config", ""));
  } catch (const ConfigError& e) {
    throw IoError(std::string("checkpoint config invalid: ") + e.what());
  }
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(rc)));
  if (ar.meta.value("config_hash", "") != std::string(hash)) throw IoError("checkpoint config hash mismatch");
  return rc;
}

template <class State>
inline void put_common(Archive& ar, const State& st) {
  ar.put_u64("progress", std::vector<std::uint64_t>{st.iteration, st.env_steps});
  put_replay(ar, "replay", st.replay);
  put_collector(ar, "collector", st.collector);
  put_transitions(ar, "recent", st.recent);
  put_rng(ar, "sample_rng", st.sample_rng);
  put_rng(ar, "update_rng", st.update_rng);
  put_log(ar, st.log);
}

template <class State>
inline void get_common(const Archive& ar, State& st) {
  const auto& progress = ar.get_u64("progress");
  if (progress.size() != 2) throw IoError("checkpoint progress is malformed");
  st.iteration = progress[0];
  st.env_steps = progress[1];
  st.replay = get_replay(ar, "replay");
  get_collector(ar, "collector", st.collector);
  st.recent = get_transitions(ar, "recent");
  st.sample_rng = get_rng(ar, "sample_rng");
  st.update_rng = get_rng(ar, "update_rng");
  st.log = get_log(ar);
}

}  // namespace codec

inline std::string checkpoint_kind(const Archive& ar) { return ar.meta.value("kind", ""); }

inline Archive to_archive(const train::RlacState& st) {
  Archive ar;
  codec::put_header(ar, codec::run_config("rlac", st.config, st.env, st.seed));
  const agents::AgentBundle& b = st.bundle;
  codec::put_policy(ar, "actor", b.actor);
  codec::put_policy(ar, "disturber", b.disturber);
  codec::put_mlp(ar, "critic", b.critic.net());
  codec::put_mlp(ar, "target_critic", b.target_critic.net());
  codec::put_policy(ar, "target_actor", b.target_actor);
  ar.put("multipliers", std::vector<double>{b.lambda, b.beta});
  codec::put_adam(ar, "actor_opt", st.actor_opt);
  codec::put_adam(ar, "critic_opt", st.critic_opt);
  codec::put_adam(ar, "disturber_opt", st.disturber_opt);
  codec::put_common(ar, st);
  return ar;
}

inline train::RlacState rlac_from_archive(const Archive& ar) {
  const RunConfig rc = codec::get_header(ar, "rlac");
  train::RlacState st = train::make_rlac_state(rc.trainer, rc.env, rc.seeds.front());
  agents::AgentBundle& b = st.bundle;
  b.actor = codec::get_policy(ar, "actor");
  b.disturber = codec::get_policy(ar, "disturber");
  b.critic = codec::get_critic(ar, "critic");
  b.target_critic = codec::get_critic(ar, "target_critic");
  b.target_actor = codec::get_policy(ar, "target_actor");
  const auto& mult = ar.get("multipliers");
  if (mult.size() != 2) throw IoError("checkpoint multipliers are malformed");
  b.lambda = mult[0];
  b.beta = mult[1];
  st.actor_opt = codec::get_adam(ar, "actor_opt");
  st.critic_opt = codec::get_adam(ar, "critic_opt");
  st.disturber_opt = codec::get_adam(ar, "disturber_opt");
  codec::get_common(ar, st);
  return st;
}

inline Archive to_archive(const baselines::SacState& st) {
  Archive ar;
  codec::put_header(ar, codec::run_config("sac", st.config, st.env, st.seed));
  const baselines::SacBundle& b = st.bundle;
  codec::put_policy(ar, "actor", b.actor);
  codec::put_mlp(ar, "q1", b.q1);
  codec::put_mlp(ar, "q2", b.q2);
  codec::put_mlp(ar, "q1_target", b.q1_target);
  codec::put_mlp(ar, "q2_target", b.q2_target);
  ar.put("alpha", b.alpha);
  codec::put_adam(ar, "actor_opt", st.actor_opt);
  codec::put_adam(ar, "q1_opt", st.q1_opt);
  codec::put_adam(ar, "q2_opt", st.q2_opt);
  codec::put_common(ar, st);
  return ar;
}

inline baselines::SacState sac_from_archive(const Archive& ar) {
  const RunConfig rc = codec::get_header(ar, "sac");
  baselines::SacState st = baselines::make_sac_state(rc.trainer, rc.env, rc.seeds.front());
  baselines::SacBundle& b = st.bundle;
  b.actor = codec::get_policy(ar, "actor");
  b.q1 = codec::get_mlp(ar, "q1");
  b.q2 = codec::get_mlp(ar, "q2");
  b.q1_target = codec::get_mlp(ar, "q1_target");
  b.q2_target = codec::get_mlp(ar, "q2_target");
  b.alpha = ar.scalar("alpha");
  st.actor_opt = codec::get_adam(ar, "actor_opt");
  st.q1_opt = codec::get_adam(ar, "q1_opt");
  st.q2_opt = codec::get_adam(ar, "q2_opt");
  codec::get_common(ar, st);
  return st;
}

inline Archive to_archive(const baselines::LqrController& c, const env::CartpoleParams& params) {
  Archive ar;
  codec::put_header(ar, codec::run_config("lqr", train::TrainerConfig{}, params, 0));
  auto put_matrix = [&ar](const std::string& name, const Eigen::MatrixXd& m) {
    ar.put_u64(name + ".shape", std::vector<std::uint64_t>{static_cast<std::uint64_t>(m.rows()),
                                                           static_cast<std::uint64_t>(m.cols())});
    std::vector<double> v(static_cast<std::size_t>(m.size()));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(v.data(), m.rows(), m.cols()) = m;
    ar.put(name, v);
  };
  put_matrix("A", c.A);
  put_matrix("B", c.B);
  put_matrix("Q", c.Q);
  put_matrix("R", c.R);
  put_matrix("K", c.K);
  ar.put("force_limit", c.force_limit);
  return ar;
}

inline baselines::LqrController lqr_from_archive(const Archive& ar, env::CartpoleParams* params = nullptr) {
  const RunConfig rc = codec::get_header(ar, "lqr");
  if (params) *params = rc.env;
  auto get_matrix = [&ar](const std::string& name) {
    const auto& shape = ar.get_u64(name + ".shape");
    const auto& v = ar.get(name);
    if (shape.size() != 2 || shape[0] * shape[1] != v.size()) throw IoError("checkpoint matrix " + name + " is malformed");
    return Eigen::MatrixXd(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        v.data(), static_cast<Eigen::Index>(shape[0]), static_cast<Eigen::Index>(shape[1])));
  };
  baselines::LqrController c;
  c.A = get_matrix("A");
  c.B = get_matrix("B");
  c.Q = get_matrix("Q");
  c.R = get_matrix("R");
  const Eigen::MatrixXd k = get_matrix("K");
  if (k.rows() != 1 || k.cols() != 4) throw IoError("checkpoint LQR gain has the wrong shape");
  c.K = k;
  c.force_limit = ar.scalar("force_limit");
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const train::RlacState& st) { to_archive(st).save(path); }
inline void save_checkpoint(const std::filesystem::path& path, const baselines::SacState& st) { to_archive(st).save(path); }

inline train::RlacState load_rlac_checkpoint(const std::filesystem::path& path) {
  return rlac_from_archive(Archive::load(path));
}
inline baselines::SacState load_sac_checkpoint(const std::filesystem::path& path) {
  return sac_from_archive(Archive::load(path));
}

}  // namespace rlac::io
