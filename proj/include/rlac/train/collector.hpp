#pragma once

#include <deque>
#include <vector>

#include "rlac/agents/policy.hpp"
#include "rlac/env/cartpole.hpp"
#include "rlac/rng.hpp"
#include "rlac/train/replay.hpp"

namespace rlac::train {

struct EpisodeSummary {
  double total_cost = 0.0;
  int length = 0;
  bool died = false;
  friend bool operator==(const EpisodeSummary&, const EpisodeSummary&) = default;
};

// Runs the behaviour policy (plus optional disturber) in one environment
// instance. Episodes continue across collect() calls; a new one starts only
// after termination.
class Collector {
 public:
  static constexpr std::size_t kSummaryWindow = 10;

  Collector() = default;
  Collector(env::CartpoleParams params, int horizon, double gamma, Rng root)
      : params_(params),
        targets_(horizon, gamma),
        env_rng_(root.substream("env")),
        action_rng_(root.substream("actor")),
        disturb_rng_(root.substream("disturber")) {
    params_.validate();
  }

  // Executes `steps` environment steps. Finished transitions go to `replay`;
  // every executed transition (target possibly still pending) is appended to
  // `recent`.
  void collect(std::size_t steps, const agents::SquashedGaussianPolicy& actor,
               const agents::SquashedGaussianPolicy* disturber, ReplayBuffer& replay,
               std::vector<Transition>& recent) {
    for (std::size_t i = 0; i < steps; ++i) {
      if (!active_) begin_episode();
      const StateVec s = state_.vec();
      const double a = actor.act(s, agents::ActMode::kStochastic, action_rng_).action;
      const double w = disturber ? disturber->act(s, agents::ActMode::kStochastic, disturb_rng_).action : 0.0;
      const env::StepResult r = env::step(params_, state_, a, w);
      Transition t{s, a, w, r.cost, r.state.vec(), r.done, r.died, 0.0};
      recent.push_back(t);
      targets_.add(t, [&replay](const Transition& done) { replay.push(done); });
      episode_cost_ += r.cost;
      state_ = r.state;
      ++steps_taken_;
      if (r.done) {
        summaries_.push_back({episode_cost_, state_.step, r.died});
        if (summaries_.size() > kSummaryWindow) summaries_.pop_front();
        ++episodes_finished_;
        active_ = false;
      }
    }
  }

  // Mean total cost and death fraction over the last few finished episodes.
  std::pair<double, double> recent_stats() const {
    if (summaries_.empty()) return {0.0, 0.0};
    double cost = 0.0, deaths = 0.0;
    for (const auto& e : summaries_) {
      cost += e.total_cost;
      deaths += e.died ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(summaries_.size());
    return {cost / n, deaths / n};
  }

  const env::CartpoleParams& params() const { return params_; }
  std::uint64_t steps_taken() const { return steps_taken_; }
  std::uint64_t episodes_finished() const { return episodes_finished_; }

  // Checkpoint access.
  struct Snapshot {
    env::CartpoleState state;
    bool active = false;
    double episode_cost = 0.0;
    std::uint64_t steps_taken = 0;
    std::uint64_t episodes_finished = 0;
    std::deque<HorizonTargets::Pending> pending;
    std::deque<EpisodeSummary> summaries;
    Rng env_rng, action_rng, disturb_rng;
  };
  Snapshot snapshot() const {
    return {state_, active_, episode_cost_, steps_taken_, episodes_finished_, targets_.pending_items(),
            summaries_, env_rng_, action_rng_, disturb_rng_};
  }
  void restore(const Snapshot& s) {
    state_ = s.state;
    active_ = s.active;
    episode_cost_ = s.episode_cost;
    steps_taken_ = s.steps_taken;
    episodes_finished_ = s.episodes_finished;
    targets_.restore(s.pending);
    summaries_ = s.summaries;
    env_rng_ = s.env_rng;
    action_rng_ = s.action_rng;
    disturb_rng_ = s.disturb_rng;
  }

 private:
  void begin_episode() {
    state_ = env::reset(params_, env_rng_);
    episode_cost_ = 0.0;
    active_ = true;
  }

  env::CartpoleParams params_;
  HorizonTargets targets_;
  env::CartpoleState state_;
  bool active_ = false;
  double episode_cost_ = 0.0;
  std::uint64_t steps_taken_ = 0;
  std::uint64_t episodes_finished_ = 0;
  std::deque<EpisodeSummary> summaries_;
  Rng env_rng_, action_rng_, disturb_rng_;
};

}  // namespace rlac::train
