#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "rlac/env/cartpole.hpp"
#include "rlac/parallel.hpp"
#include "rlac/rng.hpp"

namespace rlac::eval {

// A frozen feedback law. Must be safe to call concurrently.
struct Controller {
  std::string id;
  std::uint64_t seed = 0;
  std::function<double(const env::StateVec&)> act;
};

struct ImpulseProtocol {
  std::vector<double> magnitudes{80, 90, 100, 110, 120};
  int impulse_step = 100;
  std::size_t episodes = 100;

  static ImpulseProtocol full() {
    ImpulseProtocol p;
    p.episodes = 500;
    return p;
  }
};

struct GridProtocol {
  std::vector<double> lengths;
  std::vector<double> cart_masses;
  std::size_t episodes = 50;

  // 19 x 9: l in [0.2, 2.0] step 0.1, m_c in [0.4, 2.0] step 0.2.
  static GridProtocol full() {
    GridProtocol g;
    for (int i = 0; i < 19; ++i) g.lengths.push_back((2 + i) / 10.0);
    for (int i = 0; i < 9; ++i) g.cart_masses.push_back((2 + i) / 5.0);
    g.episodes = 100;
    return g;
  }
  // 4 x 4 subgrid containing the nominal cell (0.5, 1.0) and both range corners.
  static GridProtocol desk() {
    GridProtocol g;
    g.lengths = {0.2, 0.5, 1.2, 2.0};
    g.cart_masses = {0.4, 1.0, 1.4, 2.0};
    g.episodes = 50;
    return g;
  }
};

enum class Experiment { kImpulse, kGrid };

struct EvalRecord {
  std::string controller;
  std::uint64_t seed = 0;
  Experiment experiment = Experiment::kImpulse;
  double magnitude = 0.0;
  double length = 0.5;
  double cart_mass = 1.0;
  std::size_t episodes = 0;
  std::size_t deaths = 0;
  double death_rate = 0.0;
  double mean_total_cost = 0.0;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

struct EpisodeOutcome {
  double total_cost = 0.0;
  int length = 0;
  bool died = false;
};

struct Impulse {
  int step = 100;
  double magnitude = 0.0;
};

// Pushes away from the origin: sign(x) * magnitude, positive at x = 0.
inline double impulse_force(double x, double magnitude) { return x < 0.0 ? -magnitude : magnitude; }

// One deterministic episode from a reset drawn with `reset_rng`. The impulse,
// if any, is added as disturbance on the transition leaving step index
// `impulse.step`.
inline EpisodeOutcome run_episode(const env::CartpoleParams& params, const Controller& controller, Rng reset_rng,
                                  const Impulse* impulse = nullptr) {
  EpisodeOutcome out;
  env::CartpoleState s = env::reset(params, reset_rng);
  while (!s.done) {
    const env::StateVec v = s.vec();
    const double w = impulse && s.step == impulse->step ? impulse_force(s.x, impulse->magnitude) : 0.0;
    const env::StepResult r = env::step(params, s, controller.act(v), w);
    out.total_cost += r.cost;
    out.died = r.died;
    s = r.state;
  }
  out.length = s.step;
  return out;
}

namespace detail {

// Episode e of every protocol point uses reset stream e, so controllers and
// points are compared on common initial states.
inline EvalRecord evaluate_point(const env::CartpoleParams& params, const Controller& c, std::size_t episodes,
                                 std::uint64_t eval_seed, const Impulse* impulse) {
  const Rng root = Rng(eval_seed).substream("eval");
  std::vector<EpisodeOutcome> outcomes(episodes);
  parallel_for(episodes, [&](std::size_t e) { outcomes[e] = run_episode(params, c, root.substream(e), impulse); });
  EvalRecord r;
  r.controller = c.id;
  r.seed = c.seed;
  r.episodes = episodes;
  double total = 0.0;
  for (const EpisodeOutcome& o : outcomes) {
    total += o.total_cost;
    if (o.died) ++r.deaths;
  }
  if (episodes > 0) {
    r.death_rate = static_cast<double>(r.deaths) / static_cast<double>(episodes);
    r.mean_total_cost = total / static_cast<double>(episodes);
  }
  return r;
}

}  // namespace detail

inline std::vector<EvalRecord> run_impulse(std::span<const Controller> controllers, const ImpulseProtocol& protocol,
                                           const env::CartpoleParams& params, std::uint64_t eval_seed) {
  params.validate();
  std::vector<EvalRecord> out;
  for (const Controller& c : controllers) {
    for (double m : protocol.magnitudes) {
      const Impulse imp{protocol.impulse_step, m};
      EvalRecord r = detail::evaluate_point(params, c, protocol.episodes, eval_seed, &imp);
      r.experiment = Experiment::kImpulse;
      r.magnitude = m;
      r.length = params.half_pole_length;
      r.cart_mass = params.cart_mass;
      out.push_back(std::move(r));
    }
  }
  return out;
}

inline std::vector<EvalRecord> run_grid(std::span<const Controller> controllers, const GridProtocol& protocol,
                                        const env::CartpoleParams& nominal, std::uint64_t eval_seed) {
  std::vector<EvalRecord> out;
  for (const Controller& c : controllers) {
    for (double l : protocol.lengths) {
      for (double mc : protocol.cart_masses) {
        env::CartpoleParams p = nominal;
        p.half_pole_length = l;
        p.cart_mass = mc;
        p.validate();
        EvalRecord r = detail::evaluate_point(p, c, protocol.episodes, eval_seed, nullptr);
        r.experiment = Experiment::kGrid;
        r.length = l;
        r.cart_mass = mc;
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

struct PointSummary {
  std::string controller;
  double magnitude = 0.0;
  double length = 0.0;
  double cart_mass = 0.0;
  std::size_t seeds = 0;
  double mean_death_rate = 0.0;
  double sd_death_rate = 0.0;  // sample SD across seeds, 0 for a single seed
  double mean_total_cost = 0.0;
  std::size_t episodes = 0;
  std::size_t deaths = 0;
};

// Aggregates records across seeds per (controller, protocol point), in
// sorted key order.
inline std::vector<PointSummary> summarize(std::span<const EvalRecord> records) {
  using Key = std::tuple<std::string, double, double, double>;
  std::map<Key, std::vector<const EvalRecord*>> groups;
  for (const EvalRecord& r : records) groups[{r.controller, r.magnitude, r.length, r.cart_mass}].push_back(&r);
  std::vector<PointSummary> out;
  for (const auto& [key, rs] : groups) {
    PointSummary s;
    std::tie(s.controller, s.magnitude, s.length, s.cart_mass) = key;
    s.seeds = rs.size();
    for (const EvalRecord* r : rs) {
      s.mean_death_rate += r->death_rate;
      s.mean_total_cost += r->mean_total_cost;
      s.episodes += r->episodes;
      s.deaths += r->deaths;
    }
    s.mean_death_rate /= static_cast<double>(s.seeds);
    s.mean_total_cost /= static_cast<double>(s.seeds);
    if (s.seeds > 1) {
      double ss = 0.0;
      for (const EvalRecord* r : rs) ss += (r->death_rate - s.mean_death_rate) * (r->death_rate - s.mean_death_rate);
      s.sd_death_rate = std::sqrt(ss / static_cast<double>(s.seeds - 1));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace rlac::eval
