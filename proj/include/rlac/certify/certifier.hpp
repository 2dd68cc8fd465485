#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rlac/agents/bundle.hpp"
#include "rlac/env/cartpole.hpp"
#include "rlac/errors.hpp"
#include "rlac/parallel.hpp"
#include "rlac/rng.hpp"

namespace rlac::certify {

using agents::AgentBundle;
using env::StateVec;

struct CertificateConfig {
  double eta = 1.0;
  double alpha3 = 1.0;
  std::size_t episodes = 20;
  std::size_t lyapunov_samples = 32;
  double confidence = 0.95;
  double cost_floor = 1e-4;
  std::size_t min_samples = 30;
  // Batch test: independent batches, each drawn from its own rollouts.
  std::size_t batches = 20;
  std::size_t batch_size = 256;
  std::size_t episodes_per_batch = 4;
  bool disturber_active = true;
  std::uint64_t seed = 7;

  void validate() const {
    if (!(eta > 0.0)) throw ConfigError("certify.eta", "must be positive");
    if (!(alpha3 > 0.0)) throw ConfigError("certify.alpha3", "must be positive");
    if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("certify.confidence", "must lie in (0, 1)");
    if (!(cost_floor >= 0.0)) throw ConfigError("certify.cost_floor", "must be nonnegative");
    if (lyapunov_samples == 0) throw ConfigError("certify.lyapunov_samples", "must be positive");
  }
};

struct RolloutStep {
  StateVec s{};
  double a = 0.0;
  double w = 0.0;
  double c = 0.0;  // cost of s_next
  StateVec s_next{};
  bool died = false;
};
using Episode = std::vector<RolloutStep>;

// Two-sided normal quantile z with P(|Z| <= z) = confidence (Acklam's
// rational approximation of the inverse normal CDF, |error| < 1.2e-9).
inline double normal_quantile_two_sided(double confidence) {
  const double p = 0.5 + confidence / 2.0;
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  if (p > 1.0 - 0.02425) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5, r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

struct SampleStats {
  std::size_t n = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

inline SampleStats sample_stats(std::span<const double> xs, double confidence) {
  SampleStats s;
  s.n = xs.size();
  if (s.n == 0) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std_error = std::sqrt(ss / static_cast<double>(s.n - 1) / static_cast<double>(s.n));
  }
  const double z = normal_quantile_two_sided(confidence);
  s.ci_low = s.mean - z * s.std_error;
  s.ci_high = s.mean + z * s.std_error;
  return s;
}

// Per-sample pieces of the robust drift inequality. The checked quantity is
//   margin = [L(s') - L(s)] - eta |w| + (alpha3 + 1) c,
// which must be negative in expectation.
struct DriftSample {
  double drift = 0.0;
  double gain = 0.0;
  double cost = 0.0;
  double margin() const { return drift - gain + cost; }
};

struct DriftReport {
  SampleStats margin;
  double drift_term = 0.0;
  double gain_term = 0.0;
  double cost_term = 0.0;
  bool inconclusive = false;
  bool pass = false;  // ci_high < 0
};

inline DriftReport summarize_drift(std::span<const DriftSample> samples, const CertificateConfig& cfg) {
  DriftReport r;
  std::vector<double> margins;
  margins.reserve(samples.size());
  for (const auto& s : samples) {
    margins.push_back(s.margin());
    r.drift_term += s.drift;
    r.gain_term += s.gain;
    r.cost_term += s.cost;
  }
  if (!samples.empty()) {
    const double n = static_cast<double>(samples.size());
    r.drift_term /= n;
    r.gain_term /= n;
    r.cost_term /= n;
  }
  r.margin = sample_stats(margins, cfg.confidence);
  r.inconclusive = samples.size() < cfg.min_samples;
  r.pass = !r.inconclusive && r.margin.ci_high < 0.0;
  return r;
}

struct EnvelopeFit {
  double alpha1 = 0.0;  // min L/c
  double alpha2 = 0.0;  // max L/c
  std::size_t samples = 0;
  bool inconclusive = true;
};

// Tightest constants with alpha1 c <= L <= alpha2 c over samples with c > floor.
inline EnvelopeFit envelope_fit(std::span<const double> lyapunov, std::span<const double> cost, double floor) {
  if (lyapunov.size() != cost.size()) throw DimensionError("envelope_fit: mismatched sample arrays");
  EnvelopeFit f;
  f.alpha1 = std::numeric_limits<double>::infinity();
  f.alpha2 = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cost.size(); ++i) {
    if (!(cost[i] > floor)) continue;
    const double ratio = lyapunov[i] / cost[i];
    f.alpha1 = std::min(f.alpha1, ratio);
    f.alpha2 = std::max(f.alpha2, ratio);
    ++f.samples;
  }
  f.inconclusive = f.samples == 0;
  if (f.inconclusive) f.alpha1 = f.alpha2 = 0.0;
  return f;
}

struct GainEstimate {
  double ratio = 0.0;  // sum c / sum |w|
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double bound = 0.0;  // eta / (alpha3 + 1)
  bool undefined = false;
  bool pass = false;
};

// Ratio of accumulated cost to accumulated disturbance magnitude, pooled
// over episodes, with a delta-method interval over per-episode totals.
inline GainEstimate l2_gain_estimate(std::span<const Episode> episodes, const CertificateConfig& cfg,
                                     double tolerance = 0.0) {
  GainEstimate g;
  g.bound = cfg.eta / (cfg.alpha3 + 1.0);
  std::vector<double> cs, ws;
  double sc = 0.0, sw = 0.0;
  for (const Episode& e : episodes) {
    double c = 0.0, w = 0.0;
    for (const RolloutStep& s : e) {
      c += s.c;
      w += std::abs(s.w);
    }
    cs.push_back(c);
    ws.push_back(w);
    sc += c;
    sw += w;
  }
  if (sc == 0.0) {
    g.undefined = sw == 0.0;
    g.pass = !g.undefined;
    return g;
  }
  if (sw == 0.0) {
    g.undefined = true;
    return g;
  }
  const double n = static_cast<double>(cs.size());
  g.ratio = sc / sw;
  if (cs.size() > 1) {
    const double mw = sw / n;
    double var = 0.0;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const double r = cs[i] - g.ratio * ws[i];
      var += r * r;
    }
    var /= (n - 1.0);
    g.std_error = std::sqrt(var / n) / mw;
  }
  const double z = normal_quantile_two_sided(cfg.confidence);
  g.ci_low = g.ratio - z * g.std_error;
  g.ci_high = g.ratio + z * g.std_error;
  g.pass = g.ratio <= g.bound * (1.0 + tolerance);
  return g;
}

// Stochastic rollouts of the actor with the disturber (optional) applied,
// one substream per episode.
inline std::vector<Episode> record_rollouts(const AgentBundle& bundle, const env::CartpoleParams& params,
                                            std::size_t episodes, bool disturber_active, Rng rng) {
  std::vector<Episode> out(episodes);
  parallel_for(episodes, [&](std::size_t e) {
    Rng ep = rng.substream(e);
    Rng reset_rng = ep.substream("reset"), act_rng = ep.substream("actor"), dist_rng = ep.substream("disturber");
    env::CartpoleState s = env::reset(params, reset_rng);
    Episode& episode = out[e];
    while (!s.done) {
      const StateVec v = s.vec();
      const double a = bundle.actor.act(v, agents::ActMode::kStochastic, act_rng).action;
      const double w = disturber_active ? bundle.disturber.act(v, agents::ActMode::kStochastic, dist_rng).action : 0.0;
      const env::StepResult r = env::step(params, s, a, w);
      episode.push_back({v, a, w, r.cost, r.state.vec(), r.died});
      s = r.state;
    }
  });
  return out;
}

// Drift samples for recorded steps. L(s) is the Monte-Carlo mean of L_c(s, a)
// over actions drawn from the actor, seeded per step index so the result is
// a pure function of (bundle, steps, config).
inline std::vector<DriftSample> drift_samples(const AgentBundle& bundle, std::span<const RolloutStep> steps,
                                              const CertificateConfig& cfg) {
  Rng root = Rng(cfg.seed).substream("lyapunov");
  std::vector<DriftSample> out;
  out.reserve(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    Rng r = root.substream(i);
    const RolloutStep& st = steps[i];
    const double l = agents::expected_lyapunov(bundle.critic, bundle.actor, st.s, cfg.lyapunov_samples, r);
    const double l_next = agents::expected_lyapunov(bundle.critic, bundle.actor, st.s_next, cfg.lyapunov_samples, r);
    out.push_back({l_next - l, cfg.eta * std::abs(st.w), (cfg.alpha3 + 1.0) * st.c});
  }
  return out;
}

inline std::vector<RolloutStep> pool(std::span<const Episode> episodes) {
  std::vector<RolloutStep> all;
  for (const Episode& e : episodes) all.insert(all.end(), e.begin(), e.end());
  return all;
}

// Mean drift margin over all visited states, pooled across episodes.
inline DriftReport drift_check(const AgentBundle& bundle, std::span<const Episode> episodes,
                               const CertificateConfig& cfg) {
  cfg.validate();
  const std::vector<RolloutStep> all = pool(episodes);
  const std::vector<DriftSample> samples = drift_samples(bundle, all, cfg);
  return summarize_drift(samples, cfg);
}

// Envelope constants of L against the state cost c_pi(s) over visited states.
inline EnvelopeFit envelope_fit(const AgentBundle& bundle, const env::CartpoleParams& params,
                                std::span<const Episode> episodes, const CertificateConfig& cfg) {
  Rng root = Rng(cfg.seed).substream("envelope");
  std::vector<double> ls, cs;
  std::size_t i = 0;
  for (const Episode& e : episodes) {
    for (const RolloutStep& st : e) {
      Rng r = root.substream(i++);
      ls.push_back(agents::expected_lyapunov(bundle.critic, bundle.actor, st.s, cfg.lyapunov_samples, r));
      cs.push_back(env::cost(params, env::CartpoleState::from(st.s)));
    }
  }
  return envelope_fit(ls, cs, cfg.cost_floor);
}

struct BatchTest {
  std::size_t batches = 0;
  std::size_t passed = 0;
  std::size_t inconclusive = 0;
  double pass_fraction() const { return batches == 0 ? 0.0 : static_cast<double>(passed) / batches; }
  std::vector<DriftReport> reports;
};

// Independent batches: batch k gets fresh rollouts from its own substream and
// draws batch_size states uniformly without replacement from them.
inline BatchTest drift_batches(const AgentBundle& bundle, const env::CartpoleParams& params,
                               const CertificateConfig& cfg) {
  cfg.validate();
  BatchTest t;
  Rng root = Rng(cfg.seed).substream("batches");
  for (std::size_t k = 0; k < cfg.batches; ++k) {
    Rng bk = root.substream(k);
    const auto episodes = record_rollouts(bundle, params, cfg.episodes_per_batch, cfg.disturber_active,
                                          bk.substream("rollouts"));
    std::vector<RolloutStep> all = pool(episodes);
    Rng pick = bk.substream("pick");
    const std::size_t take = std::min(cfg.batch_size, all.size());
    for (std::size_t i = 0; i < take; ++i) std::swap(all[i], all[i + pick.index(all.size() - i)]);
    all.resize(take);
    CertificateConfig sub = cfg;
    sub.seed = bk.substream("lyapunov").next_u64();
    const DriftReport r = summarize_drift(drift_samples(bundle, all, sub), cfg);
    t.reports.push_back(r);
    ++t.batches;
    if (r.inconclusive) ++t.inconclusive;
    if (r.pass) ++t.passed;
  }
  return t;
}

struct CertificateReport {
  CertificateConfig config;
  DriftReport drift;
  EnvelopeFit envelope;
  GainEstimate gain;
  BatchTest batches;
  std::size_t samples = 0;
  double min_cost = 0.0, max_cost = 0.0;  // covered cost range of visited states
  bool pass = false;
};

inline CertificateReport certify(const AgentBundle& bundle, const env::CartpoleParams& params,
                                 const CertificateConfig& cfg) {
  cfg.validate();
  CertificateReport rep;
  rep.config = cfg;
  const auto episodes =
      record_rollouts(bundle, params, cfg.episodes, cfg.disturber_active, Rng(cfg.seed).substream("rollouts"));
  rep.drift = drift_check(bundle, episodes, cfg);
  rep.envelope = envelope_fit(bundle, params, episodes, cfg);
  rep.gain = l2_gain_estimate(episodes, cfg);
  rep.batches = drift_batches(bundle, params, cfg);
  rep.min_cost = std::numeric_limits<double>::infinity();
  rep.max_cost = 0.0;
  for (const Episode& e : episodes)
    for (const RolloutStep& st : e) {
      const double c = env::cost(params, env::CartpoleState::from(st.s));
      rep.min_cost = std::min(rep.min_cost, c);
      rep.max_cost = std::max(rep.max_cost, c);
      ++rep.samples;
    }
  if (rep.samples == 0) rep.min_cost = 0.0;
  rep.pass = rep.drift.pass && !rep.envelope.inconclusive && rep.envelope.alpha1 > 0.0;
  return rep;
}

}  // namespace rlac::certify
