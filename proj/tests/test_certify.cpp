#include <gtest/gtest.h>

#include <cmath>

#include "rlac/certify/certifier.hpp"

using namespace rlac;
using namespace rlac::certify;
using rlac::agents::AgentBundle;

namespace {

AgentBundle small_bundle(std::uint64_t seed) {
  agents::BundleConfig cfg;
  cfg.hidden = {16, 16};
  return AgentBundle::create(cfg, Rng(seed));
}

std::vector<DriftSample> samples_with_margin(double mean, std::size_t n) {
  std::vector<DriftSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double jitter = (i % 2 == 0 ? 0.01 : -0.01);
    out.push_back({mean + jitter, 0.5, 0.5});
  }
  return out;
}

Episode episode_with(std::vector<double> costs, std::vector<double> disturbances) {
  Episode e;
  for (std::size_t i = 0; i < costs.size(); ++i) {
    RolloutStep s;
    s.c = costs[i];
    s.w = disturbances[i];
    e.push_back(s);
  }
  return e;
}

}  // namespace

TEST(Quantile, KnownValues) {
  EXPECT_NEAR(normal_quantile_two_sided(0.95), 1.959963984540054, 1e-8);
  EXPECT_NEAR(normal_quantile_two_sided(0.99), 2.5758293035489, 1e-8);
  EXPECT_NEAR(normal_quantile_two_sided(0.5), 0.6744897501960817, 1e-8);
  EXPECT_NEAR(normal_quantile_two_sided(0.999), 3.2905267314919, 1e-8);
}

TEST(SampleStats, MeanAndStandardError) {
  const std::vector<double> xs{1, 2, 3, 4, 10};
  const SampleStats s = sample_stats(xs, 0.95);
  EXPECT_DOUBLE_EQ(s.mean, 4.0);
  // sample variance = (9 + 4 + 1 + 0 + 36) / 4 = 12.5
  EXPECT_NEAR(s.std_error, std::sqrt(12.5 / 5.0), 1e-14);
  EXPECT_NEAR(s.ci_high - s.mean, 1.959963984540054 * s.std_error, 1e-8);
  EXPECT_EQ(sample_stats(std::vector<double>{}, 0.95).n, 0u);
  EXPECT_EQ(sample_stats(std::vector<double>{3.0}, 0.95).std_error, 0.0);
}

TEST(DriftSummary, ClearlyNegativePasses) {
  CertificateConfig cfg;
  const auto xs = samples_with_margin(-2.0, 100);
  const DriftReport r = summarize_drift(xs, cfg);
  EXPECT_TRUE(r.pass);
  EXPECT_FALSE(r.inconclusive);
  EXPECT_NEAR(r.margin.mean, r.drift_term - r.gain_term + r.cost_term, 1e-12);
  EXPECT_NEAR(r.margin.mean, -2.0, 1e-12);
}

TEST(DriftSummary, PositiveFailsAndSmallSampleIsInconclusive) {
  CertificateConfig cfg;
  EXPECT_FALSE(summarize_drift(samples_with_margin(0.5, 100), cfg).pass);
  // Mean barely negative but the interval straddles zero.
  std::vector<DriftSample> wide;
  for (int i = 0; i < 100; ++i) wide.push_back({i % 2 == 0 ? 5.0 : -5.2, 0.0, 0.0});
  const DriftReport w = summarize_drift(wide, cfg);
  EXPECT_LT(w.margin.mean, 0.0);
  EXPECT_FALSE(w.pass);
  const DriftReport s = summarize_drift(samples_with_margin(-2.0, 10), cfg);
  EXPECT_TRUE(s.inconclusive);
  EXPECT_FALSE(s.pass);
}

TEST(Envelope, ExactRatiosAndFloor) {
  const std::vector<double> l{2.0, 0.3, 5.0, 7.0};
  const std::vector<double> c{1.0, 0.1, 2.0, 0.0};
  const EnvelopeFit f = envelope_fit(l, c, 1e-4);
  EXPECT_DOUBLE_EQ(f.alpha1, 2.0);
  EXPECT_DOUBLE_EQ(f.alpha2, 3.0);
  EXPECT_EQ(f.samples, 3u);
  EXPECT_FALSE(f.inconclusive);
  EXPECT_TRUE(envelope_fit(std::vector<double>{1.0}, std::vector<double>{0.0}, 1e-4).inconclusive);
  EXPECT_THROW(envelope_fit(l, std::vector<double>{1.0}, 0.0), DimensionError);
}

TEST(Gain, RatioBoundAndDegenerateCases) {
  CertificateConfig cfg;
  cfg.eta = 1.0;
  cfg.alpha3 = 1.0;
  const std::vector<Episode> eps{episode_with({1, 1}, {2, -2}), episode_with({0.5, 0.5}, {1, 3})};
  const GainEstimate g = l2_gain_estimate(eps, cfg);
  EXPECT_DOUBLE_EQ(g.ratio, 3.0 / 8.0);
  EXPECT_DOUBLE_EQ(g.bound, 0.5);
  EXPECT_TRUE(g.pass);
  EXPECT_LE(g.ci_low, g.ratio);
  EXPECT_GE(g.ci_high, g.ratio);

  cfg.alpha3 = 4.0;
  EXPECT_FALSE(l2_gain_estimate(eps, cfg).pass);
  EXPECT_TRUE(l2_gain_estimate(eps, cfg, 0.9).pass);

  const std::vector<Episode> quiet{episode_with({0, 0}, {0, 0})};
  EXPECT_TRUE(l2_gain_estimate(quiet, cfg).undefined);
  EXPECT_FALSE(l2_gain_estimate(quiet, cfg).pass);
  const std::vector<Episode> free_ride{episode_with({0, 0}, {1, 1})};
  EXPECT_FALSE(l2_gain_estimate(free_ride, cfg).undefined);
  EXPECT_TRUE(l2_gain_estimate(free_ride, cfg).pass);
  EXPECT_EQ(l2_gain_estimate(free_ride, cfg).ratio, 0.0);
  const std::vector<Episode> undisturbed{episode_with({1, 0}, {0, 0})};
  EXPECT_TRUE(l2_gain_estimate(undisturbed, cfg).undefined);
}

TEST(Config, ValidateNamesKeys) {
  CertificateConfig cfg;
  cfg.confidence = 1.0;
  try {
    cfg.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key, "certify.confidence");
  }
  cfg = CertificateConfig{};
  cfg.eta = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Rollouts, SeededAndDisturberSwitch) {
  const AgentBundle b = small_bundle(1);
  const env::CartpoleParams p;
  const auto a = record_rollouts(b, p, 3, true, Rng(2));
  const auto c = record_rollouts(b, p, 3, true, Rng(2));
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) {
    ASSERT_EQ(a[e].size(), c[e].size());
    for (std::size_t i = 0; i < a[e].size(); ++i) EXPECT_EQ(a[e][i].s_next, c[e][i].s_next);
    Rng reset_rng = Rng(2).substream(e).substream("reset");
    EXPECT_EQ(a[e].front().s, env::reset(p, reset_rng).vec());
  }
  for (const Episode& e : record_rollouts(b, p, 2, false, Rng(2)))
    for (const RolloutStep& s : e) EXPECT_EQ(s.w, 0.0);
}

TEST(DriftCheck, ZeroCriticLeavesGainAndCostTerms) {
  AgentBundle b = small_bundle(3);
  b.critic = agents::LyapunovCritic::zeros(4, 1, {16, 16});
  const env::CartpoleParams p;
  CertificateConfig cfg;
  const auto eps = record_rollouts(b, p, 4, true, Rng(4));
  const auto all = pool(eps);
  double gain = 0.0, cost = 0.0;
  for (const RolloutStep& s : all) {
    gain += std::abs(s.w);
    cost += 2.0 * s.c;
  }
  const double n = static_cast<double>(all.size());
  const DriftReport r = drift_check(b, eps, cfg);
  EXPECT_EQ(r.drift_term, 0.0);
  EXPECT_NEAR(r.gain_term, gain / n, 1e-12);
  EXPECT_NEAR(r.cost_term, cost / n, 1e-12);
  EXPECT_NEAR(r.margin.mean, (cost - gain) / n, 1e-12);
}

TEST(DriftCheck, PureAndMonotoneInAlpha3) {
  const AgentBundle b = small_bundle(5);
  const auto eps = record_rollouts(b, env::CartpoleParams{}, 3, true, Rng(6));
  CertificateConfig cfg;
  const DriftReport r1 = drift_check(b, eps, cfg);
  const DriftReport r2 = drift_check(b, eps, cfg);
  EXPECT_EQ(r1.margin.mean, r2.margin.mean);
  EXPECT_EQ(r1.margin.std_error, r2.margin.std_error);
  double last = r1.margin.mean;
  for (double a3 : {1.5, 2.0, 4.0}) {
    cfg.alpha3 = a3;
    const double m = drift_check(b, eps, cfg).margin.mean;
    EXPECT_GT(m, last);
    last = m;
  }
}

TEST(DriftCheck, MatchesHandComputedSample) {
  const AgentBundle b = small_bundle(7);
  const auto eps = record_rollouts(b, env::CartpoleParams{}, 1, true, Rng(8));
  CertificateConfig cfg;
  cfg.lyapunov_samples = 4;
  const auto samples = drift_samples(b, eps[0], cfg);
  const RolloutStep& st = eps[0][0];
  Rng r = Rng(cfg.seed).substream("lyapunov").substream(0);
  double l = 0.0, ln = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double a = b.actor.act(st.s, agents::ActMode::kStochastic, r).action;
    l += b.critic.evaluate(st.s, std::vector<double>{a}) / 4.0;
  }
  for (int k = 0; k < 4; ++k) {
    const double a = b.actor.act(st.s_next, agents::ActMode::kStochastic, r).action;
    ln += b.critic.evaluate(st.s_next, std::vector<double>{a}) / 4.0;
  }
  EXPECT_NEAR(samples[0].drift, ln - l, 1e-12);
  EXPECT_NEAR(samples[0].gain, std::abs(st.w), 1e-15);
  EXPECT_NEAR(samples[0].cost, 2.0 * st.c, 1e-15);
}

TEST(Batches, IndependentBatchesOfRequestedSize) {
  const AgentBundle b = small_bundle(9);
  CertificateConfig cfg;
  cfg.batches = 3;
  cfg.batch_size = 40;
  cfg.episodes_per_batch = 2;
  cfg.lyapunov_samples = 4;
  const BatchTest t = drift_batches(b, env::CartpoleParams{}, cfg);
  ASSERT_EQ(t.batches, 3u);
  ASSERT_EQ(t.reports.size(), 3u);
  for (const DriftReport& r : t.reports) EXPECT_LE(r.margin.n, 40u);
  EXPECT_NE(t.reports[0].margin.mean, t.reports[1].margin.mean);
  const BatchTest again = drift_batches(b, env::CartpoleParams{}, cfg);
  EXPECT_EQ(again.reports[2].margin.mean, t.reports[2].margin.mean);
  EXPECT_EQ(t.pass_fraction(), static_cast<double>(t.passed) / 3.0);
}

TEST(Certify, ReportIsReproducible) {
  const AgentBundle b = small_bundle(10);
  CertificateConfig cfg;
  cfg.episodes = 2;
  cfg.batches = 2;
  cfg.batch_size = 30;
  cfg.episodes_per_batch = 1;
  cfg.lyapunov_samples = 4;
  const CertificateReport a = certify::certify(b, env::CartpoleParams{}, cfg);
  const CertificateReport c = certify::certify(b, env::CartpoleParams{}, cfg);
  EXPECT_EQ(a.drift.margin.mean, c.drift.margin.mean);
  EXPECT_EQ(a.envelope.alpha1, c.envelope.alpha1);
  EXPECT_EQ(a.gain.ratio, c.gain.ratio);
  EXPECT_GT(a.samples, 0u);
  EXPECT_LE(a.min_cost, a.max_cost);
}
