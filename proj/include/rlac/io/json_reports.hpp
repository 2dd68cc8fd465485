#pragma once

#include <json.hpp>

#include "rlac/baselines/lqr.hpp"
#include "rlac/certify/certifier.hpp"

namespace rlac::io {

inline nlohmann::json to_json(const certify::SampleStats& s) {
  return {{"n", s.n}, {"mean", s.mean}, {"std_error", s.std_error}, {"ci_low", s.ci_low}, {"ci_high", s.ci_high}};
}

inline nlohmann::json to_json(const certify::CertificateReport& r) {
  const auto& c = r.config;
  nlohmann::json j;
  j["config"] = {{"eta", c.eta},
                 {"alpha3", c.alpha3},
                 {"episodes", c.episodes},
                 {"lyapunov_samples", c.lyapunov_samples},
                 {"confidence", c.confidence},
                 {"cost_floor", c.cost_floor},
                 {"batches", c.batches},
                 {"batch_size", c.batch_size},
                 {"episodes_per_batch", c.episodes_per_batch},
                 {"disturber_active", c.disturber_active},
                 {"seed", c.seed}};
  j["drift"] = {{"checked_quantity", "L(s') - L(s) - eta*|w| + (alpha3+1)*c"},
                {"margin", to_json(r.drift.margin)},
                {"drift_term", r.drift.drift_term},
                {"gain_term", r.drift.gain_term},
                {"cost_term", r.drift.cost_term},
                {"inconclusive", r.drift.inconclusive},
                {"pass", r.drift.pass}};
  j["envelope"] = {{"alpha1", r.envelope.alpha1},
                   {"alpha2", r.envelope.alpha2},
                   {"samples", r.envelope.samples},
                   {"inconclusive", r.envelope.inconclusive}};
  j["l2_gain"] = {{"ratio", r.gain.ratio},   {"std_error", r.gain.std_error}, {"ci_low", r.gain.ci_low},
                  {"ci_high", r.gain.ci_high}, {"bound", r.gain.bound},       {"undefined", r.gain.undefined},
                  {"pass", r.gain.pass}};
  nlohmann::json batches = nlohmann::json::array();
  for (const auto& b : r.batches.reports) batches.push_back({{"mean", b.margin.mean}, {"ci_high", b.margin.ci_high}, {"pass", b.pass}});
  j["batches"] = {{"count", r.batches.batches},
                  {"passed", r.batches.passed},
                  {"inconclusive", r.batches.inconclusive},
                  {"pass_fraction", r.batches.pass_fraction()},
                  {"per_batch", batches}};
  j["coverage"] = {{"samples", r.samples}, {"min_state_cost", r.min_cost}, {"max_state_cost", r.max_cost}};
  j["pass"] = r.pass;
  return j;
}

inline nlohmann::json to_json(const baselines::LqrController& c) {
  auto rows = [](const Eigen::MatrixXd& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
      out.push_back(row);
    }
    return out;
  };
  return {{"A", rows(c.A)},
          {"B", rows(c.B)},
          {"Q", rows(c.Q)},
          {"R", rows(c.R)},
          {"K", rows(c.K)},
          {"force_limit", c.force_limit},
          {"closed_loop_spectral_radius", baselines::closed_loop_radius(c)}};
}

}  // namespace rlac::io
