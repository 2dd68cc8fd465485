#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "rlac/diff/graph.hpp"
#include "rlac/diff/mlp.hpp"
#include "rlac/errors.hpp"
#include "rlac/rng.hpp"

namespace rlac::agents {

using diff::Graph;
using diff::Mlp;
using diff::ParamMode;
using diff::Var;

enum class ActMode { kStochastic, kDeterministic };

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

struct PolicySample {
  Var action;    // (B x d), scaled into (-scale, scale)
  Var log_prob;  // (B x 1)
};

struct ActResult {
  double action = 0.0;
  double log_prob = 0.0;
};

// Gaussian in pre-squash space, squashed by scale * tanh(u).
//
// log_prob is the density of the normalized action tanh(u) in (-1, 1):
//   log N(u; mean, std) - sum log(1 - tanh(u)^2).
// The constant -d*log(scale) from the final rescale is left out so the
// entropy target is independent of the actuator range.
class SquashedGaussianPolicy {
 public:
  SquashedGaussianPolicy() = default;
  SquashedGaussianPolicy(std::size_t state_dim, std::size_t action_dim, double scale, Rng& init,
                         std::vector<std::size_t> hidden = {64, 64})
      : net_(widths(state_dim, action_dim, hidden), init), action_dim_(action_dim), scale_(scale) {}

  static SquashedGaussianPolicy zeros(std::size_t state_dim, std::size_t action_dim, double scale,
                                      std::vector<std::size_t> hidden = {64, 64}) {
    SquashedGaussianPolicy p;
    p.net_ = Mlp::zeros(widths(state_dim, action_dim, hidden));
    p.action_dim_ = action_dim;
    p.scale_ = scale;
    return p;
  }

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  double scale() const { return scale_; }
  std::size_t action_dim() const { return action_dim_; }
  std::size_t state_dim() const { return net_.input_size(); }

  // Reparameterized sample a = scale * tanh(mean + std * noise).
  PolicySample sample(Graph& g, Var states, Var noise, ParamMode mode = ParamMode::kTrainable) {
    auto [mean, log_std] = head(g, states, mode);
    Var u = diff::add(mean, diff::mul(diff::exp(log_std), noise));
    Var log_prob = diff::sub(diff::gaussian_log_density(u, mean, log_std), diff::squash_log_jacobian(u));
    return {diff::scale(diff::tanh(u), scale_), log_prob};
  }

  // log_prob of given (already scaled) actions. Actions are pulled inside
  // the open interval before inverting the squash.
  Var log_prob(Graph& g, Var states, std::span<const double> actions, ParamMode mode = ParamMode::kTrainable) {
    auto [mean, log_std] = head(g, states, mode);
    std::vector<double> u(actions.size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = unsquash(actions[i]);
    Var uv = g.constant(states.rows(), action_dim_, std::move(u));
    return diff::sub(diff::gaussian_log_density(uv, mean, log_std), diff::squash_log_jacobian(uv));
  }

  // Single-state tape-free sampling for rollouts (1-D action).
  ActResult act(std::span<const double> state, ActMode mode, Rng& rng) const {
    check_finite(state);
    const std::vector<double> out = net_.evaluate(state);
    const double mean = out[0];
    const double log_std = std::clamp(out[action_dim_], kLogStdMin, kLogStdMax);
    const double eps = mode == ActMode::kDeterministic ? 0.0 : rng.normal();
    const double u = mean + std::exp(log_std) * eps;
    return {scale_ * std::tanh(u), log_density(u, mean, log_std)};
  }

  double act_deterministic(std::span<const double> state) const {
    check_finite(state);
    return scale_ * std::tanh(net_.evaluate(state)[0]);
  }

  double unsquash(double action) const {
    constexpr double kEdge = 1.0 - 1e-9;
    return std::atanh(std::clamp(action / scale_, -kEdge, kEdge));
  }

  // Scalar version of the squashed log-density at pre-squash point u.
  static double log_density(double u, double mean, double log_std) {
    const double z = (u - mean) * std::exp(-log_std);
    const double gauss = -0.5 * z * z - log_std - 0.5 * std::log(2.0 * std::numbers::pi);
    const double log_jac =
        2.0 * (std::numbers::ln2 - u - (-2.0 * u > 0 ? -2.0 * u + std::log1p(std::exp(2.0 * u))
                                                     : std::log1p(std::exp(-2.0 * u))));
    return gauss - log_jac;
  }

 private:
  static std::vector<std::size_t> widths(std::size_t in, std::size_t out, const std::vector<std::size_t>& hidden) {
    std::vector<std::size_t> w{in};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(2 * out);
    return w;
  }

  std::pair<Var, Var> head(Graph& g, Var states, ParamMode mode) {
    Var out = net_.forward(g, states, mode);
    Var mean = diff::slice_cols(out, 0, action_dim_);
    Var log_std = diff::clamp(diff::slice_cols(out, action_dim_, 2 * action_dim_), kLogStdMin, kLogStdMax);
    return {mean, log_std};
  }

  static void check_finite(std::span<const double> state) {
    for (double v : state)
      if (!std::isfinite(v)) throw ContractError("policy input is not finite");
  }

  Mlp net_;
  std::size_t action_dim_ = 1;
  double scale_ = 1.0;
};

}  // namespace rlac::agents
