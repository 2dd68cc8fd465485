#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rlac/diff/tensor.hpp"
#include "rlac/errors.hpp"

namespace rlac::diff {

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  AdamState() = default;
  explicit AdamState(double lr) : learning_rate(lr) {}
};

// One bias-corrected Adam update. Moment buffers are created on the first
// call and must keep matching the parameter list afterwards.
inline void adam_step(AdamState& state, std::span<Tensor* const> params) {
  if (state.first_moment.empty()) {
    for (const Tensor* p : params) {
      state.first_moment.emplace_back(p->size(), 0.0);
      state.second_moment.emplace_back(p->size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) throw ContractError("adam_step: parameter list changed");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->has_grad()) throw ContractError("adam_step: parameter without gradient");
    if (state.first_moment[k].size() != params[k]->size())
      throw ContractError("adam_step: moment buffer shape mismatch");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      p.data[i] -= state.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.epsilon);
    }
  }
}

}  // namespace rlac::diff
