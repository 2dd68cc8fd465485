#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rlac/diff/graph.hpp"
#include "rlac/diff/tensor.hpp"
#include "rlac/errors.hpp"
#include "rlac/rng.hpp"

namespace rlac::diff {

// Whether a forward pass records gradients for the network's own weights.
// Frozen passes still propagate gradients to the input (used for target
// networks inside the policy objective).
enum class ParamMode { kTrainable, kFrozen };

// Fully connected network: ReLU on hidden layers, linear output layer.
// Layer i maps widths[i] -> widths[i+1] as y = x W + b, W stored (in x out).
class Mlp {
 public:
  Mlp() = default;

  Mlp(std::vector<std::size_t> widths, Rng& init) : widths_(std::move(widths)) {
    check_widths();
    for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
      const std::size_t in = widths_[i], out = widths_[i + 1];
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      Tensor w({in, out});
      Tensor b({1, out});
      for (double& v : w.data) v = init.uniform(-bound, bound);
      for (double& v : b.data) v = init.uniform(-bound, bound);
      weights_.push_back(std::move(w));
      biases_.push_back(std::move(b));
    }
  }

  static Mlp zeros(std::vector<std::size_t> widths) {
    Mlp m;
    m.widths_ = std::move(widths);
    m.check_widths();
    for (std::size_t i = 0; i + 1 < m.widths_.size(); ++i) {
      m.weights_.emplace_back(std::vector<std::size_t>{m.widths_[i], m.widths_[i + 1]});
      m.biases_.emplace_back(std::vector<std::size_t>{1, m.widths_[i + 1]});
    }
    return m;
  }

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t input_size() const { return widths_.front(); }
  std::size_t output_size() const { return widths_.back(); }
  std::size_t layers() const { return weights_.size(); }

  Tensor& weight(std::size_t layer) { return weights_.at(layer); }
  Tensor& bias(std::size_t layer) { return biases_.at(layer); }
  const Tensor& weight(std::size_t layer) const { return weights_.at(layer); }
  const Tensor& bias(std::size_t layer) const { return biases_.at(layer); }

  Var forward(Graph& g, Var input, ParamMode mode = ParamMode::kTrainable) {
    check_input(input.cols());
    Var h = input;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      Var w = mode == ParamMode::kTrainable ? g.parameter(weights_[i]) : g.constant(weights_[i]);
      Var b = mode == ParamMode::kTrainable ? g.parameter(biases_[i]) : g.constant(biases_[i]);
      h = add(matmul(h, w), b);
      if (i + 1 < weights_.size()) h = relu(h);
    }
    return h;
  }

  Var forward(Graph& g, Var input) const {
    return const_cast<Mlp*>(this)->forward(g, input, ParamMode::kFrozen);
  }

  // Tape-free single-sample inference; safe to call concurrently.
  std::vector<double> evaluate(std::span<const double> input) const {
    check_input(input.size());
    std::vector<double> h(input.begin(), input.end());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      const std::size_t in = widths_[l], out = widths_[l + 1];
      const auto& w = weights_[l].data;
      std::vector<double> next(biases_[l].data);
      for (std::size_t i = 0; i < in; ++i) {
        const double hi = h[i];
        if (hi == 0.0) continue;
        const double* row = w.data() + i * out;
        for (std::size_t j = 0; j < out; ++j) next[j] += hi * row[j];
      }
      if (l + 1 < weights_.size())
        for (double& v : next) v = v > 0 ? v : 0.0;
      h = std::move(next);
    }
    return h;
  }

  // Stable names "layer{i}.weight" / "layer{i}.bias", in parameter order.
  std::vector<std::pair<std::string, Tensor*>> named_parameters() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      out.emplace_back("layer" + std::to_string(i) + ".weight", &weights_[i]);
      out.emplace_back("layer" + std::to_string(i) + ".bias", &biases_[i]);
    }
    return out;
  }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < weights_.size(); ++i) n += weights_[i].size() + biases_[i].size();
    return n;
  }

  void zero_grad() {
    for (Tensor* t : parameters()) t->zero_grad();
  }
  void clear_grad() {
    for (Tensor* t : parameters()) t->clear_grad();
  }

  bool same_architecture(const Mlp& other) const { return widths_ == other.widths_; }

 private:
  void check_widths() const {
    if (widths_.size() < 2) throw ContractError("an MLP needs at least input and output widths");
    for (std::size_t w : widths_)
      if (w == 0) throw ContractError("MLP layer width must be positive");
  }
  void check_input(std::size_t cols) const {
    if (cols != widths_.front()) {
      throw DimensionError("MLP expects input width " + std::to_string(widths_.front()) + ", got " +
                           std::to_string(cols));
    }
  }

  std::vector<std::size_t> widths_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

// target <- (1 - tau) * target + tau * live, elementwise.
inline void soft_update(Mlp& target, const Mlp& live, double tau) {
  if (!target.same_architecture(live)) throw ContractError("soft_update between different architectures");
  for (std::size_t l = 0; l < target.layers(); ++l) {
    auto blend = [tau](Tensor& t, const Tensor& s) {
      for (std::size_t i = 0; i < t.size(); ++i) t.data[i] = (1.0 - tau) * t.data[i] + tau * s.data[i];
    };
    blend(target.weight(l), live.weight(l));
    blend(target.bias(l), live.bias(l));
  }
}

}  // namespace rlac::diff
