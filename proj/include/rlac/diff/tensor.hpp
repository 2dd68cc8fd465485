#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "rlac/errors.hpp"

namespace rlac::diff {

// Dense row-major float64 array with an optional gradient buffer. Network
// parameters live in Tensors; the tape (Graph) reads them and accumulates
// into `grad` on backward.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0)
      : shape(std::move(dims)), data(count(shape), fill) {}
  Tensor(std::vector<std::size_t> dims, std::vector<double> values)
      : shape(std::move(dims)), data(std::move(values)) {
    if (data.size() != count(shape)) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape product " + std::to_string(count(shape)));
    }
  }

  static std::size_t count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
  }

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.size() < 2 ? 1 : shape[0]; }
  std::size_t cols() const { return shape.empty() ? 1 : shape.back(); }

  bool has_grad() const { return grad.size() == data.size(); }
  void zero_grad() { grad.assign(data.size(), 0.0); }
  void clear_grad() { grad.clear(); }
};

}  // namespace rlac::diff
