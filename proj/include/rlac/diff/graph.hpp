#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "rlac/diff/tensor.hpp"
#include "rlac/errors.hpp"

namespace rlac::diff {

class Graph;

// Handle to a node of a Graph. Cheap to copy; only valid while the graph
// that produced it is alive.
struct Var {
  Graph* graph = nullptr;
  std::uint32_t id = 0;

  std::size_t rows() const;
  std::size_t cols() const;
  const std::vector<double>& value() const;
  const std::vector<double>& grad() const;
  double item() const;
};

// Tape of 2-D dense values. Rebuilt for every forward pass; backward walks
// the tape in reverse creation order, which is a valid topological order.
class Graph {
 public:
  struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    Tensor* param = nullptr;
    std::function<void(Graph&, const Node&)> backward;
  };

  Graph() { nodes_.reserve(64); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
    check_size(rows, cols, values.size());
    return push(rows, cols, std::move(values), false);
  }
  Var constant(const Tensor& t) { return constant(t.rows(), t.cols(), t.data); }
  Var scalar(double v) { return constant(1, 1, {v}); }

  // Leaf whose gradient is kept on the node (read back with Var::grad()).
  Var variable(std::size_t rows, std::size_t cols, std::vector<double> values) {
    check_size(rows, cols, values.size());
    return push(rows, cols, std::move(values), true);
  }

  // Leaf bound to a parameter tensor; backward accumulates into t.grad.
  Var parameter(Tensor& t) {
    Var v = push(t.rows(), t.cols(), t.data, true);
    Node& n = nodes_[v.id];
    n.param = &t;
    n.backward = [](Graph&, const Node& self) {
      Tensor& p = *self.param;
      if (!p.has_grad()) p.zero_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    };
    return v;
  }

  // Produces a node whose backward callback receives (graph, self).
  Var op(std::size_t rows, std::size_t cols, std::vector<double> values,
         std::initializer_list<Var> parents,
         std::function<void(Graph&, const Node&)> backward) {
    bool needs = false;
    for (const Var& p : parents) needs = needs || nodes_[p.id].requires_grad;
    Var v = push(rows, cols, std::move(values), needs);
    if (needs) nodes_[v.id].backward = std::move(backward);
    return v;
  }

  void backward(Var root) {
    Node& r = nodes_.at(root.id);
    if (r.rows * r.cols != 1) {
      throw ContractError("backward requires a scalar root, got " + std::to_string(r.rows) + "x" +
                          std::to_string(r.cols));
    }
    if (!r.requires_grad) return;
    r.grad.assign(1, 1.0);
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad) continue;
      if (n.grad.empty()) {
        if (n.param == nullptr) continue;
        n.grad.assign(n.value.size(), 0.0);
      }
      if (n.backward) n.backward(*this, n);
    }
  }

  Node& node(Var v) { return nodes_[v.id]; }
  const Node& node(Var v) const { return nodes_[v.id]; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  // Gradient buffer of a parent, allocated on first touch. Returns nullptr
  // for parents that do not need gradients.
  double* grad_buffer(Var v) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad.data();
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  static void check_size(std::size_t rows, std::size_t cols, std::size_t n) {
    if (rows * cols != n) {
      throw DimensionError("value length " + std::to_string(n) + " does not match " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
  }

  Var push(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad) {
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.value = std::move(values);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
};

inline std::size_t Var::rows() const { return graph->node(*this).rows; }
inline std::size_t Var::cols() const { return graph->node(*this).cols; }
inline const std::vector<double>& Var::value() const { return graph->node(*this).value; }
inline const std::vector<double>& Var::grad() const { return graph->node(*this).grad; }
inline double Var::item() const {
  const auto& v = value();
  if (v.size() != 1) throw ContractError("item() on a non-scalar value");
  return v[0];
}

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

inline std::string shape_str(Var v) {
  return std::to_string(v.rows()) + "x" + std::to_string(v.cols());
}

inline void same_graph(Var a, Var b) {
  if (a.graph != b.graph) throw ContractError("operands belong to different graphs");
}

// Elementwise unary op with derivative expressed through (input, output).
template <class F, class D>
Var unary(Var a, F f, D dfdx) {
  const auto& x = a.value();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return a.graph->op(a.rows(), a.cols(), std::move(y), {a},
                     [a, dfdx](Graph& g, const Graph::Node& self) {
                       double* ga = g.grad_buffer(a);
                       const auto& x = g.node(a).value;
                       for (std::size_t i = 0; i < x.size(); ++i)
                         ga[i] += self.grad[i] * dfdx(x[i], self.value[i]);
                     });
}

// Broadcasting rule: each operand dimension equals the result's or is 1.
inline std::size_t bcast_dim(std::size_t a, std::size_t b, Var va, Var vb) {
  if (a == b || b == 1) return a;
  if (a == 1) return b;
  throw DimensionError("cannot broadcast " + shape_str(va) + " with " + shape_str(vb));
}

// Binary elementwise op with broadcasting. `da`/`db` give partials of f
// with respect to each operand at (x, y).
template <class F, class DA, class DB>
Var binary(Var a, Var b, F f, DA da, DB db) {
  same_graph(a, b);
  const std::size_t ra = a.rows(), ca = a.cols(), rb = b.rows(), cb = b.cols();
  const std::size_t r = bcast_dim(ra, rb, a, b), c = bcast_dim(ca, cb, a, b);
  const auto& x = a.value();
  const auto& y = b.value();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t ia = (ra == 1 ? 0 : i) * ca, ib = (rb == 1 ? 0 : i) * cb;
    for (std::size_t j = 0; j < c; ++j)
      out[i * c + j] = f(x[ia + (ca == 1 ? 0 : j)], y[ib + (cb == 1 ? 0 : j)]);
  }
  return a.graph->op(r, c, std::move(out), {a, b},
                     [a, b, r, c, ra, ca, rb, cb, da, db](Graph& g, const Graph::Node& self) {
                       double* ga = g.grad_buffer(a);
                       double* gb = g.grad_buffer(b);
                       const auto& x = g.node(a).value;
                       const auto& y = g.node(b).value;
                       for (std::size_t i = 0; i < r; ++i) {
                         const std::size_t ia = (ra == 1 ? 0 : i) * ca, ib = (rb == 1 ? 0 : i) * cb;
                         for (std::size_t j = 0; j < c; ++j) {
                           const std::size_t ka = ia + (ca == 1 ? 0 : j), kb = ib + (cb == 1 ? 0 : j);
                           const double go = self.grad[i * c + j];
                           if (ga) ga[ka] += go * da(x[ka], y[kb]);
                           if (gb) gb[kb] += go * db(x[ka], y[kb]);
                         }
                       }
                     });
}

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace detail

inline Var add(Var a, Var b) {
  return detail::binary(
      a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

inline Var sub(Var a, Var b) {
  return detail::binary(
      a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

inline Var mul(Var a, Var b) {
  return detail::binary(
      a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

// Elementwise minimum; ties send the gradient to the first operand.
inline Var minimum(Var a, Var b) {
  return detail::binary(
      a, b, [](double x, double y) { return std::min(x, y); },
      [](double x, double y) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y) { return x <= y ? 0.0 : 1.0; });
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

inline Var scale(Var a, double k) {
  return detail::unary(a, [k](double x) { return k * x; }, [k](double, double) { return k; });
}
inline Var shift(Var a, double k) {
  return detail::unary(a, [k](double x) { return x + k; }, [](double, double) { return 1.0; });
}
inline Var operator*(double k, Var a) { return scale(a, k); }
inline Var operator-(Var a) { return scale(a, -1.0); }

inline Var relu(Var a) {
  return detail::unary(a, [](double x) { return x > 0 ? x : 0.0; },
                       [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}
inline Var tanh(Var a) {
  return detail::unary(a, [](double x) { return std::tanh(x); },
                       [](double, double y) { return 1.0 - y * y; });
}
inline Var exp(Var a) {
  return detail::unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}
inline Var log(Var a) {
  return detail::unary(a, [](double x) { return std::log(x); },
                       [](double x, double) { return 1.0 / x; });
}
inline Var square(Var a) {
  return detail::unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}
inline Var softplus(Var a) {
  return detail::unary(a, detail::softplus,
                       [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}
// Gradient passes only where lo <= x <= hi.
inline Var clamp(Var a, double lo, double hi) {
  return detail::unary(a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
                       [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

// Copy of the value with no gradient path.
inline Var detach(Var a) { return a.graph->constant(a.rows(), a.cols(), a.value()); }

inline Var matmul(Var a, Var b) {
  detail::same_graph(a, b);
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul " + detail::shape_str(a) + " by " + detail::shape_str(b));
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  std::vector<double> out(n * m);
  detail::MutMap(out.data(), n, m).noalias() =
      detail::ConstMap(a.value().data(), n, k) * detail::ConstMap(b.value().data(), k, m);
  return a.graph->op(n, m, std::move(out), {a, b}, [a, b, n, k, m](Graph& g, const Graph::Node& self) {
    detail::ConstMap go(self.grad.data(), n, m);
    if (double* ga = g.grad_buffer(a))
      detail::MutMap(ga, n, k).noalias() += go * detail::ConstMap(g.node(b).value.data(), k, m).transpose();
    if (double* gb = g.grad_buffer(b))
      detail::MutMap(gb, k, m).noalias() += detail::ConstMap(g.node(a).value.data(), n, k).transpose() * go;
  });
}

inline Var sum(Var a) {
  const auto& x = a.value();
  double s = 0.0;
  for (double v : x) s += v;
  return a.graph->op(1, 1, {s}, {a}, [a](Graph& g, const Graph::Node& self) {
    double* ga = g.grad_buffer(a);
    const std::size_t n = g.node(a).value.size();
    for (std::size_t i = 0; i < n; ++i) ga[i] += self.grad[0];
  });
}

inline Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ContractError("mean of an empty value");
  return scale(sum(a), 1.0 / n);
}

// Per-row sum: (B x d) -> (B x 1).
inline Var row_sum(Var a) {
  const std::size_t r = a.rows(), c = a.cols();
  const auto& x = a.value();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i] += x[i * c + j];
  return a.graph->op(r, 1, std::move(out), {a}, [a, r, c](Graph& g, const Graph::Node& self) {
    double* ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[i];
  });
}

// Per-row Euclidean norm: (B x d) -> (B x 1). Subgradient 0 at the origin.
inline Var row_norm(Var a) {
  const std::size_t r = a.rows(), c = a.cols();
  const auto& x = a.value();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += x[i * c + j] * x[i * c + j];
    out[i] = std::sqrt(s);
  }
  return a.graph->op(r, 1, std::move(out), {a}, [a, r, c](Graph& g, const Graph::Node& self) {
    double* ga = g.grad_buffer(a);
    const auto& x = g.node(a).value;
    for (std::size_t i = 0; i < r; ++i) {
      if (self.value[i] == 0.0) continue;
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[i] * x[i * c + j] / self.value[i];
    }
  });
}

inline Var concat_cols(Var a, Var b) {
  detail::same_graph(a, b);
  if (a.rows() != b.rows()) {
    throw DimensionError("concat_cols " + detail::shape_str(a) + " with " + detail::shape_str(b));
  }
  const std::size_t r = a.rows(), ca = a.cols(), cb = b.cols(), c = ca + cb;
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(a.value().begin() + i * ca, ca, out.begin() + i * c);
    std::copy_n(b.value().begin() + i * cb, cb, out.begin() + i * c + ca);
  }
  return a.graph->op(r, c, std::move(out), {a, b}, [a, b, r, ca, cb, c](Graph& g, const Graph::Node& self) {
    double* ga = g.grad_buffer(a);
    double* gb = g.grad_buffer(b);
    for (std::size_t i = 0; i < r; ++i) {
      if (ga)
        for (std::size_t j = 0; j < ca; ++j) ga[i * ca + j] += self.grad[i * c + j];
      if (gb)
        for (std::size_t j = 0; j < cb; ++j) gb[i * cb + j] += self.grad[i * c + ca + j];
    }
  });
}

// Columns [begin, end).
inline Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const std::size_t r = a.rows(), ca = a.cols();
  if (begin >= end || end > ca) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                         detail::shape_str(a));
  }
  const std::size_t c = end - begin;
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(a.value().begin() + i * ca + begin, c, out.begin() + i * c);
  return a.graph->op(r, c, std::move(out), {a}, [a, r, ca, c, begin](Graph& g, const Graph::Node& self) {
    double* ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * ca + begin + j] += self.grad[i * c + j];
  });
}

// Diagonal Gaussian log-density summed over columns: (B x d)^3 -> (B x 1).
inline Var gaussian_log_density(Var x, Var mean, Var log_std) {
  detail::same_graph(x, mean);
  detail::same_graph(x, log_std);
  const std::size_t r = x.rows(), c = x.cols();
  if (mean.rows() != r || mean.cols() != c || log_std.rows() != r || log_std.cols() != c) {
    throw DimensionError("gaussian_log_density operands " + detail::shape_str(x) + ", " +
                         detail::shape_str(mean) + ", " + detail::shape_str(log_std));
  }
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  const auto& xv = x.value();
  const auto& mv = mean.value();
  const auto& sv = log_std.value();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const std::size_t k = i * c + j;
      const double z = (xv[k] - mv[k]) * std::exp(-sv[k]);
      out[i] += -0.5 * z * z - sv[k] - kHalfLog2Pi;
    }
  }
  return x.graph->op(r, 1, std::move(out), {x, mean, log_std},
                     [x, mean, log_std, r, c](Graph& g, const Graph::Node& self) {
                       double* gx = g.grad_buffer(x);
                       double* gm = g.grad_buffer(mean);
                       double* gs = g.grad_buffer(log_std);
                       const auto& xv = g.node(x).value;
                       const auto& mv = g.node(mean).value;
                       const auto& sv = g.node(log_std).value;
                       for (std::size_t i = 0; i < r; ++i) {
                         for (std::size_t j = 0; j < c; ++j) {
                           const std::size_t k = i * c + j;
                           const double inv_std = std::exp(-sv[k]);
                           const double z = (xv[k] - mv[k]) * inv_std;
                           const double go = self.grad[i];
                           if (gx) gx[k] += go * (-z * inv_std);
                           if (gm) gm[k] += go * (z * inv_std);
                           if (gs) gs[k] += go * (z * z - 1.0);
                         }
                       }
                     });
}

// Sum over columns of log(1 - tanh(u)^2), the log-Jacobian of the tanh
// squash, in the overflow-safe form 2(log 2 - u - softplus(-2u)).
inline Var squash_log_jacobian(Var u) {
  const std::size_t r = u.rows(), c = u.cols();
  const auto& uv = u.value();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double x = uv[i * c + j];
      out[i] += 2.0 * (std::numbers::ln2 - x - detail::softplus(-2.0 * x));
    }
  return u.graph->op(r, 1, std::move(out), {u}, [u, r, c](Graph& g, const Graph::Node& self) {
    double* gu = g.grad_buffer(u);
    const auto& uv = g.node(u).value;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gu[i * c + j] += self.grad[i] * (-2.0 * std::tanh(uv[i * c + j]));
  });
}

}  // namespace rlac::diff
