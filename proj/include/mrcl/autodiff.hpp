// Copyright 2026 The mrcl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mrcl/errors.hpp"
#include "mrcl/lambert_w.hpp"
#include "mrcl/segment.hpp"

// Static-graph reverse-mode automatic differentiation over dense row-major
// tensors. A graph is built once (shapes fixed at construction), then
// evaluated repeatedly with fresh bindings for its named inputs.
//
//   ad::Graph g;
//   auto x = g.input("x", {3}, /*trainable=*/true);
//   auto loss = ad::sum(ad::square(x));
//   g.forward({{"x", ad::Tensor::vector({1, 2, 3})}}, loss);
//   auto grads = g.backward(loss);  // grads["x"] == {2, 4, 6}

namespace mrcl::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), values_(numel(shape_), fill) {}
  Tensor(Shape shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != numel(shape_)) {
      throw std::invalid_argument("Tensor: " + std::to_string(values_.size()) +
                                  " values for shape " + shape_string(shape_));
    }
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor vector(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor(Shape{n}, std::move(v));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& data() const { return values_; }
  std::vector<double>& data() { return values_; }

  double item() const {
    if (values_.size() != 1) throw std::logic_error("Tensor::item on non-scalar tensor");
    return values_[0];
  }

  void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

using Bindings = std::map<std::string, Tensor, std::less<>>;
using Gradients = std::map<std::string, Tensor, std::less<>>;

class Graph;

// Handle to a node in a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Shape& shape() const;
  std::size_t size() const { return numel(shape()); }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  using Inputs = std::span<const Tensor* const>;
  using ForwardFn = std::function<void(Inputs in, Tensor& out)>;
  // in_grads[i] is null when input i does not need a gradient.
  using BackwardFn = std::function<void(Inputs in, const Tensor& out, const Tensor& out_grad,
                                        std::span<Tensor* const> in_grads)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Placeholder bound by name at every forward pass.
  Var input(std::string name, Shape shape, bool trainable = false) {
    for (const Node& n : nodes_) {
      if (n.kind == "input" && n.name == name) {
        throw std::invalid_argument("Graph: duplicate input '" + name + "'");
      }
    }
    Node node;
    node.kind = "input";
    node.name = std::move(name);
    node.value = Tensor(std::move(shape));
    node.trainable = trainable;
    node.requires_grad = trainable;
    return push(std::move(node));
  }

  Var constant(Tensor value) {
    Node node;
    node.kind = "constant";
    node.value = std::move(value);
    return push(std::move(node));
  }

  Var apply(std::string kind, std::vector<Var> inputs, Shape out_shape, ForwardFn forward,
            BackwardFn backward) {
    Node node;
    node.kind = std::move(kind);
    for (const Var& v : inputs) {
      if (&v.graph() != this) throw std::invalid_argument("Graph: operand from another graph");
      node.inputs.push_back(v.id());
      node.requires_grad = node.requires_grad || nodes_[v.id()].requires_grad;
    }
    node.value = Tensor(std::move(out_shape));
    node.forward = std::move(forward);
    node.backward = std::move(backward);
    return push(std::move(node));
  }

  std::size_t size() const { return nodes_.size(); }
  const Shape& shape(std::size_t id) const { return nodes_.at(id).value.shape(); }
  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  const std::string& kind(Var v) const { return nodes_.at(v.id()).kind; }

  /// Evaluates every node up to and including `output`.
  const Tensor& forward(const Bindings& bindings, Var output) {
    run_forward(bindings, output.id() + 1);
    return nodes_[output.id()].value;
  }

  /// Evaluates every node in the graph.
  void forward(const Bindings& bindings) { run_forward(bindings, nodes_.size()); }

  /// Gradients of the scalar `output` with respect to every trainable input.
  Gradients backward(Var output) {
    Node& out = nodes_.at(output.id());
    if (out.value.size() != 1) {
      throw std::invalid_argument("Graph::backward: output " + shape_string(out.value.shape()) +
                                  " is not a scalar");
    }
    if (evaluated_ <= output.id()) {
      throw std::logic_error("Graph::backward: forward has not been run for this output");
    }
    for (std::size_t i = 0; i <= output.id(); ++i) {
      Node& n = nodes_[i];
      if (!n.requires_grad) continue;
      if (n.grad.shape() != n.value.shape() || n.grad.size() != n.value.size()) {
        n.grad = Tensor(n.value.shape());
      }
      n.grad.fill(0.0);
    }
    if (out.requires_grad) out.grad[0] = 1.0;

    std::vector<const Tensor*> in_values;
    std::vector<Tensor*> in_grads;
    for (std::size_t i = output.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || !n.backward) continue;
      in_values.clear();
      in_grads.clear();
      for (std::size_t j : n.inputs) {
        in_values.push_back(&nodes_[j].value);
        in_grads.push_back(nodes_[j].requires_grad ? &nodes_[j].grad : nullptr);
      }
      n.backward(in_values, n.value, n.grad, in_grads);
      for (std::size_t j : n.inputs) {
        if (nodes_[j].requires_grad && !nodes_[j].grad.all_finite()) {
          throw NumericError("backward: non-finite gradient flowing out of '" + n.kind + "'");
        }
      }
    }

    Gradients grads;
    for (std::size_t i = 0; i <= output.id(); ++i) {
      if (nodes_[i].trainable) grads.emplace(nodes_[i].name, nodes_[i].grad);
    }
    return grads;
  }

  std::vector<std::string> trainable_inputs() const {
    std::vector<std::string> names;
    for (const Node& n : nodes_) {
      if (n.trainable) names.push_back(n.name);
    }
    return names;
  }

 private:
  struct Node {
    std::string kind;
    std::string name;  // inputs only
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    bool trainable = false;
    bool requires_grad = false;
    ForwardFn forward;
    BackwardFn backward;
  };

  Var push(Node node) {
    nodes_.push_back(std::move(node));
    evaluated_ = 0;
    return Var(this, nodes_.size() - 1);
  }

  void run_forward(const Bindings& bindings, std::size_t count) {
    evaluated_ = 0;
    std::vector<const Tensor*> in_values;
    for (std::size_t i = 0; i < count; ++i) {
      Node& n = nodes_[i];
      if (n.kind == "input") {
        const auto it = bindings.find(n.name);
        if (it == bindings.end()) {
          throw std::invalid_argument("forward: input '" + n.name + "' is not bound");
        }
        if (it->second.shape() != n.value.shape()) {
          throw std::invalid_argument("forward: input '" + n.name + "' bound with shape " +
                                      shape_string(it->second.shape()) + ", expected " +
                                      shape_string(n.value.shape()));
        }
        n.value = it->second;
      } else if (n.forward) {
        in_values.clear();
        for (std::size_t j : n.inputs) in_values.push_back(&nodes_[j].value);
        n.forward(in_values, n.value);
      }
      if (!n.value.all_finite()) {
        throw NumericError("forward: non-finite value at node " + std::to_string(i) + " ('" +
                           n.kind + (n.name.empty() ? "" : " " + n.name) + "')");
      }
    }
    evaluated_ = count;
  }

  std::vector<Node> nodes_;
  std::size_t evaluated_ = 0;
};

inline const Shape& Var::shape() const { return graph_->shape(id_); }

namespace detail {

inline void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
  }
}

// Elementwise unary op given f(x) and df/dx expressed through (x, f(x)).
template <typename F, typename DF>
Var unary(const char* kind, Var a, F f, DF df) {
  return a.graph().apply(
      kind, {a}, a.shape(),
      [f](Graph::Inputs in, Tensor& out) {
        const Tensor& x = *in[0];
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
      },
      [df](Graph::Inputs in, const Tensor& out, const Tensor& g, std::span<Tensor* const> gi) {
        if (!gi[0]) return;
        const Tensor& x = *in[0];
        Tensor& dx = *gi[0];
        for (std::size_t i = 0; i < x.size(); ++i) dx[i] += g[i] * df(x[i], out[i]);
      });
}

}  // namespace detail

inline Var add(Var a, Var b) {
  detail::require_same_shape("add", a, b);
  return a.graph().apply(
      "add", {a, b}, a.shape(),
      [](Graph::Inputs in, Tensor& out) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*in[0])[i] + (*in[1])[i];
      },
      [](Graph::Inputs, const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        for (Tensor* d : gi) {
          if (!d) continue;
          for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i];
        }
      });
}

inline Var sub(Var a, Var b) {
  detail::require_same_shape("sub", a, b);
  return a.graph().apply(
      "sub", {a, b}, a.shape(),
      [](Graph::Inputs in, Tensor& out) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*in[0])[i] - (*in[1])[i];
      },
      [](Graph::Inputs, const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        if (gi[0]) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
        }
        if (gi[1]) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] -= g[i];
        }
      });
}

inline Var mul(Var a, Var b) {
  detail::require_same_shape("mul", a, b);
  return a.graph().apply(
      "mul", {a, b}, a.shape(),
      [](Graph::Inputs in, Tensor& out) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*in[0])[i] * (*in[1])[i];
      },
      [](Graph::Inputs in, const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        if (gi[0]) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * (*in[1])[i];
        }
        if (gi[1]) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] += g[i] * (*in[0])[i];
        }
      });
}

inline Var scale(Var a, double c) {
  return detail::unary(
      "scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Var add_scalar(Var a, double c) {
  return detail::unary(
      "add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

inline Var neg(Var a) { return scale(a, -1.0); }

inline Var exp(Var a) {
  return detail::unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Var log(Var a) {
  return detail::unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Var sqrt(Var a) {
  return detail::unary(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

inline Var square(Var a) {
  return detail::unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

inline Var tanh(Var a) {
  return detail::unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

inline Var relu(Var a) {
  return detail::unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

/// Principal-branch Lambert W on [-1/e, 0] with dW/dx = W / (x (1 + W)).
inline Var lambert_w(Var a, LambertMode mode = LambertMode::kRefined) {
  return detail::unary(
      "lambert_w", a, [mode](double x) { return mrcl::lambert_w(x, mode); },
      [](double x, double w) { return lambert_w_derivative(x, w); });
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator+(Var a, double c) { return add_scalar(a, c); }
inline Var operator-(Var a, double c) { return add_scalar(a, -c); }

inline Var sum(Var a) {
  return a.graph().apply(
      "sum", {a}, Shape{},
      [](Graph::Inputs in, Tensor& out) {
        double total = 0.0;
        for (double v : in[0]->values()) total += v;
        out[0] = total;
      },
      [](Graph::Inputs, const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        if (!gi[0]) return;
        for (double& d : gi[0]->values()) d += g[0];
      });
}

/// Contiguous sub-range of `a` (flattened), reshaped to `shape`.
inline Var slice(Var a, std::size_t offset, Shape shape) {
  const std::size_t n = numel(shape);
  if (offset + n > a.size()) {
    throw std::invalid_argument("slice: range [" + std::to_string(offset) + ", " +
                                std::to_string(offset + n) + ") exceeds " +
                                std::to_string(a.size()) + " elements");
  }
  return a.graph().apply(
      "slice", {a}, std::move(shape),
      [offset](Graph::Inputs in, Tensor& out) {
        const auto src = in[0]->values().subspan(offset, out.size());
        std::copy(src.begin(), src.end(), out.values().begin());
      },
      [offset](Graph::Inputs, const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        if (!gi[0]) return;
        auto dst = gi[0]->values().subspan(offset, g.size());
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
      });
}

/// (n x k) times (m x k)^T -> (n x m).
inline Var matmul_nt(Var x, Var w) {
  if (x.shape().size() != 2 || w.shape().size() != 2 || x.shape()[1] != w.shape()[1]) {
    throw std::invalid_argument("matmul_nt: incompatible shapes " + shape_string(x.shape()) +
                                " and " + shape_string(w.shape()));
  }
  const std::size_t n = x.shape()[0];
  const std::size_t k = x.shape()[1];
  const std::size_t m = w.shape()[0];
  return x.graph().apply(
      "matmul_nt", {x, w}, Shape{n, m},
      [n, k, m](Graph::Inputs in, Tensor& out) {
        const double* __restrict xs = in[0]->values().data();
        const double* __restrict ws = in[1]->values().data();
        double* __restrict ys = out.values().data();
        for (std::size_t i = 0; i < n; ++i) {
          const double* xr = xs + i * k;
          for (std::size_t j = 0; j < m; ++j) {
            const double* wr = ws + j * k;
            // Four interleaved partial sums; fixed order, so still deterministic.
            double acc[4] = {0.0, 0.0, 0.0, 0.0};
            std::size_t p = 0;
            for (; p + 4 <= k; p += 4) {
              for (std::size_t u = 0; u < 4; ++u) acc[u] += xr[p + u] * wr[p + u];
            }
            for (; p < k; ++p) acc[0] += xr[p] * wr[p];
            ys[i * m + j] = (acc[0] + acc[1]) + (acc[2] + acc[3]);
          }
        }
      },
      [n, k, m](Graph::Inputs in, const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        const double* __restrict xs = in[0]->values().data();
        const double* __restrict ws = in[1]->values().data();
        if (gi[0]) {
          double* __restrict dx = gi[0]->values().data();
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
              const double gij = g[i * m + j];
              if (gij == 0.0) continue;
              for (std::size_t p = 0; p < k; ++p) dx[i * k + p] += gij * ws[j * k + p];
            }
          }
        }
        if (gi[1]) {
          double* __restrict dw = gi[1]->values().data();
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
              const double gij = g[i * m + j];
              if (gij == 0.0) continue;
              for (std::size_t p = 0; p < k; ++p) dw[j * k + p] += gij * xs[i * k + p];
            }
          }
        }
      });
}

/// Adds the vector `b` (m) to every row of `y` (n x m).
inline Var add_rowwise(Var y, Var b) {
  if (y.shape().size() != 2 || b.shape() != Shape{y.shape()[1]}) {
    throw std::invalid_argument("add_rowwise: incompatible shapes " + shape_string(y.shape()) +
                                " and " + shape_string(b.shape()));
  }
  const std::size_t n = y.shape()[0];
  const std::size_t m = y.shape()[1];
  return y.graph().apply(
      "add_rowwise", {y, b}, y.shape(),
      [n, m](Graph::Inputs in, Tensor& out) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) out[i * m + j] = (*in[0])[i * m + j] + (*in[1])[j];
        }
      },
      [n, m](Graph::Inputs, const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        if (gi[0]) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
        }
        if (gi[1]) {
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) (*gi[1])[j] += g[i * m + j];
          }
        }
      });
}

/// Per-segment sums: (total) -> (segments.size()).
inline Var segment_sum(Var a, std::vector<Segment> segments) {
  check_partition(segments, a.size());
  const std::size_t count = segments.size();
  return a.graph().apply(
      "segment_sum", {a}, Shape{count},
      [segments](Graph::Inputs in, Tensor& out) {
        for (std::size_t s = 0; s < segments.size(); ++s) {
          double total = 0.0;
          for (std::size_t i = segments[s].start; i < segments[s].end(); ++i) total += (*in[0])[i];
          out[s] = total;
        }
      },
      [segments](Graph::Inputs, const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        if (!gi[0]) return;
        for (std::size_t s = 0; s < segments.size(); ++s) {
          for (std::size_t i = segments[s].start; i < segments[s].end(); ++i) (*gi[0])[i] += g[s];
        }
      });
}

/// Expands one value per segment to every element of that segment.
inline Var segment_broadcast(Var per_segment, std::vector<Segment> segments) {
  if (per_segment.shape() != Shape{segments.size()}) {
    throw std::invalid_argument("segment_broadcast: expected " + std::to_string(segments.size()) +
                                " segment values, got shape " +
                                shape_string(per_segment.shape()));
  }
  const std::size_t total = segments.empty() ? 0 : segments.back().end();
  check_partition(segments, total);
  return per_segment.graph().apply(
      "segment_broadcast", {per_segment}, Shape{total},
      [segments](Graph::Inputs in, Tensor& out) {
        for (std::size_t s = 0; s < segments.size(); ++s) {
          for (std::size_t i = segments[s].start; i < segments[s].end(); ++i) out[i] = (*in[0])[s];
        }
      },
      [segments](Graph::Inputs, const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        if (!gi[0]) return;
        for (std::size_t s = 0; s < segments.size(); ++s) {
          double total = 0.0;
          for (std::size_t i = segments[s].start; i < segments[s].end(); ++i) total += g[i];
          (*gi[0])[s] += total;
        }
      });
}

/// Max-shifted softmax applied independently within each segment.
inline Var segment_softmax(Var a, std::vector<Segment> segments) {
  check_partition(segments, a.size());
  return a.graph().apply(
      "segment_softmax", {a}, a.shape(),
      [segments](Graph::Inputs in, Tensor& out) {
        const Tensor& x = *in[0];
        for (const Segment& s : segments) {
          double peak = x[s.start];
          for (std::size_t i = s.start; i < s.end(); ++i) peak = std::max(peak, x[i]);
          double total = 0.0;
          for (std::size_t i = s.start; i < s.end(); ++i) {
            out[i] = std::exp(x[i] - peak);
            total += out[i];
          }
          for (std::size_t i = s.start; i < s.end(); ++i) out[i] /= total;
        }
      },
      [segments](Graph::Inputs, const Tensor& y, const Tensor& g, std::span<Tensor* const> gi) {
        if (!gi[0]) return;
        for (const Segment& s : segments) {
          double dot = 0.0;
          for (std::size_t i = s.start; i < s.end(); ++i) dot += g[i] * y[i];
          for (std::size_t i = s.start; i < s.end(); ++i) (*gi[0])[i] += y[i] * (g[i] - dot);
        }
      });
}

/// Mean over the batch of -log softmax(logits)[label]. Labels are class
/// indices stored as doubles.
inline Var cross_entropy(Var logits, Var labels) {
  if (logits.shape().size() != 2 || labels.shape() != Shape{logits.shape()[0]}) {
    throw std::invalid_argument("cross_entropy: logits " + shape_string(logits.shape()) +
                                " incompatible with labels " + shape_string(labels.shape()));
  }
  const std::size_t n = logits.shape()[0];
  const std::size_t c = logits.shape()[1];
  auto label_at = [c](const Tensor& labels_t, std::size_t i) {
    const double v = labels_t[i];
    if (!(v >= 0.0) || v >= static_cast<double>(c) || v != std::floor(v)) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(v) + " at row " +
                              std::to_string(i) + " not in [0, " + std::to_string(c) + ")");
    }
    return static_cast<std::size_t>(v);
  };
  return logits.graph().apply(
      "cross_entropy", {logits, labels}, Shape{},
      [n, c, label_at](Graph::Inputs in, Tensor& out) {
        const Tensor& z = *in[0];
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double* row = z.values().data() + i * c;
          const double peak = *std::max_element(row, row + c);
          double acc = 0.0;
          for (std::size_t j = 0; j < c; ++j) acc += std::exp(row[j] - peak);
          total += peak + std::log(acc) - row[label_at(*in[1], i)];
        }
        out[0] = total / static_cast<double>(n);
      },
      [n, c, label_at](Graph::Inputs in, const Tensor&, const Tensor& g,
                       std::span<Tensor* const> gi) {
        if (!gi[0]) return;
        const Tensor& z = *in[0];
        const double w = g[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          const double* row = z.values().data() + i * c;
          const double peak = *std::max_element(row, row + c);
          double acc = 0.0;
          for (std::size_t j = 0; j < c; ++j) acc += std::exp(row[j] - peak);
          const std::size_t label = label_at(*in[1], i);
          for (std::size_t j = 0; j < c; ++j) {
            const double p = std::exp(row[j] - peak) / acc;
            (*gi[0])[i * c + j] += w * (p - (j == label ? 1.0 : 0.0));
          }
        }
      });
}

/// Pathwise sample mu + sigma * noise.
inline Var reparam_sample(Var mu, Var sigma, Var noise) {
  detail::require_same_shape("reparam_sample", mu, sigma);
  detail::require_same_shape("reparam_sample", mu, noise);
  return mu + sigma * noise;
}

/// Compares reverse-mode gradients of the scalar `output` against central
/// differences (f(t + h) - f(t - h)) / 2h for every coordinate of every
/// trainable input. Returns the largest |g - fd| / max(|g|, 1e-8).
inline double finite_diff_check(Graph& graph, Var output, Bindings bindings, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
  graph.forward(bindings, output);
  const Gradients grads = graph.backward(output);
  double worst = 0.0;
  for (const auto& [name, grad] : grads) {
    Tensor& param = bindings.at(name);
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double saved = param[i];
      param[i] = saved + h;
      const double up = graph.forward(bindings, output).item();
      param[i] = saved - h;
      const double down = graph.forward(bindings, output).item();
      param[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double err = std::abs(grad[i] - fd) / std::max(std::abs(grad[i]), 1e-8);
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace mrcl::ad
