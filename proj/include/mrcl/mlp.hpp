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
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrcl/autodiff.hpp"
#include "mrcl/segment.hpp"

namespace mrcl {

enum class LayerKind : std::uint8_t {
  kDense = 0,          // y = x W^T
  kDenseWithBias = 1,  // y = x W^T + b
};

struct LayerSpec {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  LayerKind kind = LayerKind::kDenseWithBias;

  bool has_bias() const { return kind == LayerKind::kDenseWithBias; }
  std::size_t weight_count() const { return in_features * out_features; }
  std::size_t param_count() const { return weight_count() + (has_bias() ? out_features : 0); }

  bool operator==(const LayerSpec&) const = default;
};

// Feedforward classifier: affine layers with ReLU in between. Parameters are
// flattened layer-major; each layer contributes W (out x in, row-major) and
// then its bias.
struct ModelSpec {
  std::vector<LayerSpec> layers;

  static ModelSpec mlp(const std::vector<std::size_t>& sizes, bool bias = true) {
    if (sizes.size() < 2) throw std::invalid_argument("ModelSpec::mlp: need at least 2 sizes");
    ModelSpec spec;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      spec.layers.push_back(
          {sizes[i], sizes[i + 1], bias ? LayerKind::kDenseWithBias : LayerKind::kDense});
    }
    spec.validate();
    return spec;
  }

  void validate() const {
    if (layers.empty()) throw std::invalid_argument("ModelSpec: no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].in_features == 0 || layers[i].out_features == 0) {
        throw std::invalid_argument("ModelSpec: layer " + std::to_string(i) + " has a zero dim");
      }
      if (i > 0 && layers[i].in_features != layers[i - 1].out_features) {
        throw std::invalid_argument("ModelSpec: layer " + std::to_string(i) +
                                    " input does not match previous output");
      }
    }
  }

  std::size_t input_dim() const { return layers.front().in_features; }
  std::size_t num_classes() const { return layers.back().out_features; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.param_count();
    return n;
  }

  /// One segment per layer (weights and bias together).
  std::vector<Segment> layer_segments() const {
    std::vector<Segment> out;
    std::size_t offset = 0;
    for (const auto& l : layers) {
      out.push_back({offset, l.param_count()});
      offset += l.param_count();
    }
    return out;
  }

  /// 1 for weight-matrix entries, 0 for biases.
  std::vector<std::uint8_t> weight_mask() const {
    std::vector<std::uint8_t> mask;
    mask.reserve(param_count());
    for (const auto& l : layers) {
      mask.insert(mask.end(), l.weight_count(), 1);
      if (l.has_bias()) mask.insert(mask.end(), l.out_features, 0);
    }
    return mask;
  }

  /// Layer index of every flat parameter.
  std::vector<std::size_t> layer_of_param() const {
    std::vector<std::size_t> out;
    out.reserve(param_count());
    for (std::size_t i = 0; i < layers.size(); ++i) out.insert(out.end(), layers[i].param_count(), i);
    return out;
  }

  bool operator==(const ModelSpec&) const = default;
};

/// Builds logits = h(x, w) into the graph of `weights`.
inline ad::Var mlp_apply(const ModelSpec& spec, ad::Var weights, ad::Var x) {
  spec.validate();
  if (weights.shape() != ad::Shape{spec.param_count()}) {
    throw std::invalid_argument("mlp_apply: expected " + std::to_string(spec.param_count()) +
                                " parameters, got shape " + ad::shape_string(weights.shape()));
  }
  if (x.shape().size() != 2 || x.shape()[1] != spec.input_dim()) {
    throw std::invalid_argument("mlp_apply: input shape " + ad::shape_string(x.shape()) +
                                " does not match input dim " + std::to_string(spec.input_dim()));
  }
  ad::Var h = x;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const ad::Var w = ad::slice(weights, offset, {l.out_features, l.in_features});
    offset += l.weight_count();
    h = ad::matmul_nt(h, w);
    if (l.has_bias()) {
      h = ad::add_rowwise(h, ad::slice(weights, offset, {l.out_features}));
      offset += l.out_features;
    }
    if (i + 1 < spec.layers.size()) h = ad::relu(h);
  }
  return h;
}

/// Graph-free forward pass for evaluation. `inputs` is n x input_dim row-major.
inline std::vector<double> predict_logits(const ModelSpec& spec, std::span<const double> weights,
                                          std::span<const double> inputs) {
  if (weights.size() != spec.param_count()) {
    throw std::invalid_argument("predict_logits: weight count mismatch");
  }
  if (inputs.size() % spec.input_dim() != 0) {
    throw std::invalid_argument("predict_logits: input size not a multiple of input dim");
  }
  const std::size_t n = inputs.size() / spec.input_dim();
  std::vector<double> h(inputs.begin(), inputs.end());
  std::vector<double> next;
  std::size_t offset = 0;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerSpec& l = spec.layers[li];
    next.assign(n * l.out_features, 0.0);
    const double* w = weights.data() + offset;
    const double* b = l.has_bias() ? w + l.weight_count() : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < l.out_features; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < l.in_features; ++k) {
          acc += h[i * l.in_features + k] * w[j * l.in_features + k];
        }
        if (b) acc += b[j];
        if (li + 1 < spec.layers.size() && !(acc > 0.0)) acc = 0.0;
        next[i * l.out_features + j] = acc;
      }
    }
    offset += l.param_count();
    h.swap(next);
  }
  return h;
}

/// Row-wise argmax; ties go to the lowest class index.
inline std::vector<std::size_t> predict_classes(const ModelSpec& spec,
                                                std::span<const double> weights,
                                                std::span<const double> inputs) {
  const auto logits = predict_logits(spec, weights, inputs);
  const std::size_t c = spec.num_classes();
  std::vector<std::size_t> out(logits.size() / c);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto row = logits.begin() + static_cast<std::ptrdiff_t>(i * c);
    out[i] = static_cast<std::size_t>(std::max_element(row, row + static_cast<std::ptrdiff_t>(c)) - row);
  }
  return out;
}

}  // namespace mrcl
