// Copyright 2026 The precis Authors
// SPDX-License-Identifier: Apache-2.0
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

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "precis/error.hpp"
#include "precis/tensor.hpp"

namespace precis {

enum class LayerKind { kConv2d, kFullyConnected, kRelu, kMaxPool, kAvgPool, kSoftmax, kFlatten };

inline std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kFullyConnected: return "fully_connected";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "max_pool";
    case LayerKind::kAvgPool: return "avg_pool";
    case LayerKind::kSoftmax: return "softmax";
    case LayerKind::kFlatten: return "flatten";
  }
  return "?";
}

inline std::optional<LayerKind> parse_layer_kind(std::string_view name) {
  for (auto k : {LayerKind::kConv2d, LayerKind::kFullyConnected, LayerKind::kRelu, LayerKind::kMaxPool,
                 LayerKind::kAvgPool, LayerKind::kSoftmax, LayerKind::kFlatten}) {
    if (layer_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

/// One layer. Unused parameters stay zero/empty for kinds that ignore them.
///
/// conv2d weights are [out_ch, in_ch, kh, kw]; fully_connected weights are
/// [units, inputs]. Pools use kernel_h x kernel_w windows. A stride of 0 means
/// "same as the window" for pools and 1 for conv2d.
struct LayerDef {
  std::string name;
  LayerKind kind = LayerKind::kRelu;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 0;
  std::size_t padding = 0;
  std::size_t out_channels = 0;  // conv2d channels or fully_connected units; 0 = from weight
  std::string weight;
  std::string bias;

  bool has_weights() const { return kind == LayerKind::kConv2d || kind == LayerKind::kFullyConnected; }

  std::size_t effective_stride() const {
    if (stride != 0) return stride;
    return kind == LayerKind::kConv2d ? 1 : kernel_h;
  }
};

struct NetworkDef {
  std::string name;
  Shape input_shape;
  std::vector<LayerDef> layers;
  std::map<std::string, Tensor> weights;
  std::vector<double> channel_mean;  // optional per-channel mean subtracted from inputs

  const Tensor* find_weight(const std::string& key) const {
    auto it = weights.find(key);
    return it == weights.end() ? nullptr : &it->second;
  }

  /// Index of the layer whose output is the class-score vector before any
  /// trailing softmax.
  std::size_t score_layer() const {
    if (layers.empty()) throw DomainError("network has no layers");
    std::size_t i = layers.size() - 1;
    if (layers[i].kind == LayerKind::kSoftmax && i > 0) --i;
    return i;
  }
};

namespace detail {

inline const Tensor& require_weight(const NetworkDef& net, const LayerDef& layer, const std::string& key) {
  const Tensor* t = net.find_weight(key);
  if (!t) throw MissingTensorError(layer.name, key);
  return *t;
}

inline std::size_t pooled_extent(const LayerDef& layer, std::size_t in, std::size_t k, std::size_t stride,
                                 std::size_t padding) {
  if (stride == 0) throw ShapeError(layer.name, "stride must be positive");
  if (in + 2 * padding < k) {
    throw ShapeError(layer.name, "window " + std::to_string(k) + " larger than padded input extent " +
                                     std::to_string(in + 2 * padding));
  }
  return (in + 2 * padding - k) / stride + 1;
}

}  // namespace detail

/// Output shape of every layer, validating parameters and weights on the way.
/// Throws ShapeError or MissingTensorError naming the offending layer.
inline std::vector<Shape> infer_shapes(const NetworkDef& net) {
  if (net.input_shape.empty() || element_count(net.input_shape) == 0) {
    throw ShapeError(net.name.empty() ? "input" : net.name, "input shape must be non-empty");
  }
  if (!net.channel_mean.empty() && (net.input_shape.size() != 3 || net.channel_mean.size() != net.input_shape[0])) {
    throw ShapeError("input", "channel mean needs one entry per input channel");
  }
  if (net.layers.empty()) throw ShapeError(net.name, "network has no layers");

  std::vector<Shape> shapes;
  Shape cur = net.input_shape;
  for (const auto& layer : net.layers) {
    switch (layer.kind) {
      case LayerKind::kConv2d: {
        if (cur.size() != 3) throw ShapeError(layer.name, "conv2d input must be [C,H,W], got " + shape_to_string(cur));
        const Tensor& w = detail::require_weight(net, layer, layer.weight);
        if (w.rank() != 4) {
          throw ShapeError(layer.name, "conv2d weight '" + layer.weight + "' must have rank 4 [out,in,kh,kw], got " +
                                           shape_to_string(w.shape()));
        }
        const auto& ws = w.shape();
        Shape expected = {layer.out_channels ? layer.out_channels : ws[0], cur[0],
                          layer.kernel_h ? layer.kernel_h : ws[2], layer.kernel_w ? layer.kernel_w : ws[3]};
        if (ws != expected) throw ShapeError(layer.name, expected, ws, "weight '" + layer.weight + "'");
        if (!layer.bias.empty()) {
          const Tensor& b = detail::require_weight(net, layer, layer.bias);
          if (b.shape() != Shape{ws[0]}) throw ShapeError(layer.name, Shape{ws[0]}, b.shape(), "bias '" + layer.bias + "'");
        }
        const std::size_t s = layer.effective_stride();
        cur = {ws[0], detail::pooled_extent(layer, cur[1], ws[2], s, layer.padding),
               detail::pooled_extent(layer, cur[2], ws[3], s, layer.padding)};
        break;
      }
      case LayerKind::kFullyConnected: {
        const std::size_t inputs = element_count(cur);
        const Tensor& w = detail::require_weight(net, layer, layer.weight);
        if (w.rank() != 2) {
          throw ShapeError(layer.name, "fully_connected weight '" + layer.weight + "' must have rank 2 [units,inputs], got " +
                                           shape_to_string(w.shape()));
        }
        Shape expected = {layer.out_channels ? layer.out_channels : w.shape()[0], inputs};
        if (w.shape() != expected) throw ShapeError(layer.name, expected, w.shape(), "weight '" + layer.weight + "'");
        if (!layer.bias.empty()) {
          const Tensor& b = detail::require_weight(net, layer, layer.bias);
          if (b.shape() != Shape{expected[0]}) {
            throw ShapeError(layer.name, Shape{expected[0]}, b.shape(), "bias '" + layer.bias + "'");
          }
        }
        cur = {expected[0]};
        break;
      }
      case LayerKind::kMaxPool:
      case LayerKind::kAvgPool: {
        if (cur.size() != 3) throw ShapeError(layer.name, "pool input must be [C,H,W], got " + shape_to_string(cur));
        if (layer.kernel_h == 0 || layer.kernel_w == 0) throw ShapeError(layer.name, "pool window must be positive");
        if (layer.padding != 0) throw ShapeError(layer.name, "pools do not support padding");
        const std::size_t s = layer.effective_stride();
        cur = {cur[0], detail::pooled_extent(layer, cur[1], layer.kernel_h, s, layer.padding),
               detail::pooled_extent(layer, cur[2], layer.kernel_w, s, layer.padding)};
        break;
      }
      case LayerKind::kFlatten:
        cur = {element_count(cur)};
        break;
      case LayerKind::kSoftmax:
        if (cur.size() != 1) throw ShapeError(layer.name, "softmax expects a vector, got " + shape_to_string(cur));
        break;
      case LayerKind::kRelu:
        break;
    }
    shapes.push_back(cur);
  }
  if (shapes.back().size() != 1) {
    throw ShapeError(net.layers.back().name, "final layer must produce a vector of class scores, got " +
                                                 shape_to_string(shapes.back()));
  }
  return shapes;
}

}  // namespace precis
