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

// Forward pass with every arithmetic operation rounded into a NumericFormat.
//
// Weights and inputs are quantized once into the format (storage in custom
// hardware), then conv2d / fully_connected neurons accumulate serially:
// input channel outermost, then kernel row, then kernel column, with one
// product rounding and one sum rounding per MAC and the bias added last.
// Pools and relu only compare or select already-quantized values, except
// avg_pool which adds in the format and rounds the final division once.
// Softmax runs in single precision since it only rescales the scores.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "precis/error.hpp"
#include "precis/network.hpp"
#include "precis/numeric.hpp"
#include "precis/parallel.hpp"
#include "precis/tensor.hpp"

namespace precis {

struct TraceRecord {
  std::size_t step = 0;
  double running_sum = 0.0;
  double exact_running_sum = 0.0;
  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

namespace detail {

template <class Q>
void conv2d(const LayerDef& layer, const Shape& in_shape, std::span<const double> in, const Tensor& w,
            const Tensor* bias, const Arith<Q>& ar, Tensor& out) {
  const std::size_t channels = in_shape[0], height = in_shape[1], width = in_shape[2];
  const auto& ws = w.shape();
  const std::size_t kh = ws[2], kw = ws[3];
  const std::size_t oh = out.shape()[1], ow = out.shape()[2];
  const std::size_t stride = layer.effective_stride();
  const auto pad = static_cast<std::ptrdiff_t>(layer.padding);
  std::span<const double> wv = w.values();
  std::size_t o_index = 0;
  for (std::size_t o = 0; o < ws[0]; ++o) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const double* wrow = wv.data() + ((o * channels + c) * kh) * kw;
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * stride + ky) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
            const double* irow = in.data() + (c * height + static_cast<std::size_t>(iy)) * width;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * stride + kx) - pad;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) continue;  // zero padding adds nothing
              acc = ar.mac(acc, irow[ix], wrow[ky * kw + kx]);
            }
          }
        }
        if (bias) acc = ar.add(acc, (*bias)[o]);
        out[o_index++] = acc;
      }
    }
  }
}

template <class Q>
void fully_connected(std::span<const double> in, const Tensor& w, const Tensor* bias, const Arith<Q>& ar,
                     Tensor& out) {
  const std::size_t units = w.shape()[0], inputs = w.shape()[1];
  std::span<const double> wv = w.values();
  for (std::size_t u = 0; u < units; ++u) {
    double acc = 0.0;
    const double* wrow = wv.data() + u * inputs;
    for (std::size_t i = 0; i < inputs; ++i) acc = ar.mac(acc, in[i], wrow[i]);
    if (bias) acc = ar.add(acc, (*bias)[u]);
    out[u] = acc;
  }
}

template <class Q>
void pool(const LayerDef& layer, const Shape& in_shape, std::span<const double> in, const Arith<Q>& ar,
          Tensor& out) {
  const std::size_t height = in_shape[1], width = in_shape[2];
  const std::size_t oh = out.shape()[1], ow = out.shape()[2];
  const std::size_t stride = layer.effective_stride();
  const bool is_max = layer.kind == LayerKind::kMaxPool;
  const auto count = static_cast<double>(layer.kernel_h * layer.kernel_w);
  std::size_t o_index = 0;
  for (std::size_t c = 0; c < in_shape[0]; ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = is_max ? in[(c * height + y * stride) * width + x * stride] : 0.0;
        for (std::size_t ky = 0; ky < layer.kernel_h; ++ky) {
          for (std::size_t kx = 0; kx < layer.kernel_w; ++kx) {
            const double v = in[(c * height + y * stride + ky) * width + x * stride + kx];
            acc = is_max ? std::max(acc, v) : ar.add(acc, v);
          }
        }
        if (!is_max) {
          const double quot = acc / count;
          acc = ar.q.exact(quot, std::fma(-quot, count, acc));
        }
        out[o_index++] = acc;
      }
    }
  }
}

inline void softmax(std::span<const double> in, Tensor& out) {
  std::vector<float> e(in.size());
  float peak = static_cast<float>(in[0]);
  for (double v : in) peak = std::max(peak, static_cast<float>(v));
  float sum = 0.0f;
  for (std::size_t i = 0; i < in.size(); ++i) {
    e[i] = std::exp(static_cast<float>(in[i] - static_cast<double>(peak)));
    sum += e[i];
  }
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = static_cast<double>(e[i] / sum);
}

}  // namespace detail

/// A network bound to one format, with weights already quantized into it.
/// Immutable after construction and safe to share across threads.
class Evaluator {
 public:
  Evaluator(const NetworkDef& net, NumericFormat fmt)
      : layers_(net.layers),
        input_shape_(net.input_shape),
        channel_mean_(net.channel_mean),
        fmt_(std::move(fmt)),
        shapes_(infer_shapes(net)) {
    const Quantizer q = make_quantizer(fmt_);
    auto quantized = [&](const Tensor& t) {
      Tensor out = t;
      for (double& v : out.values()) v = std::visit([v](const auto& qq) { return qq(v); }, q);
      return out;
    };
    for (const auto& layer : layers_) {
      weights_.push_back(layer.has_weights() ? quantized(*net.find_weight(layer.weight)) : Tensor{});
      biases_.push_back(layer.has_weights() && !layer.bias.empty() ? quantized(*net.find_weight(layer.bias)) : Tensor{});
    }
  }

  const NumericFormat& format() const { return fmt_; }
  const std::vector<Shape>& shapes() const { return shapes_; }
  const std::vector<LayerDef>& layers() const { return layers_; }
  const Tensor& weight(std::size_t layer) const { return weights_.at(layer); }
  const Tensor& bias(std::size_t layer) const { return biases_.at(layer); }

  /// Input after mean subtraction and quantization into the format.
  Tensor prepare_input(const Tensor& input) const {
    if (input.shape() != input_shape_) throw ShapeError("input", input_shape_, input.shape());
    Tensor out = input;
    const std::size_t plane = channel_mean_.empty() ? 0 : out.size() / channel_mean_.size();
    with_quantizer(fmt_, [&](const auto& q) {
      for (std::size_t i = 0; i < out.size(); ++i) {
        double v = out[i];
        if (plane) v -= channel_mean_[i / plane];
        out[i] = q(v);
      }
    });
    return out;
  }

  /// Output of every layer, in layer order.
  std::vector<Tensor> forward(const Tensor& input) const {
    return with_quantizer(fmt_, [&](const auto& q) { return run(q, input); });
  }

  /// Class scores before any trailing softmax.
  Tensor scores(const Tensor& input) const {
    auto acts = forward(input);
    return std::move(acts[score_layer()]);
  }

  std::size_t score_layer() const {
    std::size_t i = layers_.size() - 1;
    if (layers_[i].kind == LayerKind::kSoftmax && i > 0) --i;
    return i;
  }

 private:
  template <class Q>
  std::vector<Tensor> run(const Q& q, const Tensor& input) const {
    const Arith<Q> ar{q};
    std::vector<Tensor> acts;
    acts.reserve(layers_.size());
    Tensor cur = prepare_input(input);
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const LayerDef& layer = layers_[li];
      Tensor out(shapes_[li]);
      const Tensor* bias = biases_[li].empty() ? nullptr : &biases_[li];
      switch (layer.kind) {
        case LayerKind::kConv2d:
          detail::conv2d(layer, cur.shape(), cur.values(), weights_[li], bias, ar, out);
          break;
        case LayerKind::kFullyConnected:
          detail::fully_connected(cur.values(), weights_[li], bias, ar, out);
          break;
        case LayerKind::kRelu:
          for (std::size_t i = 0; i < cur.size(); ++i) out[i] = cur[i] > 0.0 ? cur[i] : 0.0;
          break;
        case LayerKind::kMaxPool:
        case LayerKind::kAvgPool:
          detail::pool(layer, cur.shape(), cur.values(), ar, out);
          break;
        case LayerKind::kSoftmax:
          detail::softmax(cur.values(), out);
          break;
        case LayerKind::kFlatten:
          out = cur.reshaped(shapes_[li]);
          break;
      }
      acts.push_back(out);
      cur = std::move(out);
    }
    return acts;
  }

  std::vector<LayerDef> layers_;
  Shape input_shape_;
  std::vector<double> channel_mean_;
  NumericFormat fmt_;
  std::vector<Shape> shapes_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

inline std::vector<Tensor> forward(const NetworkDef& net, const Tensor& input, const NumericFormat& fmt) {
  return Evaluator(net, fmt).forward(input);
}

namespace detail {

// Replays one neuron's MAC series from the layer input.
inline std::vector<double> neuron_sums(const Evaluator& ev, std::size_t layer_index, std::size_t neuron,
                                       const Tensor& layer_input) {
  const LayerDef& layer = ev.layers()[layer_index];
  const Tensor& w = ev.weight(layer_index);
  const Tensor& b = ev.bias(layer_index);
  std::vector<double> sums{0.0};
  with_quantizer(ev.format(), [&](const auto& q) {
    const Arith<std::decay_t<decltype(q)>> ar{q};
    double acc = 0.0;
    auto step = [&](double x, double wt) {
      acc = ar.mac(acc, x, wt);
      sums.push_back(acc);
    };
    if (layer.kind == LayerKind::kFullyConnected) {
      const std::size_t inputs = w.shape()[1];
      for (std::size_t i = 0; i < inputs; ++i) step(layer_input[i], w[neuron * inputs + i]);
      if (!b.empty()) sums.push_back(acc = ar.add(acc, b[neuron]));
      return;
    }
    const Shape& out_shape = ev.shapes()[layer_index];
    const std::size_t oh = out_shape[1], ow = out_shape[2];
    const std::size_t o = neuron / (oh * ow), y = (neuron / ow) % oh, x = neuron % ow;
    const Shape& in_shape = layer_input.shape();
    const std::size_t channels = in_shape[0], height = in_shape[1], width = in_shape[2];
    const std::size_t kh = w.shape()[2], kw = w.shape()[3];
    const std::size_t stride = layer.effective_stride();
    const auto pad = static_cast<std::ptrdiff_t>(layer.padding);
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * stride + ky) - pad;
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x * stride + kx) - pad;
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) continue;
          step(layer_input[(c * height + static_cast<std::size_t>(iy)) * width + static_cast<std::size_t>(ix)],
               w[((o * channels + c) * kh + ky) * kw + kx]);
        }
      }
    }
    if (!b.empty()) sums.push_back(acc = ar.add(acc, b[o]));
  });
  return sums;
}

inline Tensor layer_input(const Evaluator& ev, const Tensor& input, std::size_t layer_index) {
  if (layer_index == 0) return ev.prepare_input(input);
  return ev.forward(input)[layer_index - 1];
}

}  // namespace detail

/// Running sum of one conv2d / fully_connected neuron after each MAC, next to
/// the single-precision running sum. Record 0 is the empty sum; when the layer
/// has a bias the last record is the bias addition, so the final running_sum
/// equals the neuron's pre-activation output from forward().
inline std::vector<TraceRecord> accumulation_trace(const NetworkDef& net, const Tensor& input,
                                                   std::size_t layer_index, std::size_t neuron_index,
                                                   const NumericFormat& fmt) {
  if (layer_index >= net.layers.size()) {
    throw DomainError("trace: layer index " + std::to_string(layer_index) + " out of range (network has " +
                      std::to_string(net.layers.size()) + " layers)");
  }
  const LayerDef& layer = net.layers[layer_index];
  if (!layer.has_weights()) {
    throw DomainError("trace: layer '" + layer.name + "' is " + std::string(layer_kind_name(layer.kind)) +
                      ", expected conv2d or fully_connected");
  }
  const Evaluator custom(net, fmt);
  const Evaluator exact(net, NumericFormat::baseline());
  const std::size_t neurons = element_count(custom.shapes()[layer_index]);
  if (neuron_index >= neurons) {
    throw DomainError("trace: neuron index " + std::to_string(neuron_index) + " out of range for layer '" +
                      layer.name + "' with " + std::to_string(neurons) + " outputs");
  }
  const auto sums = detail::neuron_sums(custom, layer_index, neuron_index,
                                        detail::layer_input(custom, input, layer_index));
  const auto exact_sums = detail::neuron_sums(exact, layer_index, neuron_index,
                                              detail::layer_input(exact, input, layer_index));
  std::vector<TraceRecord> out;
  out.reserve(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) out.push_back({i, sums[i], exact_sums[i]});
  return out;
}

/// Fraction of inputs whose label is among the k highest scores. Equal scores
/// rank the lower class index first.
inline double top_k_accuracy(std::span<const Tensor> scores, std::span<const int> labels, std::size_t k) {
  if (scores.size() != labels.size()) {
    throw DomainError("top_k_accuracy: " + std::to_string(scores.size()) + " score vectors but " +
                      std::to_string(labels.size()) + " labels");
  }
  if (scores.empty()) throw DomainError("top_k_accuracy: no inputs");
  std::size_t correct = 0;
  for (std::size_t n = 0; n < scores.size(); ++n) {
    const Tensor& s = scores[n];
    if (k < 1 || k > s.size()) {
      throw DomainError("top_k_accuracy: k=" + std::to_string(k) + " outside [1, " + std::to_string(s.size()) + "]");
    }
    const int label = labels[n];
    if (label < 0 || static_cast<std::size_t>(label) >= s.size()) {
      throw DomainError("top_k_accuracy: label " + std::to_string(label) + " outside the score vector");
    }
    const double mine = s[static_cast<std::size_t>(label)];
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s[j] > mine || (s[j] == mine && j < static_cast<std::size_t>(label))) ++ahead;
    }
    if (ahead < k) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

inline double normalized_accuracy(double custom, double baseline) {
  if (!(baseline > 0.0)) throw DomainError("normalized_accuracy: baseline accuracy must be positive");
  return custom / baseline;
}

/// Class scores for every input, evaluated in parallel.
inline std::vector<Tensor> score_all(const Evaluator& ev, std::span<const Tensor> inputs) {
  std::vector<Tensor> out(inputs.size());
  parallel_for(inputs.size(), [&](std::size_t i) { out[i] = ev.forward(inputs[i]).back(); });
  return out;
}

inline double evaluate_accuracy(const Evaluator& ev, const Dataset& data, std::size_t k) {
  const auto scores = score_all(ev, data.inputs);
  return top_k_accuracy(scores, data.labels, k);
}

}  // namespace precis
