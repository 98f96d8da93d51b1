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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "precis/error.hpp"

namespace precis {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major array of finite reals.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(element_count(shape_), 0.0) {
    check_dims();
  }

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != element_count(shape_)) {
      throw ShapeError("tensor", "data length " + std::to_string(data_.size()) +
                                     " does not match shape " + shape_to_string(shape_));
    }
    for (double v : data_) {
      if (!std::isfinite(v)) throw DomainError("tensor: non-finite element");
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  /// Same data viewed with another shape of equal element count.
  Tensor reshaped(Shape shape) const {
    if (element_count(shape) != data_.size()) {
      throw ShapeError("tensor", shape, shape_, "reshape changes element count");
    }
    Tensor out;
    out.shape_ = std::move(shape);
    out.data_ = data_;
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  void check_dims() const {
    for (std::size_t d : shape_) {
      if (d == 0) throw ShapeError("tensor", "zero-sized dimension in " + shape_to_string(shape_));
    }
  }

  Shape shape_;
  std::vector<double> data_;
};

/// Inputs paired with integer class labels.
struct Dataset {
  std::vector<Tensor> inputs;
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }

  /// Subset in the order given by `indices`.
  Dataset select(std::span<const std::size_t> indices) const {
    Dataset out;
    for (std::size_t i : indices) {
      if (i >= inputs.size()) throw DomainError("dataset index " + std::to_string(i) + " out of range");
      out.inputs.push_back(inputs[i]);
      out.labels.push_back(labels[i]);
    }
    return out;
  }

  Dataset head(std::size_t n) const {
    Dataset out;
    n = std::min(n, inputs.size());
    out.inputs.assign(inputs.begin(), inputs.begin() + static_cast<std::ptrdiff_t>(n));
    out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
  }
};

}  // namespace precis
