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
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace precis {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the operation's domain (non-finite input, bad index, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition (e.g. encoding an unrepresentable value).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed text: format literals, manifests, cost tables, sweep files.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// File missing or unreadable.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary file. `offset` is the byte position where decoding stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

inline std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Shape inconsistency attributed to a named layer or tensor.
class ShapeError : public Error {
 public:
  ShapeError(std::string layer, const std::vector<std::size_t>& expected,
             const std::vector<std::size_t>& actual, const std::string& detail = {})
      : Error("shape mismatch in '" + layer + "': expected " + shape_to_string(expected) +
              ", got " + shape_to_string(actual) + (detail.empty() ? "" : " (" + detail + ")")),
        layer_(std::move(layer)),
        expected_(expected),
        actual_(actual) {}

  ShapeError(std::string layer, const std::string& detail)
      : Error("shape error in '" + layer + "': " + detail), layer_(std::move(layer)) {}

  const std::string& layer() const noexcept { return layer_; }
  const std::vector<std::size_t>& expected() const noexcept { return expected_; }
  const std::vector<std::size_t>& actual() const noexcept { return actual_; }

 private:
  std::string layer_;
  std::vector<std::size_t> expected_;
  std::vector<std::size_t> actual_;
};

class MissingTensorError : public Error {
 public:
  MissingTensorError(std::string layer, std::string tensor)
      : Error("layer '" + layer + "' references missing tensor '" + tensor + "'"),
        layer_(std::move(layer)),
        tensor_(std::move(tensor)) {}

  const std::string& layer() const noexcept { return layer_; }
  const std::string& tensor() const noexcept { return tensor_; }

 private:
  std::string layer_;
  std::string tensor_;
};

}  // namespace precis
