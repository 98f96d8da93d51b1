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

// Loaders for networks, weights and benchmark datasets.
//
// Weight container (all integers little-endian):
//
//   "PRECISW1"                      8-byte magic
//   u32 entry_count
//   entry_count times:
//     u16 name_length, name bytes (UTF-8)
//     u8 rank, rank x u32 dims
//     product(dims) x IEEE-754 binary32 payload
//
// Network manifests are JSON documents; see README.md for the schema.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "precis/error.hpp"
#include "precis/network.hpp"
#include "precis/tensor.hpp"

namespace precis {

using WeightMap = std::map<std::string, Tensor>;

inline constexpr char kWeightMagic[8] = {'P', 'R', 'E', 'C', 'I', 'S', 'W', '1'};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return bytes;
}

namespace detail {

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  std::uint64_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::span<const std::uint8_t> take(std::size_t n, const char* field) {
    if (remaining() < n) {
      throw FormatError(what_ + ": truncated while reading " + field + " (need " + std::to_string(n) +
                            " bytes, " + std::to_string(remaining()) + " left)",
                        pos_);
    }
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  template <class T>
  T le(const char* field) {
    auto b = take(sizeof(T), field);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(b[i]) << (8 * i));
    return v;
  }

  std::uint32_t be32(const char* field) {
    auto b = take(4, field);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
  }

  [[noreturn]] void fail(const std::string& msg, std::uint64_t at) const { throw FormatError(what_ + ": " + msg, at); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Weight container

inline WeightMap parse_weight_container(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "weight container");
  auto magic = r.take(8, "magic");
  if (std::memcmp(magic.data(), kWeightMagic, 8) != 0) r.fail("bad magic (expected PRECISW1)", 0);
  const auto count = r.le<std::uint32_t>("entry count");
  WeightMap out;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto entry_at = r.offset();
    const auto name_len = r.le<std::uint16_t>("name length");
    auto name_bytes = r.take(name_len, "name");
    std::string name(name_bytes.begin(), name_bytes.end());
    if (name.empty()) r.fail("empty tensor name", entry_at);
    const auto rank = r.le<std::uint8_t>("rank");
    if (rank == 0) r.fail("tensor '" + name + "' has rank 0", r.offset() - 1);
    Shape shape;
    std::uint64_t count_elems = 1;
    for (int d = 0; d < rank; ++d) {
      const auto dim_at = r.offset();
      const auto dim = r.le<std::uint32_t>("dimension");
      if (dim == 0) r.fail("tensor '" + name + "' has a zero dimension", dim_at);
      if (dim > r.remaining() / count_elems) r.fail("tensor '" + name + "' payload exceeds file size", dim_at);
      count_elems *= dim;
      shape.push_back(dim);
    }
    const auto payload_at = r.offset();
    auto payload = r.take(count_elems * 4, "payload");
    std::vector<double> data(count_elems);
    for (std::size_t i = 0; i < count_elems; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= std::uint32_t{payload[i * 4 + b]} << (8 * b);
      const float f = std::bit_cast<float>(bits);
      if (!std::isfinite(f)) r.fail("tensor '" + name + "' holds a non-finite value", payload_at + i * 4);
      data[i] = f;
    }
    if (!out.emplace(name, Tensor(shape, std::move(data))).second) {
      r.fail("duplicate tensor name '" + name + "'", entry_at);
    }
  }
  if (r.remaining() != 0) r.fail("trailing bytes after last entry", r.offset());
  return out;
}

/// Serializes tensors in name order. Values must be representable in single
/// precision for the round trip to be exact.
inline std::vector<std::uint8_t> serialize_weight_container(const WeightMap& weights) {
  std::vector<std::uint8_t> out(kWeightMagic, kWeightMagic + 8);
  detail::put_le(out, weights.size(), 4);
  for (const auto& [name, t] : weights) {
    if (name.empty() || name.size() > 0xffff) throw DomainError("tensor name length out of range");
    if (t.rank() == 0 || t.rank() > 0xff) throw DomainError("tensor '" + name + "' rank out of range");
    detail::put_le(out, name.size(), 2);
    out.insert(out.end(), name.begin(), name.end());
    detail::put_le(out, t.rank(), 1);
    for (std::size_t d : t.shape()) detail::put_le(out, d, 4);
    for (double v : t.values()) detail::put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
  }
  return out;
}

inline WeightMap load_weight_container(const std::filesystem::path& path) {
  return parse_weight_container(read_file(path));
}

inline void save_weight_container(const std::filesystem::path& path, const WeightMap& weights) {
  const auto bytes = serialize_weight_container(weights);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------------------
// Network manifest

namespace detail {

inline std::size_t manifest_uint(const nlohmann::json& j, const char* key, const std::string& layer) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) throw ParseError("layer '" + layer + "': '" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

inline LayerDef parse_layer(const nlohmann::json& j, std::size_t index) {
  if (!j.is_object()) throw ParseError("layer " + std::to_string(index) + " is not an object");
  LayerDef layer;
  layer.name = j.value("name", "layer" + std::to_string(index));
  const std::string kind = j.at("kind").get<std::string>();
  auto parsed = parse_layer_kind(kind);
  if (!parsed) throw ParseError("layer '" + layer.name + "': unknown layer kind '" + kind + "'");
  layer.kind = *parsed;
  static const std::set<std::string> known = {"name",   "kind",    "kernel", "stride", "padding",
                                              "units",  "out_channels", "weight", "bias"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ParseError("layer '" + layer.name + "': unknown key '" + key + "'");
  }
  if (j.contains("kernel")) {
    const auto& k = j.at("kernel");
    if (k.is_array() && k.size() == 2) {
      layer.kernel_h = k[0].get<std::size_t>();
      layer.kernel_w = k[1].get<std::size_t>();
    } else if (k.is_number_unsigned()) {
      layer.kernel_h = layer.kernel_w = k.get<std::size_t>();
    } else {
      throw ParseError("layer '" + layer.name + "': 'kernel' must be an integer or [h, w]");
    }
  }
  if (j.contains("stride")) layer.stride = manifest_uint(j, "stride", layer.name);
  if (j.contains("padding")) layer.padding = manifest_uint(j, "padding", layer.name);
  if (j.contains("out_channels")) layer.out_channels = manifest_uint(j, "out_channels", layer.name);
  if (j.contains("units")) layer.out_channels = manifest_uint(j, "units", layer.name);
  layer.weight = j.value("weight", std::string{});
  layer.bias = j.value("bias", std::string{});
  if (layer.has_weights() && layer.weight.empty()) {
    throw ParseError("layer '" + layer.name + "': " + kind + " requires a 'weight' tensor name");
  }
  return layer;
}

}  // namespace detail

/// Builds a network from manifest JSON. Relative weight paths resolve against
/// `base_dir`. The result is fully shape-checked.
inline NetworkDef parse_network(const std::string& manifest_text, const std::filesystem::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(manifest_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("manifest: top level must be an object");
  static const std::set<std::string> known = {"name", "input_shape", "channel_mean", "weights", "layers"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ParseError("manifest: unknown key '" + key + "'");
  }
  NetworkDef net;
  try {
    net.name = j.value("name", std::string{"network"});
    for (const auto& d : j.at("input_shape")) net.input_shape.push_back(d.get<std::size_t>());
    if (j.contains("channel_mean")) {
      for (const auto& m : j.at("channel_mean")) net.channel_mean.push_back(static_cast<float>(m.get<double>()));
    }
    const auto& layers = j.at("layers");
    if (!layers.is_array()) throw ParseError("manifest: 'layers' must be an array");
    for (std::size_t i = 0; i < layers.size(); ++i) net.layers.push_back(detail::parse_layer(layers[i], i));
    const std::filesystem::path weights = j.at("weights").get<std::string>();
    net.weights = load_weight_container(weights.is_absolute() ? weights : base_dir / weights);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  infer_shapes(net);
  return net;
}

inline NetworkDef load_network(const std::filesystem::path& manifest_path) {
  const auto bytes = read_file(manifest_path);
  return parse_network(std::string(bytes.begin(), bytes.end()), manifest_path.parent_path());
}

// ---------------------------------------------------------------------------
// Datasets

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * 32 * 32;

/// MNIST IDX pair. Images become [1, rows, cols] tensors scaled to [0, 1].
inline Dataset parse_mnist(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes) {
  detail::ByteReader img(image_bytes, "MNIST images");
  if (img.be32("magic") != kIdxImageMagic) img.fail("bad magic (expected 0x00000803)", 0);
  const std::uint32_t count = img.be32("image count");
  const std::uint32_t rows = img.be32("row count");
  const std::uint32_t cols = img.be32("column count");
  if (rows == 0 || cols == 0) img.fail("zero image dimension", 8);

  detail::ByteReader lbl(label_bytes, "MNIST labels");
  if (lbl.be32("magic") != kIdxLabelMagic) lbl.fail("bad magic (expected 0x00000801)", 0);
  const std::uint32_t label_count = lbl.be32("label count");
  if (label_count != count) {
    lbl.fail(std::to_string(label_count) + " labels for " + std::to_string(count) + " images", 4);
  }
  const std::size_t pixels = std::size_t{rows} * cols;
  if (count > img.remaining() / pixels || img.remaining() != pixels * count) {
    img.fail("pixel payload is " + std::to_string(img.remaining()) + " bytes, expected " +
                 std::to_string(pixels * count),
             img.offset() + img.remaining());
  }
  if (lbl.remaining() != count) {
    lbl.fail("label payload is " + std::to_string(lbl.remaining()) + " bytes, expected " + std::to_string(count),
             lbl.offset() + std::min<std::size_t>(lbl.remaining(), count));
  }
  Dataset out;
  out.inputs.reserve(count);
  out.labels.reserve(count);
  for (std::uint32_t n = 0; n < count; ++n) {
    const auto at = lbl.offset();
    const std::uint8_t label = lbl.le<std::uint8_t>("label");
    if (label > 9) lbl.fail("label " + std::to_string(label) + " outside 0-9", at);
    auto raw = img.take(pixels, "pixels");
    std::vector<double> data(pixels);
    for (std::size_t i = 0; i < pixels; ++i) data[i] = static_cast<double>(static_cast<float>(raw[i]) / 255.0f);
    out.inputs.emplace_back(Shape{1, rows, cols}, std::move(data));
    out.labels.push_back(label);
  }
  return out;
}

inline Dataset load_mnist(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  return parse_mnist(read_file(images_path), read_file(labels_path));
}

/// CIFAR-10 binary batch: records of one label byte plus 3x32x32 channel-planar
/// pixels. Images become [3, 32, 32] tensors scaled to [0, 1].
inline Dataset parse_cifar10(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "CIFAR-10 batch");
  if (bytes.size() % kCifarRecordBytes != 0) {
    r.fail("size " + std::to_string(bytes.size()) + " is not a multiple of " + std::to_string(kCifarRecordBytes),
           bytes.size() - bytes.size() % kCifarRecordBytes);
  }
  Dataset out;
  const std::size_t count = bytes.size() / kCifarRecordBytes;
  for (std::size_t n = 0; n < count; ++n) {
    const auto at = r.offset();
    const std::uint8_t label = r.le<std::uint8_t>("label");
    if (label > 9) r.fail("label " + std::to_string(label) + " outside 0-9", at);
    auto raw = r.take(kCifarRecordBytes - 1, "pixels");
    std::vector<double> data(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) data[i] = static_cast<double>(static_cast<float>(raw[i]) / 255.0f);
    out.inputs.emplace_back(Shape{3, 32, 32}, std::move(data));
    out.labels.push_back(label);
  }
  return out;
}

inline Dataset load_cifar10(const std::filesystem::path& path) { return parse_cifar10(read_file(path)); }

}  // namespace precis
