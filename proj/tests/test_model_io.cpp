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

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "precis/model_io.hpp"

namespace precis {
namespace {

namespace fs = std::filesystem;
using Bytes = std::vector<std::uint8_t>;

const fs::path kData = PRECIS_DATA_DIR;

// Independent little-endian writer for hand-built containers.
struct Writer {
  Bytes b;
  Writer& raw(std::string_view s) {
    b.insert(b.end(), s.begin(), s.end());
    return *this;
  }
  Writer& u8(std::uint8_t v) {
    b.push_back(v);
    return *this;
  }
  Writer& u16(std::uint16_t v) { return u8(v & 0xff).u8(v >> 8); }
  Writer& u32(std::uint32_t v) { return u16(v & 0xffff).u16(v >> 16); }
  Writer& be32(std::uint32_t v) { return u8(v >> 24).u8((v >> 16) & 0xff).u8((v >> 8) & 0xff).u8(v & 0xff); }
  Writer& f32(float f) { return u32(std::bit_cast<std::uint32_t>(f)); }
  Writer& entry(std::string_view name, std::vector<std::uint32_t> dims, std::vector<float> values) {
    u16(static_cast<std::uint16_t>(name.size())).raw(name).u8(static_cast<std::uint8_t>(dims.size()));
    for (auto d : dims) u32(d);
    for (float v : values) f32(v);
    return *this;
  }
};

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("precis_io_" + std::to_string(::getpid()) + "_" +
                                                  std::to_string(counter_++))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name) << text;
    return path_ / name;
  }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

TEST(WeightContainerTest, ParsesHandBuiltBytes) {
  Writer w;
  w.raw("PRECISW1").u32(2).entry("a", {2, 2}, {1.0f, -2.5f, 0.1f, 3e-38f}).entry("b.bias", {3}, {0.f, 1.f, 2.f});
  const WeightMap m = parse_weight_container(w.b);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.at("a").shape(), (Shape{2, 2}));
  EXPECT_EQ(m.at("a")[1], -2.5);
  EXPECT_EQ(m.at("a")[2], static_cast<double>(0.1f));
  EXPECT_EQ(m.at("a")[3], static_cast<double>(3e-38f));
  EXPECT_EQ(m.at("b.bias").shape(), (Shape{3}));
}

TEST(WeightContainerTest, RoundTripIsBitExact) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    WeightMap m;
    const int tensors = 1 + static_cast<int>(rng() % 5);
    for (int t = 0; t < tensors; ++t) {
      Shape shape;
      const int rank = 1 + static_cast<int>(rng() % 4);
      for (int d = 0; d < rank; ++d) shape.push_back(1 + rng() % 5);
      std::vector<double> v(element_count(shape));
      for (double& x : v) {
        float f;
        do f = std::bit_cast<float>(static_cast<std::uint32_t>(rng())); while (!std::isfinite(f));
        x = f;
      }
      m.insert_or_assign("t" + std::to_string(t) + "/" + std::to_string(rng() % 1000), Tensor(shape, v));
    }
    const Bytes bytes = serialize_weight_container(m);
    const WeightMap back = parse_weight_container(bytes);
    ASSERT_EQ(back.size(), m.size());
    for (const auto& [name, t] : m) {
      ASSERT_EQ(back.at(name).shape(), t.shape());
      for (std::size_t i = 0; i < t.size(); ++i) {
        ASSERT_EQ(std::bit_cast<std::uint64_t>(back.at(name)[i]), std::bit_cast<std::uint64_t>(t[i]));
      }
    }
    EXPECT_EQ(serialize_weight_container(back), bytes);
  }
}

TEST(WeightContainerTest, FileRoundTrip) {
  TempDir dir;
  WeightMap m;
  m.emplace("w", Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  save_weight_container(dir.path() / "w.bin", m);
  EXPECT_EQ(load_weight_container(dir.path() / "w.bin").at("w"), m.at("w"));
  EXPECT_THROW(load_weight_container(dir.path() / "absent.bin"), IoError);
}

std::uint64_t format_offset(const Bytes& bytes) {
  try {
    parse_weight_container(bytes);
  } catch (const FormatError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "expected FormatError";
  return 0;
}

TEST(WeightContainerTest, MalformedInputs) {
  EXPECT_EQ(format_offset(Writer().raw("PRECISW2").u32(0).b), 0u);
  EXPECT_EQ(format_offset(Writer().raw("PREC").b), 0u);
  EXPECT_EQ(format_offset(Writer().raw("PRECISW1").u32(1).b), 12u);                       // missing entry
  EXPECT_EQ(format_offset(Writer().raw("PRECISW1").u32(1).u16(1).raw("a").u8(0).b), 15u);  // rank 0
  EXPECT_EQ(format_offset(Writer().raw("PRECISW1").u32(1).entry("a", {2, 0}, {}).b), 20u);  // zero dim
  EXPECT_EQ(format_offset(Writer().raw("PRECISW1").u32(1).entry("a", {2}, {1.0f}).b), 20u);  // short payload
  EXPECT_EQ(format_offset(Writer().raw("PRECISW1").u32(1).entry("a", {1}, {std::nanf("")}).b), 20u);
  EXPECT_EQ(format_offset(Writer().raw("PRECISW1").u32(1).entry("", {1}, {1.0f}).b), 12u);
  EXPECT_EQ(format_offset(Writer().raw("PRECISW1").u32(2).entry("a", {1}, {1.f}).entry("a", {1}, {2.f}).b), 24u);
  EXPECT_EQ(format_offset(Writer().raw("PRECISW1").u32(1).entry("a", {1}, {1.f}).u8(0).b), 24u);  // trailing
  // Dimensions whose product overflows are caught before allocation.
  EXPECT_EQ(format_offset(Writer().raw("PRECISW1").u32(1).entry("a", {0xffffffffu, 0xffffffffu}, {}).b), 16u);
}

TEST(WeightContainerTest, EveryTruncationAndByteFlipIsAStructuredError) {
  WeightMap m;
  m.emplace("conv.w", Tensor({2, 1, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8}));
  m.emplace("b", Tensor({2}, {0.5, -0.5}));
  const Bytes good = serialize_weight_container(m);
  for (std::size_t n = 0; n < good.size(); ++n) {
    EXPECT_THROW(parse_weight_container(std::span(good).first(n)), FormatError) << n;
  }
  std::mt19937 rng(6);
  for (int trial = 0; trial < 5000; ++trial) {
    Bytes bad = good;
    bad[rng() % bad.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    try {
      parse_weight_container(bad);
    } catch (const Error&) {
    } catch (...) {
      FAIL() << "non-structured exception";
    }
  }
}

// Manifests.

TEST(ManifestTest, BundledLenetLoads) {
  const NetworkDef net = load_network(kData / "lenet_toy.json");
  EXPECT_EQ(net.layers.size(), 6u);
  EXPECT_EQ(net.input_shape, (Shape{1, 28, 28}));
  const auto shapes = infer_shapes(net);
  EXPECT_EQ(shapes[0], (Shape{4, 12, 12}));
  EXPECT_EQ(shapes[2], (Shape{4, 6, 6}));
  EXPECT_EQ(shapes.back(), (Shape{10}));
  EXPECT_EQ(load_network(kData / "mlp_toy.json").layers.size(), 5u);
}

std::string manifest(const std::string& layers, const std::string& extra = "") {
  return R"({"name": "t", "input_shape": [1, 4, 4], "weights": "w.bin", )" + extra + R"("layers": [)" + layers +
         "]}";
}

class ManifestErrors : public ::testing::Test {
 protected:
  void SetUp() override {
    WeightMap m;
    m.emplace("conv1.w", Tensor({2, 1, 3, 3}));
    m.emplace("conv1.b", Tensor({2}));
    m.emplace("rank3", Tensor({2, 3, 3}));
    m.emplace("fc.w", Tensor({3, 8}));
    save_weight_container(dir_.path() / "w.bin", m);
  }
  NetworkDef load(const std::string& text) { return load_network(dir_.write("m.json", text)); }
  TempDir dir_;
};

constexpr const char* kConv = R"({"name": "conv1", "kind": "conv2d", "weight": "conv1.w", "bias": "conv1.b"})";
constexpr const char* kTail = R"({"name": "flat", "kind": "flatten"}, {"name": "fc", "kind": "fully_connected", "weight": "fc.w"})";

TEST_F(ManifestErrors, ValidManifestLoads) {
  const NetworkDef net = load(manifest(std::string(kConv) + "," + kTail, R"("channel_mean": [0.5], )"));
  EXPECT_EQ(infer_shapes(net).back(), (Shape{3}));
  EXPECT_EQ(net.channel_mean, (std::vector<double>{0.5}));
}

TEST_F(ManifestErrors, MissingTensorIsNamed) {
  try {
    load(manifest(R"({"name": "conv9", "kind": "conv2d", "weight": "conv9.w"},)" + std::string(kTail)));
    FAIL();
  } catch (const MissingTensorError& e) {
    EXPECT_EQ(e.tensor(), "conv9.w");
    EXPECT_EQ(e.layer(), "conv9");
    EXPECT_NE(std::string(e.what()).find("conv9.w"), std::string::npos);
  }
}

TEST_F(ManifestErrors, ConvWeightRank3IsShapeError) {
  try {
    load(manifest(R"({"name": "conv1", "kind": "conv2d", "weight": "rank3"},)" + std::string(kTail)));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.layer(), "conv1");
  }
}

TEST_F(ManifestErrors, ChainMismatchReportsExpectedAndActual) {
  try {
    load(manifest(R"({"name": "flat", "kind": "flatten"}, {"name": "fc", "kind": "fully_connected", "weight": "fc.w"})"));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.layer(), "fc");
    EXPECT_FALSE(e.expected().empty());
    EXPECT_FALSE(e.actual().empty());
  }
}

TEST_F(ManifestErrors, ParseErrors) {
  EXPECT_THROW(load("{not json"), ParseError);
  EXPECT_THROW(load(manifest(R"({"name": "x", "kind": "lstm"})")), ParseError);
  EXPECT_THROW(load(manifest(std::string(kConv) + "," + kTail).replace(1, 6, R"("nme")")), ParseError);
  EXPECT_THROW(load(manifest(R"({"name": "c", "kind": "conv2d", "weight": "conv1.w", "dilation": 2},)" +
                             std::string(kTail))),
               ParseError);
  EXPECT_THROW(load(manifest(R"({"name": "c", "kind": "conv2d"},)" + std::string(kTail))), ParseError);
  EXPECT_THROW(load(manifest(R"({"name": "p", "kind": "max_pool", "kernel": "big"})")), ParseError);
  EXPECT_THROW(load(manifest(R"({"name": "c", "kind": "conv2d", "weight": "conv1.w", "stride": -1})")), ParseError);
  EXPECT_THROW(load(R"({"input_shape": [1, 4, 4], "layers": []})"), ParseError);
}

TEST_F(ManifestErrors, MissingFiles) {
  EXPECT_THROW(load_network(dir_.path() / "absent.json"), IoError);
  EXPECT_THROW(load(R"({"input_shape": [1, 4, 4], "weights": "nope.bin", "layers": []})"), IoError);
}

// MNIST and CIFAR-10.

Bytes idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols, std::uint8_t fill) {
  Writer w;
  w.be32(0x803).be32(count).be32(rows).be32(cols);
  w.b.insert(w.b.end(), static_cast<std::size_t>(count) * rows * cols, fill);
  return w.b;
}

Bytes idx_labels(std::vector<std::uint8_t> labels) {
  Writer w;
  w.be32(0x801).be32(static_cast<std::uint32_t>(labels.size()));
  w.b.insert(w.b.end(), labels.begin(), labels.end());
  return w.b;
}

TEST(MnistTest, BundledTestSet) {
  const Dataset d = load_mnist(kData / "mnist" / "test-images-idx3-ubyte", kData / "mnist" / "test-labels-idx1-ubyte");
  EXPECT_EQ(d.size(), 2000u);
  for (const auto& t : d.inputs) {
    ASSERT_EQ(t.shape(), (Shape{1, 28, 28}));
    for (double v : t.values()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
  }
  for (int l : d.labels) ASSERT_TRUE(l >= 0 && l <= 9);
}

TEST(MnistTest, PixelScaling) {
  Bytes img = idx_images(2, 28, 28, 0);
  img[16 + 784 + 5] = 255;
  img[16 + 784 + 6] = 51;
  const Dataset d = parse_mnist(img, idx_labels({3, 7}));
  ASSERT_EQ(d.size(), 2u);
  for (double v : d.inputs[0].values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(d.inputs[1][5], 1.0);
  EXPECT_EQ(d.inputs[1][6], static_cast<double>(51.0f / 255.0f));
  EXPECT_EQ(d.labels, (std::vector<int>{3, 7}));
}

std::uint64_t mnist_error_offset(const Bytes& img, const Bytes& lbl) {
  try {
    parse_mnist(img, lbl);
  } catch (const FormatError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "expected FormatError";
  return 0;
}

TEST(MnistTest, MalformedInputs) {
  Bytes img = idx_images(2, 28, 28, 1);
  Bytes bad_magic = img;
  bad_magic[2] = bad_magic[3] = 0;
  EXPECT_EQ(mnist_error_offset(bad_magic, idx_labels({1, 2})), 0u);
  Bytes bad_lbl = idx_labels({1, 2});
  bad_lbl[3] = 0;
  EXPECT_EQ(mnist_error_offset(img, bad_lbl), 0u);
  EXPECT_EQ(mnist_error_offset(img, idx_labels({1})), 4u);
  EXPECT_EQ(mnist_error_offset(img, idx_labels({1, 12})), 9u);
  Bytes truncated(img.begin(), img.end() - 1);
  EXPECT_THROW(parse_mnist(truncated, idx_labels({1, 2})), FormatError);
  EXPECT_THROW(parse_mnist(Bytes(7, 0), idx_labels({})), FormatError);
  for (std::size_t n = 0; n < 40; ++n) {
    EXPECT_THROW(parse_mnist(std::span(img).first(n), idx_labels({1, 2})), FormatError);
  }
}

Bytes cifar_record(std::uint8_t label, std::uint8_t fill) {
  Bytes r(3073, fill);
  r[0] = label;
  return r;
}

TEST(CifarTest, Records) {
  Bytes b = cifar_record(4, 0);
  const Bytes second = cifar_record(9, 255);
  b.insert(b.end(), second.begin(), second.end());
  b[1 + 1024] = 102;  // first pixel of the green plane
  const Dataset d = parse_cifar10(b);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.inputs[0].shape(), (Shape{3, 32, 32}));
  EXPECT_EQ(d.inputs[0][1024], static_cast<double>(102.0f / 255.0f));
  EXPECT_EQ(d.inputs[0][0], 0.0);
  EXPECT_EQ(d.inputs[1][3071], 1.0);
  EXPECT_EQ(d.labels, (std::vector<int>{4, 9}));
}

TEST(CifarTest, EmptyFileIsEmptyDataset) {
  const Dataset d = parse_cifar10(Bytes{});
  EXPECT_EQ(d.size(), 0u);
  EXPECT_TRUE(d.labels.empty());
}

TEST(CifarTest, MalformedInputs) {
  EXPECT_THROW(parse_cifar10(cifar_record(255, 0)), FormatError);
  EXPECT_THROW(parse_cifar10(Bytes(3072, 0)), FormatError);
  EXPECT_THROW(parse_cifar10(Bytes(3074, 0)), FormatError);
  Bytes two = cifar_record(1, 0);
  const Bytes bad = cifar_record(10, 0);
  two.insert(two.end(), bad.begin(), bad.end());
  try {
    parse_cifar10(two);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 3073u);
  }
  EXPECT_THROW(load_cifar10("/nonexistent/batch.bin"), IoError);
}

}  // namespace
}  // namespace precis
