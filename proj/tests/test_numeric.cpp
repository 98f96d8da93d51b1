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

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "precis/numeric.hpp"

namespace precis {
namespace {

NumericFormat Flt(int m, int e, std::optional<int> b = {}) { return FloatFormat::make(m, e, b); }
NumericFormat Fix(int i, int f) { return FixedFormat::make(i, f); }

TEST(FormatTest, WidthsAndDefaultBias) {
  EXPECT_EQ(Flt(7, 6).width(), 14);
  EXPECT_EQ(Flt(8, 6).width(), 15);
  EXPECT_EQ(Flt(2, 4).as_float().bias, 7);
  EXPECT_EQ(Flt(2, 14).as_float().bias, 8191);
  EXPECT_EQ(Fix(8, 8).width(), 17);
  EXPECT_EQ(NumericFormat::baseline().width(), 32);
}

TEST(FormatTest, RejectsInvalid) {
  EXPECT_THROW(FixedFormat::make(0, 0), DomainError);
  EXPECT_THROW(FixedFormat::make(-1, 4), DomainError);
  EXPECT_THROW(FixedFormat::make(30, 23), DomainError);
  EXPECT_THROW(FloatFormat::make(53, 8), DomainError);
  EXPECT_THROW(FloatFormat::make(2, 0), DomainError);
  EXPECT_THROW(FloatFormat::make(2, 17), DomainError);
  EXPECT_THROW(FloatFormat::make(2, 4, 5000), DomainError);
  EXPECT_NO_THROW(FloatFormat::make(0, 1));
  EXPECT_NO_THROW(FixedFormat::make(0, 1));
}

TEST(FormatTest, LiteralRoundTrip) {
  for (const char* lit : {"baseline", "float:m7e6", "float:m2e4b3", "float:m3e5b-2", "fixed:i8f8", "fixed:i0f4",
                          "float:m4e4:rne", "fixed:i3f3:rne"}) {
    EXPECT_EQ(NumericFormat::parse(lit).to_string(), lit);
  }
  EXPECT_EQ(NumericFormat::parse("float:m2e4b7").to_string(), "float:m2e4");
  EXPECT_EQ(NumericFormat::parse("float:m23e8b127").width(), 32);
}

TEST(FormatTest, LiteralErrors) {
  for (const char* lit : {"", "float", "float:m7", "float:e6m7", "float:m7e6x", "fixed:i8", "fixed:f8i8",
                          "fixed:i-1f8", "double", "baseline:rne", "float:m7e6b"}) {
    EXPECT_THROW(NumericFormat::parse(lit), ParseError) << lit;
  }
  EXPECT_THROW(NumericFormat::parse("fixed:i0f0"), DomainError);
}

// Examples from the format definitions.

TEST(QuantizeTest, Examples) {
  EXPECT_EQ(quantize(1.0, Flt(4, 4)), 1.0);
  EXPECT_EQ(quantize(300.0, Flt(2, 4)), 256.0);
  EXPECT_EQ(quantize(300.0, Fix(8, 8)), 255.99609375);
  EXPECT_EQ(quantize(0.001, Fix(8, 8)), 0.0);
  EXPECT_EQ(quantize(-300.0, Fix(8, 8)), -255.99609375);
  EXPECT_EQ(quantize(-0.001, Fix(8, 8)), 0.0);
  EXPECT_FALSE(std::signbit(quantize(-0.001, Fix(8, 8))));
  EXPECT_FALSE(std::signbit(quantize(-0.0, Flt(2, 4))));
}

TEST(QuantizeTest, ExampleAgreesWithOracle) {
  const auto g = oracle::float_grid(2, 4, 7);
  EXPECT_EQ(oracle::truncate(300.0, g), 256.0);
  EXPECT_EQ(oracle::truncate(300.0, oracle::fixed_grid(8, 8)), 255.99609375);
}

TEST(QuantizeTest, RejectsNonFinite) {
  EXPECT_THROW(quantize(std::numeric_limits<double>::infinity(), Flt(2, 4)), DomainError);
  EXPECT_THROW(quantize(std::nan(""), Fix(4, 4)), DomainError);
  EXPECT_THROW(quantize(std::nan(""), NumericFormat::baseline()), DomainError);
}

TEST(QuantizeTest, Baseline) {
  const auto b = NumericFormat::baseline();
  EXPECT_EQ(quantize(0.1, b), static_cast<double>(0.1f));
  EXPECT_EQ(quantize(1e300, b), std::numeric_limits<float>::max());
  EXPECT_EQ(quantize(-1e300, b), -std::numeric_limits<float>::max());
  EXPECT_FALSE(std::signbit(quantize(-0.0, b)));
  // Baseline rounds to nearest, not toward zero.
  EXPECT_EQ(quantize(1.0 + 0.75 * std::ldexp(1.0, -23), b), 1.0 + std::ldexp(1.0, -23));
}

TEST(RangeTest, Examples) {
  EXPECT_EQ(max_value(Fix(8, 8)), 255.99609375);
  EXPECT_EQ(min_positive(Fix(8, 8)), 0.00390625);
  EXPECT_EQ(max_value(Flt(2, 4)), 448.0);
  // The all-zero encoding is zero, so the smallest positive value has mantissa 01.
  EXPECT_EQ(min_positive(Flt(2, 4)), std::ldexp(1.25, -7));
  EXPECT_EQ(min_positive(Flt(0, 3)), std::ldexp(1.0, -2));
  // No exponent code is reserved for infinities.
  EXPECT_EQ(max_value(Flt(23, 8, 127)), std::ldexp(2.0 - std::ldexp(1.0, -23), 128));
}

TEST(RangeTest, MatchesOracleGrid) {
  for (int m = 0; m <= 5; ++m) {
    for (int e = 1; e <= 4; ++e) {
      const auto g = oracle::float_grid(m, e, FloatFormat::default_bias(e));
      EXPECT_EQ(max_value(Flt(m, e)), g.values.back());
      EXPECT_EQ(min_positive(Flt(m, e)), g.values[1]);
    }
  }
}

TEST(UlpTest, Examples) {
  EXPECT_EQ(ulp(256.0, FloatFormat::make(2, 14)), 64.0);
  EXPECT_EQ(ulp(1.0, FloatFormat::make(23, 8, 127)), std::ldexp(1.0, -23));
  EXPECT_EQ(ulp(300.0, FloatFormat::make(2, 4)), 64.0);
  EXPECT_EQ(ulp(0.0, FloatFormat::make(2, 4)), min_positive(Flt(2, 4)));
  EXPECT_EQ(ulp(-300.0, FloatFormat::make(2, 4)), 64.0);
}

TEST(ArithmeticTest, Examples) {
  EXPECT_EQ(qadd(256.0, 20.0, Flt(2, 14, 8191)), 256.0);
  EXPECT_EQ(qmul(16.0, 16.0, Fix(8, 8)), 255.99609375);
  for (double x : {0.0, 1.5, -448.0, 0.25}) EXPECT_EQ(mac(0.0, x, 0.0, Flt(2, 4)), 0.0);
  EXPECT_EQ(mac(1.0, 2.0, 3.0, Fix(4, 4)), 7.0);
  EXPECT_EQ(mac(200.0, 2.0, 64.0, Fix(8, 8)), 255.99609375);
}

TEST(ArithmeticTest, MacRoundsTwice) {
  // 1.25 * 1.25 = 1.5625 truncates to 1.5 before the add; a fused op would give 2.5625 -> 2.5.
  const auto f = Flt(2, 4);
  EXPECT_EQ(mac(1.0, 1.25, 1.25, f), 2.5);
  EXPECT_EQ(qmul(1.25, 1.25, f), 1.5);
  EXPECT_EQ(mac(0.75, 1.25, 1.25, f), 2.0);
}

TEST(ArithmeticTest, ExactBeyondDoubleRounding) {
  // The true sums/products are not doubles; the substrate result alone would round the wrong way.
  const auto wide = Flt(52, 11);
  EXPECT_EQ(qadd(1.0, -std::ldexp(1.0, -80), wide), 1.0 - std::ldexp(1.0, -53));
  EXPECT_EQ(qadd(-1.0, std::ldexp(1.0, -80), wide), -(1.0 - std::ldexp(1.0, -53)));
  const double u = 1.0 + std::ldexp(1.0, -52);
  EXPECT_EQ(qmul(u, u, wide), 1.0 + std::ldexp(1.0, -51));
  const double d = 1.0 - std::ldexp(1.0, -53);
  EXPECT_EQ(qmul(d, d, wide), 1.0 - std::ldexp(1.0, -52));
  const auto fixed = Fix(1, 51);
  EXPECT_EQ(qadd(1.0, -std::ldexp(1.0, -80), fixed), 1.0 - std::ldexp(1.0, -51));
}

TEST(ArithmeticTest, NearestEvenMode) {
  const auto f = NumericFormat::parse("float:m2e4:rne");
  EXPECT_EQ(quantize(300.0, f), 320.0);
  EXPECT_EQ(quantize(288.0, f), 256.0);  // tie between 256 (m=00) and 320 (m=01)
  EXPECT_EQ(quantize(352.0, f), 384.0);  // tie between 320 (m=01) and 384 (m=10)
  EXPECT_EQ(quantize(1000.0, f), 448.0);
  EXPECT_EQ(qadd(256.0, 32.0, f), 256.0);
  const auto w = NumericFormat::parse("float:m52e11:rne");
  EXPECT_EQ(qadd(1.0, std::ldexp(1.0, -53), w), 1.0);
  EXPECT_EQ(qadd(1.0 + std::ldexp(1.0, -52), std::ldexp(1.0, -53), w), 1.0 + std::ldexp(1.0, -51));
  // Just off the midpoint: the double sum lands on a neighbour, the residual says which side is nearer.
  EXPECT_EQ(qadd(1.0, std::ldexp(1.0, -53) + std::ldexp(1.0, -90), w), 1.0 + std::ldexp(1.0, -52));
  EXPECT_EQ(qadd(1.0, std::ldexp(1.0, -53) - std::ldexp(1.0, -90), w), 1.0);
}

TEST(CodecTest, Examples) {
  EXPECT_EQ(encode(0.0, Flt(2, 4)).bits, 0u);
  EXPECT_EQ(encode(0.0, Fix(4, 4)).bits, 0u);
  const auto one = encode(1.0, Flt(2, 4));
  EXPECT_EQ(one.width, 7);
  EXPECT_EQ(one.bits, 7u << 2);
  const auto p = encode(2.5, Fix(4, 4));
  EXPECT_EQ(p.width, 9);
  EXPECT_EQ(p.bits, 40u);
  EXPECT_EQ(encode(-2.5, Fix(4, 4)).bits, (1u << 8) | 40u);
  const auto wide = Flt(2, 14, 8191);
  EXPECT_EQ(decode({17, static_cast<std::uint64_t>(8 + 8191) << 2}, wide), 256.0);
  EXPECT_EQ(decode({17, 0}, wide), 0.0);
  EXPECT_EQ(encode(1.5f, NumericFormat::baseline()).bits, std::bit_cast<std::uint32_t>(1.5f));
}

TEST(CodecTest, Errors) {
  EXPECT_THROW(encode(300.0, Flt(2, 4)), PreconditionError);
  EXPECT_THROW(encode(0.001, Fix(8, 8)), PreconditionError);
  EXPECT_THROW(decode({8, 0}, Flt(2, 4)), DomainError);
  EXPECT_THROW(decode({7, 1u << 7}, Flt(2, 4)), DomainError);
  EXPECT_THROW(decode({17, 1}, Flt(2, 14)), DomainError);  // exponent far below the emulated range
}

TEST(EnumerateTest, Examples) {
  EXPECT_EQ(enumerate_values(Fix(1, 1)), (std::vector<double>{-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5}));
  EXPECT_THROW(enumerate_values(Flt(7, 7)), DomainError);
  EXPECT_THROW(enumerate_values(NumericFormat::baseline()), DomainError);
  EXPECT_EQ(enumerate_values(Flt(2, 4)).size(), 2u * 63u + 1u);
}

TEST(EnumerateTest, MatchesOracleAndIsStrictlyAscending) {
  std::vector<NumericFormat> fmts;
  for (int m = 0; m <= 6; ++m)
    for (int e = 1; e <= 5; ++e) fmts.push_back(Flt(m, e));
  for (int i = 0; i <= 6; ++i)
    for (int f = 0; f <= 6; ++f)
      if (i + f >= 1) fmts.push_back(Fix(i, f));
  for (const auto& fmt : fmts) {
    const auto values = enumerate_values(fmt);
    EXPECT_EQ(values, oracle::signed_values(oracle::grid_for(fmt))) << fmt.to_string();
    EXPECT_TRUE(std::adjacent_find(values.begin(), values.end(), std::greater_equal<>()) == values.end());
    EXPECT_LE(values.size(), std::size_t{1} << fmt.width());
    for (double v : values) EXPECT_EQ(quantize(v, fmt), v);
  }
}

// Exhaustive oracle comparison on a dense grid for every format of width <= 12.

std::vector<NumericFormat> narrow_formats(int max_width) {
  std::vector<NumericFormat> out;
  for (int e = 1; e < std::min(max_width, 11); ++e)  // e = 11 with bias 1023 reaches 2^1024
    for (int m = 0; 1 + e + m <= max_width; ++m) out.push_back(Flt(m, e));
  for (int i = 0; i < max_width; ++i)
    for (int f = 0; 1 + i + f <= max_width; ++f)
      if (i + f >= 1) out.push_back(Fix(i, f));
  return out;
}

TEST(OracleTest, TruncationMatchesBruteForceUpTo12Bits) {
  for (const auto& fmt : narrow_formats(12)) {
    const auto g = oracle::grid_for(fmt);
    const double top = 2.0 * g.values.back();
    constexpr int kPoints = 2001;
    for (int k = 0; k < kPoints; ++k) {
      const double x = -top + 2.0 * top * k / (kPoints - 1);
      ASSERT_EQ(quantize(x, fmt), oracle::truncate(x, g)) << fmt.to_string() << " x=" << x;
    }
    // Every grid value, its neighbours, and midpoints.
    for (std::size_t i = 0; i < g.values.size(); ++i) {
      const double v = g.values[i];
      for (double x : {v, std::nextafter(v, 0.0), std::nextafter(v, 1e9), -v, -std::nextafter(v, 1e9)}) {
        ASSERT_EQ(quantize(x, fmt), oracle::truncate(x, g)) << fmt.to_string() << " x=" << x;
      }
    }
  }
}

TEST(OracleTest, NearestEvenMatchesBruteForce) {
  for (const auto& base : narrow_formats(9)) {
    const NumericFormat fmt = base.is_float()
                                  ? NumericFormat(FloatFormat::make(base.as_float().mantissa_bits,
                                                                    base.as_float().exponent_bits, {},
                                                                    Rounding::kNearestEven))
                                  : NumericFormat(FixedFormat::make(base.as_fixed().integer_bits,
                                                                    base.as_fixed().fraction_bits,
                                                                    Rounding::kNearestEven));
    const auto g = oracle::grid_for(fmt);
    for (std::size_t i = 0; i + 1 < g.values.size(); ++i) {
      const double lo = g.values[i], hi = g.values[i + 1];
      for (double x : {lo, (lo + hi) / 2, std::nextafter((lo + hi) / 2, 0.0), std::nextafter((lo + hi) / 2, 1e9),
                       lo + (hi - lo) / 4, hi - (hi - lo) / 4}) {
        ASSERT_EQ(quantize(x, fmt), oracle::nearest_even(x, g)) << fmt.to_string() << " x=" << x;
        ASSERT_EQ(quantize(-x, fmt), oracle::nearest_even(-x, g)) << fmt.to_string() << " x=" << -x;
      }
    }
    ASSERT_EQ(quantize(3 * g.values.back(), fmt), g.values.back());
  }
}

TEST(OracleTest, ArithmeticMatchesBruteForceOnSmallFormats) {
  for (const auto& fmt : {Flt(2, 4), Flt(3, 3), Fix(3, 2), Fix(4, 4)}) {
    const auto g = oracle::grid_for(fmt);
    const auto values = oracle::signed_values(g);
    for (double a : values) {
      for (double b : values) {
        ASSERT_EQ(qadd(a, b, fmt), oracle::truncate(a + b, g)) << fmt.to_string();
        ASSERT_EQ(qmul(a, b, fmt), oracle::truncate(a * b, g)) << fmt.to_string();
      }
    }
  }
}

TEST(RoundTripTest, EveryPatternUpTo12Bits) {
  for (const auto& fmt : narrow_formats(12)) {
    for (double v : enumerate_values(fmt)) {
      const BitPattern p = encode(v, fmt);
      ASSERT_LT(p.bits, std::uint64_t{1} << p.width);
      ASSERT_EQ(decode(p, fmt), v) << fmt.to_string();
    }
  }
}

// Randomized properties.

struct Sample {
  NumericFormat fmt;
  double x;
};

Sample random_sample(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind(0, 2);
  NumericFormat fmt = NumericFormat::baseline();
  switch (kind(rng)) {
    case 0: {
      std::uniform_int_distribution<int> m(0, 30), e(1, 11), shift(-20, 20);
      const int ee = e(rng);
      fmt = FloatFormat::make(m(rng), ee, FloatFormat::default_bias(ee) + shift(rng) * (ee > 5));
      break;
    }
    case 1: {
      std::uniform_int_distribution<int> i(0, 24), f(0, 24);
      int ii = i(rng), ff = f(rng);
      if (ii + ff == 0) ff = 1;
      fmt = FixedFormat::make(ii, ff);
      break;
    }
    default:
      break;
  }
  std::uniform_real_distribution<double> mant(1.0, 2.0), lg(-40.0, 40.0), sign(0.0, 1.0);
  double x = mant(rng) * std::pow(2.0, std::floor(lg(rng)));
  if (sign(rng) < 0.5) x = -x;
  return {fmt, x};
}

constexpr int kRandomCases = 200000;

TEST(PropertyTest, IdempotenceSignSymmetryTruncationBound) {
  std::mt19937_64 rng(1);
  for (int n = 0; n < kRandomCases; ++n) {
    const auto [fmt, x] = random_sample(rng);
    const double q = quantize(x, fmt);
    ASSERT_EQ(quantize(q, fmt), q) << fmt.to_string() << " x=" << x;
    ASSERT_EQ(quantize(-x, fmt), -q + 0.0) << fmt.to_string() << " x=" << x;
    if (!fmt.is_baseline() && std::fabs(x) <= max_value(fmt)) {
      ASSERT_LE(std::fabs(q), std::fabs(x)) << fmt.to_string() << " x=" << x;
    }
    ASSERT_LE(std::fabs(q), max_value(fmt));
    ASSERT_TRUE(q == 0.0 || std::fabs(q) >= min_positive(fmt));
  }
}

TEST(PropertyTest, Monotonicity) {
  std::mt19937_64 rng(2);
  for (int n = 0; n < kRandomCases; ++n) {
    auto [fmt, x] = random_sample(rng);
    auto [unused, y] = random_sample(rng);
    if (n % 2) y = std::nextafter(x, 1e300);  // adjacent pairs stress the boundaries
    if (x > y) std::swap(x, y);
    ASSERT_LE(quantize(x, fmt), quantize(y, fmt)) << fmt.to_string() << " x=" << x << " y=" << y;
  }
}

TEST(PropertyTest, BaselineIdentityOnSinglePrecisionValues) {
  std::mt19937 rng(3);
  const auto b = NumericFormat::baseline();
  for (int n = 0; n < kRandomCases; ++n) {
    const float f = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
    if (!std::isfinite(f)) continue;
    ASSERT_EQ(quantize(f, b), f == 0.0f ? 0.0 : static_cast<double>(f));
  }
}

TEST(PropertyTest, RoundedArithmeticIsExactlyRounded) {
  // Operands with short significands, keeping only cases where the double
  // sum or product is exact, so quantize() of it is the reference.
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> sig(1 << 19, (1 << 20) - 1), sh(-30, 30), sg(0, 1);
  for (int n = 0; n < kRandomCases / 2; ++n) {
    auto [fmt, unused] = random_sample(rng);
    const double a = quantize((sg(rng) ? -1 : 1) * std::ldexp(sig(rng), sh(rng)), fmt);
    const double b = quantize((sg(rng) ? -1 : 1) * std::ldexp(sig(rng), sh(rng)), fmt);
    const double prod = a * b;
    if (std::fma(a, b, -prod) == 0.0) {
      ASSERT_EQ(qmul(a, b, fmt), quantize(prod, fmt)) << fmt.to_string();
    }
    const double sum = a + b;
    if (sum - a == b && sum - b == a) {
      ASSERT_EQ(qadd(a, b, fmt), quantize(sum, fmt)) << fmt.to_string();
    }
  }
}

}  // namespace
}  // namespace precis
