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

// Customized-precision number formats and the arithmetic performed in them.
//
// Every value is carried in a double. A format only decides which doubles are
// representable; `quantize` maps an arbitrary finite double onto that set.
// Custom formats have no infinities, NaNs or subnormals: overflow saturates to
// the largest magnitude, underflow flushes to zero, and the default rounding
// truncates toward zero.

#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "precis/error.hpp"

namespace precis {

enum class Rounding { kTruncate, kNearestEven };

/// Sign | exponent | mantissa with an implicit leading one.
///
/// The all-zero exponent and mantissa pattern is reserved for zero, so the
/// smallest positive value is 2^(-bias) * (1 + 2^-mantissa_bits).
struct FloatFormat {
  static constexpr int kMaxExponentBits = 16;

  int mantissa_bits = 23;
  int exponent_bits = 8;
  int bias = 127;
  Rounding rounding = Rounding::kTruncate;

  static constexpr int default_bias(int exponent_bits) { return (1 << (exponent_bits - 1)) - 1; }

  /// Validating constructor; `bias` defaults to 2^(exponent_bits-1) - 1.
  static FloatFormat make(int mantissa_bits, int exponent_bits, std::optional<int> bias = {},
                          Rounding rounding = Rounding::kTruncate);

  int width() const { return 1 + exponent_bits + mantissa_bits; }
  int min_exponent() const { return -bias; }
  int max_exponent() const { return (1 << exponent_bits) - 1 - bias; }

  friend bool operator==(const FloatFormat&, const FloatFormat&) = default;
};

/// Sign-magnitude fixed point: one sign bit plus integer_bits + fraction_bits
/// magnitude bits.
struct FixedFormat {
  int integer_bits = 8;
  int fraction_bits = 8;
  Rounding rounding = Rounding::kTruncate;

  static FixedFormat make(int integer_bits, int fraction_bits,
                          Rounding rounding = Rounding::kTruncate);

  int magnitude_bits() const { return integer_bits + fraction_bits; }
  int width() const { return 1 + magnitude_bits(); }

  friend bool operator==(const FixedFormat&, const FixedFormat&) = default;
};

/// IEEE-754 single precision, rounded to nearest.
struct BaselineFormat {
  int width() const { return 32; }
  friend bool operator==(const BaselineFormat&, const BaselineFormat&) = default;
};

enum class FormatKind { kBaseline, kFloat, kFixed };

class NumericFormat {
 public:
  NumericFormat() = default;
  NumericFormat(BaselineFormat f) : value_(f) {}
  NumericFormat(FloatFormat f) : value_(f) {}
  NumericFormat(FixedFormat f) : value_(f) {}

  static NumericFormat baseline() { return BaselineFormat{}; }

  /// Parses `baseline`, `float:m<M>e<E>[b<B>]` or `fixed:i<I>f<F>`, each
  /// optionally followed by `:rne` to select round-to-nearest-even.
  static NumericFormat parse(std::string_view literal);

  FormatKind kind() const { return static_cast<FormatKind>(value_.index()); }
  bool is_baseline() const { return kind() == FormatKind::kBaseline; }
  bool is_float() const { return kind() == FormatKind::kFloat; }
  bool is_fixed() const { return kind() == FormatKind::kFixed; }

  const FloatFormat& as_float() const { return std::get<FloatFormat>(value_); }
  const FixedFormat& as_fixed() const { return std::get<FixedFormat>(value_); }

  int width() const {
    return std::visit([](const auto& f) { return f.width(); }, value_);
  }

  /// Canonical literal; parse(to_string()) == *this. The bias is printed only
  /// when it differs from the default.
  std::string to_string() const;

  const std::variant<BaselineFormat, FloatFormat, FixedFormat>& variant() const { return value_; }

  friend bool operator==(const NumericFormat&, const NumericFormat&) = default;

 private:
  std::variant<BaselineFormat, FloatFormat, FixedFormat> value_;
};

struct BitPattern {
  int width = 0;
  std::uint64_t bits = 0;
  friend bool operator==(const BitPattern&, const BitPattern&) = default;
};

// ---------------------------------------------------------------------------
// Quantizers. Each is a small value type whose call operator maps a finite
// double onto the format. `exact(s, err)` rounds the unevaluated sum s + err,
// where err is the residual of an error-free transformation, so results are
// correct even when the double substrate had to round first.

/// Exponent range of the double substrate's normal numbers. Float formats
/// whose own range is wider are emulated over the intersection.
inline constexpr int kMinSubstrateExponent = -1022;
inline constexpr int kMaxSubstrateExponent = 1023;

namespace detail {

constexpr std::uint64_t kSignMask = 0x8000000000000000ull;
constexpr std::uint64_t kFracMask = 0x000fffffffffffffull;

inline bool same_sign(double a, double b) { return (a < 0) == (b < 0); }

}  // namespace detail

class FloatQuantizer {
 public:
  explicit FloatQuantizer(const FloatFormat& f)
      : mantissa_bits_(f.mantissa_bits),
        bias_(f.bias),
        emin_(std::max(f.min_exponent(), kMinSubstrateExponent)),
        emax_(std::min(f.max_exponent(), kMaxSubstrateExponent)),
        zero_exp_(f.min_exponent() >= kMinSubstrateExponent ? emin_ : kNoReservedExponent),
        rne_(f.rounding == Rounding::kNearestEven),
        keep_mask_(~((std::uint64_t{1} << (52 - f.mantissa_bits)) - 1)),
        max_(std::ldexp(2.0 - std::ldexp(1.0, -f.mantissa_bits), emax_)),
        min_pos_(zero_exp_ != emin_            ? std::ldexp(1.0, emin_)
                 : f.mantissa_bits == 0        ? std::ldexp(1.0, emin_ + 1)
                                               : std::ldexp(1.0 + std::ldexp(1.0, -f.mantissa_bits), emin_)) {}

  double max_value() const { return max_; }
  double min_positive() const { return min_pos_; }

  double operator()(double x) const { return rne_ ? nearest(x) : truncate(x); }

  double exact(double s, double err) const {
    const double r = (*this)(s);
    if (err == 0.0 || s == 0.0) return r;
    if (!rne_) {
      // s already on the grid but the true value lies just below it in magnitude.
      if (r == s && !detail::same_sign(err, s)) return truncate(std::nextafter(s, 0.0));
      return r;
    }
    return resolve_tie(s, err, r);
  }

  /// Spacing between adjacent values at the magnitude of representable `v`.
  double spacing(double v) const {
    if (v == 0.0) return min_pos_;
    return std::ldexp(1.0, std::ilogb(v) - mantissa_bits_);
  }

 private:
  double truncate(double x) const {
    const std::uint64_t b = std::bit_cast<std::uint64_t>(x);
    const std::uint64_t sign = b & detail::kSignMask;
    std::uint64_t mag = b & ~detail::kSignMask;
    const int e = static_cast<int>(mag >> 52) - 1023;
    if (e > emax_) return sign ? -max_ : max_;
    if (e < emin_) return 0.0;
    mag &= keep_mask_;
    if (e == zero_exp_ && (mag & detail::kFracMask) == 0) return 0.0;
    return std::bit_cast<double>(mag | sign);
  }

  double nearest(double x) const {
    const double a = std::fabs(x);
    if (a == 0.0) return 0.0;
    double r;
    const int e = std::ilogb(a);
    if (e > emax_) {
      r = max_;
    } else if (e < emin_) {
      r = near_zero(a);
    } else {
      const double scaled = std::ldexp(a, mantissa_bits_ - e);
      double m = std::nearbyint(scaled);
      // With no mantissa bits the tie is between two exponent codes; keep the even one.
      if (mantissa_bits_ == 0 && scaled == 1.5) m = ((e + bias_) & 1) == 0 ? 1.0 : 2.0;
      r = std::ldexp(m, e - mantissa_bits_);
      if (r > max_) r = max_;
      if (zero_exp_ == emin_ && r == std::ldexp(1.0, emin_)) r = near_zero(a);
    }
    return r == 0.0 ? 0.0 : std::copysign(r, x);
  }

  // Only 0 and min_positive exist below 2^emin; ties go to zero.
  double near_zero(double a) const { return a > min_pos_ - a ? min_pos_ : 0.0; }

  double resolve_tie(double s, double err, double r) const {
    const double a = std::fabs(s);
    const double lo = std::fabs(truncate(s));
    if (lo == 0.0 || lo == max_ || a == lo) return r;
    const double step = spacing(lo);
    if (a - lo != step / 2) return r;
    // s is a midpoint: the residual decides which neighbour is nearer.
    const bool up = detail::same_sign(err, s);
    const double pick = up ? std::min(lo + step, max_) : lo;
    return std::copysign(pick, s);
  }

  static constexpr int kNoReservedExponent = std::numeric_limits<int>::min();

  int mantissa_bits_;
  int bias_;
  int emin_;
  int emax_;
  int zero_exp_;  // exponent whose zero-mantissa encoding is reserved for 0.0
  bool rne_;
  std::uint64_t keep_mask_;
  double max_;
  double min_pos_;
};

class FixedQuantizer {
 public:
  explicit FixedQuantizer(const FixedFormat& f)
      : rne_(f.rounding == Rounding::kNearestEven),
        scale_(std::ldexp(1.0, f.fraction_bits)),
        inv_scale_(std::ldexp(1.0, -f.fraction_bits)),
        max_steps_(std::ldexp(1.0, f.magnitude_bits()) - 1.0) {}

  double max_value() const { return max_steps_ * inv_scale_; }
  double min_positive() const { return inv_scale_; }
  double spacing(double) const { return inv_scale_; }

  double operator()(double x) const {
    const double scaled = std::fabs(x) * scale_;
    double steps = rne_ ? std::nearbyint(scaled) : std::trunc(scaled);
    if (steps > max_steps_) steps = max_steps_;
    if (steps == 0.0) return 0.0;
    return std::copysign(steps * inv_scale_, x);
  }

  double exact(double s, double err) const {
    const double r = (*this)(s);
    if (err == 0.0 || s == 0.0) return r;
    if (!rne_) {
      if (r == s && !detail::same_sign(err, s)) {
        return (*this)(std::copysign(std::fabs(s) - inv_scale_, s));
      }
      return r;
    }
    const double scaled = std::fabs(s) * scale_;
    if (scaled >= max_steps_ || scaled - std::trunc(scaled) != 0.5) return r;
    const double lo = std::trunc(scaled);
    const double steps = detail::same_sign(err, s) ? lo + 1.0 : lo;
    if (steps == 0.0) return 0.0;
    return std::copysign(steps * inv_scale_, s);
  }

 private:
  bool rne_;
  double scale_;
  double inv_scale_;
  double max_steps_;
};

class BaselineQuantizer {
 public:
  double max_value() const { return std::numeric_limits<float>::max(); }
  double min_positive() const { return std::numeric_limits<float>::denorm_min(); }

  double operator()(double x) const {
    float f = static_cast<float>(x);
    if (std::isinf(f)) f = std::copysign(std::numeric_limits<float>::max(), f);
    return f == 0.0f ? 0.0 : static_cast<double>(f);
  }

  // Rounding a double-precision +, * or / result of two floats to float is
  // already correctly rounded, so the residual never matters here.
  double exact(double s, double) const { return (*this)(s); }
};

using Quantizer = std::variant<BaselineQuantizer, FloatQuantizer, FixedQuantizer>;

inline Quantizer make_quantizer(const NumericFormat& fmt) {
  switch (fmt.kind()) {
    case FormatKind::kFloat: return FloatQuantizer(fmt.as_float());
    case FormatKind::kFixed: return FixedQuantizer(fmt.as_fixed());
    case FormatKind::kBaseline: break;
  }
  return BaselineQuantizer{};
}

/// Calls `fn` with the concrete quantizer type so hot loops are monomorphic.
template <class Fn>
decltype(auto) with_quantizer(const NumericFormat& fmt, Fn&& fn) {
  return std::visit(std::forward<Fn>(fn), make_quantizer(fmt));
}

/// Arithmetic in a format. Sums and products are formed exactly (value plus
/// rounding residual) and then rounded once by the quantizer.
template <class Q>
struct Arith {
  Q q;

  double add(double a, double b) const {
    const double s = a + b;
    const double bb = s - a;
    const double err = (a - (s - bb)) + (b - bb);
    return q.exact(s, err);
  }

  double mul(double a, double b) const {
    const double p = a * b;
    return q.exact(p, std::fma(a, b, -p));
  }

  double mac(double acc, double a, double b) const { return add(acc, mul(a, b)); }
};

// ---------------------------------------------------------------------------

namespace detail {

inline void require_finite(double x, const char* op) {
  if (!std::isfinite(x)) throw DomainError(std::string(op) + ": non-finite input");
}

}  // namespace detail

inline double quantize(double x, const NumericFormat& fmt) {
  detail::require_finite(x, "quantize");
  return with_quantizer(fmt, [x](const auto& q) { return q(x); });
}

inline double max_value(const NumericFormat& fmt) {
  return with_quantizer(fmt, [](const auto& q) { return q.max_value(); });
}

inline double min_positive(const NumericFormat& fmt) {
  return with_quantizer(fmt, [](const auto& q) { return q.min_positive(); });
}

/// Gap between adjacent representable values at the magnitude of quantize(x).
inline double ulp(double x, const FloatFormat& fmt) {
  detail::require_finite(x, "ulp");
  const FloatQuantizer q(fmt);
  return q.spacing(std::fabs(q(x)));
}

inline double qadd(double a, double b, const NumericFormat& fmt) {
  detail::require_finite(a, "qadd");
  detail::require_finite(b, "qadd");
  return with_quantizer(fmt, [&](const auto& q) { return Arith<std::decay_t<decltype(q)>>{q}.add(a, b); });
}

inline double qmul(double a, double b, const NumericFormat& fmt) {
  detail::require_finite(a, "qmul");
  detail::require_finite(b, "qmul");
  return with_quantizer(fmt, [&](const auto& q) { return Arith<std::decay_t<decltype(q)>>{q}.mul(a, b); });
}

/// acc + a*b with two rounding events: one after the product, one after the sum.
inline double mac(double acc, double a, double b, const NumericFormat& fmt) {
  return qadd(acc, qmul(a, b, fmt), fmt);
}

// ---------------------------------------------------------------------------
// Bit-level encodings.

inline BitPattern encode(double x, const NumericFormat& fmt) {
  detail::require_finite(x, "encode");
  if (quantize(x, fmt) != x) {
    throw PreconditionError("encode: value " + std::to_string(x) + " is not representable in " +
                            fmt.to_string());
  }
  const int width = fmt.width();
  if (x == 0.0) return {width, 0};
  const std::uint64_t sign = std::signbit(x) ? 1 : 0;
  const double a = std::fabs(x);
  switch (fmt.kind()) {
    case FormatKind::kBaseline:
      return {width, std::bit_cast<std::uint32_t>(static_cast<float>(x))};
    case FormatKind::kFloat: {
      const auto& f = fmt.as_float();
      const int e = std::ilogb(a);
      const auto field = static_cast<std::uint64_t>(e + f.bias);
      const auto mant = static_cast<std::uint64_t>(std::ldexp(a, f.mantissa_bits - e)) -
                        (std::uint64_t{1} << f.mantissa_bits);
      return {width, (sign << (f.exponent_bits + f.mantissa_bits)) | (field << f.mantissa_bits) | mant};
    }
    case FormatKind::kFixed: {
      const auto& f = fmt.as_fixed();
      const auto mag = static_cast<std::uint64_t>(std::ldexp(a, f.fraction_bits));
      return {width, (sign << f.magnitude_bits()) | mag};
    }
  }
  return {width, 0};
}

inline double decode(const BitPattern& p, const NumericFormat& fmt) {
  if (p.width != fmt.width()) {
    throw DomainError("decode: pattern width " + std::to_string(p.width) + " does not match " +
                      fmt.to_string() + " (width " + std::to_string(fmt.width()) + ")");
  }
  if (p.width < 64 && (p.bits >> p.width) != 0) {
    throw DomainError("decode: pattern has bits set above its width");
  }
  switch (fmt.kind()) {
    case FormatKind::kBaseline: {
      const float f = std::bit_cast<float>(static_cast<std::uint32_t>(p.bits));
      if (!std::isfinite(f)) throw DomainError("decode: non-finite single-precision pattern");
      return f == 0.0f ? 0.0 : static_cast<double>(f);
    }
    case FormatKind::kFloat: {
      const auto& f = fmt.as_float();
      const std::uint64_t mant = p.bits & ((std::uint64_t{1} << f.mantissa_bits) - 1);
      const std::uint64_t field = (p.bits >> f.mantissa_bits) & ((std::uint64_t{1} << f.exponent_bits) - 1);
      const bool negative = (p.bits >> (f.exponent_bits + f.mantissa_bits)) & 1;
      if (field == 0 && mant == 0) return 0.0;
      const int exponent = static_cast<int>(field) - f.bias;
      if (exponent < kMinSubstrateExponent || exponent > kMaxSubstrateExponent) {
        throw DomainError("decode: exponent " + std::to_string(exponent) + " is outside the emulation range");
      }
      const double significand = 1.0 + std::ldexp(static_cast<double>(mant), -f.mantissa_bits);
      const double v = std::ldexp(significand, exponent);
      return negative ? -v : v;
    }
    case FormatKind::kFixed: {
      const auto& f = fmt.as_fixed();
      const std::uint64_t mag = p.bits & ((std::uint64_t{1} << f.magnitude_bits()) - 1);
      const bool negative = (p.bits >> f.magnitude_bits()) & 1;
      if (mag == 0) return 0.0;
      const double v = std::ldexp(static_cast<double>(mag), -f.fraction_bits);
      return negative ? -v : v;
    }
  }
  return 0.0;
}

inline constexpr int kMaxEnumerableWidth = 14;

/// Every distinct representable value, ascending. Refuses formats wider than
/// kMaxEnumerableWidth bits.
inline std::vector<double> enumerate_values(const NumericFormat& fmt) {
  const int width = fmt.width();
  if (width > kMaxEnumerableWidth) {
    throw DomainError("enumerate_values: " + fmt.to_string() + " is " + std::to_string(width) +
                      " bits wide; at most " + std::to_string(kMaxEnumerableWidth) + " allowed");
  }
  std::vector<double> values;
  values.reserve(std::size_t{1} << width);
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << width); ++bits) {
    values.push_back(decode({width, bits}, fmt));
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

// ---------------------------------------------------------------------------
// Construction and literals.

inline FloatFormat FloatFormat::make(int mantissa_bits, int exponent_bits, std::optional<int> bias,
                                     Rounding rounding) {
  if (mantissa_bits < 0 || mantissa_bits > 52) {
    throw DomainError("float format: mantissa bits must be in [0, 52], got " + std::to_string(mantissa_bits));
  }
  if (exponent_bits < 1 || exponent_bits > kMaxExponentBits) {
    throw DomainError("float format: exponent bits must be in [1, " + std::to_string(kMaxExponentBits) +
                      "], got " + std::to_string(exponent_bits));
  }
  FloatFormat f{mantissa_bits, exponent_bits, bias.value_or(default_bias(exponent_bits)), rounding};
  if (f.max_exponent() < kMinSubstrateExponent || f.min_exponent() > kMaxSubstrateExponent) {
    throw DomainError("float format: exponent range [" + std::to_string(f.min_exponent()) + ", " +
                      std::to_string(f.max_exponent()) + "] lies outside the double-precision range");
  }
  return f;
}

inline FixedFormat FixedFormat::make(int integer_bits, int fraction_bits, Rounding rounding) {
  if (integer_bits < 0 || fraction_bits < 0) {
    throw DomainError("fixed format: bit counts must be non-negative");
  }
  if (integer_bits + fraction_bits < 1) {
    throw DomainError("fixed format: zero magnitude bits");
  }
  if (integer_bits + fraction_bits > 52) {
    throw DomainError("fixed format: at most 52 magnitude bits are supported, got " +
                      std::to_string(integer_bits + fraction_bits));
  }
  return {integer_bits, fraction_bits, rounding};
}

namespace detail {

class LiteralReader {
 public:
  LiteralReader(std::string_view text, std::string_view whole) : text_(text), whole_(whole) {}

  bool eat(char c) {
    if (!text_.empty() && text_.front() == c) {
      text_.remove_prefix(1);
      return true;
    }
    return false;
  }

  int integer(bool allow_negative = false) {
    int value = 0;
    const char* first = text_.data();
    const char* last = text_.data() + text_.size();
    if (!allow_negative && first != last && *first == '-') fail();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr == first) fail();
    text_.remove_prefix(static_cast<std::size_t>(ptr - first));
    return value;
  }

  bool done() const { return text_.empty(); }

  [[noreturn]] void fail() const {
    throw ParseError("invalid format literal '" + std::string(whole_) +
                     "' (expected baseline, float:m<M>e<E>[b<B>] or fixed:i<I>f<F>)");
  }

 private:
  std::string_view text_;
  std::string_view whole_;
};

}  // namespace detail

inline NumericFormat NumericFormat::parse(std::string_view literal) {
  std::string_view body = literal;
  Rounding rounding = Rounding::kTruncate;
  if (body.ends_with(":rne")) {
    rounding = Rounding::kNearestEven;
    body.remove_suffix(4);
  }
  if (body == "baseline") {
    if (rounding != Rounding::kTruncate) detail::LiteralReader(body, literal).fail();
    return baseline();
  }
  if (body.starts_with("float:")) {
    detail::LiteralReader r(body.substr(6), literal);
    if (!r.eat('m')) r.fail();
    const int m = r.integer();
    if (!r.eat('e')) r.fail();
    const int e = r.integer();
    std::optional<int> bias;
    if (r.eat('b')) bias = r.integer(/*allow_negative=*/true);
    if (!r.done()) r.fail();
    return FloatFormat::make(m, e, bias, rounding);
  }
  if (body.starts_with("fixed:")) {
    detail::LiteralReader r(body.substr(6), literal);
    if (!r.eat('i')) r.fail();
    const int i = r.integer();
    if (!r.eat('f')) r.fail();
    const int f = r.integer();
    if (!r.done()) r.fail();
    return FixedFormat::make(i, f, rounding);
  }
  detail::LiteralReader(body, literal).fail();
}

inline std::string NumericFormat::to_string() const {
  std::string out;
  Rounding rounding = Rounding::kTruncate;
  switch (kind()) {
    case FormatKind::kBaseline: return "baseline";
    case FormatKind::kFloat: {
      const auto& f = as_float();
      out = "float:m" + std::to_string(f.mantissa_bits) + "e" + std::to_string(f.exponent_bits);
      if (f.bias != FloatFormat::default_bias(f.exponent_bits)) out += "b" + std::to_string(f.bias);
      rounding = f.rounding;
      break;
    }
    case FormatKind::kFixed: {
      const auto& f = as_fixed();
      out = "fixed:i" + std::to_string(f.integer_bits) + "f" + std::to_string(f.fraction_bits);
      rounding = f.rounding;
      break;
    }
  }
  if (rounding == Rounding::kNearestEven) out += ":rne";
  return out;
}

}  // namespace precis
