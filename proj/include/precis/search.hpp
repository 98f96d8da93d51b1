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

// Precision search over a design space of formats.
//
// The fast search never runs the validation set up front. It scores every
// format by how well its final-layer activations on a handful of sample
// inputs correlate with single-precision activations (R^2), maps R^2 to a
// predicted normalized accuracy with an affine model, picks the fastest
// format predicted to meet the target, and then spends a small budget of
// real validation runs nudging precision up or down one step at a time.
// exhaustive_search measures every format and is the ground truth.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "precis/costmodel.hpp"
#include "precis/error.hpp"
#include "precis/inference.hpp"
#include "precis/network.hpp"
#include "precis/numeric.hpp"
#include "precis/parallel.hpp"

namespace precis {

// ---------------------------------------------------------------------------
// Design space

struct BitRange {
  int min = 0;
  int max = 0;
  int step = 1;

  std::vector<int> values() const {
    std::vector<int> out;
    for (int v = min; v <= max; v += step) out.push_back(v);
    return out;
  }
};

struct DesignSpaceConfig {
  struct FloatSpace {
    BitRange mantissa;
    BitRange exponent;
    std::optional<int> bias;
  };
  struct FixedSpace {
    BitRange integer;
    BitRange fraction;
  };

  std::optional<FloatSpace> floats;
  std::optional<FixedSpace> fixed;

  /// Float mantissa 1-16 x exponent 1-8, plus fixed integer and fraction bits
  /// 1-15 in steps of 2: 128 + 64 formats.
  static DesignSpaceConfig default_space() {
    return {FloatSpace{{1, 16, 1}, {1, 8, 1}, std::nullopt}, FixedSpace{{1, 15, 2}, {1, 15, 2}}};
  }

  /// Comma-separated parts, e.g. `float:m1-16e1-8,fixed:i1-15s2f1-15s2`.
  /// Each range is `<lo>[-<hi>][s<step>]`; a float part may end in `b<bias>`.
  /// `default` selects default_space().
  static DesignSpaceConfig parse(std::string_view text);

  std::string to_string() const;
};

namespace detail {

inline BitRange parse_range(std::string_view& s, std::string_view whole) {
  auto fail = [&] { throw ParseError("invalid design-space range in '" + std::string(whole) + "'"); };
  auto number = [&]() {
    int v = 0;
    if (s.empty() || s.front() < '0' || s.front() > '9') fail();
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{}) fail();
    s.remove_prefix(static_cast<std::size_t>(ptr - s.data()));
    return v;
  };
  BitRange r;
  r.min = r.max = number();
  if (!s.empty() && s.front() == '-') {
    s.remove_prefix(1);
    r.max = number();
  }
  if (!s.empty() && s.front() == 's') {
    s.remove_prefix(1);
    r.step = number();
  }
  if (r.step < 1 || r.max < r.min) fail();
  return r;
}

inline std::string range_to_string(const BitRange& r) {
  std::string out = std::to_string(r.min);
  if (r.max != r.min) out += "-" + std::to_string(r.max);
  if (r.step != 1) out += "s" + std::to_string(r.step);
  return out;
}

}  // namespace detail

inline DesignSpaceConfig DesignSpaceConfig::parse(std::string_view text) {
  if (text == "default") return default_space();
  DesignSpaceConfig cfg;
  while (!text.empty()) {
    const auto comma = text.find(',');
    std::string_view part = text.substr(0, comma);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    if (comma != std::string_view::npos && text.empty()) throw ParseError("design space ends with ','");
    const std::string_view whole = part;
    auto expect = [&](char c) {
      if (part.empty() || part.front() != c) throw ParseError("invalid design-space part '" + std::string(whole) + "'");
      part.remove_prefix(1);
    };
    if (part.starts_with("float:")) {
      part.remove_prefix(6);
      FloatSpace fs;
      expect('m');
      fs.mantissa = detail::parse_range(part, whole);
      expect('e');
      fs.exponent = detail::parse_range(part, whole);
      if (!part.empty() && part.front() == 'b') {
        part.remove_prefix(1);
        int b = 0;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), b);
        if (ec != std::errc{} || ptr == part.data()) throw ParseError("invalid bias in '" + std::string(whole) + "'");
        part.remove_prefix(static_cast<std::size_t>(ptr - part.data()));
        fs.bias = b;
      }
      if (!part.empty() || cfg.floats) throw ParseError("invalid design-space part '" + std::string(whole) + "'");
      cfg.floats = fs;
    } else if (part.starts_with("fixed:")) {
      part.remove_prefix(6);
      FixedSpace xs;
      expect('i');
      xs.integer = detail::parse_range(part, whole);
      expect('f');
      xs.fraction = detail::parse_range(part, whole);
      if (!part.empty() || cfg.fixed) throw ParseError("invalid design-space part '" + std::string(whole) + "'");
      cfg.fixed = xs;
    } else {
      throw ParseError("invalid design-space part '" + std::string(whole) + "'");
    }
  }
  return cfg;
}

inline std::string DesignSpaceConfig::to_string() const {
  std::string out;
  if (floats) {
    out += "float:m" + detail::range_to_string(floats->mantissa) + "e" + detail::range_to_string(floats->exponent);
    if (floats->bias) out += "b" + std::to_string(*floats->bias);
  }
  if (fixed) {
    if (!out.empty()) out += ",";
    out += "fixed:i" + detail::range_to_string(fixed->integer) + "f" + detail::range_to_string(fixed->fraction);
  }
  return out;
}

/// Floats first (exponent outer, mantissa inner, ascending), then fixed
/// (integer outer, fraction inner).
inline std::vector<NumericFormat> enumerate_design_space(const DesignSpaceConfig& cfg) {
  std::vector<NumericFormat> out;
  if (cfg.floats) {
    for (int e : cfg.floats->exponent.values()) {
      for (int m : cfg.floats->mantissa.values()) out.emplace_back(FloatFormat::make(m, e, cfg.floats->bias));
    }
  }
  if (cfg.fixed) {
    for (int i : cfg.fixed->integer.values()) {
      for (int f : cfg.fixed->fraction.values()) out.emplace_back(FixedFormat::make(i, f));
    }
  }
  if (out.empty()) throw DomainError("design space is empty");
  return out;
}

// ---------------------------------------------------------------------------
// Correlation scoring

/// Pearson correlation, or nullopt when either side is constant.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("pearson: length mismatch");
  if (x.size() < 2) return std::nullopt;
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Squared correlation of two paired activation vectors; 0 if either is constant.
inline double coefficient_of_determination(std::span<const double> exact, std::span<const double> custom) {
  const auto r = pearson(exact, custom);
  return r ? std::clamp(*r * *r, 0.0, 1.0) : 0.0;
}

/// Scores formats against cached single-precision final-layer activations
/// of a fixed sample set.
class R2Scorer {
 public:
  R2Scorer(const NetworkDef& net, std::vector<Tensor> samples) : net_(&net), samples_(std::move(samples)) {
    if (samples_.empty()) throw DomainError("last_layer_r2: no sample inputs");
    exact_ = activations(NumericFormat::baseline());
  }

  double operator()(const NumericFormat& fmt) const {
    if (fmt.is_baseline()) return 1.0;
    return coefficient_of_determination(exact_, activations(fmt));
  }

  std::size_t sample_count() const { return samples_.size(); }

 private:
  std::vector<double> activations(const NumericFormat& fmt) const {
    const Evaluator ev(*net_, fmt);
    std::vector<double> out;
    for (const auto& s : samples_) {
      const Tensor t = ev.scores(s);
      out.insert(out.end(), t.values().begin(), t.values().end());
    }
    return out;
  }

  const NetworkDef* net_;
  std::vector<Tensor> samples_;
  std::vector<double> exact_;
};

inline double last_layer_r2(const NetworkDef& net, std::span<const Tensor> samples, const NumericFormat& fmt) {
  return R2Scorer(net, std::vector<Tensor>(samples.begin(), samples.end()))(fmt);
}

/// Indices of `count` samples out of `total`: the first `count` by default, or
/// a seeded shuffle. Uses only mt19937_64's raw output so selections are
/// identical across standard libraries.
inline std::vector<std::size_t> select_samples(std::size_t total, std::size_t count,
                                               std::optional<std::uint64_t> seed = std::nullopt) {
  count = std::min(count, total);
  std::vector<std::size_t> idx(total);
  for (std::size_t i = 0; i < total; ++i) idx[i] = i;
  if (seed) {
    std::mt19937_64 rng(*seed);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint64_t range = total - i;
      const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
      std::uint64_t draw;
      do draw = rng(); while (draw >= limit);
      std::swap(idx[i], idx[i + draw % range]);
    }
  }
  idx.resize(count);
  return idx;
}

// ---------------------------------------------------------------------------
// Accuracy model

struct AccuracyModel {
  static constexpr double kMaxPrediction = 1.05;

  double slope = 1.0;
  double intercept = 0.0;
  double fit_correlation = 1.0;

  /// slope * r2 + intercept, clamped to [0, kMaxPrediction].
  double predict(double r2) const { return std::clamp(slope * r2 + intercept, 0.0, kMaxPrediction); }
};

struct AccuracyPair {
  double r2;
  double normalized_accuracy;
};

/// Ordinary least squares of normalized accuracy on R^2.
inline AccuracyModel fit_accuracy_model(std::span<const AccuracyPair> pairs) {
  if (pairs.size() < 2) throw DomainError("fit_accuracy_model: need at least two pairs");
  std::vector<double> x, y;
  for (const auto& p : pairs) {
    x.push_back(p.r2);
    y.push_back(p.normalized_accuracy);
  }
  const auto n = static_cast<double>(pairs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) throw DomainError("fit_accuracy_model: degenerate fit, all r2 values are equal");
  AccuracyModel m;
  m.slope = sxy / sxx;
  m.intercept = my - m.slope * mx;
  m.fit_correlation = pearson(x, y).value_or(0.0);
  return m;
}

inline double predict_accuracy(const AccuracyModel& model, double r2) { return model.predict(r2); }

// ---------------------------------------------------------------------------
// Search

struct DesignPoint {
  NumericFormat fmt;
  double r2 = 0.0;
  double predicted_norm_accuracy = 0.0;
  std::optional<double> measured_norm_accuracy;
  std::optional<double> measured_accuracy;  // raw top-k accuracy behind the normalized value
  double speedup = 1.0;
  double energy_savings = 1.0;
  bool evaluated = false;
  bool fallback = false;
};

struct SearchResult {
  DesignPoint point;
  std::size_t validation_evaluations = 0;  // formats measured on the validation set
  std::size_t scored_formats = 0;          // formats scored on the sample set
  std::vector<DesignPoint> history;        // measured candidates, in order
};

/// Measures normalized accuracy on a validation set and counts evaluations.
/// The single-precision reference pass is computed once and not counted.
class AccuracyOracle {
 public:
  AccuracyOracle(const NetworkDef& net, const Dataset& validation, std::size_t k = 1)
      : net_(&net), data_(&validation), k_(k) {
    if (validation.size() == 0) throw DomainError("validation set is empty");
    baseline_ = evaluate_accuracy(Evaluator(net, NumericFormat::baseline()), validation, k);
    if (!(baseline_ > 0)) throw DomainError("baseline accuracy on the validation set is zero");
  }

  double baseline_accuracy() const { return baseline_; }

  /// Raw top-k accuracy of `fmt`.
  double accuracy(const NumericFormat& fmt) {
    if (fmt.is_baseline()) return baseline_;
    const std::string key = fmt.to_string();
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    const double acc = evaluate_accuracy(Evaluator(*net_, fmt), *data_, k_);
    std::lock_guard lock(mu_);
    if (cache_.emplace(key, acc).second) ++evaluations_;
    return acc;
  }

  double normalized(const NumericFormat& fmt) { return normalized_accuracy(accuracy(fmt), baseline_); }

  std::size_t evaluations() const { return evaluations_; }

 private:
  const NetworkDef* net_;
  const Dataset* data_;
  std::size_t k_;
  double baseline_ = 0;
  std::mutex mu_;
  std::map<std::string, double> cache_;
  std::size_t evaluations_ = 0;
};

namespace detail {

/// True when a should be preferred over b: higher speedup, then fewer bits,
/// then earlier in enumeration order.
inline bool better(const DesignPoint& a, std::size_t ia, const DesignPoint& b, std::size_t ib) {
  if (a.speedup != b.speedup) return a.speedup > b.speedup;
  if (a.fmt.width() != b.fmt.width()) return a.fmt.width() < b.fmt.width();
  return ia < ib;
}

inline DesignPoint make_point(const NumericFormat& fmt, const CostTables& tables) {
  DesignPoint p;
  p.fmt = fmt;
  p.speedup = speedup(fmt, tables);
  p.energy_savings = energy_savings(fmt, tables);
  return p;
}

inline DesignPoint fallback_point(const CostTables& tables) {
  DesignPoint p = make_point(NumericFormat::baseline(), tables);
  p.r2 = 1.0;
  p.predicted_norm_accuracy = 1.0;
  p.fallback = true;
  return p;
}

/// Position of the same-kind format one precision step away (mantissa bits
/// for float, fraction bits for fixed), keeping the range bits and bias.
inline std::optional<std::size_t> precision_neighbor(std::span<const NumericFormat> space, std::size_t from,
                                                     int direction) {
  const NumericFormat& f = space[from];
  std::optional<std::size_t> best;
  int best_bits = 0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const NumericFormat& g = space[i];
    int bits = 0;
    int mine = 0;
    if (f.is_float() && g.is_float()) {
      const auto &a = f.as_float(), &b = g.as_float();
      if (a.exponent_bits != b.exponent_bits || a.bias != b.bias || a.rounding != b.rounding) continue;
      bits = b.mantissa_bits;
      mine = a.mantissa_bits;
    } else if (f.is_fixed() && g.is_fixed()) {
      const auto &a = f.as_fixed(), &b = g.as_fixed();
      if (a.integer_bits != b.integer_bits || a.rounding != b.rounding) continue;
      bits = b.fraction_bits;
      mine = a.fraction_bits;
    } else {
      continue;
    }
    if ((bits - mine) * direction <= 0) continue;
    if (!best || (bits - best_bits) * direction < 0) {
      best = i;
      best_bits = bits;
    }
  }
  return best;
}

}  // namespace detail

/// Fast search over an explicit list of formats.
inline SearchResult fast_search(const NetworkDef& net, std::span<const Tensor> samples, const Dataset& validation,
                                const AccuracyModel& model, std::span<const NumericFormat> space,
                                const CostTables& tables, double target_norm_accuracy, std::size_t refine_budget,
                                std::size_t k = 1) {
  if (!(target_norm_accuracy > 0 && target_norm_accuracy <= 1)) {
    throw DomainError("fast_search: target normalized accuracy must lie in (0, 1]");
  }
  if (space.empty()) throw DomainError("fast_search: design space is empty");
  SearchResult result;

  const R2Scorer scorer(net, std::vector<Tensor>(samples.begin(), samples.end()));
  std::vector<DesignPoint> points(space.size());
  parallel_for(space.size(), [&](std::size_t i) {
    DesignPoint p = detail::make_point(space[i], tables);
    p.r2 = scorer(space[i]);
    p.predicted_norm_accuracy = model.predict(p.r2);
    points[i] = p;
  });
  result.scored_formats = space.size();

  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].predicted_norm_accuracy < target_norm_accuracy) continue;
    if (!pick || detail::better(points[i], i, points[*pick], *pick)) pick = i;
  }
  if (!pick) {
    result.point = detail::fallback_point(tables);
    return result;
  }
  if (refine_budget == 0) {
    result.point = points[*pick];
    return result;
  }

  AccuracyOracle oracle(net, validation, k);
  std::optional<std::size_t> last_pass;
  std::size_t cur = *pick;
  int direction = 0;  // +1 after widening, -1 after narrowing
  bool unmeasured_candidate = false;
  for (std::size_t budget = refine_budget; budget > 0; --budget) {
    DesignPoint& p = points[cur];
    p.measured_accuracy = oracle.accuracy(p.fmt);
    p.measured_norm_accuracy = normalized_accuracy(*p.measured_accuracy, oracle.baseline_accuracy());
    p.evaluated = true;
    result.history.push_back(p);
    unmeasured_candidate = false;
    if (*p.measured_norm_accuracy >= target_norm_accuracy) {
      last_pass = cur;
      if (direction > 0) break;  // narrowest passing format reached from below
      auto next = detail::precision_neighbor(space, cur, -1);
      if (!next) break;
      direction = -1;
      cur = *next;
      unmeasured_candidate = true;
    } else {
      if (last_pass) break;  // the narrower step failed: keep the last passing one
      auto next = detail::precision_neighbor(space, cur, +1);
      if (!next) {
        result.point = detail::fallback_point(tables);
        result.validation_evaluations = oracle.evaluations();
        return result;
      }
      direction = +1;
      cur = *next;
      unmeasured_candidate = true;
    }
  }
  result.validation_evaluations = oracle.evaluations();
  if (last_pass) {
    result.point = points[*last_pass];
  } else {
    // Budget ran out while widening: return the next wider format unmeasured.
    result.point = points[cur];
    result.point.evaluated = unmeasured_candidate ? false : result.point.evaluated;
  }
  return result;
}

inline SearchResult fast_search(const NetworkDef& net, std::span<const Tensor> samples, const Dataset& validation,
                                const AccuracyModel& model, const DesignSpaceConfig& cfg, const CostTables& tables,
                                double target_norm_accuracy, std::size_t refine_budget, std::size_t k = 1) {
  const auto space = enumerate_design_space(cfg);
  return fast_search(net, samples, validation, model, space, tables, target_norm_accuracy, refine_budget, k);
}

/// Measures every format and returns the fastest one meeting the target.
/// `measured` (optional) receives every measured design point in space order.
inline SearchResult exhaustive_search(const NetworkDef& net, const Dataset& validation,
                                      std::span<const NumericFormat> space, const CostTables& tables,
                                      double target_norm_accuracy, std::size_t k = 1,
                                      std::vector<DesignPoint>* measured = nullptr) {
  if (space.empty()) throw DomainError("exhaustive_search: design space is empty");
  AccuracyOracle oracle(net, validation, k);
  std::vector<DesignPoint> points;
  points.reserve(space.size());
  for (const auto& fmt : space) {
    DesignPoint p = detail::make_point(fmt, tables);
    p.measured_accuracy = oracle.accuracy(fmt);
    p.measured_norm_accuracy = normalized_accuracy(*p.measured_accuracy, oracle.baseline_accuracy());
    p.evaluated = true;
    points.push_back(p);
  }
  SearchResult result;
  result.validation_evaluations = oracle.evaluations();
  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (*points[i].measured_norm_accuracy < target_norm_accuracy) continue;
    if (!pick || detail::better(points[i], i, points[*pick], *pick)) pick = i;
  }
  result.point = pick ? points[*pick] : detail::fallback_point(tables);
  if (measured) *measured = std::move(points);
  return result;
}

inline SearchResult exhaustive_search(const NetworkDef& net, const Dataset& validation, const DesignSpaceConfig& cfg,
                                      const CostTables& tables, double target_norm_accuracy, std::size_t k = 1) {
  const auto space = enumerate_design_space(cfg);
  return exhaustive_search(net, validation, space, tables, target_norm_accuracy, k);
}

}  // namespace precis
