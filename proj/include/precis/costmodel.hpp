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

// Hardware cost of a format relative to a single-precision MAC.
//
// A table maps total bit width to delay, area and energy ratios against the
// 32-bit baseline. Throughput under a fixed area budget scales with clock
// rate (1 / delay) times the number of units that fit (1 / area), so
//
//   speedup        = 1 / (delay_ratio * area_ratio)
//   energy_savings = 1 / energy_ratio
//
// Ratios between table rows are interpolated linearly; widths outside the
// table clamp to the nearest row.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "precis/error.hpp"
#include "precis/numeric.hpp"

namespace precis {

inline constexpr int kBaselineWidth = 32;

struct CostEntry {
  int total_bits = 0;
  double delay_ratio = 1.0;
  double area_ratio = 1.0;
  double energy_ratio = 1.0;
  friend bool operator==(const CostEntry&, const CostEntry&) = default;
};

class CostTable {
 public:
  enum class Kind { kFloat, kFixed };

  /// Validates: at least two rows, strictly increasing widths, positive
  /// ratios, and all-one ratios on the 32-bit row when present.
  CostTable(Kind kind, std::vector<CostEntry> entries) : kind_(kind), entries_(std::move(entries)) {
    if (entries_.size() < 2) throw ParseError("cost table needs at least two entries");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.total_bits < 1) throw ParseError("cost table: width must be positive");
      if (i && e.total_bits <= entries_[i - 1].total_bits) {
        throw ParseError("cost table: widths must be strictly increasing (width " + std::to_string(e.total_bits) +
                         " after " + std::to_string(entries_[i - 1].total_bits) + ")");
      }
      if (!(e.delay_ratio > 0 && e.area_ratio > 0 && e.energy_ratio > 0) ||
          !std::isfinite(e.delay_ratio * e.area_ratio * e.energy_ratio)) {
        throw ParseError("cost table: ratios at width " + std::to_string(e.total_bits) + " must be positive and finite");
      }
      if (e.total_bits == kBaselineWidth && (e.delay_ratio != 1 || e.area_ratio != 1 || e.energy_ratio != 1)) {
        throw ParseError("cost table: the 32-bit baseline entry must have all ratios equal to 1");
      }
    }
  }

  Kind kind() const { return kind_; }
  const std::vector<CostEntry>& entries() const { return entries_; }

  /// Ratios at `width`, interpolated between neighbouring rows.
  CostEntry at(int width) const {
    if (width <= entries_.front().total_bits) return with_width(entries_.front(), width);
    if (width >= entries_.back().total_bits) return with_width(entries_.back(), width);
    auto hi = std::lower_bound(entries_.begin(), entries_.end(), width,
                               [](const CostEntry& e, int w) { return e.total_bits < w; });
    if (hi->total_bits == width) return *hi;
    auto lo = hi - 1;
    const double t = static_cast<double>(width - lo->total_bits) / (hi->total_bits - lo->total_bits);
    auto lerp = [t](double a, double b) { return a + t * (b - a); };
    return {width, lerp(lo->delay_ratio, hi->delay_ratio), lerp(lo->area_ratio, hi->area_ratio),
            lerp(lo->energy_ratio, hi->energy_ratio)};
  }

  /// Serializes in the format read by parse().
  std::string to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "kind: " << (kind_ == Kind::kFloat ? "float" : "fixed") << "\n";
    os << "# width delay_ratio area_ratio energy_ratio\n";
    for (const auto& e : entries_) {
      os << e.total_bits << ' ' << e.delay_ratio << ' ' << e.area_ratio << ' ' << e.energy_ratio << '\n';
    }
    return os.str();
  }

  /// Line-oriented text: one `kind: float|fixed` header, then rows of
  /// `width delay_ratio area_ratio energy_ratio`. Blank lines and text after
  /// '#' are ignored.
  static CostTable parse(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::optional<Kind> kind;
    std::vector<CostEntry> rows;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream ls(line);
      std::string first;
      if (!(ls >> first)) continue;
      auto fail = [&](const std::string& msg) {
        throw ParseError("cost table line " + std::to_string(line_no) + ": " + msg);
      };
      if (first == "kind:" || first.starts_with("kind:")) {
        std::string value = first.size() > 5 ? first.substr(5) : std::string{};
        if (value.empty()) ls >> value;
        if (kind) fail("duplicate kind header");
        if (value == "float") kind = Kind::kFloat;
        else if (value == "fixed") kind = Kind::kFixed;
        else fail("kind must be 'float' or 'fixed', got '" + value + "'");
        continue;
      }
      if (!kind) fail("rows must follow a 'kind:' header");
      CostEntry e;
      std::istringstream row(line);
      std::string extra;
      if (!(row >> e.total_bits >> e.delay_ratio >> e.area_ratio >> e.energy_ratio) || (row >> extra)) {
        fail("expected 'width delay_ratio area_ratio energy_ratio'");
      }
      rows.push_back(e);
    }
    if (!kind) throw ParseError("cost table: missing 'kind:' header");
    return CostTable(*kind, std::move(rows));
  }

 private:
  static CostEntry with_width(CostEntry e, int width) {
    e.total_bits = width;
    return e;
  }

  Kind kind_;
  std::vector<CostEntry> entries_;
};

inline CostTable load_cost_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open cost table '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return CostTable::parse(ss.str());
}

struct CostTables {
  CostTable float_table;
  CostTable fixed_table;

  const CostTable& for_format(const NumericFormat& fmt) const {
    return fmt.is_fixed() ? fixed_table : float_table;
  }
};

namespace detail {

inline void check_kind(const NumericFormat& fmt, const CostTable& table) {
  const bool want_fixed = table.kind() == CostTable::Kind::kFixed;
  if (fmt.is_fixed() != want_fixed) {
    throw DomainError("cost model: " + fmt.to_string() + " queried against a " + (want_fixed ? "fixed" : "float") +
                      "-point table");
  }
}

}  // namespace detail

inline double speedup(const NumericFormat& fmt, const CostTable& table) {
  if (fmt.is_baseline()) return 1.0;
  detail::check_kind(fmt, table);
  const CostEntry e = table.at(fmt.width());
  return 1.0 / (e.delay_ratio * e.area_ratio);
}

inline double energy_savings(const NumericFormat& fmt, const CostTable& table) {
  if (fmt.is_baseline()) return 1.0;
  detail::check_kind(fmt, table);
  return 1.0 / table.at(fmt.width()).energy_ratio;
}

inline double speedup(const NumericFormat& fmt, const CostTables& tables) {
  return speedup(fmt, tables.for_format(fmt));
}

inline double energy_savings(const NumericFormat& fmt, const CostTables& tables) {
  return energy_savings(fmt, tables.for_format(fmt));
}

/// A design point published for a 32-bit-normalized MAC: at `width` bits the
/// unit runs `speedup` times faster and saves `energy` times the energy.
struct CostAnchor {
  int width;
  double speedup;
  double energy;
};

/// Per-bit slopes of an affine cost model normalized to 1 at 32 bits:
/// delay(w) = 1 - delay_slope*(32-w), area(w) = 1 - area_slope*(32-w),
/// energy(w) = 1 - energy_slope*(32-w).
struct AffineCostModel {
  double delay_slope;
  double area_slope;
  double energy_slope;

  /// Fits the slopes so both anchors are met exactly. With u = 32 - w the
  /// speedup condition (1 - d*u)(1 - a*u) = 1/speedup is linear in s = d + a
  /// and p = d*a; two anchors fix s and p, and d, a are the roots of
  /// z^2 - s*z + p. Delay takes the smaller slope since carry chains grow
  /// sub-linearly while area grows linearly. The energy slope is the
  /// least-squares fit through the two anchors.
  static AffineCostModel fit(const CostAnchor& a1, const CostAnchor& a2) {
    const double u1 = kBaselineWidth - a1.width, u2 = kBaselineWidth - a2.width;
    const double r1 = 1.0 - 1.0 / a1.speedup, r2 = 1.0 - 1.0 / a2.speedup;
    // u*s - u^2*p = 1 - 1/speedup
    const double det = u1 * (-u2 * u2) - (-u1 * u1) * u2;
    if (det == 0) throw DomainError("cost anchors must have distinct widths");
    const double s = (r1 * (-u2 * u2) - (-u1 * u1) * r2) / det;
    const double p = (u1 * r2 - u2 * r1) / det;
    const double disc = s * s - 4 * p;
    if (disc < 0) throw DomainError("cost anchors admit no real delay/area split");
    const double root = std::sqrt(disc);
    const double e1 = 1.0 - 1.0 / a1.energy, e2 = 1.0 - 1.0 / a2.energy;
    return {(s - root) / 2, (s + root) / 2, (u1 * e1 + u2 * e2) / (u1 * u1 + u2 * u2)};
  }

  CostEntry at(int width) const {
    const double u = kBaselineWidth - width;
    return {width, 1.0 - delay_slope * u, 1.0 - area_slope * u, 1.0 - energy_slope * u};
  }
};

/// Published single-precision-normalized anchors for 14-bit (m7e6) and
/// 15-bit (m8e6) float MACs.
inline constexpr CostAnchor kFloatAnchorNarrow{14, 7.2, 3.4};
inline constexpr CostAnchor kFloatAnchorWide{15, 5.7, 3.0};

/// Narrowest row of the default float table. Below it the fitted area ratio
/// heads toward zero, so narrower formats clamp to this row.
inline constexpr int kDefaultFloatMinWidth = 12;
inline constexpr int kDefaultMaxWidth = 64;

inline CostTable default_float_table() {
  const auto model = AffineCostModel::fit(kFloatAnchorNarrow, kFloatAnchorWide);
  std::vector<CostEntry> rows;
  for (int w = kDefaultFloatMinWidth; w <= kDefaultMaxWidth; ++w) rows.push_back(model.at(w));
  return CostTable(CostTable::Kind::kFloat, std::move(rows));
}

/// Synthetic fixed-point model: delay, area and energy all proportional to
/// width, normalized to 1 at 32 bits.
inline CostTable default_fixed_table() {
  std::vector<CostEntry> rows;
  for (int w = 2; w <= kDefaultMaxWidth; ++w) {
    const double r = static_cast<double>(w) / kBaselineWidth;
    rows.push_back({w, r, r, r});
  }
  return CostTable(CostTable::Kind::kFixed, std::move(rows));
}

inline CostTables default_tables() { return {default_float_table(), default_fixed_table()}; }

}  // namespace precis
