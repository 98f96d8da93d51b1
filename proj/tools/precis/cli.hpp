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

// precis command-line front end. run_cli() is the whole program; main()
// only forwards argv so the tests can drive commands in-process.

#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "precis/costmodel.hpp"
#include "precis/error.hpp"
#include "precis/inference.hpp"
#include "precis/model_io.hpp"
#include "precis/numeric.hpp"
#include "precis/search.hpp"

namespace precis::cli {

using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitFallback = 3;

inline constexpr int kReportVersion = 1;

inline const std::vector<std::string> kSweepColumns = {"format", "mode",    "accuracy",      "normalized_accuracy",
                                                       "r2",     "speedup", "energy_savings"};

// ---------------------------------------------------------------------------
// Helpers

/// Shortest decimal that reads back to the same double.
inline std::string number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, ptr) : std::to_string(v);
}

inline std::string fixed4(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

inline std::string fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline std::filesystem::path data_dir() {
  if (const char* env = std::getenv("PRECIS_DATA_DIR"); env && *env) return env;
#ifdef PRECIS_DATA_DIR
  return PRECIS_DATA_DIR;
#else
  return "data";
#endif
}

/// A manifest path, or the name of a bundled network under the data directory.
inline NetworkDef resolve_network(const std::string& spec) {
  const std::filesystem::path direct(spec);
  if (std::filesystem::is_regular_file(direct)) return load_network(direct);
  const auto bundled = data_dir() / (spec + ".json");
  if (std::filesystem::is_regular_file(bundled)) return load_network(bundled);
  throw IoError("network '" + spec + "' is neither a manifest file nor a bundled network in " + data_dir().string());
}

/// Dataset specs: `mnist-test`, `mnist:IMAGES,LABELS`, `cifar10:PATH`, or
/// `fill:VALUE` (one input of the network's shape filled with VALUE, label 0).
inline Dataset resolve_dataset(const std::string& spec, const NetworkDef& net) {
  if (spec == "mnist-test") {
    const auto dir = data_dir() / "mnist";
    return load_mnist(dir / "test-images-idx3-ubyte", dir / "test-labels-idx1-ubyte");
  }
  if (spec.starts_with("mnist:")) {
    const std::string rest = spec.substr(6);
    const auto comma = rest.find(',');
    if (comma == std::string::npos) throw ParseError("dataset 'mnist:' expects IMAGES,LABELS");
    return load_mnist(rest.substr(0, comma), rest.substr(comma + 1));
  }
  if (spec.starts_with("cifar10:")) return load_cifar10(spec.substr(8));
  if (spec.starts_with("fill:")) {
    const std::string v = spec.substr(5);
    double value = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
    if (ec != std::errc{} || ptr != v.data() + v.size()) throw ParseError("dataset 'fill:' expects a number");
    Dataset d;
    d.inputs.emplace_back(net.input_shape, std::vector<double>(element_count(net.input_shape), value));
    d.labels.push_back(0);
    return d;
  }
  throw ParseError("unknown dataset '" + spec + "' (expected mnist-test, mnist:IMAGES,LABELS, cifar10:PATH or fill:VALUE)");
}

inline std::size_t metric_k(const std::string& metric) {
  if (metric == "top1") return 1;
  if (metric == "top5") return 5;
  throw ParseError("metric must be top1 or top5");
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
}

inline json model_to_json(const AccuracyModel& m) {
  return {{"slope", m.slope}, {"intercept", m.intercept}, {"fit_correlation", m.fit_correlation}};
}

inline AccuracyModel load_model(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
    AccuracyModel m;
    m.slope = j.at("slope").get<double>();
    m.intercept = j.at("intercept").get<double>();
    m.fit_correlation = j.value("fit_correlation", 0.0);
    return m;
  } catch (const json::exception& e) {
    throw ParseError("model file '" + path.string() + "': " + e.what());
  }
}

struct SweepRow {
  std::string format;
  std::string mode;
  double accuracy = 0;
  double normalized_accuracy = 0;
  double r2 = 0;
  double speedup = 0;
  double energy_savings = 0;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out;
  for (std::size_t i = 0; i < kSweepColumns.size(); ++i) out += (i ? "," : "") + kSweepColumns[i];
  out += "\n";
  for (const auto& r : rows) {
    out += r.format + "," + r.mode + "," + number(r.accuracy) + "," + number(r.normalized_accuracy) + "," +
           number(r.r2) + "," + number(r.speedup) + "," + number(r.energy_savings) + "\n";
  }
  return out;
}

inline json sweep_row_json(const SweepRow& r) {
  return {{"format", r.format}, {"mode", r.mode},       {"accuracy", r.accuracy},
          {"normalized_accuracy", r.normalized_accuracy}, {"r2", r.r2}, {"speedup", r.speedup},
          {"energy_savings", r.energy_savings}};
}

/// Parses sweep CSV text; `source` names it in error messages.
inline std::vector<SweepRow> parse_sweep_csv(const std::string& text, const std::string& source) {
  std::vector<SweepRow> rows;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw ParseError("sweep file '" + source + "' line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line_no == 1) {
      if (cells != kSweepColumns) fail("unexpected header");
      continue;
    }
    if (cells.size() != kSweepColumns.size()) fail("expected " + std::to_string(kSweepColumns.size()) + " columns");
    auto num = [&](const std::string& s) {
      double v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size()) fail("bad number '" + s + "'");
      return v;
    };
    rows.push_back({cells[0], cells[1], num(cells[2]), num(cells[3]), num(cells[4]), num(cells[5]), num(cells[6])});
  }
  if (line_no == 0) fail("empty file");
  return rows;
}

/// Reads a sweep written by `sweep` (CSV, or JSON with a "rows" array).
inline std::vector<SweepRow> load_sweep(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  if (path.extension() != ".json") return parse_sweep_csv(text, path.string());
  std::vector<SweepRow> rows;
  try {
    const json doc = json::parse(text);
    for (const auto& r : doc.at("rows")) {
      rows.push_back({r.at("format").get<std::string>(), r.at("mode").get<std::string>(),
                      r.at("accuracy").get<double>(), r.at("normalized_accuracy").get<double>(),
                      r.at("r2").get<double>(), r.at("speedup").get<double>(), r.at("energy_savings").get<double>()});
    }
  } catch (const json::exception& e) {
    throw ParseError("sweep file '" + path.string() + "': " + e.what());
  }
  return rows;
}

/// (r2, normalized accuracy) pairs from measured, non-baseline sweep rows.
inline std::vector<AccuracyPair> sweep_pairs(const std::vector<SweepRow>& rows) {
  std::vector<AccuracyPair> pairs;
  for (const auto& r : rows) {
    if (r.mode == "measured" && r.format != "baseline") pairs.push_back({r.r2, r.normalized_accuracy});
  }
  return pairs;
}

inline json point_json(const DesignPoint& p) {
  json j = {{"format", p.fmt.to_string()},
            {"width", p.fmt.width()},
            {"r2", p.r2},
            {"predicted_norm_accuracy", p.predicted_norm_accuracy},
            {"measured_accuracy", nullptr},
            {"measured_norm_accuracy", nullptr},
            {"speedup", p.speedup},
            {"energy_savings", p.energy_savings},
            {"evaluated", p.evaluated},
            {"fallback", p.fallback}};
  if (p.measured_accuracy) j["measured_accuracy"] = *p.measured_accuracy;
  if (p.measured_norm_accuracy) j["measured_norm_accuracy"] = *p.measured_norm_accuracy;
  return j;
}

// ---------------------------------------------------------------------------
// Report

/// Structured result of one command. `config` holds every resolved input, so
/// its digest identifies the run; `wall_clock_seconds` is the only field that
/// varies between identical runs.
struct RunReport {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  json result = json::object();
  double wall_clock_seconds = 0;

  json to_json() const {
    json j;
    j["version"] = kReportVersion;
    j["command"] = command;
    j["argv"] = argv;
    j["config"] = config;
    j["config_digest"] = fnv1a64(config.dump());
    j["result"] = result;
    j["wall_clock_seconds"] = wall_clock_seconds;
    return j;
  }
};

struct Globals {
  bool json_output = false;
  std::vector<std::string> cost_table_paths;

  CostTables tables() const {
    CostTables t = default_tables();
    for (const auto& p : cost_table_paths) {
      CostTable table = load_cost_table(p);
      if (table.kind() == CostTable::Kind::kFloat) t.float_table = std::move(table);
      else t.fixed_table = std::move(table);
    }
    return t;
  }

  json describe(const CostTables& t) const {
    return {{"cost_table_files", cost_table_paths},
            {"cost_table_digest", fnv1a64(t.float_table.to_text() + t.fixed_table.to_text())}};
  }
};

// ---------------------------------------------------------------------------
// Commands

struct EvalOptions {
  std::string net = "lenet_toy";
  std::string data = "mnist-test";
  std::string format;
  std::string metric = "top1";
  std::optional<std::size_t> limit;
};

inline int cmd_eval(const EvalOptions& o, const Globals& g, RunReport& report, std::ostream& out) {
  const NumericFormat fmt = NumericFormat::parse(o.format);
  const CostTables tables = g.tables();
  const NetworkDef net = resolve_network(o.net);
  Dataset data = resolve_dataset(o.data, net);
  if (o.limit) data = data.head(*o.limit);
  const std::size_t k = metric_k(o.metric);

  report.config = {{"net", o.net}, {"data", o.data}, {"format", fmt.to_string()}, {"metric", o.metric},
                   {"limit", o.limit ? json(*o.limit) : json(nullptr)}, {"inputs", data.size()}};
  report.config.update(g.describe(tables));

  const double base = evaluate_accuracy(Evaluator(net, NumericFormat::baseline()), data, k);
  const double acc = fmt.is_baseline() ? base : evaluate_accuracy(Evaluator(net, fmt), data, k);
  const double norm = normalized_accuracy(acc, base);
  const double sp = speedup(fmt, tables);
  const double en = energy_savings(fmt, tables);

  json rows = json::array();
  rows.push_back({{"format", "baseline"}, {"accuracy", base}, {"normalized_accuracy", 1.0},
                  {"speedup", 1.0}, {"energy_savings", 1.0}});
  if (!fmt.is_baseline()) {
    rows.push_back({{"format", fmt.to_string()}, {"accuracy", acc}, {"normalized_accuracy", norm},
                    {"speedup", sp}, {"energy_savings", en}});
  }
  report.result = {{"format", fmt.to_string()}, {"accuracy", acc}, {"baseline_accuracy", base},
                   {"normalized_accuracy", norm}, {"speedup", sp}, {"energy_savings", en}, {"rows", rows}};

  if (!g.json_output) {
    out << "network " << net.name << ", " << data.size() << " inputs, " << o.metric << "\n";
    out << std::left << std::setw(24) << "format" << std::setw(12) << "accuracy" << std::setw(12) << "normalized"
        << std::setw(10) << "speedup" << "energy_savings\n";
    for (const auto& r : rows) {
      out << std::setw(24) << r["format"].get<std::string>() << std::setw(12) << fixed4(r["accuracy"])
          << std::setw(12) << fixed4(r["normalized_accuracy"]) << std::setw(10) << fixed4(r["speedup"])
          << fixed4(r["energy_savings"]) << "\n";
    }
  }
  return kExitOk;
}

struct SweepOptions {
  std::string net = "lenet_toy";
  std::string data = "mnist-test";
  std::string space = "default";
  std::string mode = "measured";
  std::string metric = "top1";
  std::size_t samples = 10;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> limit;
  std::optional<std::string> model;
  std::optional<std::string> out;
};

inline json samples_json(const std::vector<std::size_t>& idx, std::optional<std::uint64_t> seed) {
  return {{"count", idx.size()}, {"seed", seed ? json(*seed) : json(nullptr)}, {"indices", idx}};
}

inline int cmd_sweep(const SweepOptions& o, const Globals& g, RunReport& report, std::ostream& out) {
  if (o.mode != "measured" && o.mode != "predicted") throw ParseError("--mode must be measured or predicted");
  const DesignSpaceConfig cfg = DesignSpaceConfig::parse(o.space);
  const auto space = enumerate_design_space(cfg);
  const CostTables tables = g.tables();
  const NetworkDef net = resolve_network(o.net);
  Dataset data = resolve_dataset(o.data, net);
  if (o.limit) data = data.head(*o.limit);
  const std::size_t k = metric_k(o.metric);
  const bool predicted = o.mode == "predicted";
  std::optional<AccuracyModel> model;
  if (predicted) {
    if (!o.model) throw ParseError("--mode predicted requires --model");
    model = load_model(*o.model);
  }
  const auto idx = select_samples(data.size(), o.samples, o.seed);
  const Dataset samples = data.select(idx);

  report.config = {{"net", o.net},   {"data", o.data},     {"space", cfg.to_string()}, {"mode", o.mode},
                   {"metric", o.metric}, {"inputs", data.size()},
                   {"limit", o.limit ? json(*o.limit) : json(nullptr)},
                   {"samples", samples_json(idx, o.seed)},
                   {"model", model ? model_to_json(*model) : json(nullptr)}};
  report.config.update(g.describe(tables));

  const R2Scorer scorer(net, samples.inputs);
  AccuracyOracle oracle(net, data, k);
  const double base = oracle.baseline_accuracy();
  std::vector<SweepRow> rows;
  rows.push_back({"baseline", "measured", base, 1.0, 1.0, 1.0, 1.0});
  for (const auto& fmt : space) {
    SweepRow r;
    r.format = fmt.to_string();
    r.mode = o.mode;
    r.r2 = scorer(fmt);
    if (predicted) {
      r.normalized_accuracy = model->predict(r.r2);
      r.accuracy = r.normalized_accuracy * base;
    } else {
      r.accuracy = oracle.accuracy(fmt);
      r.normalized_accuracy = normalized_accuracy(r.accuracy, base);
    }
    r.speedup = speedup(fmt, tables);
    r.energy_savings = energy_savings(fmt, tables);
    rows.push_back(r);
  }

  json jrows = json::array();
  for (const auto& r : rows) jrows.push_back(sweep_row_json(r));
  report.result = {{"baseline_accuracy", base}, {"formats", space.size()},
                   {"validation_evaluations", oracle.evaluations()}, {"rows", jrows}};
  if (o.out) {
    const std::filesystem::path path(*o.out);
    if (path.extension() == ".json") write_text(path, json{{"rows", jrows}}.dump(2) + "\n");
    else write_text(path, sweep_csv(rows));
    report.result["out"] = *o.out;
    if (!g.json_output) out << "wrote " << rows.size() << " rows to " << *o.out << "\n";
  } else if (!g.json_output) {
    out << sweep_csv(rows);
  }
  return kExitOk;
}

struct SearchOptions {
  std::string net = "lenet_toy";
  std::string data = "mnist-test";
  std::string space = "default";
  std::string metric = "top1";
  std::size_t samples = 10;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> limit;
  double target = 0.99;
  std::size_t refine = 2;
  std::optional<std::string> model;
  std::vector<std::string> sweeps;
  bool exhaustive = false;
};

inline int cmd_search(const SearchOptions& o, const Globals& g, RunReport& report, std::ostream& out) {
  const DesignSpaceConfig cfg = DesignSpaceConfig::parse(o.space);
  const auto space = enumerate_design_space(cfg);
  const CostTables tables = g.tables();
  const NetworkDef net = resolve_network(o.net);
  Dataset data = resolve_dataset(o.data, net);
  if (o.limit) data = data.head(*o.limit);
  const std::size_t k = metric_k(o.metric);

  report.config = {{"net", o.net},       {"data", o.data},         {"space", cfg.to_string()},
                   {"metric", o.metric}, {"inputs", data.size()},  {"target", o.target},
                   {"limit", o.limit ? json(*o.limit) : json(nullptr)}, {"exhaustive", o.exhaustive}};
  report.config.update(g.describe(tables));

  SearchResult res;
  if (o.exhaustive) {
    res = exhaustive_search(net, data, space, tables, o.target, k);
  } else {
    AccuracyModel model;
    if (o.model) {
      model = load_model(*o.model);
    } else if (!o.sweeps.empty()) {
      std::vector<AccuracyPair> pairs;
      for (const auto& s : o.sweeps) {
        const auto p = sweep_pairs(load_sweep(s));
        pairs.insert(pairs.end(), p.begin(), p.end());
      }
      model = fit_accuracy_model(pairs);
    } else {
      throw ParseError("search needs --model or --sweep (or --exhaustive)");
    }
    const auto idx = select_samples(data.size(), o.samples, o.seed);
    const Dataset samples = data.select(idx);
    report.config["samples"] = samples_json(idx, o.seed);
    report.config["refine"] = o.refine;
    report.config["model"] = model_to_json(model);
    report.config["model_source"] = o.model ? json(*o.model) : json(o.sweeps);
    res = fast_search(net, samples.inputs, data, model, space, tables, o.target, o.refine, k);
  }

  json history = json::array();
  for (const auto& p : res.history) history.push_back(point_json(p));
  const json baseline_row = {{"format", "baseline"}, {"width", kBaselineWidth}, {"normalized_accuracy", 1.0},
                             {"speedup", 1.0}, {"energy_savings", 1.0}};
  report.result = {{"point", point_json(res.point)},
                   {"validation_evaluations", res.validation_evaluations},
                   {"scored_formats", res.scored_formats},
                   {"space_size", space.size()},
                   {"history", history},
                   {"baseline", baseline_row}};
  // Exhaustive search measures formats directly and never scores them.
  const bool scored = !o.exhaustive || res.point.fallback;
  if (!scored) {
    report.result["point"]["r2"] = nullptr;
    report.result["point"]["predicted_norm_accuracy"] = nullptr;
  }

  if (!g.json_output) {
    const DesignPoint& p = res.point;
    out << "format=" << p.fmt.to_string() << "\n";
    out << "width=" << p.fmt.width() << "\n";
    out << "evaluated=" << (p.evaluated ? "true" : "false") << "\n";
    out << "fallback=" << (p.fallback ? "true" : "false") << "\n";
    out << "r2=" << (scored ? number(p.r2) : "none") << "\n";
    out << "predicted_norm_accuracy=" << (scored ? number(p.predicted_norm_accuracy) : "none") << "\n";
    out << "measured_norm_accuracy="
        << (p.measured_norm_accuracy ? number(*p.measured_norm_accuracy) : std::string("none")) << "\n";
    out << "speedup=" << number(p.speedup) << "\n";
    out << "energy_savings=" << number(p.energy_savings) << "\n";
    out << "validation_evaluations=" << res.validation_evaluations << "\n";
    out << "baseline: format=baseline normalized_accuracy=1 speedup=1 energy_savings=1\n";
  }
  return res.point.fallback ? kExitFallback : kExitOk;
}

struct TraceOptions {
  std::string net = "lenet_toy";
  std::string data = "mnist-test";
  std::size_t data_index = 0;
  std::string layer;
  std::size_t neuron = 0;
  std::string format;
  std::optional<std::string> out;
};

inline std::size_t resolve_layer(const NetworkDef& net, const std::string& spec) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].name == spec) return i;
  }
  std::size_t idx = 0;
  auto [ptr, ec] = std::from_chars(spec.data(), spec.data() + spec.size(), idx);
  if (ec == std::errc{} && ptr == spec.data() + spec.size()) return idx;
  throw DomainError("trace: no layer named '" + spec + "'");
}

inline int cmd_trace(const TraceOptions& o, const Globals& g, RunReport& report, std::ostream& out) {
  const NumericFormat fmt = NumericFormat::parse(o.format);
  const NetworkDef net = resolve_network(o.net);
  const Dataset data = resolve_dataset(o.data, net);
  if (o.data_index >= data.size()) {
    throw DomainError("trace: data index " + std::to_string(o.data_index) + " out of range (dataset has " +
                      std::to_string(data.size()) + " inputs)");
  }
  const std::size_t layer = resolve_layer(net, o.layer);
  const auto records = accumulation_trace(net, data.inputs[o.data_index], layer, o.neuron, fmt);

  report.config = {{"net", o.net},       {"data", o.data},     {"data_index", o.data_index},
                   {"layer", o.layer},   {"layer_index", layer}, {"neuron", o.neuron},
                   {"format", fmt.to_string()}};
  std::string csv = "step,running_sum,exact_running_sum\n";
  json rows = json::array();
  for (const auto& r : records) {
    csv += std::to_string(r.step) + "," + number(r.running_sum) + "," + number(r.exact_running_sum) + "\n";
    rows.push_back({{"step", r.step}, {"running_sum", r.running_sum}, {"exact_running_sum", r.exact_running_sum}});
  }
  report.result = {{"steps", records.size()}, {"final_running_sum", records.back().running_sum},
                   {"final_exact_running_sum", records.back().exact_running_sum}, {"rows", rows}};
  if (o.out) {
    write_text(*o.out, csv);
    report.result["out"] = *o.out;
    if (!g.json_output) out << "wrote " << records.size() << " steps to " << *o.out << "\n";
  } else if (!g.json_output) {
    out << csv;
  }
  return kExitOk;
}

struct FitOptions {
  std::vector<std::string> sweeps;
  std::optional<std::string> out;
};

inline int cmd_fit_model(const FitOptions& o, const Globals& g, RunReport& report, std::ostream& out) {
  std::vector<AccuracyPair> pairs;
  json sources = json::array();
  for (const auto& s : o.sweeps) {
    const auto p = sweep_pairs(load_sweep(s));
    pairs.insert(pairs.end(), p.begin(), p.end());
    sources.push_back({{"path", s}, {"pairs", p.size()}});
  }
  const AccuracyModel model = fit_accuracy_model(pairs);
  report.config = {{"sweeps", sources}};
  report.result = model_to_json(model);
  report.result["pairs"] = pairs.size();
  if (o.out) {
    json file = model_to_json(model);
    file["pairs"] = pairs.size();
    write_text(*o.out, file.dump(2) + "\n");
    report.result["out"] = *o.out;
  }
  if (!g.json_output) {
    out << "slope=" << number(model.slope) << "\n";
    out << "intercept=" << number(model.intercept) << "\n";
    out << "fit_correlation=" << number(model.fit_correlation) << "\n";
    out << "pairs=" << pairs.size() << "\n";
  }
  return kExitOk;
}

struct CostOptions {
  std::vector<std::string> formats;
  std::optional<std::string> show_table;
};

inline int cmd_cost(const CostOptions& o, const Globals& g, RunReport& report, std::ostream& out) {
  const CostTables tables = g.tables();
  report.config = {{"formats", o.formats}, {"show_table", o.show_table ? json(*o.show_table) : json(nullptr)}};
  report.config.update(g.describe(tables));
  json rows = json::array();
  for (const auto& lit : o.formats) {
    const NumericFormat fmt = NumericFormat::parse(lit);
    rows.push_back({{"format", fmt.to_string()}, {"width", fmt.width()}, {"speedup", speedup(fmt, tables)},
                    {"energy_savings", energy_savings(fmt, tables)}});
  }
  report.result = {{"rows", rows}};
  std::string table_text;
  if (o.show_table) {
    if (*o.show_table == "float") table_text = tables.float_table.to_text();
    else if (*o.show_table == "fixed") table_text = tables.fixed_table.to_text();
    else throw ParseError("--show-table must be float or fixed");
    report.result["table"] = table_text;
  }
  if (!g.json_output) {
    if (!rows.empty()) {
      out << std::left << std::setw(24) << "format" << std::setw(8) << "width" << std::setw(10) << "speedup"
          << "energy_savings\n";
      for (const auto& r : rows) {
        out << std::setw(24) << r["format"].get<std::string>() << std::setw(8) << r["width"].get<int>()
            << std::setw(10) << fixed4(r["speedup"]) << fixed4(r["energy_savings"]) << "\n";
      }
    }
    out << table_text;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Entry point

/// Runs one command. `args` excludes the program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"precis: customized-precision DNN inference, cost model and precision search"};
  app.require_subcommand(1, 1);
  Globals g;
  app.add_flag("--json", g.json_output, "Emit a JSON report on stdout");
  app.add_option("--cost-table", g.cost_table_paths, "Cost table file; replaces the default table of its kind")
      ->check(CLI::ExistingFile);

  EvalOptions eval;
  auto* c_eval = app.add_subcommand("eval", "Accuracy, speedup and energy savings of one format");
  c_eval->add_option("--net", eval.net, "Manifest path or bundled network name")->capture_default_str();
  c_eval->add_option("--data", eval.data, "Dataset spec")->capture_default_str();
  c_eval->add_option("--format", eval.format, "Format literal")->required();
  c_eval->add_option("--metric", eval.metric, "top1 or top5")->capture_default_str();
  c_eval->add_option("--limit", eval.limit, "Use only the first N inputs");

  SweepOptions sweep;
  auto* c_sweep = app.add_subcommand("sweep", "Accuracy and cost of every format in a design space");
  c_sweep->add_option("--net", sweep.net)->capture_default_str();
  c_sweep->add_option("--data", sweep.data)->capture_default_str();
  c_sweep->add_option("--space", sweep.space, "Design space, e.g. float:m1-16e1-8,fixed:i1-15s2f1-15s2")
      ->capture_default_str();
  c_sweep->add_option("--mode", sweep.mode, "measured or predicted")->capture_default_str();
  c_sweep->add_option("--metric", sweep.metric)->capture_default_str();
  c_sweep->add_option("--samples", sweep.samples, "Inputs used for r2 scoring")->capture_default_str();
  c_sweep->add_option("--seed", sweep.seed, "Select samples at random with this seed");
  c_sweep->add_option("--limit", sweep.limit);
  c_sweep->add_option("--model", sweep.model, "Accuracy model JSON (predicted mode)");
  c_sweep->add_option("--out", sweep.out, "Output file (.csv or .json)");

  SearchOptions search;
  auto* c_search = app.add_subcommand("search", "Fastest format meeting a normalized accuracy target");
  c_search->add_option("--net", search.net)->capture_default_str();
  c_search->add_option("--data", search.data)->capture_default_str();
  c_search->add_option("--space", search.space)->capture_default_str();
  c_search->add_option("--metric", search.metric)->capture_default_str();
  c_search->add_option("--samples", search.samples)->capture_default_str();
  c_search->add_option("--seed", search.seed);
  c_search->add_option("--limit", search.limit);
  c_search->add_option("--target", search.target)->capture_default_str();
  c_search->add_option("--refine", search.refine, "Validation-set evaluations allowed")->capture_default_str();
  auto* o_model = c_search->add_option("--model", search.model, "Accuracy model JSON");
  auto* o_sweep = c_search->add_option("--sweep", search.sweeps, "Fit the model from these sweep files");
  o_model->excludes(o_sweep);
  c_search->add_flag("--exhaustive", search.exhaustive, "Measure every format instead");

  TraceOptions trace;
  auto* c_trace = app.add_subcommand("trace", "Running sum of one neuron, MAC by MAC");
  c_trace->add_option("--net", trace.net)->capture_default_str();
  c_trace->add_option("--data", trace.data)->capture_default_str();
  c_trace->add_option("--data-index", trace.data_index)->capture_default_str();
  c_trace->add_option("--layer", trace.layer, "Layer name or index")->required();
  c_trace->add_option("--neuron", trace.neuron)->capture_default_str();
  c_trace->add_option("--format", trace.format)->required();
  c_trace->add_option("--out", trace.out, "CSV output file");

  FitOptions fit;
  auto* c_fit = app.add_subcommand("fit-model", "Fit the r2 to accuracy model from measured sweeps");
  c_fit->add_option("--sweeps", fit.sweeps)->required()->expected(1, -1);
  c_fit->add_option("--out", fit.out, "Model JSON output file");

  CostOptions cost;
  auto* c_cost = app.add_subcommand("cost", "Speedup and energy savings from the cost tables");
  c_cost->add_option("--format", cost.formats, "Format literal (repeatable)");
  c_cost->add_option("--show-table", cost.show_table, "Print the float or fixed table");

  const std::vector<std::string> argv = args;
  std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  RunReport report;
  report.command = app.get_subcommands().front()->get_name();
  report.argv = argv;
  const auto start = std::chrono::steady_clock::now();
  int code = kExitOk;
  try {
    if (c_eval->parsed()) code = cmd_eval(eval, g, report, out);
    else if (c_sweep->parsed()) code = cmd_sweep(sweep, g, report, out);
    else if (c_search->parsed()) code = cmd_search(search, g, report, out);
    else if (c_trace->parsed()) code = cmd_trace(trace, g, report, out);
    else if (c_fit->parsed()) code = cmd_fit_model(fit, g, report, out);
    else code = cmd_cost(cost, g, report, out);
  } catch (const Error& e) {
    if (g.json_output) {
      out << json{{"version", kReportVersion}, {"command", report.command}, {"error", e.what()}}.dump(2) << "\n";
    }
    err << "precis " << report.command << ": error: " << e.what() << "\n";
    return kExitError;
  }
  report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (g.json_output) out << report.to_json().dump(2) << "\n";
  return code;
}

}  // namespace precis::cli
