// Copyright 2026 The edgebatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Parameter sweeps over scenarios and CSV/JSON result tables.
//
// Axes combine as a grid. Each grid point runs `repetitions` seeds
// (seed, seed + 1, ...); every point gets one aggregate row with the mean
// and sample standard deviation of each metric over its successful runs.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "edgebatch/core.hpp"
#include "edgebatch/scenario_io.hpp"
#include "edgebatch/sim.hpp"
#include "json.hpp"

namespace edgebatch {

inline const std::vector<std::string>& sweep_axis_names() {
  static const std::vector<std::string> names = {
      "arrival_rate", "deadline_scale", "tolerance_cap",
      "quant_profile", "model", "scheduler"};
  return names;
}

struct SweepAxis {
  std::string name;
  std::vector<std::string> values;
};

struct SweepSpec {
  std::vector<SweepAxis> axes;
  std::size_t repetitions = 1;  // seeds per grid point
  std::size_t parallelism = 1;
  bool record_trace = false;

  void validate() const {
    if (repetitions < 1) throw ConfigError("--seeds", "must be >= 1");
    for (const auto& a : axes) {
      const auto& names = sweep_axis_names();
      if (std::find(names.begin(), names.end(), a.name) == names.end()) {
        throw ConfigError("--sweep", "unknown axis '" + a.name + "'");
      }
      if (a.values.empty()) {
        throw ConfigError("--sweep " + a.name, "needs at least one value");
      }
    }
  }
};

// "axis=v1,v2,..."
inline SweepAxis parse_sweep_axis(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--sweep", "expected axis=v1,v2,... but got '" + arg + "'");
  }
  SweepAxis axis;
  axis.name = arg.substr(0, eq);
  std::stringstream rest(arg.substr(eq + 1));
  std::string item;
  while (std::getline(rest, item, ',')) {
    if (!item.empty()) axis.values.push_back(item);
  }
  return axis;
}

namespace detail {

inline double parse_number(const std::string& field, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(field, "expected a number, got '" + text + "'");
  }
}

inline void apply_axis(Scenario& sc, const std::string& axis,
                       const std::string& value) {
  const std::string field = "--sweep " + axis;
  if (axis == "arrival_rate") {
    sc.arrival_rate = parse_number(field, value);
  } else if (axis == "deadline_scale") {
    sc.deadline_scale = parse_number(field, value);
  } else if (axis == "tolerance_cap") {
    sc.tolerance_cap = parse_number(field, value);
  } else if (axis == "quant_profile") {
    sc.quant_profile = value;
  } else if (axis == "model") {
    sc.model = value;
  } else if (axis == "scheduler") {
    auto k = scheduler_from_string(value);
    if (!k) throw ConfigError(field, "unknown scheduler '" + value + "'");
    sc.scheduler = *k;
  } else {
    throw ConfigError("--sweep", "unknown axis '" + axis + "'");
  }
}

}  // namespace detail

using Cell = std::variant<std::monostate, std::int64_t, double, std::string>;

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  nlohmann::json config;    // resolved base scenario
  std::string config_hash;  // of the base scenario
  std::vector<std::string> notes;
  std::size_t failed_runs = 0;
  std::vector<std::vector<Cell>> trace_rows;  // when requested
  std::vector<std::string> trace_columns;

  std::size_t column(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw LookupError("no column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
  }
  const Cell& at(std::size_t row, const std::string& name) const {
    return rows.at(row).at(column(name));
  }
};

inline std::optional<double> cell_number(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&c)) return *d;
  return std::nullopt;
}

inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols = {
      "throughput",          "generated",        "scheduled",
      "completed",           "missed_late",      "missed_expired",
      "dropped",             "queued_at_horizon", "nodes_visited",
      "nodes_pruned",        "nodes_visited_no_prune",
      "complexity_reduction_pct", "oracle_checks", "oracle_mismatches"};
  return cols;
}

inline std::vector<Cell> metric_cells(const SimMetrics& m) {
  auto i = [](std::uint64_t v) { return Cell{static_cast<std::int64_t>(v)}; };
  Cell no_prune{};
  Cell reduction{};
  if (m.nodes_visited_no_prune_total) {
    no_prune = i(*m.nodes_visited_no_prune_total);
    if (auto r = complexity_reduction(m.nodes_visited_total,
                                      *m.nodes_visited_no_prune_total)) {
      reduction = *r;
    }
  }
  return {Cell{m.throughput}, i(m.generated),       i(m.scheduled_total),
          i(m.completed),     i(m.missed_late),     i(m.missed_expired),
          i(m.dropped_total), i(m.queued_at_horizon), i(m.nodes_visited_total),
          i(m.nodes_pruned_total), no_prune,        reduction,
          i(m.oracle_checks), i(m.oracle_mismatches)};
}

inline ResultTable run_sweep(const Scenario& base, const SweepSpec& spec) {
  spec.validate();
  struct Point {
    std::vector<std::string> values;
    Scenario scenario;
  };
  // Grid in row-major order over the axes as given.
  std::vector<Point> points{{{}, base}};
  for (const auto& axis : spec.axes) {
    std::vector<Point> next;
    for (const auto& p : points) {
      for (const auto& v : axis.values) {
        Point q = p;
        q.values.push_back(v);
        detail::apply_axis(q.scenario, axis.name, v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }

  struct Job {
    std::size_t point;
    std::uint64_t seed;
    std::string hash;
    std::optional<SimMetrics> metrics;
    std::string error;
  };
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (std::size_t r = 0; r < spec.repetitions; ++r) {
      jobs.push_back({p, base.seed + r, {}, std::nullopt, {}});
    }
  }

  std::atomic<std::size_t> next_job{0};
  auto worker = [&] {
    for (std::size_t k = next_job++; k < jobs.size(); k = next_job++) {
      Job& job = jobs[k];
      Scenario sc = points[job.point].scenario;
      sc.seed = job.seed;
      sc.record_trace = spec.record_trace;
      try {
        job.hash = config_hash_hex(sc);
        job.metrics = run(sc);
      } catch (const std::exception& e) {
        job.error = e.what();
      }
    }
  };
  const std::size_t threads =
      std::max<std::size_t>(1, std::min(spec.parallelism, jobs.size()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }

  ResultTable table;
  table.config = to_json(base);
  table.config_hash = config_hash_hex(base);
  table.notes.push_back(
      "deadline_scale: tau = deadline_scale * U[deadline_s.min, deadline_s.max]");
  table.notes.push_back(
      "tolerance_cap: a = tolerance_cap * U[0, 1]");
  table.notes.push_back("aggregate rows: mean over successful runs; *_std is "
                        "the sample standard deviation (n - 1)");
  table.columns = {"row"};
  for (const auto& a : spec.axes) table.columns.push_back(a.name);
  table.columns.insert(table.columns.end(), {"seed", "config_hash", "status", "n"});
  const auto& metrics = metric_columns();
  table.columns.insert(table.columns.end(), metrics.begin(), metrics.end());
  for (const auto& m : metrics) table.columns.push_back(m + "_std");

  const std::size_t n_metrics = metrics.size();
  for (std::size_t p = 0; p < points.size(); ++p) {
    std::vector<std::vector<std::optional<double>>> samples(n_metrics);
    std::string base_hash;
    for (const Job& job : jobs) {
      if (job.point != p) continue;
      if (base_hash.empty()) base_hash = job.hash;
      std::vector<Cell> row{Cell{std::string("data")}};
      for (const auto& v : points[p].values) row.emplace_back(v);
      row.emplace_back(static_cast<std::int64_t>(job.seed));
      row.emplace_back(job.hash);
      if (job.metrics) {
        row.emplace_back(std::string("ok"));
        row.emplace_back(std::int64_t{1});
        const auto cells = metric_cells(*job.metrics);
        for (std::size_t k = 0; k < n_metrics; ++k) {
          row.push_back(cells[k]);
          samples[k].push_back(cell_number(cells[k]));
        }
      } else {
        ++table.failed_runs;
        row.emplace_back("error: " + job.error);
        row.emplace_back(std::int64_t{1});
        row.resize(row.size() + n_metrics);
      }
      row.resize(row.size() + n_metrics);  // *_std empty on data rows
      table.rows.push_back(std::move(row));

      if (spec.record_trace && job.metrics) {
        for (const TraceRow& t : job.metrics->trace) {
          std::vector<Cell> tr;
          for (const auto& v : points[p].values) tr.emplace_back(v);
          tr.insert(tr.end(),
                    {Cell{static_cast<std::int64_t>(job.seed)},
                     Cell{static_cast<std::int64_t>(t.epoch)}, Cell{t.time_s},
                     Cell{static_cast<std::int64_t>(t.queue_len)},
                     Cell{static_cast<std::int64_t>(t.candidates)},
                     Cell{static_cast<std::int64_t>(t.batch_size)},
                     Cell{static_cast<std::int64_t>(t.completed)},
                     Cell{static_cast<std::int64_t>(t.nodes_visited)},
                     Cell{static_cast<std::int64_t>(t.nodes_pruned)},
                     Cell{t.memory_bytes}, Cell{t.latency_s}});
          table.trace_rows.push_back(std::move(tr));
        }
      }
    }

    std::vector<Cell> agg{Cell{std::string("aggregate")}};
    for (const auto& v : points[p].values) agg.emplace_back(v);
    agg.emplace_back(static_cast<std::int64_t>(base.seed));
    agg.emplace_back(base_hash);
    std::int64_t ok = 0;
    for (const Job& job : jobs) ok += (job.point == p && job.metrics) ? 1 : 0;
    agg.emplace_back(ok == static_cast<std::int64_t>(spec.repetitions)
                         ? std::string("ok")
                         : std::string("partial"));
    agg.emplace_back(ok);
    std::vector<Cell> stds;
    for (std::size_t k = 0; k < n_metrics; ++k) {
      std::vector<double> xs;
      for (const auto& s : samples[k]) {
        if (s) xs.push_back(*s);
      }
      if (xs.empty()) {
        agg.emplace_back();
        stds.emplace_back();
        continue;
      }
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      agg.emplace_back(mean);
      if (xs.size() < 2) {
        stds.emplace_back();
      } else {
        double ss = 0.0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        stds.emplace_back(std::sqrt(ss / static_cast<double>(xs.size() - 1)));
      }
    }
    agg.insert(agg.end(), stds.begin(), stds.end());
    table.rows.push_back(std::move(agg));
  }

  if (spec.record_trace) {
    for (const auto& a : spec.axes) table.trace_columns.push_back(a.name);
    table.trace_columns.insert(
        table.trace_columns.end(),
        {"seed", "epoch", "time_s", "queue_len", "candidates", "batch_size",
         "completed", "nodes_visited", "nodes_pruned", "memory_bytes",
         "latency_s"});
  }
  return table;
}

enum class Format { kCsv, kJson };

namespace detail {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string csv_field(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return "";
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(v);
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(v);
        } else {
          if (v.find_first_of(",\"\n") == std::string::npos) return v;
          std::string out = "\"";
          for (char ch : v) {
            if (ch == '"') out += '"';
            out += ch;
          }
          return out + "\"";
        }
      },
      c);
}

inline nlohmann::json json_value(const Cell& c) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return nullptr;
        } else if constexpr (std::is_same_v<T, double>) {
          if (!std::isfinite(v)) return format_double(v);
          // Round through the 6-digit text so both formats carry one value.
          return std::stod(format_double(v));
        } else {
          return v;
        }
      },
      c);
}

inline std::string render_csv(const std::vector<std::string>& columns,
                              const std::vector<std::vector<Cell>>& rows,
                              const std::vector<std::string>& preamble) {
  std::string out;
  for (const auto& line : preamble) out += "# " + line + "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out += (i ? "," : "") + csv_field(Cell{columns[i]});
  }
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out += (i ? "," : "") + csv_field(row[i]);
    }
    out += "\n";
  }
  return out;
}

}  // namespace detail

inline std::string render(const ResultTable& table, Format format) {
  if (table.rows.empty()) {
    throw std::invalid_argument("refusing to emit an empty result table");
  }
  if (format == Format::kCsv) {
    std::vector<std::string> preamble = {"config_hash " + table.config_hash,
                                         "config " + table.config.dump()};
    for (const auto& n : table.notes) preamble.push_back("note " + n);
    return detail::render_csv(table.columns, table.rows, preamble);
  }
  nlohmann::ordered_json j;
  j["config_hash"] = table.config_hash;
  j["config"] = table.config;
  j["notes"] = table.notes;
  j["columns"] = table.columns;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& c : row) r.push_back(detail::json_value(c));
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

inline std::string render_trace(const ResultTable& table) {
  if (table.trace_rows.empty()) {
    throw std::invalid_argument("refusing to emit an empty trace");
  }
  return detail::render_csv(table.trace_columns, table.trace_rows,
                            {"config_hash " + table.config_hash});
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline void emit(const ResultTable& table, Format format, const std::string& path) {
  write_text(path, render(table, format));
}

}  // namespace edgebatch
