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


#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "edgebatch/scenario_io.hpp"
#include "edgebatch/sweep.hpp"

namespace edgebatch {
namespace {

Scenario quick() {
  Scenario sc = parse_scenario_text(R"({"model": "BLOOM-3B", "scheduler": "dftsp",
                                        "duration_s": 8})");
  return sc;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

TEST(ScenarioIo, MinimalFileGetsDefaults) {
  const Scenario sc = parse_scenario_text(R"({"model": "BLOOM-7.1B", "scheduler": "stb"})");
  EXPECT_EQ(sc.model, "BLOOM-7.1B");
  EXPECT_EQ(sc.scheduler, SchedulerKind::kStb);
  EXPECT_EQ(sc.epoch_s, 2.0);
  EXPECT_EQ(sc.radio.slot_up_s, 0.25);
  EXPECT_EQ(sc.radio.slot_down_s, 0.25);
  EXPECT_EQ(sc.radio.uplink_band_hz, 20e6);
  EXPECT_EQ(sc.node.gpu_count, 20);
  EXPECT_EQ(sc.node.gpu_flops, 1.33e12);
  EXPECT_EQ(sc.ladder, (std::vector<Tokens>{128, 256, 512}));
  EXPECT_EQ(sc.deadline_min_s, 0.5);
  EXPECT_EQ(sc.deadline_max_s, 2.0);
  EXPECT_EQ(sc.quant_profile, "W8A16");
  // Every default is visible in the resolved dump.
  const auto j = to_json(sc);
  EXPECT_EQ(j.at("epoch_s"), 2.0);
  EXPECT_EQ(j.at("radio").at("slot_up_s"), 0.25);
  EXPECT_EQ(j.at("arrival_rate"), 50.0);
}

TEST(ScenarioIo, NegativeBandwidthNamesField) {
  try {
    (void)parse_scenario_text("{\n  \"radio\": {\n    \"uplink_bandwidth_hz\": -5\n  }\n}");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "radio.uplink_bandwidth_hz");
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(ScenarioIo, UnknownKeyAndWrongType) {
  try {
    (void)parse_scenario_text("{\n\"arival_rate\": 5}");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("arival_rate"), std::string::npos);
    EXPECT_EQ(e.line(), 2);
  }
  try {
    (void)parse_scenario_text(R"({"duration_s": "long"})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "duration_s");
  }
  EXPECT_THROW((void)parse_scenario_text(R"({"scheduler": "greedy"})"), ConfigError);
  EXPECT_THROW((void)parse_scenario_text(R"({"model": "GPT-9"})"), ConfigError);
}

TEST(ScenarioIo, SyntaxErrorHasLine) {
  try {
    (void)parse_scenario_text("{\n  \"model\": \"BLOOM-3B\",\n  oops\n}");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(ScenarioIo, RoundTrip) {
  const Scenario a = parse_scenario_text(R"({
    "model": "toy", "quant_profile": "toy-q", "scheduler": "nob",
    "arrival_rate": 12.5, "ladder": [64, 128], "prompt_lengths": [32, 64],
    "deadline_s": {"min": 0.75, "max": 1.5}, "tolerance_cap": 0.3,
    "radio": {"uplink_power_dbm": 23, "channel_mode": "per_user"},
    "node": {"gpu_count": 4},
    "search": {"pruning_rule": "literal", "tau_min_mode": "exact"},
    "models": [{"name": "toy", "layers": 2, "hidden_dim": 64,
                "head_count": 4, "head_dim": 16}],
    "quant_profiles": [{"name": "toy-q", "alpha": 0.5, "beta": 0.9,
                        "delta_ppl": {"toy": 0.1}}]})");
  const nlohmann::json j = to_json(a);
  const Scenario b = scenario_from_json(j);
  EXPECT_EQ(to_json(b).dump(), j.dump());
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(b.catalog.model("toy"), a.catalog.model("toy"));
  EXPECT_EQ(b.pruning_rule, PruningRule::kLiteral);
  EXPECT_EQ(b.channel_mode, ChannelMode::kPerUser);
  EXPECT_EQ(b.uplink_power_dbm, 23.0);
}

TEST(ScenarioIo, RepoConfigsParse) {
  const std::filesystem::path dir = EDGEBATCH_CONFIG_DIR;
  int seen = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW((void)parse_scenario(entry.path())) << entry.path();
    ++seen;
  }
  EXPECT_GE(seen, 5);
  EXPECT_THROW((void)parse_scenario(dir / "missing.json"), std::runtime_error);
}

TEST(ScenarioIo, HashSeparatesScenarios) {
  Scenario a = quick();
  Scenario b = a;
  b.seed = 2;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash_hex(a).size(), 16u);
}

TEST(Sweep, ParseAxis) {
  const SweepAxis a = parse_sweep_axis("arrival_rate=5,10,25");
  EXPECT_EQ(a.name, "arrival_rate");
  EXPECT_EQ(a.values, (std::vector<std::string>{"5", "10", "25"}));
  EXPECT_THROW((void)parse_sweep_axis("arrival_rate"), ConfigError);
  SweepSpec s;
  s.axes = {parse_sweep_axis("color=red")};
  EXPECT_THROW(s.validate(), ConfigError);
  s.axes = {parse_sweep_axis("model=")};
  EXPECT_THROW(s.validate(), ConfigError);
  s.axes.clear();
  s.repetitions = 0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Sweep, OneValueOneSeed) {
  SweepSpec s;
  s.axes = {parse_sweep_axis("arrival_rate=20")};
  const ResultTable t = run_sweep(quick(), s);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(std::get<std::string>(t.at(0, "row")), "data");
  EXPECT_EQ(std::get<std::string>(t.at(1, "row")), "aggregate");
  EXPECT_EQ(std::get<std::string>(t.at(0, "arrival_rate")), "20");
  EXPECT_EQ(t.failed_runs, 0u);
  EXPECT_TRUE(std::holds_alternative<std::monostate>(t.at(1, "throughput_std")));
}

TEST(Sweep, RowsCarrySeedAndHash) {
  SweepSpec s;
  s.axes = {parse_sweep_axis("arrival_rate=5,30"), parse_sweep_axis("scheduler=dftsp,stb")};
  s.repetitions = 2;
  const Scenario base = quick();
  const ResultTable t = run_sweep(base, s);
  ASSERT_EQ(t.rows.size(), 4u * 3u);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (std::get<std::string>(t.at(r, "row")) != "data") continue;
    Scenario sc = base;
    sc.arrival_rate = std::stod(std::get<std::string>(t.at(r, "arrival_rate")));
    sc.scheduler = *scheduler_from_string(std::get<std::string>(t.at(r, "scheduler")));
    sc.seed = static_cast<std::uint64_t>(std::get<std::int64_t>(t.at(r, "seed")));
    EXPECT_EQ(std::get<std::string>(t.at(r, "config_hash")), config_hash_hex(sc));
    const SimMetrics m = run(sc);
    EXPECT_EQ(std::get<double>(t.at(r, "throughput")), m.throughput);
    EXPECT_EQ(std::get<std::int64_t>(t.at(r, "completed")),
              static_cast<std::int64_t>(m.completed));
  }
}

TEST(Sweep, AggregatesMatchDataRows) {
  SweepSpec s;
  s.axes = {parse_sweep_axis("arrival_rate=10,40")};
  s.repetitions = 3;
  const ResultTable t = run_sweep(quick(), s);
  for (const std::string metric : {"throughput", "completed", "nodes_visited"}) {
    for (std::size_t point = 0; point < 2; ++point) {
      std::vector<double> xs;
      for (std::size_t r = point * 4; r < point * 4 + 3; ++r) {
        xs.push_back(*cell_number(t.at(r, metric)));
      }
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= 3.0;
      double ss = 0.0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      const double sd = std::sqrt(ss / 2.0);
      const std::size_t agg = point * 4 + 3;
      EXPECT_NEAR(*cell_number(t.at(agg, metric)), mean, 1e-12 * std::abs(mean));
      EXPECT_NEAR(*cell_number(t.at(agg, metric + "_std")), sd, 1e-12 * std::abs(sd) + 1e-300);
    }
  }
}

TEST(Sweep, FailuresRecordedPerRow) {
  SweepSpec s;
  s.axes = {parse_sweep_axis("model=BLOOM-3B,LLaMA-2")};
  const ResultTable t = run_sweep(quick(), s);
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_EQ(t.failed_runs, 1u);
  EXPECT_EQ(std::get<std::string>(t.at(0, "status")), "ok");
  const std::string failed = std::get<std::string>(t.at(2, "status"));
  EXPECT_EQ(failed.rfind("error", 0), 0u) << failed;
  EXPECT_TRUE(std::holds_alternative<std::monostate>(t.at(2, "throughput")));
  EXPECT_EQ(std::get<std::string>(t.at(3, "status")), "partial");
}

TEST(Sweep, ParallelMatchesSequential) {
  SweepSpec s;
  s.axes = {parse_sweep_axis("arrival_rate=5,20,40")};
  s.repetitions = 2;
  const ResultTable a = run_sweep(quick(), s);
  s.parallelism = 4;
  const ResultTable b = run_sweep(quick(), s);
  EXPECT_EQ(render(a, Format::kCsv), render(b, Format::kCsv));
}

TEST(Emit, EmptyTableRefused) {
  ResultTable t;
  EXPECT_THROW((void)render(t, Format::kCsv), std::invalid_argument);
}

TEST(Emit, UnwritablePath) {
  SweepSpec s;
  const ResultTable t = run_sweep(quick(), s);
  EXPECT_THROW(emit(t, Format::kCsv, "/nonexistent-dir/out.csv"), std::runtime_error);
}

TEST(Emit, ByteIdenticalFiles) {
  SweepSpec s;
  s.axes = {parse_sweep_axis("arrival_rate=10,30")};
  const auto dir = std::filesystem::temp_directory_path();
  const auto p1 = dir / "edgebatch_emit_a.csv";
  const auto p2 = dir / "edgebatch_emit_b.csv";
  emit(run_sweep(quick(), s), Format::kCsv, p1.string());
  emit(run_sweep(quick(), s), Format::kCsv, p2.string());
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream b;
    b << in.rdbuf();
    return b.str();
  };
  EXPECT_EQ(slurp(p1), slurp(p2));
  EXPECT_FALSE(slurp(p1).empty());
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST(Emit, CsvHeaderAndSixDigits) {
  SweepSpec s;
  const ResultTable t = run_sweep(quick(), s);
  const std::string csv = render(t, Format::kCsv);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# config_hash " + t.config_hash);
  while (std::getline(in, line) && line.rfind("#", 0) == 0) {
  }
  EXPECT_EQ(split_csv_line(line), t.columns);
  EXPECT_EQ(detail::format_double(1.0 / 3.0), "0.333333");
  EXPECT_EQ(detail::format_double(123456789.0), "1.23457e+08");
}

TEST(Emit, CsvAndJsonAgree) {
  SweepSpec s;
  s.axes = {parse_sweep_axis("arrival_rate=10,30")};
  s.repetitions = 2;
  const ResultTable t = run_sweep(quick(), s);
  const std::string csv = render(t, Format::kCsv);
  const auto j = nlohmann::json::parse(render(t, Format::kJson));
  EXPECT_EQ(j.at("config_hash"), t.config_hash);
  EXPECT_EQ(j.at("columns").get<std::vector<std::string>>(), t.columns);

  std::istringstream in(csv);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) continue;
    if (!header) {
      header = true;
      continue;
    }
    rows.push_back(split_csv_line(line));
  }
  const auto& jrows = j.at("rows");
  ASSERT_EQ(rows.size(), jrows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    ASSERT_EQ(rows[r].size(), jrows[r].size());
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const auto& v = jrows[r][c];
      const std::string& text = rows[r][c];
      if (v.is_null()) {
        EXPECT_TRUE(text.empty());
      } else if (v.is_string()) {
        EXPECT_EQ(v.get<std::string>(), text);
      } else if (v.is_number_integer()) {
        EXPECT_EQ(v.get<std::int64_t>(), std::stoll(text));
      } else {
        EXPECT_EQ(v.get<double>(), std::stod(text)) << t.columns[c];
      }
    }
  }
}

TEST(Emit, TraceOutput) {
  SweepSpec s;
  s.record_trace = true;
  const ResultTable t = run_sweep(quick(), s);
  const std::string trace = render_trace(t);
  EXPECT_NE(trace.find("epoch,time_s,queue_len"), std::string::npos);
  EXPECT_EQ(t.trace_rows.size(), 4u);  // 8 s at 2 s epochs
}

}  // namespace
}  // namespace edgebatch
