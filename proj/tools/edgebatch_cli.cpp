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


// edgebatch command line: run scenarios and sweeps, inspect derived
// scheduling coefficients.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "edgebatch/edgebatch.hpp"
#include "json.hpp"

namespace {

struct RunArgs {
  std::string scenario;
  std::vector<std::string> sweeps;
  std::size_t seeds = 1;
  std::optional<std::uint64_t> seed;
  std::string scheduler;
  bool no_prune = false;
  std::string format = "csv";
  std::string out;
  bool verify_oracle = false;
  bool compare_pruning = false;
  std::size_t jobs = 1;
  std::string trace;
};

int run_command(const RunArgs& a) {
  using namespace edgebatch;
  Scenario sc = parse_scenario(a.scenario);
  if (!a.scheduler.empty()) {
    auto k = scheduler_from_string(a.scheduler);
    if (!k) throw ConfigError("--scheduler", "unknown scheduler '" + a.scheduler + "'");
    sc.scheduler = *k;
  }
  if (a.seed) sc.seed = *a.seed;
  if (a.no_prune) sc.pruning = false;
  if (a.verify_oracle) sc.verify_oracle = true;
  if (a.compare_pruning) sc.compare_pruning = true;
  sc.validate();

  SweepSpec spec;
  for (const auto& s : a.sweeps) spec.axes.push_back(parse_sweep_axis(s));
  spec.repetitions = a.seeds;
  spec.parallelism = a.jobs;
  spec.record_trace = !a.trace.empty();

  const ResultTable table = run_sweep(sc, spec);
  const Format format = a.format == "json" ? Format::kJson : Format::kCsv;
  const std::string text = render(table, format);
  if (a.out.empty() || a.out == "-") {
    std::cout << text;
  } else {
    write_text(a.out, text);
  }
  if (spec.record_trace) write_text(a.trace, render_trace(table));

  if (table.failed_runs > 0) {
    const std::size_t status = table.column("status");
    for (const auto& row : table.rows) {
      const auto& s = std::get<std::string>(row[status]);
      if (s.rfind("error", 0) == 0) std::cerr << s << "\n";
    }
    std::cerr << table.failed_runs << " run(s) failed\n";
    return 1;
  }
  return 0;
}

int inspect_command(const std::string& path) {
  using namespace edgebatch;
  const Scenario sc = parse_scenario(path);
  const SchedulingContext ctx = sc.context();
  nlohmann::ordered_json j;
  j["config_hash"] = config_hash_hex(sc);
  j["model"] = ctx.model.name;
  j["quant_profile"] = ctx.quant.name;
  j["weight_bytes"] = weight_bytes(ctx.model);
  j["kv_bytes_per_token"] = kv_bytes_per_token(ctx.model);
  Tokens s_max = 0;
  for (Tokens s : sc.prompt_lengths) s_max = std::max(s_max, s);
  j["static_batch_size"] = static_batch_size(ctx.model, ctx.quant, ctx.node,
                                             sc.epoch_s, s_max, sc.ladder.back());
  nlohmann::json per_len = nlohmann::json::array();
  for (Tokens s : sc.prompt_lengths) {
    const P2Coefficients c = derive_coefficients(ctx, s, {});
    Request probe;
    probe.prompt_len = s;
    probe.output_len = sc.ladder.front();
    const std::vector<Request> one{probe};
    const P2Coefficients shared = derive_coefficients(ctx, s, one);
    per_len.push_back({{"padded_len", s},
                       {"k1", shared.k1},
                       {"k_up_per_token", shared.k_up.front()},
                       {"k2", c.k2},
                       {"k3", c.k3},
                       {"k4", c.k4},
                       {"k5", c.k5},
                       {"deadline_scale", c.deadline_scale}});
  }
  j["coefficients"] = per_len;
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edgebatch: batch scheduling simulator for LLM inference at the edge"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run a scenario, optionally swept");
  run->add_option("scenario", run_args.scenario, "scenario JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--sweep", run_args.sweeps,
                  "axis=v1,v2,... (arrival_rate, deadline_scale, "
                  "tolerance_cap, quant_profile, model, scheduler); repeatable")
      ->take_all();
  run->add_option("--seeds", run_args.seeds, "seeds per grid point")
      ->check(CLI::PositiveNumber);
  run->add_option("--seed", run_args.seed, "first seed (overrides the file)");
  run->add_option("--scheduler", run_args.scheduler, "dftsp | stb | nob | brute");
  run->add_flag("--no-prune", run_args.no_prune, "disable DFS pruning");
  run->add_option("--format", run_args.format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--out", run_args.out, "output path (default stdout)");
  run->add_flag("--verify-oracle", run_args.verify_oracle,
                "cross-check DFTSP against exhaustive search on small epochs");
  run->add_flag("--compare-pruning", run_args.compare_pruning,
                "also count nodes of the unpruned search");
  run->add_option("--jobs", run_args.jobs, "parallel runs")
      ->check(CLI::PositiveNumber);
  run->add_option("--trace", run_args.trace, "per-epoch trace CSV path");

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "print derived coefficients");
  inspect->add_option("scenario", inspect_path, "scenario JSON file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return run_command(run_args);
    return inspect_command(inspect_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
