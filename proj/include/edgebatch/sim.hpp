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

// Epoch-slotted simulation of an edge inference node.
//
// Epoch e starts at t_e = e * epoch. Requests that arrived before t_e and
// are still alive are offered to the scheduler with t_w = t_e - arrival.
// A batch uploads during [t_e, t_e + T_U], computes as soon as both the
// upload and the previous batch are done, and downloads for T_D afterwards.
// A request counts toward throughput when its completion lands within tau of
// its arrival. Queued requests whose deadline has passed are evicted at
// epoch boundaries.

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgebatch/baselines.hpp"
#include "edgebatch/core.hpp"
#include "edgebatch/dftsp.hpp"
#include "edgebatch/inference_cost.hpp"
#include "edgebatch/model_catalog.hpp"
#include "edgebatch/p2_reform.hpp"
#include "edgebatch/radio.hpp"

namespace edgebatch {

enum class SchedulerKind { kDftsp, kStb, kNob, kBrute };
enum class ChannelMode { kShared, kPerUser };

inline std::string to_string(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::kDftsp: return "dftsp";
    case SchedulerKind::kStb: return "stb";
    case SchedulerKind::kNob: return "nob";
    case SchedulerKind::kBrute: return "brute";
  }
  return "?";
}

inline std::optional<SchedulerKind> scheduler_from_string(const std::string& s) {
  for (auto k : {SchedulerKind::kDftsp, SchedulerKind::kStb, SchedulerKind::kNob,
                 SchedulerKind::kBrute}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

inline std::string to_string(ChannelMode m) {
  return m == ChannelMode::kShared ? "shared" : "per_user";
}

inline std::string to_string(PruningRule r) {
  return r == PruningRule::kTight ? "tight" : "literal";
}

inline std::string to_string(TauMinMode m) {
  return m == TauMinMode::kClassBound ? "class_bound" : "exact";
}

// Edge node as configured: identical devices, pooled for batch schedulers.
struct NodeSettings {
  int gpu_count = 20;
  double gpu_flops = 1.33e12;
  Bytes gpu_memory_bytes = 32'000'000'000;
  int weight_replicas = 1;

  NodeCompute compute() const {
    NodeCompute c;
    c.gpu_count = gpu_count;
    c.flops_per_s = gpu_flops * gpu_count;
    c.memory_bytes = gpu_memory_bytes * gpu_count;
    c.weight_replicas = weight_replicas;
    return c;
  }

  void validate(const std::string& where = "node") const {
    if (gpu_count < 1) throw ConfigError(where + ".gpu_count", "must be >= 1");
    if (!(gpu_flops > 0.0) || !std::isfinite(gpu_flops)) {
      throw ConfigError(where + ".gpu_flops", "must be > 0");
    }
    if (gpu_memory_bytes <= 0) {
      throw ConfigError(where + ".gpu_memory_bytes", "must be > 0");
    }
    if (weight_replicas < 1) {
      throw ConfigError(where + ".weight_replicas", "must be >= 1");
    }
  }
};

struct Scenario {
  std::string model = "BLOOM-3B";
  std::string quant_profile = "W8A16";
  SchedulerKind scheduler = SchedulerKind::kDftsp;
  double arrival_rate = 50.0;  // requests/s
  Seconds duration_s = 100.0;
  Seconds epoch_s = 2.0;
  std::uint64_t seed = 1;

  std::vector<Tokens> ladder = {128, 256, 512};          // output lengths
  std::vector<Tokens> prompt_lengths = {128, 256, 512};  // drawn uniformly
  Seconds deadline_min_s = 0.5;
  Seconds deadline_max_s = 2.0;
  double deadline_scale = 1.0;  // tau = scale * U[min, max]
  double tolerance_cap = 1.0;   // a = cap * U[0, 1]
  bool accuracy_check = true;

  // Powers are kept in dBm as configured; context() writes the watt values
  // into the radio config handed to the schedulers.
  RadioConfig radio;
  double uplink_power_dbm = 20.0;
  double downlink_power_dbm = 43.0;
  double noise_density_dbm_per_hz = -174.0;
  double mean_channel_gain = 1e-3;
  ChannelMode channel_mode = ChannelMode::kShared;
  NodeSettings node;

  bool pruning = true;
  PruningRule pruning_rule = PruningRule::kTight;
  TauMinMode tau_min_mode = TauMinMode::kClassBound;
  bool compute_slot_check = true;
  bool compare_pruning = false;  // also count nodes of the unpruned search
  bool verify_oracle = false;    // exhaustive cross-check on small epochs
  std::size_t oracle_cap = 14;
  std::size_t oracle_every = 1;  // check every k-th eligible epoch
  bool debug_checks = false;     // assert check_p1 on every optimized batch
  bool record_trace = false;

  Catalog catalog;

  void validate() const {
    auto positive = [](const std::string& field, double v) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(field, "must be > 0");
    };
    if (!(arrival_rate >= 0.0) || !std::isfinite(arrival_rate)) {
      throw ConfigError("arrival_rate", "must be >= 0");
    }
    positive("duration_s", duration_s);
    positive("epoch_s", epoch_s);
    if (ladder.empty()) throw ConfigError("ladder", "must not be empty");
    for (std::size_t i = 0; i < ladder.size(); ++i) {
      if (ladder[i] < 1) throw ConfigError("ladder", "values must be >= 1");
      if (i > 0 && ladder[i] <= ladder[i - 1]) {
        throw ConfigError("ladder", "values must be strictly increasing");
      }
    }
    if (prompt_lengths.empty()) {
      throw ConfigError("prompt_lengths", "must not be empty");
    }
    for (Tokens s : prompt_lengths) {
      if (s < 1) throw ConfigError("prompt_lengths", "values must be >= 1");
    }
    positive("deadline_s.min", deadline_min_s);
    if (!(deadline_max_s >= deadline_min_s)) {
      throw ConfigError("deadline_s.max", "must be >= deadline_s.min");
    }
    positive("deadline_scale", deadline_scale);
    if (!(tolerance_cap >= 0.0)) throw ConfigError("tolerance_cap", "must be >= 0");
    for (const auto& [field, dbm] :
         {std::pair{"radio.uplink_power_dbm", uplink_power_dbm},
          std::pair{"radio.downlink_power_dbm", downlink_power_dbm},
          std::pair{"radio.noise_density_dbm_per_hz", noise_density_dbm_per_hz}}) {
      if (!std::isfinite(dbm)) throw ConfigError(field, "must be finite");
    }
    radio_config().validate("radio");
    positive("radio.mean_channel_gain", mean_channel_gain);
    node.validate("node");
    const NodeCompute compute = node.compute();
    if (!(epoch_s > radio.slot_up_s)) {
      throw ConfigError("epoch_s", "must exceed radio.slot_up_s");
    }
    if (oracle_cap > 24) throw ConfigError("oracle_cap", "must be <= 24");
    if (oracle_every < 1) throw ConfigError("oracle_every", "must be >= 1");
    const LlmSpec* spec_ptr = nullptr;
    const QuantProfile* quant_ptr = nullptr;
    try {
      spec_ptr = &catalog.model(model);
    } catch (const LookupError& e) {
      throw ConfigError("model", e.what());
    }
    try {
      quant_ptr = &catalog.profile(quant_profile);
    } catch (const LookupError& e) {
      throw ConfigError("quant_profile", e.what());
    }
    const LlmSpec& spec = *spec_ptr;
    const QuantProfile& quant = *quant_ptr;
    if (accuracy_check && !quant.lossless()) {
      try {
        (void)delta_ppl(quant, spec.name);
      } catch (const LookupError&) {
        throw ConfigError("quant_profile",
                          "profile '" + quant.name + "' has no delta_ppl for '" +
                              spec.name + "'");
      }
    }
    const double weights =
        quant.alpha * static_cast<double>(weight_bytes(spec) * node.weight_replicas);
    if (weights > static_cast<double>(compute.memory_bytes)) {
      throw ConfigError("node.gpu_memory_bytes",
                        "model weights do not fit in node memory");
    }
    if (scheduler == SchedulerKind::kNob) {
      const double per_device =
          quant.alpha * static_cast<double>(weight_bytes(spec));
      if (per_device > static_cast<double>(node.gpu_memory_bytes)) {
        throw ConfigError("node.gpu_memory_bytes",
                          "model weights do not fit in one device");
      }
    }
  }

  RadioConfig radio_config() const {
    RadioConfig r = radio;
    r.downlink_power_w = dbm_to_watts(downlink_power_dbm);
    r.noise_density_w_per_hz = dbm_to_watts(noise_density_dbm_per_hz);
    return r;
  }

  SchedulingContext context() const {
    SchedulingContext ctx;
    ctx.model = catalog.model(model);
    ctx.quant = catalog.profile(quant_profile);
    ctx.radio = radio_config();
    ctx.node = node.compute();
    ctx.ladder = ladder;
    if (compute_slot_check) ctx.compute_slot_s = epoch_s;
    return ctx;
  }

  SearchOptions search_options() const {
    SearchOptions o;
    o.pruning = pruning && scheduler != SchedulerKind::kBrute;
    o.rule = pruning_rule;
    o.tau_mode = tau_min_mode;
    return o;
  }

};

struct TraceRow {
  std::size_t epoch = 0;
  Seconds time_s = 0.0;
  std::size_t queue_len = 0;
  std::size_t candidates = 0;
  std::size_t batch_size = 0;
  std::size_t completed = 0;
  std::uint64_t nodes_visited = 0;
  std::uint64_t nodes_pruned = 0;
  double memory_bytes = 0.0;
  Seconds latency_s = 0.0;
};

struct SimMetrics {
  Seconds duration_s = 0.0;
  std::uint64_t generated = 0;
  std::uint64_t scheduled_total = 0;
  std::uint64_t completed = 0;        // on time
  std::uint64_t missed_late = 0;      // scheduled, finished after deadline
  std::uint64_t missed_expired = 0;   // evicted from the queue
  std::uint64_t dropped_total = 0;
  std::uint64_t queued_at_horizon = 0;
  std::uint64_t epochs = 0;
  std::uint64_t nodes_visited_total = 0;
  std::uint64_t nodes_pruned_total = 0;
  std::optional<std::uint64_t> nodes_visited_no_prune_total;
  std::uint64_t oracle_checks = 0;
  std::uint64_t oracle_mismatches = 0;
  double throughput = 0.0;  // completed / duration
  std::vector<TraceRow> trace;

  std::uint64_t missed_total() const { return missed_late + missed_expired; }
};

// 100 (1 - with / without); nullopt when `without` is zero.
inline std::optional<double> complexity_reduction(std::uint64_t with_pruning,
                                                  std::uint64_t without) {
  if (without == 0) return std::nullopt;
  return 100.0 * (1.0 - static_cast<double>(with_pruning) /
                            static_cast<double>(without));
}

namespace detail {

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

}  // namespace detail

// Poisson arrivals over [0, duration). Every request consumes the same
// sequence of draws, so scenarios differing only in scales stay aligned.
template <typename Rng>
std::vector<Request> generate_workload(const Scenario& sc, Rng& rng) {
  std::vector<Request> out;
  if (sc.arrival_rate <= 0.0) return out;
  std::exponential_distribution<double> gap(sc.arrival_rate);
  std::uniform_int_distribution<std::size_t> prompt(0, sc.prompt_lengths.size() - 1);
  std::uniform_int_distribution<std::size_t> output(0, sc.ladder.size() - 1);
  std::uniform_real_distribution<double> deadline(sc.deadline_min_s,
                                                  sc.deadline_max_s);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Seconds t = 0.0;
  for (RequestId id = 0;; ++id) {
    t += gap(rng);
    if (t >= sc.duration_s) break;
    Request r;
    r.id = id;
    r.arrival_s = t;
    r.prompt_len = sc.prompt_lengths[prompt(rng)];
    r.output_len = sc.ladder[output(rng)];
    r.deadline_s = sc.deadline_scale * deadline(rng);
    r.tolerance = sc.tolerance_cap * unit(rng);
    r.link.uplink_power_w = dbm_to_watts(sc.uplink_power_dbm);
    r.link.channel_power = sample_channel_power(rng, sc.mean_channel_gain);
    out.push_back(r);
  }
  return out;
}

inline std::vector<Request> generate_workload(const Scenario& sc) {
  auto rng = detail::make_stream(sc.seed, 1);
  return generate_workload(sc, rng);
}

class SimulationError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline SimMetrics run(const Scenario& sc) {
  sc.validate();
  const SchedulingContext ctx = sc.context();
  const SearchOptions options = sc.search_options();
  const double dppl = sc.accuracy_check ? delta_ppl(ctx.quant, ctx.model.name) : 0.0;

  const std::vector<Request> arrivals = generate_workload(sc);
  auto channel_rng = detail::make_stream(sc.seed, 2);

  SimMetrics m;
  m.duration_s = sc.duration_s;
  m.generated = arrivals.size();
  if (sc.compare_pruning) m.nodes_visited_no_prune_total = 0;

  const Tokens s_max =
      *std::max_element(sc.prompt_lengths.begin(), sc.prompt_lengths.end());
  const std::int64_t stb_b =
      sc.scheduler == SchedulerKind::kStb
          ? static_batch_size(ctx.model, ctx.quant, ctx.node, sc.epoch_s, s_max,
                              sc.ladder.back())
          : 0;
  GpuPool pool(ctx.node);

  std::vector<Request> queue;
  std::size_t next_arrival = 0;
  Seconds compute_busy_until = 0.0;
  std::size_t oracle_eligible = 0;
  const double horizon = sc.duration_s * (1.0 + kRelativeSlack);

  // NoB runs continuously: every arrival and every device release is an
  // event at which idle devices take the oldest live requests.
  std::size_t nob_assigned = 0;
  std::size_t nob_completed = 0;
  Seconds nob_latency = 0.0;
  Seconds nob_now = 0.0;
  double shared_h2 = sample_channel_power(channel_rng, sc.mean_channel_gain);
  auto nob_advance = [&](Seconds until) {
    constexpr Seconds kNever = std::numeric_limits<Seconds>::infinity();
    bool device_waiting = false;  // an idle device found nothing to take
    while (true) {
      Seconds t = next_arrival < arrivals.size() ? arrivals[next_arrival].arrival_s
                                                 : kNever;
      if (!queue.empty() && !device_waiting) {
        t = std::min(t, std::max(nob_now, pool.earliest_free()));
      }
      if (!(t < until)) return;
      nob_now = t;
      while (next_arrival < arrivals.size() &&
             arrivals[next_arrival].arrival_s <= nob_now) {
        queue.push_back(arrivals[next_arrival++]);
      }
      std::erase_if(queue, [&](const Request& r) {
        if (r.arrival_s + r.deadline_s <= nob_now) {
          ++m.missed_expired;
          return true;
        }
        return false;
      });
      if (sc.channel_mode == ChannelMode::kShared) {
        for (auto& r : queue) r.link.channel_power = shared_h2;
      }
      const SchedulerDecision d =
          nob_assign(queue, pool, nob_now, ctx, sc.accuracy_check);
      std::vector<bool> gone(queue.size(), false);
      for (const auto& s : d.scheduled) {
        const Request& r = queue[s.queue_index];
        gone[s.queue_index] = true;
        ++m.scheduled_total;
        ++nob_assigned;
        nob_latency = std::max(nob_latency, s.latency_s);
        const Seconds done = s.start_s + s.latency_s + sc.radio.slot_down_s;
        if (leq_slack(done - r.arrival_s, r.deadline_s)) {
          ++m.completed;
          ++nob_completed;
        } else {
          ++m.missed_late;
        }
      }
      for (const auto& dr : d.dropped) {
        gone[dr.queue_index] = true;
        ++m.dropped_total;
      }
      std::size_t kept = 0;
      for (std::size_t i = 0; i < queue.size(); ++i) {
        if (!gone[i]) queue[kept++] = queue[i];
      }
      queue.resize(kept);
      // Devices still idle after the pass have nothing they can take until
      // something new arrives.
      device_waiting = pool.earliest_free() <= nob_now;
    }
  };

  for (std::size_t e = 1;; ++e) {
    const Seconds t_e = static_cast<double>(e) * sc.epoch_s;
    if (t_e > horizon) break;
    ++m.epochs;
    if (sc.scheduler == SchedulerKind::kNob) nob_advance(t_e);
    while (next_arrival < arrivals.size() && arrivals[next_arrival].arrival_s < t_e) {
      queue.push_back(arrivals[next_arrival++]);
    }
    std::erase_if(queue, [&](const Request& r) {
      if (r.arrival_s + r.deadline_s <= t_e) {
        ++m.missed_expired;
        return true;
      }
      return false;
    });
    shared_h2 = sample_channel_power(channel_rng, sc.mean_channel_gain);
    for (auto& r : queue) {
      r.waiting_s = t_e - r.arrival_s;
      if (sc.channel_mode == ChannelMode::kShared) r.link.channel_power = shared_h2;
    }

    TraceRow row;
    row.epoch = e;
    row.time_s = t_e;
    row.queue_len = queue.size();
    std::vector<bool> remove(queue.size(), false);

    auto finish_batch = [&](std::span<const std::size_t> picked, Tokens padded) {
      if (picked.empty()) return;
      BatchPlan plan;
      plan.padded_len = padded;
      for (std::size_t i : picked) {
        plan.entries.push_back({queue[i].prompt_len, queue[i].output_len});
      }
      const BatchCost cost = batch_cost(ctx.model, ctx.quant, plan, ctx.node);
      const Seconds start = std::max(t_e + sc.radio.slot_up_s, compute_busy_until);
      compute_busy_until = start + cost.latency_s;
      const Seconds done = compute_busy_until + sc.radio.slot_down_s;
      for (std::size_t i : picked) {
        remove[i] = true;
        ++m.scheduled_total;
        if (leq_slack(done - queue[i].arrival_s, queue[i].deadline_s)) {
          ++m.completed;
          ++row.completed;
        } else {
          ++m.missed_late;
        }
      }
      row.batch_size = picked.size();
      row.memory_bytes = cost.memory_bytes;
      row.latency_s = cost.latency_s;
    };

    switch (sc.scheduler) {
      case SchedulerKind::kDftsp:
      case SchedulerKind::kBrute: {
        std::vector<Request> candidates;
        std::vector<std::size_t> origin;
        for (std::size_t i = 0; i < queue.size(); ++i) {
          if (sc.accuracy_check && !accuracy_admissible(dppl, queue[i].tolerance)) {
            continue;
          }
          candidates.push_back(queue[i]);
          origin.push_back(i);
        }
        row.candidates = candidates.size();
        if (candidates.empty()) break;
        const SearchOutcome found = dftsp(candidates, ctx, options);
        m.nodes_visited_total += found.nodes_visited;
        m.nodes_pruned_total += found.nodes_pruned;
        row.nodes_visited = found.nodes_visited;
        row.nodes_pruned = found.nodes_pruned;
        if (sc.compare_pruning) {
          SearchOptions shadow = options;
          shadow.pruning = false;
          const SearchOutcome plain = dftsp(candidates, ctx, shadow);
          *m.nodes_visited_no_prune_total += plain.nodes_visited;
          if (plain.z_found != found.z_found) {
            throw SimulationError("pruned and unpruned searches disagree on z");
          }
        }
        if (sc.verify_oracle && candidates.size() <= sc.oracle_cap &&
            oracle_eligible++ % sc.oracle_every == 0) {
          ++m.oracle_checks;
          const SearchOutcome best = exhaustive_optimal(
              candidates, ctx, ExhaustiveMode::kSubsets, sc.oracle_cap);
          if (best.z_found != found.z_found) ++m.oracle_mismatches;
        }
        if (!found.found()) break;
        std::vector<std::size_t> picked;
        std::vector<Request> chosen;
        for (std::size_t idx : *found.solution) {
          picked.push_back(origin[idx]);
          chosen.push_back(candidates[idx]);
        }
        if (sc.debug_checks && !check_p1(chosen, ctx, found.padded_len)) {
          throw SimulationError("scheduled batch violates the constraints");
        }
        std::sort(picked.begin(), picked.end());
        finish_batch(picked, found.padded_len);
        break;
      }
      case SchedulerKind::kStb: {
        const SchedulerDecision d = stb_schedule(queue, stb_b, ctx, sc.accuracy_check);
        const auto picked = d.indices();
        Tokens padded = 0;
        for (std::size_t i : picked) padded = std::max(padded, queue[i].prompt_len);
        finish_batch(picked, padded);
        break;
      }
      case SchedulerKind::kNob:
        // Assignments happen between boundaries; see nob_advance.
        row.batch_size = nob_assigned;
        row.completed = nob_completed;
        row.latency_s = nob_latency;
        nob_assigned = nob_completed = 0;
        nob_latency = 0.0;
        break;
    }

    std::size_t kept = 0;
    for (std::size_t i = 0; i < queue.size(); ++i) {
      if (!remove[i]) queue[kept++] = queue[i];
    }
    queue.resize(kept);
    if (sc.record_trace) m.trace.push_back(row);
  }

  m.queued_at_horizon = queue.size() + (arrivals.size() - next_arrival);
  m.throughput = static_cast<double>(m.completed) / sc.duration_s;
  return m;
}

}  // namespace edgebatch
