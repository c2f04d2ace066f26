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

// Comparison schedulers: static batching with a fixed worst-case batch size
// (StB) and one-request-per-idle-device execution (NoB).

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edgebatch/core.hpp"
#include "edgebatch/dftsp.hpp"
#include "edgebatch/inference_cost.hpp"
#include "edgebatch/p2_reform.hpp"

namespace edgebatch {

struct ScheduledRequest {
  std::size_t queue_index = 0;
  std::size_t device = 0;  // NoB only
  Seconds start_s = 0.0;   // NoB only
  Seconds latency_s = 0.0; // NoB only
};

struct DroppedRequest {
  std::size_t queue_index = 0;
  std::string reason;
};

struct SchedulerDecision {
  std::vector<ScheduledRequest> scheduled;
  std::vector<DroppedRequest> dropped;
  std::optional<SearchOutcome> search_stats;

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    out.reserve(scheduled.size());
    for (const auto& s : scheduled) out.push_back(s.queue_index);
    return out;
  }
};

class GpuPool {
 public:
  explicit GpuPool(const NodeCompute& node)
      : device_flops_(node.flops_per_s / node.gpu_count),
        device_memory_(node.memory_bytes / node.gpu_count),
        busy_until_(static_cast<std::size_t>(node.gpu_count), 0.0) {
    node.validate();
  }

  std::size_t device_count() const { return busy_until_.size(); }
  double device_flops() const { return device_flops_; }
  Bytes device_memory() const { return device_memory_; }
  Seconds busy_until(std::size_t device) const { return busy_until_.at(device); }

  bool idle_at(std::size_t device, Seconds t) const {
    return busy_until_.at(device) <= t;
  }

  void occupy(std::size_t device, Seconds until) {
    if (until < busy_until_.at(device)) {
      throw DomainError("GpuPool: busy_until must not move backwards");
    }
    busy_until_[device] = until;
  }

  Seconds earliest_free() const {
    return *std::min_element(busy_until_.begin(), busy_until_.end());
  }

  std::size_t in_flight(Seconds t) const {
    return static_cast<std::size_t>(std::count_if(
        busy_until_.begin(), busy_until_.end(),
        [t](Seconds b) { return b > t; }));
  }

 private:
  double device_flops_;
  Bytes device_memory_;
  std::vector<Seconds> busy_until_;
};

// Largest b with worst-case memory and latency (every request at the ladder
// maxima) inside M and the compute slot. Returns 0 when even one request
// does not fit.
inline std::int64_t static_batch_size(const LlmSpec& spec,
                                      const QuantProfile& quant,
                                      const NodeCompute& node,
                                      Seconds compute_slot_s, Tokens s_max,
                                      Tokens n_max) {
  const double alpha = quant.alpha;
  const double m1 = static_cast<double>(weight_bytes(spec) * node.weight_replicas);
  const double budget = static_cast<double>(node.memory_bytes) / alpha;
  if (budget < m1) throw WeightsDoNotFit("static_batch_size: weights do not fit");
  const double per_request_bytes =
      static_cast<double>(kv_bytes_per_token(spec) * (s_max + n_max));
  const double by_memory = std::floor((budget - m1) / per_request_bytes);

  const double per_request_s =
      quant.beta *
      (flops_initial(spec, s_max) + flops_autoregressive(spec, s_max, n_max)) /
      node.flops_per_s;
  double by_latency = std::floor(compute_slot_s / per_request_s);
  // Guard the floor against rounding at an exact boundary.
  while (by_latency > 0 &&
         !leq_slack(by_latency * per_request_s, compute_slot_s)) {
    by_latency -= 1;
  }
  while (leq_slack((by_latency + 1) * per_request_s, compute_slot_s)) {
    by_latency += 1;
  }
  return static_cast<std::int64_t>(std::max(0.0, std::min(by_memory, by_latency)));
}

// First b queue entries (queue is in arrival order) that pass accuracy and
// individual bandwidth admission. Stops early rather than overrun the
// cumulative bandwidth of either link, so the result is always a prefix of
// the admissible queue.
inline SchedulerDecision stb_schedule(std::span<const Request> queue,
                                      std::int64_t b,
                                      const SchedulingContext& ctx,
                                      bool accuracy_check = true) {
  SchedulerDecision out;
  if (b <= 0) return out;
  const double dppl =
      accuracy_check ? delta_ppl(ctx.quant, ctx.model.name) : 0.0;
  double up = 0.0;
  double down = 0.0;
  for (std::size_t i = 0; i < queue.size(); ++i) {
    if (static_cast<std::int64_t>(out.scheduled.size()) == b) break;
    const Request& r = queue[i];
    if (accuracy_check && !accuracy_admissible(dppl, r.tolerance)) continue;
    const double ru = min_uplink_fraction(r.prompt_len, r.link, ctx.radio);
    const double rd = min_downlink_fraction(r.output_len, r.link, ctx.radio);
    if (!leq_slack(ru, 1.0) || !leq_slack(rd, 1.0)) continue;
    if (!leq_slack(up + ru, 1.0) || !leq_slack(down + rd, 1.0)) break;
    up += ru;
    down += rd;
    out.scheduled.push_back({i, 0, 0.0, 0.0});
  }
  return out;
}

// Hands FIFO requests to devices idle at `now`, one each. A request runs
// alone at C/G with M/G of memory, starting once its upload slot T_U after
// arrival has passed; one that cannot fit in M/G is dropped.
inline SchedulerDecision nob_assign(std::span<const Request> queue,
                                    GpuPool& pool, Seconds now,
                                    const SchedulingContext& ctx,
                                    bool accuracy_check = true) {
  SchedulerDecision out;
  const double dppl =
      accuracy_check ? delta_ppl(ctx.quant, ctx.model.name) : 0.0;
  NodeCompute device;
  device.flops_per_s = pool.device_flops();
  device.memory_bytes = pool.device_memory();
  device.gpu_count = 1;
  device.weight_replicas = 1;

  std::size_t next_device = 0;
  auto advance = [&] {
    while (next_device < pool.device_count() &&
           !pool.idle_at(next_device, now)) {
      ++next_device;
    }
  };
  advance();
  for (std::size_t i = 0; i < queue.size(); ++i) {
    if (next_device == pool.device_count()) break;
    const Request& r = queue[i];
    if (accuracy_check && !accuracy_admissible(dppl, r.tolerance)) continue;
    if (!leq_slack(min_uplink_fraction(r.prompt_len, r.link, ctx.radio), 1.0) ||
        !leq_slack(min_downlink_fraction(r.output_len, r.link, ctx.radio), 1.0)) {
      continue;
    }
    BatchPlan plan;
    plan.padded_len = r.prompt_len;
    plan.entries.push_back({r.prompt_len, r.output_len});
    const BatchCost cost = batch_cost(ctx.model, ctx.quant, plan, device);
    if (!leq_slack(cost.memory_bytes, static_cast<double>(device.memory_bytes))) {
      out.dropped.push_back({i, "does not fit in one device's memory"});
      continue;
    }
    const Seconds start = std::max(now, r.arrival_s + ctx.radio.slot_up_s);
    pool.occupy(next_device, start + cost.latency_s);
    out.scheduled.push_back({i, next_device, start, cost.latency_s});
    ++next_device;
    advance();
  }
  return out;
}

}  // namespace edgebatch
