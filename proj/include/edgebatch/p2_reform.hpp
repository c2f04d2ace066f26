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

// Batch feasibility in two algebraic forms.
//
// check_p1 evaluates the scheduling constraints directly from the cost
// model: summed minimum bandwidth fractions, resident memory, and every
// scheduled request's end-to-end deadline. check_p2 evaluates the same
// constraints after fixing the batch size z and collecting terms per request:
//
//   sum k_up(i) s_i          <= 1
//   sum k_down(i) n_i        <= 1     (k_down(i) = k1 on a shared channel)
//   sum n_i                  <= k2 - s' z                      (memory)
//   sum k4 n_i + k5 n_i^2    <= (tau_i - t_w - T_U - T_D) C / beta - k3 z
//
// With K = 8 d_m^2 + 4 s' d_m + 4 d_m d_f and A = 8 s' d_m^2 + 4 s'^2 d_m +
// 4 s' d_m d_f, the autoregressive cost of one request is
// L (n - 1)(K + 2 d_m n) = L (K - 2 d_m) n + 2 L d_m n^2 - L K, so
// k3 = L (A - K), k4 = L (K - 2 d_m), k5 = 2 L d_m. The memory constraint
// divides alpha (m1 + kv s' z + kv sum n) <= M by the per-token KV size kv.

#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "edgebatch/core.hpp"
#include "edgebatch/inference_cost.hpp"
#include "edgebatch/model_catalog.hpp"
#include "edgebatch/radio.hpp"

namespace edgebatch {

struct Request {
  RequestId id = 0;
  Seconds arrival_s = 0.0;
  Tokens prompt_len = 1;  // s_i
  Tokens output_len = 1;  // n_i, a value on the class ladder
  Seconds deadline_s = 1.0;  // tau_i, relative to arrival
  double tolerance = 1.0;    // a_i, accepted PPL degradation
  Seconds waiting_s = 0.0;   // t_w, arrival to the scheduling epoch start
  UserLink link;
};

// Everything the constraints depend on besides the requests themselves.
struct SchedulingContext {
  LlmSpec model;
  QuantProfile quant;
  RadioConfig radio;
  NodeCompute node;
  std::vector<Tokens> ladder = {128, 256, 512};
  // When set, a batch's compute time must also fit this slot.
  std::optional<Seconds> compute_slot_s;
};

struct P2Coefficients {
  std::vector<double> k_up;    // aligned with the candidate list
  std::vector<double> k_down;  // per-request k1; all equal on a shared channel
  double k1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
  double k4 = 0.0;
  double k5 = 0.0;
  Tokens padded_len = 0;       // s'
  double deadline_scale = 0.0;  // C / beta
  Seconds slot_up_s = 0.0;
  Seconds slot_down_s = 0.0;
  std::optional<Seconds> compute_slot_s;

  // M~(z)
  double memory_budget(std::int64_t z) const {
    return k2 - static_cast<double>(padded_len) * static_cast<double>(z);
  }

  // tau~_i(z) written in terms of the remaining time budget
  // tau_i - t_w,i, which orders requests independently of z.
  double normalized_deadline(Seconds remaining_s, std::int64_t z) const {
    return (remaining_s - slot_up_s - slot_down_s) * deadline_scale -
           k3 * static_cast<double>(z);
  }

  double normalized_deadline(const Request& r, std::int64_t z) const {
    return normalized_deadline(r.deadline_s - r.waiting_s, z);
  }

  // Compute-slot limit in the same units; +inf when no slot limit applies.
  double slot_bound(std::int64_t z) const {
    if (!compute_slot_s) return std::numeric_limits<double>::infinity();
    return *compute_slot_s * deadline_scale - k3 * static_cast<double>(z);
  }
};

// Largest prompt in the pool: every batch drawn from it is padded to this.
inline Tokens pool_padded_len(std::span<const Request> pool) {
  Tokens s = 0;
  for (const auto& r : pool) s = std::max(s, r.prompt_len);
  return s;
}

inline std::vector<Request> filter_admissible(std::span<const Request> requests,
                                              double delta_ppl) {
  std::vector<Request> out;
  out.reserve(requests.size());
  for (const auto& r : requests) {
    if (accuracy_admissible(delta_ppl, r.tolerance)) out.push_back(r);
  }
  return out;
}

class WeightsDoNotFit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline P2Coefficients derive_coefficients(const SchedulingContext& ctx,
                                          Tokens padded_len,
                                          std::span<const Request> requests) {
  if (padded_len < pool_padded_len(requests)) {
    throw DomainError("derive_coefficients: s' below a prompt length");
  }
  const LlmSpec& m = ctx.model;
  const double alpha = ctx.quant.alpha;
  const double weights =
      static_cast<double>(weight_bytes(m) * ctx.node.weight_replicas);
  const double headroom =
      static_cast<double>(ctx.node.memory_bytes) / alpha - weights;
  if (headroom < 0.0) {
    throw WeightsDoNotFit("weights do not fit: M/alpha < m1 for model '" +
                          m.name + "'");
  }

  P2Coefficients c;
  c.padded_len = padded_len;
  c.k_up.reserve(requests.size());
  c.k_down.reserve(requests.size());
  for (const auto& r : requests) {
    // k_up(i) s_i is exactly rho_min^U(i); likewise k_down(i) n_i.
    c.k_up.push_back(min_uplink_fraction(1, r.link, ctx.radio));
    c.k_down.push_back(min_downlink_fraction(1, r.link, ctx.radio));
  }
  const UserLink ref = requests.empty() ? UserLink{} : requests.front().link;
  c.k1 = min_downlink_fraction(1, ref, ctx.radio);
  c.k2 = headroom / static_cast<double>(kv_bytes_per_token(m));

  const double L = static_cast<double>(m.layers);
  const double dm = static_cast<double>(m.hidden_dim);
  const double df = static_cast<double>(m.ffn_dim);
  const double s = static_cast<double>(padded_len);
  const double A = 8.0 * s * dm * dm + 4.0 * s * s * dm + 4.0 * s * dm * df;
  const double K = autoregressive_step_base(m, padded_len);
  c.k3 = L * (A - K);
  c.k4 = L * (K - 2.0 * dm);
  c.k5 = 2.0 * L * dm;

  c.deadline_scale = ctx.node.flops_per_s / ctx.quant.beta;
  c.slot_up_s = ctx.radio.slot_up_s;
  c.slot_down_s = ctx.radio.slot_down_s;
  c.compute_slot_s = ctx.compute_slot_s;
  return c;
}

// P2 test for a subset of `candidates` given by index.
inline bool check_p2(std::span<const Request> candidates,
                     std::span<const std::size_t> subset,
                     const P2Coefficients& coeff, std::int64_t z,
                     double tau_min) {
  if (static_cast<std::int64_t>(subset.size()) != z) return false;
  double uplink = 0.0;
  double downlink = 0.0;
  double out_tokens = 0.0;
  double latency = 0.0;
  for (std::size_t idx : subset) {
    const Request& r = candidates[idx];
    const double n = static_cast<double>(r.output_len);
    uplink += coeff.k_up[idx] * static_cast<double>(r.prompt_len);
    downlink += coeff.k_down[idx] * n;
    out_tokens += n;
    latency += coeff.k4 * n + coeff.k5 * n * n;
  }
  return leq_slack(uplink, 1.0) && leq_slack(downlink, 1.0) &&
         leq_slack(out_tokens, coeff.memory_budget(z)) &&
         leq_slack(latency, tau_min);
}

// Binding deadline of a subset in P2 units: the smallest tau~ in it, capped
// by the compute slot.
inline double subset_tau_min(std::span<const Request> candidates,
                             std::span<const std::size_t> subset,
                             const P2Coefficients& coeff) {
  const auto z = static_cast<std::int64_t>(subset.size());
  double tau = coeff.slot_bound(z);
  for (std::size_t idx : subset) {
    tau = std::min(tau, coeff.normalized_deadline(candidates[idx], z));
  }
  return tau;
}

// Direct evaluation of the original constraints. Accuracy is a precondition
// (callers pass accuracy-filtered requests).
inline bool check_p1(std::span<const Request> subset,
                     const SchedulingContext& ctx, Tokens padded_len) {
  double up = 0.0;
  double down = 0.0;
  BatchPlan plan;
  plan.padded_len = padded_len;
  plan.entries.reserve(subset.size());
  for (const auto& r : subset) {
    if (r.prompt_len > padded_len) return false;
    up += min_uplink_fraction(r.prompt_len, r.link, ctx.radio);
    down += min_downlink_fraction(r.output_len, r.link, ctx.radio);
    plan.entries.push_back({r.prompt_len, r.output_len});
  }
  if (!leq_slack(up, 1.0) || !leq_slack(down, 1.0)) return false;
  const BatchCost cost = batch_cost(ctx.model, ctx.quant, plan, ctx.node);
  if (!leq_slack(cost.memory_bytes,
                 static_cast<double>(ctx.node.memory_bytes))) {
    return false;
  }
  if (ctx.compute_slot_s && !leq_slack(cost.latency_s, *ctx.compute_slot_s)) {
    return false;
  }
  for (const auto& r : subset) {
    const Seconds total = r.waiting_s + ctx.radio.slot_up_s + cost.latency_s +
                          ctx.radio.slot_down_s;
    if (!leq_slack(total, r.deadline_s)) return false;
  }
  return true;
}

}  // namespace edgebatch
