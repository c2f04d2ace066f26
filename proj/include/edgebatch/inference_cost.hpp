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

// Analytical memory/latency model for batched decoder-only inference.
//
// Per layer, the weights are four d_m x d_m attention projections plus the
// two FFN matrices; the KV cache holds one key and one value row of width d_m
// per token. FLOPs use 2mnp for an (m x n)(n x p) product. The initial stage
// runs every prompt padded to s' tokens; each later iteration runs one token
// against a context that grows by one per step.

#pragma once

#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "edgebatch/core.hpp"
#include "edgebatch/model_catalog.hpp"

namespace edgebatch {

struct PlanEntry {
  Tokens prompt_len = 0;  // s_i
  Tokens output_len = 1;  // n_i
};

struct BatchPlan {
  std::vector<PlanEntry> entries;
  Tokens padded_len = 0;  // s'

  std::size_t size() const { return entries.size(); }

  void validate() const {
    for (const auto& e : entries) {
      if (e.prompt_len > padded_len) {
        throw DomainError("BatchPlan: padded_len below a prompt length");
      }
      if (e.output_len < 1) throw DomainError("BatchPlan: output_len < 1");
    }
  }
};

struct NodeCompute {
  double flops_per_s = 20 * 1.33e12;  // C
  Bytes memory_bytes = 20 * Bytes{32'000'000'000};  // M
  int gpu_count = 20;                                 // G
  // Copies of the weights held in memory (1 = sharded/aggregate view).
  int weight_replicas = 1;

  void validate(const std::string& where = "node") const {
    if (!(flops_per_s > 0.0)) throw ConfigError(where + ".flops", "must be > 0");
    if (memory_bytes <= 0) throw ConfigError(where + ".memory", "must be > 0");
    if (gpu_count < 1) throw ConfigError(where + ".gpu_count", "must be >= 1");
    if (weight_replicas < 1) {
      throw ConfigError(where + ".weight_replicas", "must be >= 1");
    }
  }
};

// m1. With 2-byte parameters: L (8 d_m d_h n_h + 4 d_m d_f).
inline Bytes weight_bytes(const LlmSpec& spec) {
  return spec.bytes_per_param * spec.layers *
         (4 * spec.hidden_dim * spec.head_dim * spec.head_count +
          2 * spec.hidden_dim * spec.ffn_dim);
}

// KV bytes held per cached token across all layers (4 L d_m for 2-byte).
inline Bytes kv_bytes_per_token(const LlmSpec& spec) {
  return 2 * spec.bytes_per_param * spec.layers * spec.hidden_dim;
}

// m2^I: prompt KV cache for `batch` requests padded to s'.
inline Bytes kv_bytes_initial(const LlmSpec& spec, Tokens padded_len,
                              std::int64_t batch) {
  if (batch < 0 || padded_len < 0) {
    throw DomainError("kv_bytes_initial: negative size");
  }
  return kv_bytes_per_token(spec) * padded_len * batch;
}

// m2^A: generated-token KV cache, one entry per output token per request.
inline Bytes kv_bytes_autoregressive(const LlmSpec& spec,
                                     std::span<const Tokens> output_lens) {
  Tokens total = 0;
  for (Tokens n : output_lens) {
    if (n < 0) throw DomainError("kv_bytes_autoregressive: negative length");
    total += n;
  }
  return kv_bytes_per_token(spec) * total;
}

// Initial-stage FLOPs for one request padded to s':
// L (6 s' d_m^2 + 4 s'^2 d_m + 2 s' d_m^2 + 4 s' d_m d_f).
inline Flops flops_initial(const LlmSpec& spec, Tokens padded_len) {
  if (padded_len < 1) throw DomainError("flops_initial: s' must be >= 1");
  const double s = static_cast<double>(padded_len);
  const double dm = static_cast<double>(spec.hidden_dim);
  const double df = static_cast<double>(spec.ffn_dim);
  const double qkv = 6.0 * s * dm * dm;
  const double attention = 4.0 * s * s * dm + 2.0 * s * dm * dm;
  const double ffn = 4.0 * s * dm * df;
  return static_cast<double>(spec.layers) * (qkv + attention + ffn);
}

// Per-iteration FLOPs of the autoregressive stage, excluding the part that
// grows with context: 8 d_m^2 + 4 s' d_m + 4 d_m d_f.
inline Flops autoregressive_step_base(const LlmSpec& spec, Tokens padded_len) {
  const double s = static_cast<double>(padded_len);
  const double dm = static_cast<double>(spec.hidden_dim);
  const double df = static_cast<double>(spec.ffn_dim);
  return 8.0 * dm * dm + 4.0 * s * dm + 4.0 * dm * df;
}

// Autoregressive-stage FLOPs for one request producing n tokens (the first
// comes out of the initial stage):
// L (n-1) (6 d_m^2 + 4 (s' + n/2) d_m + 2 d_m^2 + 4 d_m d_f).
inline Flops flops_autoregressive(const LlmSpec& spec, Tokens padded_len,
                                  Tokens output_len) {
  if (output_len < 1) throw DomainError("flops_autoregressive: n must be >= 1");
  if (padded_len < 0) throw DomainError("flops_autoregressive: s' < 0");
  const double n = static_cast<double>(output_len);
  const double dm = static_cast<double>(spec.hidden_dim);
  // 4 (s' + n/2) d_m written as (4 s' + 2 n) d_m keeps every term integral.
  const double per_step = autoregressive_step_base(spec, padded_len) +
                          2.0 * n * dm;
  return static_cast<double>(spec.layers) * (n - 1.0) * per_step;
}

struct BatchCost {
  double memory_bytes = 0.0;  // alpha (m1 + m2^I + m2^A)
  Seconds latency_s = 0.0;    // beta (t^I + t^A)
};

// Raw FLOPs for a whole plan (t^I + t^A times C).
inline Flops batch_flops(const LlmSpec& spec, const BatchPlan& plan) {
  if (plan.entries.empty()) return 0.0;
  Flops total = static_cast<double>(plan.size()) *
                flops_initial(spec, plan.padded_len);
  for (const auto& e : plan.entries) {
    total += flops_autoregressive(spec, plan.padded_len, e.output_len);
  }
  return total;
}

inline BatchCost batch_cost(const LlmSpec& spec, const QuantProfile& quant,
                            const BatchPlan& plan, const NodeCompute& node) {
  plan.validate();
  std::vector<Tokens> outs;
  outs.reserve(plan.size());
  for (const auto& e : plan.entries) outs.push_back(e.output_len);
  const Bytes raw = weight_bytes(spec) * node.weight_replicas +
                    kv_bytes_initial(spec, plan.padded_len,
                                     static_cast<std::int64_t>(plan.size())) +
                    kv_bytes_autoregressive(spec, outs);
  BatchCost cost;
  cost.memory_bytes = quant.alpha * static_cast<double>(raw);
  cost.latency_s = quant.beta * batch_flops(spec, plan) / node.flops_per_s;
  return cost;
}

}  // namespace edgebatch
