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

#include <random>

#include "edgebatch/baselines.hpp"
#include "support/instances.hpp"

namespace edgebatch {
namespace {

SchedulingContext default_context() {
  SchedulingContext ctx;
  const Catalog catalog;
  ctx.model = catalog.model("BLOOM-3B");
  ctx.quant = catalog.profile("W8A16");
  return ctx;
}

// Largest b passing both worst-case checks, found by scanning.
std::int64_t scan_batch_size(const LlmSpec& m, const QuantProfile& q,
                             const NodeCompute& node, Seconds slot, Tokens s,
                             Tokens n) {
  std::int64_t best = 0;
  for (std::int64_t b = 1; b < 100000; ++b) {
    BatchPlan plan;
    plan.padded_len = s;
    plan.entries.assign(static_cast<std::size_t>(b), PlanEntry{s, n});
    const BatchCost c = batch_cost(m, q, plan, node);
    if (c.memory_bytes > static_cast<double>(node.memory_bytes) ||
        c.latency_s > slot * (1 + 1e-9)) {
      break;
    }
    best = b;
  }
  return best;
}

TEST(Baselines, StaticBatchSizeNoHeadroom) {
  const SchedulingContext ctx = default_context();
  NodeCompute node = ctx.node;
  node.memory_bytes =
      static_cast<Bytes>(ctx.quant.alpha * static_cast<double>(weight_bytes(ctx.model)));
  EXPECT_EQ(static_batch_size(ctx.model, ctx.quant, node, 2.0, 512, 512), 0);
}

TEST(Baselines, StaticBatchSizeMemoryBound) {
  const SchedulingContext ctx = default_context();
  NodeCompute node = ctx.node;
  node.memory_bytes = 4'000'000'000;
  const auto b = static_batch_size(ctx.model, ctx.quant, node, 1e6, 512, 512);
  const double closed =
      std::floor((4e9 / 0.5 - 4'718'592'000.0) / (4.0 * 30 * 2560 * (512 + 512)));
  EXPECT_EQ(b, static_cast<std::int64_t>(closed));
  EXPECT_EQ(b, scan_batch_size(ctx.model, ctx.quant, node, 1e6, 512, 512));
}

TEST(Baselines, StaticBatchSizeMatchesScan) {
  const SchedulingContext ctx = default_context();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> mem(3e9, 700e9), slot(0.2, 4.0);
  for (int trial = 0; trial < 40; ++trial) {
    NodeCompute node = ctx.node;
    node.memory_bytes = static_cast<Bytes>(mem(rng));
    const double t = slot(rng);
    for (Tokens s : {128, 512}) {
      EXPECT_EQ(static_batch_size(ctx.model, ctx.quant, node, t, s, 512),
                scan_batch_size(ctx.model, ctx.quant, node, t, s, 512))
          << trial;
    }
  }
}

TEST(Baselines, StaticBatchSizeDefaultAndMonotone) {
  const SchedulingContext ctx = default_context();
  EXPECT_EQ(static_batch_size(ctx.model, ctx.quant, ctx.node, 2.0, 512, 512), 13);
  NodeCompute node = ctx.node;
  std::int64_t prev = 0;
  for (Bytes m = 3'000'000'000; m < 40'000'000'000; m += 1'000'000'000) {
    node.memory_bytes = m;
    const auto b = static_batch_size(ctx.model, ctx.quant, node, 1e6, 512, 512);
    EXPECT_GE(b, prev);
    prev = b;
  }
  node.memory_bytes = 1'000'000'000;
  EXPECT_THROW((void)static_batch_size(ctx.model, ctx.quant, node, 2.0, 512, 512),
               WeightsDoNotFit);
}

std::vector<Request> queue_of(std::size_t n, std::mt19937_64& rng) {
  std::vector<Request> q(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    q[i].id = i;
    q[i].arrival_s = 0.01 * static_cast<double>(i);
    q[i].prompt_len = 128;
    q[i].output_len = 256;
    q[i].tolerance = unit(rng);
  }
  return q;
}

TEST(Baselines, StbShortQueueAndZeroBatch) {
  const SchedulingContext ctx = default_context();
  std::mt19937_64 rng(1);
  const auto q = queue_of(5, rng);
  EXPECT_EQ(stb_schedule(q, 13, ctx).scheduled.size(), 5u);
  EXPECT_TRUE(stb_schedule(q, 0, ctx).scheduled.empty());
}

TEST(Baselines, StbIsFifoPrefixOfAdmissible) {
  SchedulingContext ctx = default_context();
  ctx.quant = Catalog().profile("GPTQ-W4A16");  // delta_ppl 0.75 on BLOOM-3B
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto q = queue_of(30, rng);
    const std::int64_t b = 1 + trial % 12;
    const auto d = stb_schedule(q, b, ctx);
    std::vector<std::size_t> admissible;
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (q[i].tolerance >= 0.75) admissible.push_back(i);
    }
    const auto got = d.indices();
    ASSERT_LE(got.size(), static_cast<std::size_t>(b));
    ASSERT_LE(got.size(), admissible.size());
    EXPECT_EQ(got, std::vector<std::size_t>(admissible.begin(),
                                            admissible.begin() + static_cast<std::ptrdiff_t>(got.size())));
    EXPECT_EQ(got.size(), std::min(admissible.size(), static_cast<std::size_t>(b)));
  }
}

TEST(Baselines, StbSkipsRequestsThatCannotUpload) {
  SchedulingContext ctx = default_context();
  std::mt19937_64 rng(4);
  auto q = queue_of(4, rng);
  q[1].link.channel_power = 1e-18;  // fraction far above 1
  const auto d = stb_schedule(q, 13, ctx, false);
  EXPECT_EQ(d.indices(), (std::vector<std::size_t>{0, 2, 3}));
}

TEST(Baselines, NobAllBusy) {
  const SchedulingContext ctx = default_context();
  GpuPool pool(ctx.node);
  for (std::size_t g = 0; g < pool.device_count(); ++g) pool.occupy(g, 10.0);
  std::mt19937_64 rng(5);
  const auto q = queue_of(3, rng);
  EXPECT_TRUE(nob_assign(q, pool, 1.0, ctx, false).scheduled.empty());
}

TEST(Baselines, NobOneIdleDevice) {
  const SchedulingContext ctx = default_context();
  GpuPool pool(ctx.node);
  for (std::size_t g = 1; g < pool.device_count(); ++g) pool.occupy(g, 10.0);
  std::mt19937_64 rng(6);
  const auto q = queue_of(3, rng);
  const auto d = nob_assign(q, pool, 1.0, ctx, false);
  ASSERT_EQ(d.scheduled.size(), 1u);
  EXPECT_EQ(d.scheduled[0].queue_index, 0u);
  EXPECT_EQ(d.scheduled[0].device, 0u);
  EXPECT_DOUBLE_EQ(pool.busy_until(0), d.scheduled[0].start_s + d.scheduled[0].latency_s);
  EXPECT_EQ(pool.in_flight(1.0), pool.device_count());
}

TEST(Baselines, NobUsesOneDeviceShare) {
  SchedulingContext ctx = default_context();
  ctx.quant = Catalog().profile("FP16");
  ctx.node.flops_per_s = 2.66e13;
  GpuPool pool(ctx.node);
  std::vector<Request> q(1);
  q[0].prompt_len = 512;
  q[0].output_len = 128;
  const auto d = nob_assign(q, pool, 0.0, ctx, false);
  ASSERT_EQ(d.scheduled.size(), 1u);
  const double aggregate =
      (2'496'449'740'800.0 + 621'733'478'400.0) / 2.66e13;
  EXPECT_NEAR(d.scheduled[0].latency_s, 20.0 * aggregate, 1e-12);
  EXPECT_NEAR(pool.device_flops(), 1.33e12, 1e-3);
}

TEST(Baselines, NobStartsAfterUpload) {
  const SchedulingContext ctx = default_context();
  GpuPool pool(ctx.node);
  std::vector<Request> q(1);
  q[0].arrival_s = 3.9;
  const auto d = nob_assign(q, pool, 4.0, ctx, false);
  ASSERT_EQ(d.scheduled.size(), 1u);
  EXPECT_DOUBLE_EQ(d.scheduled[0].start_s, 3.9 + 0.25);
}

TEST(Baselines, NobDropsWhatDoesNotFit) {
  SchedulingContext ctx = default_context();
  ctx.quant = Catalog().profile("FP16");
  // Per-device memory holds the weights and a 128 + 128 token cache only.
  ctx.node.gpu_count = 2;
  ctx.node.memory_bytes =
      2 * (weight_bytes(ctx.model) + kv_bytes_per_token(ctx.model) * 256);
  GpuPool pool(ctx.node);
  std::vector<Request> q(2);
  q[0].prompt_len = 512;
  q[0].output_len = 512;
  q[1].prompt_len = 128;
  q[1].output_len = 128;
  const auto d = nob_assign(q, pool, 0.0, ctx, false);
  ASSERT_EQ(d.dropped.size(), 1u);
  EXPECT_EQ(d.dropped[0].queue_index, 0u);
  EXPECT_FALSE(d.dropped[0].reason.empty());
  EXPECT_EQ(d.indices(), std::vector<std::size_t>{1});
}

TEST(Baselines, NobNeverExceedsDeviceCount) {
  const SchedulingContext ctx = default_context();
  GpuPool pool(ctx.node);
  std::mt19937_64 rng(8);
  const auto q = queue_of(50, rng);
  const auto d = nob_assign(q, pool, 0.0, ctx, false);
  EXPECT_EQ(d.scheduled.size(), pool.device_count());
  EXPECT_LE(pool.in_flight(0.5), pool.device_count());
}

TEST(Baselines, GpuPoolBusyUntilMonotone) {
  GpuPool pool(NodeCompute{});
  pool.occupy(3, 5.0);
  EXPECT_THROW(pool.occupy(3, 4.0), DomainError);
  EXPECT_EQ(pool.earliest_free(), 0.0);
  EXPECT_FALSE(pool.idle_at(3, 4.9));
  EXPECT_TRUE(pool.idle_at(3, 5.0));
}

}  // namespace
}  // namespace edgebatch
