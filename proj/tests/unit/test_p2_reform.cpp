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

#include "edgebatch/p2_reform.hpp"
#include "support/instances.hpp"

namespace edgebatch {
namespace {

SchedulingContext default_context() {
  SchedulingContext ctx;
  const Catalog catalog;
  ctx.model = catalog.model("BLOOM-3B");
  ctx.quant = catalog.profile("FP16");
  return ctx;
}

TEST(P2Reform, FilterAdmissible) {
  std::vector<Request> rs(4);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    rs[i].id = i;
    rs[i].tolerance = 0.1 * static_cast<double>(i);
  }
  const auto all = filter_admissible(rs, 0.0);
  ASSERT_EQ(all.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(all[i].id, i);

  for (auto& r : rs) r.tolerance = std::min(r.tolerance, 0.5);
  EXPECT_TRUE(filter_admissible(rs, 0.75).empty());

  std::vector<Request> mixed(2);
  mixed[0].id = 0;
  mixed[0].tolerance = 0.1;
  mixed[1].id = 1;
  mixed[1].tolerance = 0.8;
  const auto kept = filter_admissible(mixed, 0.42);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].id, 1u);
}

TEST(P2Reform, CoefficientExamples) {
  SchedulingContext ctx = default_context();
  ctx.node.memory_bytes = 640'000'000'000;
  const P2Coefficients c = derive_coefficients(ctx, 512, {});
  EXPECT_EQ(c.k5, 153'600.0);
  EXPECT_DOUBLE_EQ(c.k2, (640e9 - 4'718'592'000.0) / (4.0 * 30 * 2560));
  EXPECT_NEAR(c.k2, 2.068e6, 0.001e6);
}

TEST(P2Reform, CoefficientsClosedForm) {
  const SchedulingContext ctx = default_context();
  for (Tokens s : {128, 256, 512}) {
    const P2Coefficients c = derive_coefficients(ctx, s, {});
    const double L = 30, d = 2560, f = 10240;
    const double A = 8 * s * d * d + 4.0 * s * s * d + 4 * s * d * f;
    const double K = 8 * d * d + 4.0 * s * d + 4 * d * f;
    EXPECT_EQ(c.k3, L * (A - K));
    EXPECT_EQ(c.k4, L * (K - 2 * d));
    EXPECT_EQ(c.k5, 2 * L * d);
    EXPECT_EQ(c.deadline_scale, ctx.node.flops_per_s / ctx.quant.beta);
  }
}

TEST(P2Reform, LatencyPolynomialReproducesCost) {
  // C/beta * latency = k3 z + sum (k4 n + k5 n^2) + L K z collected the same
  // way: check against batch_cost directly.
  const SchedulingContext ctx = default_context();
  const Tokens s = 256;
  const P2Coefficients c = derive_coefficients(ctx, s, {});
  const std::vector<Tokens> outs = {128, 512, 256};
  BatchPlan plan;
  plan.padded_len = s;
  double poly = c.k3 * static_cast<double>(outs.size());
  for (Tokens n : outs) {
    plan.entries.push_back({s, n});
    poly += c.k4 * n + c.k5 * static_cast<double>(n) * n;
  }
  const double latency = batch_cost(ctx.model, ctx.quant, plan, ctx.node).latency_s;
  EXPECT_NEAR(poly / c.deadline_scale, latency, 1e-12 * latency);
}

TEST(P2Reform, UplinkCoefficientExact) {
  const SchedulingContext ctx = default_context();
  std::vector<Request> rs(3);
  rs[0].prompt_len = 128;
  rs[0].link = {1e-3, 0.1};
  rs[1].prompt_len = 512;
  rs[1].link = {4e-4, 0.05};
  rs[2].prompt_len = 77;
  rs[2].link = {2e-3, 0.2};
  const P2Coefficients c = derive_coefficients(ctx, 512, rs);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    EXPECT_EQ(c.k_up[i] * static_cast<double>(rs[i].prompt_len),
              min_uplink_fraction(rs[i].prompt_len, rs[i].link, ctx.radio));
  }
}

TEST(P2Reform, WeightsDoNotFit) {
  SchedulingContext ctx = default_context();
  ctx.node.memory_bytes = 1'000'000'000;
  EXPECT_THROW((void)derive_coefficients(ctx, 128, {}), WeightsDoNotFit);
}

TEST(P2Reform, DegenerateNodeLeavesNoHeadroom) {
  SchedulingContext ctx = default_context();
  ctx.node.memory_bytes = weight_bytes(ctx.model);
  const P2Coefficients c = derive_coefficients(ctx, 128, {});
  EXPECT_EQ(c.k2, 0.0);
  EXPECT_LT(c.memory_budget(1), 0.0);
}

TEST(P2Reform, PaddedLengthBelowPromptRejected) {
  const SchedulingContext ctx = default_context();
  std::vector<Request> rs(1);
  rs[0].prompt_len = 300;
  EXPECT_THROW((void)derive_coefficients(ctx, 256, rs), DomainError);
}

TEST(P2Reform, MemoryBudgetAndDeadlineShape) {
  const SchedulingContext ctx = default_context();
  const P2Coefficients c = derive_coefficients(ctx, 256, {});
  EXPECT_EQ(c.memory_budget(0) - c.memory_budget(3), 3.0 * 256);
  Request r;
  r.deadline_s = 1.7;
  r.waiting_s = 0.3;
  double prev = c.normalized_deadline(r, 1);
  for (int z = 2; z < 20; ++z) {
    const double cur = c.normalized_deadline(r, z);
    EXPECT_LT(cur, prev);
    EXPECT_DOUBLE_EQ(prev - cur, c.k3);
    prev = cur;
  }
  EXPECT_DOUBLE_EQ(c.normalized_deadline(r, 4),
                   (1.7 - 0.3 - 0.25 - 0.25) * c.deadline_scale - 4 * c.k3);
}

TEST(P2Reform, CheckP2Boundaries) {
  const SchedulingContext ctx = default_context();
  std::vector<Request> rs(2);
  rs[0].prompt_len = 128;
  rs[0].output_len = 128;
  rs[1].prompt_len = 128;
  rs[1].output_len = 256;
  P2Coefficients c = derive_coefficients(ctx, 128, rs);
  const std::vector<std::size_t> none;
  EXPECT_TRUE(check_p2(rs, none, c, 0, 0.0));
  const std::vector<std::size_t> both = {0, 1};
  EXPECT_FALSE(check_p2(rs, both, c, 1, 1e30));  // wrong cardinality
  EXPECT_TRUE(check_p2(rs, both, c, 2, 1e30));
  // Sum n = 384; set the budget one token short of it.
  c.k2 = 384.0 - 1.0 + 128.0 * 2;
  EXPECT_FALSE(check_p2(rs, both, c, 2, 1e30));
  c.k2 = 384.0 + 128.0 * 2;
  EXPECT_TRUE(check_p2(rs, both, c, 2, 1e30));
}

TEST(P2Reform, CheckP1Basics) {
  SchedulingContext ctx = default_context();
  EXPECT_TRUE(check_p1(std::vector<Request>{}, ctx, 128));
  Request r;
  r.prompt_len = 512;
  r.output_len = 512;
  r.deadline_s = 0.55;  // T_U + T_D alone take 0.5 s
  EXPECT_FALSE(check_p1(std::vector<Request>{r}, ctx, 512));
  r.deadline_s = 2.0;
  EXPECT_TRUE(check_p1(std::vector<Request>{r}, ctx, 512));
  ctx.node.memory_bytes = weight_bytes(ctx.model) - 1'000'000;
  EXPECT_FALSE(check_p1(std::vector<Request>{}, ctx, 128));
}

TEST(P2Reform, P1AndP2AgreeOnRandomSubsets) {
  std::mt19937_64 rng(99);
  int feasible = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const auto inst = testing::random_instance(rng, 10, 3);
    const auto& cand = inst.candidates;
    const Tokens s = pool_padded_len(cand);
    const P2Coefficients c = derive_coefficients(inst.ctx, s, cand);
    std::vector<std::size_t> subset;
    std::bernoulli_distribution take(0.5);
    for (std::size_t i = 0; i < cand.size() && subset.size() < 8; ++i) {
      if (take(rng)) subset.push_back(i);
    }
    const auto z = static_cast<std::int64_t>(subset.size());
    const bool p2 = check_p2(cand, subset, c, z, subset_tau_min(cand, subset, c));
    const bool p1 = check_p1(testing::gather(cand, subset), inst.ctx, s);
    EXPECT_EQ(p1, p2) << "trial " << trial;
    feasible += p1 ? 1 : 0;
  }
  EXPECT_GT(feasible, 40);
  EXPECT_LT(feasible, 360);
}

TEST(P2Reform, SmallerTauMinIsConservative) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = testing::random_instance(rng, 8, 3);
    const auto& cand = inst.candidates;
    const Tokens s = pool_padded_len(cand);
    const P2Coefficients c = derive_coefficients(inst.ctx, s, cand);
    const auto subset = testing::all_indices(cand.size());
    const double tau = subset_tau_min(cand, subset, c);
    const auto z = static_cast<std::int64_t>(subset.size());
    if (check_p2(cand, subset, c, z, tau - std::abs(tau) * 0.1 - 1.0)) {
      EXPECT_TRUE(check_p1(cand, inst.ctx, s)) << trial;
    }
  }
}

}  // namespace
}  // namespace edgebatch
