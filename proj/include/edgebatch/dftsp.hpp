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

// Depth-first tree search with online pruning for maximum-cardinality
// batches.
//
// For a target size z and a candidate prefix F_d (the d requests with the
// largest normalized deadline), requests are split into one class per output
// length. A node at depth k fixes how many requests v_k are taken from class
// k; given the counts, taking the cheapest-uplink prefix of every class is
// optimal because only the uplink constraint distinguishes members of a
// class. Children are tried from the largest count down, so short outputs
// are packed first. A node is pruned when even taking every request of the
// deeper classes cannot reach z; its lower-count siblings are then hopeless
// too and are skipped with it.
//
// The tree is never stored: the search keeps one child cursor per depth.
// Without pruning every node is walked, including the siblings of a dead leaf
// at the deepest level.
//
// A subtree whose partial sums plus its cheapest completion already break a
// constraint holds no feasible leaf. Such subtrees are not walked; their node
// counts are added from a recurrence instead, so the counters match a full
// walk exactly.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edgebatch/core.hpp"
#include "edgebatch/p2_reform.hpp"

namespace edgebatch {

enum class PruningRule {
  // selected + |classes deeper than the node| < z
  kTight,
  // selected + |node's class and deeper| < z, the looser literal form of the
  // rule, kept for comparison.
  kLiteral,
};

enum class TauMinMode {
  // Deadline bound is tau~ of the d-th request (the weakest one in F_d).
  kClassBound,
  // Deadline bound is the smallest tau~ inside the candidate subset itself.
  kExact,
};

struct SearchOptions {
  bool pruning = true;
  PruningRule rule = PruningRule::kTight;
  TauMinMode tau_mode = TauMinMode::kClassBound;
  // Skip subtrees that a lower bound proves leaf-infeasible, adding the node
  // counts a full walk would have produced. Outcomes and counters are
  // identical either way.
  bool subtree_skip = true;
};

class ClassificationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// F_d split by output length. Indices refer to the candidate list the
// partition was built from.
struct ClassPartition {
  std::vector<Tokens> ladder;
  std::vector<std::vector<std::size_t>> classes;
  // [k][v]: aggregate over the first v members of class k.
  std::vector<std::vector<double>> uplink_prefix;
  std::vector<std::vector<double>> downlink_prefix;
  std::vector<std::vector<double>> remaining_prefix_min;  // min (tau - t_w)

  std::size_t class_count() const { return classes.size(); }
  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& c : classes) n += c.size();
    return n;
  }
  std::vector<std::int64_t> class_sizes() const {
    std::vector<std::int64_t> sizes;
    for (const auto& c : classes) sizes.push_back(static_cast<std::int64_t>(c.size()));
    return sizes;
  }
};

namespace detail {

inline std::size_t ladder_index(std::span<const Tokens> ladder, Tokens n) {
  auto it = std::find(ladder.begin(), ladder.end(), n);
  if (it == ladder.end()) {
    throw ClassificationError("output length " + std::to_string(n) +
                              " is not on the class ladder");
  }
  return static_cast<std::size_t>(it - ladder.begin());
}

inline void rebuild_prefixes(ClassPartition& part,
                             std::span<const Request> candidates,
                             const P2Coefficients& coeff) {
  const std::size_t n_classes = part.classes.size();
  part.uplink_prefix.assign(n_classes, {});
  part.downlink_prefix.assign(n_classes, {});
  part.remaining_prefix_min.assign(n_classes, {});
  for (std::size_t k = 0; k < n_classes; ++k) {
    const auto& members = part.classes[k];
    auto& up = part.uplink_prefix[k];
    auto& down = part.downlink_prefix[k];
    auto& rem = part.remaining_prefix_min[k];
    up.assign(members.size() + 1, 0.0);
    down.assign(members.size() + 1, 0.0);
    rem.assign(members.size() + 1, std::numeric_limits<double>::infinity());
    for (std::size_t v = 0; v < members.size(); ++v) {
      const Request& r = candidates[members[v]];
      up[v + 1] = up[v] + coeff.k_up[members[v]] *
                              static_cast<double>(r.prompt_len);
      down[v + 1] = down[v] + coeff.k_down[members[v]] *
                                  static_cast<double>(r.output_len);
      rem[v + 1] = std::min(rem[v], r.deadline_s - r.waiting_s);
    }
  }
}

// Strict weak order used inside a class: cheaper uplink first, then id.
struct UplinkOrder {
  std::span<const Request> candidates;
  const P2Coefficients* coeff;
  bool operator()(std::size_t a, std::size_t b) const {
    const double ra = coeff->k_up[a] * static_cast<double>(candidates[a].prompt_len);
    const double rb = coeff->k_up[b] * static_cast<double>(candidates[b].prompt_len);
    if (ra != rb) return ra < rb;
    return candidates[a].id < candidates[b].id;
  }
};

}  // namespace detail

// Splits the pool (indices into `candidates`) by output length, each class
// sorted by minimum uplink fraction with ties broken by request id.
inline ClassPartition partition(std::span<const Request> candidates,
                                std::span<const std::size_t> pool,
                                const P2Coefficients& coeff,
                                std::span<const Tokens> ladder) {
  ClassPartition part;
  part.ladder.assign(ladder.begin(), ladder.end());
  part.classes.assign(ladder.size(), {});
  for (std::size_t idx : pool) {
    part.classes[detail::ladder_index(ladder, candidates[idx].output_len)]
        .push_back(idx);
  }
  const detail::UplinkOrder order{candidates, &coeff};
  for (auto& members : part.classes) {
    std::sort(members.begin(), members.end(), order);
  }
  detail::rebuild_prefixes(part, candidates, coeff);
  return part;
}

// The v_k cheapest-uplink members of every class k.
inline std::vector<std::size_t> recover_subset(
    const ClassPartition& part, std::span<const std::int64_t> counts) {
  std::vector<std::size_t> subset;
  for (std::size_t k = 0; k < part.classes.size() && k < counts.size(); ++k) {
    const auto take = static_cast<std::size_t>(counts[k]);
    if (take > part.classes[k].size()) {
      throw DomainError("recover_subset: count exceeds class size");
    }
    subset.insert(subset.end(), part.classes[k].begin(),
                  part.classes[k].begin() + static_cast<std::ptrdiff_t>(take));
  }
  return subset;
}

// check_p2 on recover_subset(part, counts), evaluated from the class
// aggregates in O(number of classes).
inline bool counts_feasible(const ClassPartition& part,
                            const P2Coefficients& coeff,
                            std::span<const std::int64_t> counts,
                            std::int64_t z, double tau_min,
                            TauMinMode mode = TauMinMode::kClassBound) {
  double uplink = 0.0;
  double downlink = 0.0;
  double out_tokens = 0.0;
  double latency = 0.0;
  double remaining = std::numeric_limits<double>::infinity();
  std::int64_t total = 0;
  for (std::size_t k = 0; k < part.classes.size(); ++k) {
    const std::int64_t v = counts[k];
    if (v == 0) continue;
    const double n = static_cast<double>(part.ladder[k]);
    const double dv = static_cast<double>(v);
    total += v;
    uplink += part.uplink_prefix[k][static_cast<std::size_t>(v)];
    downlink += part.downlink_prefix[k][static_cast<std::size_t>(v)];
    out_tokens += dv * n;
    latency += dv * (coeff.k4 * n + coeff.k5 * n * n);
    remaining = std::min(remaining,
                         part.remaining_prefix_min[k][static_cast<std::size_t>(v)]);
  }
  if (total != z) return false;
  if (mode == TauMinMode::kExact) {
    tau_min = coeff.slot_bound(z);
    if (total > 0) {
      tau_min = std::min(tau_min, coeff.normalized_deadline(remaining, z));
    }
  }
  return leq_slack(uplink, 1.0) && leq_slack(downlink, 1.0) &&
         leq_slack(out_tokens, coeff.memory_budget(z)) &&
         leq_slack(latency, tau_min);
}

struct SearchOutcome {
  std::optional<std::vector<std::size_t>> solution;  // candidate indices
  std::vector<std::int64_t> counts;  // per-class counts of the solution
  std::uint64_t nodes_visited = 0;
  std::uint64_t nodes_pruned = 0;
  std::uint64_t dfs_calls = 0;
  std::size_t z_found = 0;
  std::size_t d_found = 0;
  Tokens padded_len = 0;

  bool found() const { return solution.has_value(); }
};

struct AcceptAll {
  bool operator()(std::span<const std::size_t>) const { return true; }
};

namespace detail {

// a > b by more than the leaf test's slack could absorb.
inline bool exceeds(double a, double b) {
  return a > b + 4.0 * kRelativeSlack * std::max(std::fabs(a), std::fabs(b));
}

// Node counts of an unsuccessful walk below a node, as a function of the
// node's depth and the count still to be selected. Rows are indexed by depth,
// columns by remaining count r in [0, z]; prefix sums run over r >= 1.
class SubtreeCounts {
 public:
  SubtreeCounts(std::span<const std::int64_t> cap,
                std::span<const std::int64_t> deeper, std::int64_t z,
                const SearchOptions& options) {
    const std::size_t n = cap.size();
    const auto width = static_cast<std::size_t>(z) + 1;
    visited_.assign(n, std::vector<std::uint64_t>(width, 0));
    pruned_.assign(n, std::vector<std::uint64_t>(width, 0));
    visited_sum_.assign(n, std::vector<std::uint64_t>(width, 0));
    pruned_sum_.assign(n, std::vector<std::uint64_t>(width, 0));
    for (std::size_t d = n; d-- > 0;) {
      for (std::int64_t r = 1; r <= z; ++r) {
        const std::int64_t hi = std::min(r, cap[d]);
        std::int64_t lo = 0;
        if (options.pruning) {
          const std::int64_t reach =
              options.rule == PruningRule::kTight ? deeper[d + 1] : deeper[d];
          lo = std::max<std::int64_t>(0, r - reach);
        }
        std::uint64_t v = 0;
        std::uint64_t p = 0;
        if (hi < lo) {
          p = 1;
        } else if (d + 1 == n && !options.pruning) {
          v = static_cast<std::uint64_t>(hi + 1);  // every child is a leaf
        } else if (d + 1 == n) {
          // Deepest level: a dead leaf ends the sibling loop.
          if (hi == r) {
            v = 1;
            if (r - 1 >= lo) {
              v = 2;
            } else {
              p = 1;
            }
          } else {
            v = 1;
          }
        } else {
          v = static_cast<std::uint64_t>(hi - lo + 1);
          p = lo > 0 ? 1 : 0;
          const std::int64_t j_lo = std::max<std::int64_t>(1, r - hi);
          const std::int64_t j_hi = r - lo;
          if (j_lo <= j_hi) {
            v += range(visited_sum_[d + 1], j_lo, j_hi);
            p += range(pruned_sum_[d + 1], j_lo, j_hi);
          }
        }
        const auto ur = static_cast<std::size_t>(r);
        visited_[d][ur] = v;
        pruned_[d][ur] = p;
        visited_sum_[d][ur] = visited_sum_[d][ur - 1] + v;
        pruned_sum_[d][ur] = pruned_sum_[d][ur - 1] + p;
      }
    }
  }

  std::uint64_t visited(std::size_t depth, std::int64_t r) const {
    return visited_[depth][static_cast<std::size_t>(r)];
  }
  std::uint64_t pruned(std::size_t depth, std::int64_t r) const {
    return pruned_[depth][static_cast<std::size_t>(r)];
  }

 private:
  static std::uint64_t range(const std::vector<std::uint64_t>& sums,
                             std::int64_t lo, std::int64_t hi) {
    return sums[static_cast<std::size_t>(hi)] -
           sums[static_cast<std::size_t>(lo - 1)];
  }

  std::vector<std::vector<std::uint64_t>> visited_, pruned_;
  std::vector<std::vector<std::uint64_t>> visited_sum_, pruned_sum_;
};

}  // namespace detail

// One tree search for a fixed z and candidate partition. A sum-z leaf that
// passes P2 is materialized and handed to `accept`; a rejected leaf is
// treated as infeasible and the search continues with its next sibling.
template <typename Accept = AcceptAll>
SearchOutcome dfs(std::int64_t z, const ClassPartition& part,
                  const P2Coefficients& coeff, double tau_min,
                  const SearchOptions& options, Accept&& accept = Accept{}) {
  SearchOutcome out;
  out.dfs_calls = 1;
  out.padded_len = coeff.padded_len;
  const std::size_t n_classes = part.class_count();
  std::vector<std::int64_t> cap(n_classes);
  std::vector<std::int64_t> deeper(n_classes + 1, 0);  // sum of cap[k..]
  std::vector<double> weight(n_classes);  // per-request latency term
  for (std::size_t k = 0; k < n_classes; ++k) {
    cap[k] = static_cast<std::int64_t>(part.classes[k].size());
    const double n = static_cast<double>(part.ladder[k]);
    weight[k] = coeff.k4 * n + coeff.k5 * n * n;
  }
  for (std::size_t k = n_classes; k-- > 0;) deeper[k] = deeper[k + 1] + cap[k];

  ++out.nodes_visited;  // root
  if (z < 1 || n_classes == 0) return out;
  if (options.pruning && deeper[0] < z) {
    ++out.nodes_pruned;
    return out;
  }

  std::vector<std::int64_t> counts(n_classes, 0);
  std::optional<detail::SubtreeCounts> tables;

  // True when no sum-z leaf below the node fixing classes [0, fixed) can
  // pass P2: the partial sums plus the cheapest completion (smallest outputs
  // first) already violate a constraint.
  auto hopeless = [&](std::size_t fixed, std::int64_t selected) {
    double up = 0.0, down = 0.0, tokens = 0.0, latency = 0.0;
    double tau = tau_min;
    if (options.tau_mode == TauMinMode::kExact) {
      tau = coeff.slot_bound(z);
    }
    for (std::size_t k = 0; k < fixed; ++k) {
      const auto v = static_cast<std::size_t>(counts[k]);
      if (v == 0) continue;
      up += part.uplink_prefix[k][v];
      down += part.downlink_prefix[k][v];
      tokens += static_cast<double>(v) * static_cast<double>(part.ladder[k]);
      latency += static_cast<double>(v) * weight[k];
      if (options.tau_mode == TauMinMode::kExact) {
        tau = std::min(tau, coeff.normalized_deadline(
                                part.remaining_prefix_min[k][v], z));
      }
    }
    std::int64_t r = z - selected;
    for (std::size_t k = fixed; k < n_classes && r > 0; ++k) {
      const std::int64_t take = std::min(r, cap[k]);
      tokens += static_cast<double>(take) * static_cast<double>(part.ladder[k]);
      latency += static_cast<double>(take) * weight[k];
      r -= take;
    }
    return r > 0 || detail::exceeds(up, 1.0) || detail::exceeds(down, 1.0) ||
           detail::exceeds(tokens, coeff.memory_budget(z)) ||
           detail::exceeds(latency, tau);
  };
  // Accounts for the unsuccessful walk of the subtree below a node whose
  // children choose class `depth`.
  auto skip = [&](std::size_t depth, std::int64_t remaining) {
    if (!tables) tables.emplace(cap, deeper, z, options);
    out.nodes_visited += tables->visited(depth, remaining);
    out.nodes_pruned += tables->pruned(depth, remaining);
  };

  if (options.subtree_skip && hopeless(0, 0)) {
    skip(0, z);
    return out;
  }

  // next[k]: next count to try for class k; -1 once the level is exhausted.
  std::vector<std::int64_t> next(n_classes, -1);
  std::size_t depth = 0;
  std::int64_t selected = 0;
  next[0] = std::min(z, cap[0]);

  while (true) {
    if (next[depth] < 0) {
      if (depth == 0) return out;
      --depth;
      selected -= counts[depth];
      counts[depth] = 0;
      continue;
    }
    const std::int64_t c = next[depth];
    if (options.pruning) {
      const std::int64_t reachable =
          options.rule == PruningRule::kTight ? deeper[depth + 1]
                                              : deeper[depth];
      if (selected + c + reachable < z) {
        ++out.nodes_pruned;
        next[depth] = -1;  // c and every smaller sibling
        continue;
      }
    }
    ++out.nodes_visited;
    counts[depth] = c;
    selected += c;
    next[depth] = c - 1;

    if (selected == z) {
      if (counts_feasible(part, coeff, counts, z, tau_min, options.tau_mode)) {
        auto subset = recover_subset(part, counts);
        if (accept(std::span<const std::size_t>(subset))) {
          out.solution = std::move(subset);
          out.counts = counts;
          out.z_found = static_cast<std::size_t>(z);
          return out;
        }
      }
      selected -= c;
      counts[depth] = 0;
      continue;
    }
    if (depth + 1 == n_classes) {
      // Deepest level and still short of z. Smaller siblings are shorter
      // yet; skipping them is itself a prune, so the unpruned walk visits
      // them.
      selected -= c;
      counts[depth] = 0;
      if (options.pruning) next[depth] = -1;
      continue;
    }
    if (options.subtree_skip && hopeless(depth + 1, selected)) {
      skip(depth + 1, z - selected);
      selected -= c;
      counts[depth] = 0;
      continue;
    }
    ++depth;
    next[depth] = std::min(z - selected, cap[depth]);
  }
}

// Candidate indices ordered by normalized deadline, descending. tau~_i(z)
// differs from tau_i - t_w,i by a z-dependent affine map shared by all
// requests, so one sort serves every z.
inline std::vector<std::size_t> deadline_order(
    std::span<const Request> candidates) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ra = candidates[a].deadline_s - candidates[a].waiting_s;
    const double rb = candidates[b].deadline_s - candidates[b].waiting_s;
    if (ra != rb) return ra > rb;
    return candidates[a].id < candidates[b].id;
  });
  return order;
}

// Partitions of F_1 ... F_I, built incrementally along `order`.
inline std::vector<ClassPartition> prefix_partitions(
    std::span<const Request> candidates, std::span<const std::size_t> order,
    const P2Coefficients& coeff, std::span<const Tokens> ladder) {
  std::vector<ClassPartition> parts(order.size() + 1);
  ClassPartition running;
  running.ladder.assign(ladder.begin(), ladder.end());
  running.classes.assign(ladder.size(), {});
  const detail::UplinkOrder less{candidates, &coeff};
  for (std::size_t d = 1; d <= order.size(); ++d) {
    const std::size_t idx = order[d - 1];
    auto& members =
        running.classes[detail::ladder_index(ladder, candidates[idx].output_len)];
    members.insert(std::upper_bound(members.begin(), members.end(), idx, less),
                   idx);
    detail::rebuild_prefixes(running, candidates, coeff);
    parts[d] = running;
  }
  return parts;
}

// Maximum-cardinality batch search over accuracy-filtered candidates.
// Every returned subset has passed check_p1.
inline SearchOutcome dftsp(std::span<const Request> candidates,
                           const SchedulingContext& ctx,
                           const SearchOptions& options = {}) {
  SearchOutcome total;
  if (candidates.empty()) return total;
  const Tokens padded = pool_padded_len(candidates);
  const P2Coefficients coeff = derive_coefficients(ctx, padded, candidates);
  total.padded_len = padded;

  const auto order = deadline_order(candidates);
  const auto parts = prefix_partitions(candidates, order, coeff, ctx.ladder);

  std::vector<Request> scratch;
  auto verify = [&](std::span<const std::size_t> subset) {
    scratch.clear();
    for (std::size_t idx : subset) scratch.push_back(candidates[idx]);
    return check_p1(scratch, ctx, padded);
  };

  const auto n = static_cast<std::int64_t>(candidates.size());
  for (std::int64_t z = n; z >= 1; --z) {
    for (std::int64_t d = z; d <= n; ++d) {
      const Request& weakest = candidates[order[static_cast<std::size_t>(d - 1)]];
      const double tau_min =
          std::min(coeff.normalized_deadline(weakest, z), coeff.slot_bound(z));
      SearchOutcome one = dfs(z, parts[static_cast<std::size_t>(d)], coeff,
                              tau_min, options, verify);
      total.nodes_visited += one.nodes_visited;
      total.nodes_pruned += one.nodes_pruned;
      total.dfs_calls += one.dfs_calls;
      if (one.found()) {
        total.solution = std::move(one.solution);
        total.counts = std::move(one.counts);
        total.z_found = static_cast<std::size_t>(z);
        total.d_found = static_cast<std::size_t>(d);
        return total;
      }
    }
  }
  return total;
}

enum class ExhaustiveMode {
  kSubsets,       // every subset of the candidates
  kCountVectors,  // every prefix F_d and every per-class count vector
};

class OracleCapExceeded : public std::length_error {
 public:
  using std::length_error::length_error;
};

inline constexpr std::size_t kDefaultOracleCap = 20;

// Independent maximum-cardinality oracle: plain enumeration plus check_p1.
// nodes_visited counts evaluated subsets.
inline SearchOutcome exhaustive_optimal(
    std::span<const Request> candidates, const SchedulingContext& ctx,
    ExhaustiveMode mode = ExhaustiveMode::kSubsets,
    std::size_t cap = kDefaultOracleCap) {
  if (candidates.size() > cap) {
    throw OracleCapExceeded("exhaustive_optimal: " +
                            std::to_string(candidates.size()) +
                            " candidates exceed the cap of " +
                            std::to_string(cap));
  }
  SearchOutcome best;
  if (candidates.empty()) return best;
  const Tokens padded = pool_padded_len(candidates);
  best.padded_len = padded;
  std::vector<Request> subset;

  if (mode == ExhaustiveMode::kSubsets) {
    const std::uint64_t n_masks = std::uint64_t{1} << candidates.size();
    for (std::uint64_t mask = 1; mask < n_masks; ++mask) {
      const auto size = static_cast<std::size_t>(std::popcount(mask));
      if (size <= best.z_found) continue;
      ++best.nodes_visited;
      subset.clear();
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (mask & (std::uint64_t{1} << i)) {
          subset.push_back(candidates[i]);
          idx.push_back(i);
        }
      }
      if (check_p1(subset, ctx, padded)) {
        best.solution = std::move(idx);
        best.z_found = size;
      }
    }
    return best;
  }

  const P2Coefficients coeff = derive_coefficients(ctx, padded, candidates);
  const auto order = deadline_order(candidates);
  for (std::size_t d = 1; d <= order.size(); ++d) {
    const auto pool = std::span<const std::size_t>(order).first(d);
    const ClassPartition part = partition(candidates, pool, coeff, ctx.ladder);
    const auto sizes = part.class_sizes();
    std::vector<std::int64_t> counts(sizes.size(), 0);
    while (true) {
      const auto z = static_cast<std::size_t>(
          std::accumulate(counts.begin(), counts.end(), std::int64_t{0}));
      if (z > best.z_found) {
        ++best.nodes_visited;
        auto idx = recover_subset(part, counts);
        subset.clear();
        for (std::size_t i : idx) subset.push_back(candidates[i]);
        if (check_p1(subset, ctx, padded)) {
          best.solution = std::move(idx);
          best.counts = counts;
          best.z_found = z;
          best.d_found = d;
        }
      }
      // Odometer increment over [0, sizes[k]].
      std::size_t k = 0;
      while (k < counts.size() && counts[k] == sizes[k]) counts[k++] = 0;
      if (k == counts.size()) break;
      ++counts[k];
    }
  }
  return best;
}

}  // namespace edgebatch
