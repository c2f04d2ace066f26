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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace edgebatch {

// Token counts (prompt and output lengths, KV budgets).
using Tokens = std::int64_t;
// Exact byte counts; every catalog model fits comfortably in 63 bits.
using Bytes = std::int64_t;
// FLOP counts are kept in double. All closed forms stay integer-valued and
// below 2^53 for the catalog models, so they are exact.
using Flops = double;
using Seconds = double;

using RequestId = std::uint64_t;

// Relative tolerance applied to every constraint comparison.
inline constexpr double kRelativeSlack = 1e-9;

// a <= b, absorbing floating noise of relative size kRelativeSlack.
inline bool leq_slack(double a, double b) {
  return a <= b + kRelativeSlack * std::max(std::abs(a), std::abs(b));
}

// Misuse of a model input (negative tolerance, nonpositive power, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Missing catalog entry (model, profile, or model/profile pair).
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Invalid configuration. `field` is the dotted path of the offending entry
// and `line` the 1-based source line when known (0 otherwise).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what, int line = 0)
      : std::runtime_error(Format(field, what, line)),
        field_(std::move(field)),
        line_(line) {}

  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  static std::string Format(const std::string& field, const std::string& what,
                            int line) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!field.empty()) out += field + ": ";
    return out + what;
  }

  std::string field_;
  int line_;
};

}  // namespace edgebatch
