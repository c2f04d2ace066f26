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

// LLM architecture catalog and post-training quantization profiles.
//
// A profile reduces the deployment to three numbers: alpha scales every
// memory term, beta scales every latency term, and a per-model perplexity
// differential decides which requests the quantized model may serve.

#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "edgebatch/core.hpp"
#include "json.hpp"

namespace edgebatch {

struct LlmSpec {
  std::string name;
  std::int64_t layers = 0;      // L
  std::int64_t hidden_dim = 0;  // d_m
  std::int64_t head_count = 0;  // n_h
  std::int64_t head_dim = 0;    // d_h
  std::int64_t ffn_dim = 0;     // d_f
  std::int64_t bytes_per_param = 2;

  bool operator==(const LlmSpec&) const = default;

  // Throws ConfigError naming the first violated field. Zero layers is
  // accepted (it models an empty stack, used by cost-model tests).
  void validate(const std::string& where = "model") const {
    if (name.empty()) throw ConfigError(where + ".name", "must not be empty");
    if (layers < 0) throw ConfigError(where + ".layers", "must be >= 0");
    const std::pair<const char*, std::int64_t> dims[] = {
        {"hidden_dim", hidden_dim}, {"head_count", head_count},
        {"head_dim", head_dim},     {"ffn_dim", ffn_dim},
        {"bytes_per_param", bytes_per_param}};
    for (const auto& [field, value] : dims) {
      if (value <= 0) throw ConfigError(where + "." + field, "must be > 0");
    }
    if (hidden_dim != head_count * head_dim) {
      throw ConfigError(where + ".hidden_dim",
                        "must equal head_count * head_dim");
    }
  }
};

struct QuantProfile {
  std::string name;    // catalog key, e.g. "GPTQ-W4A16"
  std::string method;  // "none", "RTN", "GPTQ", "ZQ-Local", ...
  int weight_bits = 16;
  int activation_bits = 16;
  double alpha = 1.0;  // memory scale, (0, 1]
  double beta = 1.0;   // latency scale, (0, 1]
  std::map<std::string, double> delta_ppl_by_model;

  bool operator==(const QuantProfile&) const = default;

  bool lossless() const { return method == "none"; }

  void validate(const std::string& where = "quant_profile") const {
    if (name.empty()) throw ConfigError(where + ".name", "must not be empty");
    if (!(alpha > 0.0 && alpha <= 1.0)) {
      throw ConfigError(where + ".alpha", "must lie in (0, 1]");
    }
    if (!(beta > 0.0 && beta <= 1.0)) {
      throw ConfigError(where + ".beta", "must lie in (0, 1]");
    }
    for (const auto& [model, dppl] : delta_ppl_by_model) {
      if (!(dppl >= 0.0)) {
        throw ConfigError(where + ".delta_ppl." + model, "must be >= 0");
      }
    }
    if (lossless()) {
      if (alpha != 1.0 || beta != 1.0) {
        throw ConfigError(where + ".method",
                          "unquantized profile requires alpha = beta = 1");
      }
      for (const auto& [model, dppl] : delta_ppl_by_model) {
        if (dppl != 0.0) {
          throw ConfigError(where + ".delta_ppl." + model,
                            "unquantized profile requires delta_ppl = 0");
        }
      }
    }
  }
};

inline std::vector<LlmSpec> builtin_models() {
  // FFN width is four times the hidden width for every catalog entry.
  return {
      {"BLOOM-3B", 30, 2560, 32, 80, 4 * 2560, 2},
      {"BLOOM-7.1B", 30, 4096, 32, 128, 4 * 4096, 2},
      {"OPT-13B", 40, 5120, 40, 128, 4 * 5120, 2},
  };
}

// Alpha/beta for the quantized entries are configuration defaults, not
// measurements. The W4A16 differentials are the published GPTQ and ZQ-Local
// numbers for the three catalog models.
inline std::vector<QuantProfile> builtin_quant_profiles() {
  const std::map<std::string, double> zero = {
      {"BLOOM-3B", 0.0}, {"BLOOM-7.1B", 0.0}, {"OPT-13B", 0.0}};
  return {
      {"FP16", "none", 16, 16, 1.0, 1.0, zero},
      {"W8A16", "RTN", 8, 16, 0.5, 0.8, zero},
      {"GPTQ-W4A16", "GPTQ", 4, 16, 0.25, 0.7,
       {{"BLOOM-3B", 0.75}, {"BLOOM-7.1B", 0.54}, {"OPT-13B", 0.2}}},
      {"ZQ-Local-W4A16", "ZQ-Local", 4, 16, 0.25, 0.7,
       {{"BLOOM-3B", 0.92}, {"BLOOM-7.1B", 0.59}, {"OPT-13B", 0.42}}},
  };
}

inline double delta_ppl(const QuantProfile& profile, const std::string& model) {
  if (profile.lossless()) return 0.0;
  auto it = profile.delta_ppl_by_model.find(model);
  if (it == profile.delta_ppl_by_model.end()) {
    throw LookupError("no delta_ppl for model '" + model + "' in profile '" +
                      profile.name + "'");
  }
  return it->second;
}

// A request with PPL-degradation tolerance `tolerance` accepts a deployment
// whose differential does not exceed it.
inline bool accuracy_admissible(double delta_ppl, double tolerance) {
  if (delta_ppl < 0.0 || tolerance < 0.0) {
    throw DomainError("accuracy_admissible: arguments must be >= 0");
  }
  return delta_ppl <= tolerance;
}

// Immutable after construction.
class Catalog {
 public:
  Catalog() : Catalog(builtin_models(), builtin_quant_profiles()) {}

  Catalog(std::vector<LlmSpec> models, std::vector<QuantProfile> profiles)
      : models_(std::move(models)), profiles_(std::move(profiles)) {
    for (std::size_t i = 0; i < models_.size(); ++i) {
      models_[i].validate("models[" + std::to_string(i) + "]");
    }
    for (std::size_t i = 0; i < profiles_.size(); ++i) {
      profiles_[i].validate("quant_profiles[" + std::to_string(i) + "]");
    }
  }

  const std::vector<LlmSpec>& models() const { return models_; }
  const std::vector<QuantProfile>& profiles() const { return profiles_; }

  const LlmSpec& model(const std::string& name) const {
    for (const auto& m : models_) {
      if (m.name == name) return m;
    }
    throw LookupError("unknown model '" + name + "'");
  }

  const QuantProfile& profile(const std::string& name) const {
    for (const auto& p : profiles_) {
      if (p.name == name) return p;
    }
    throw LookupError("unknown quantization profile '" + name + "'");
  }

  // Entries in `overrides` replace built-ins of the same name; new names are
  // appended.
  static Catalog merged(const Catalog& base, const std::vector<LlmSpec>& models,
                        const std::vector<QuantProfile>& profiles) {
    auto m = base.models_;
    auto p = base.profiles_;
    for (const auto& spec : models) Upsert(m, spec);
    for (const auto& prof : profiles) Upsert(p, prof);
    return Catalog(std::move(m), std::move(p));
  }

 private:
  template <typename T>
  static void Upsert(std::vector<T>& items, const T& item) {
    for (auto& existing : items) {
      if (existing.name == item.name) {
        existing = item;
        return;
      }
    }
    items.push_back(item);
  }

  std::vector<LlmSpec> models_;
  std::vector<QuantProfile> profiles_;
};

// ---------------------------------------------------------------------------
// JSON schema
//
//   models:         [{name, layers, hidden_dim, head_count, head_dim,
//                     ffn_dim (default 4*hidden_dim), bytes_per_param (2)}]
//   quant_profiles: [{name, method, weight_bits, activation_bits, alpha,
//                     beta, delta_ppl: {model: value}}]

namespace detail {

template <typename T>
T required(const nlohmann::json& j, const std::string& key,
           const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + "." + key, "missing");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key, "wrong type");
  }
}

template <typename T>
T optional(const nlohmann::json& j, const std::string& key, T fallback,
           const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key, "wrong type");
  }
}

}  // namespace detail

inline LlmSpec llm_spec_from_json(const nlohmann::json& j,
                                  const std::string& where) {
  if (!j.is_object()) throw ConfigError(where, "expected an object");
  LlmSpec s;
  s.name = detail::required<std::string>(j, "name", where);
  s.layers = detail::required<std::int64_t>(j, "layers", where);
  s.hidden_dim = detail::required<std::int64_t>(j, "hidden_dim", where);
  s.head_count = detail::required<std::int64_t>(j, "head_count", where);
  s.head_dim = detail::required<std::int64_t>(j, "head_dim", where);
  s.ffn_dim = detail::optional<std::int64_t>(j, "ffn_dim", 4 * s.hidden_dim,
                                             where);
  s.bytes_per_param =
      detail::optional<std::int64_t>(j, "bytes_per_param", 2, where);
  s.validate(where);
  return s;
}

inline nlohmann::json to_json(const LlmSpec& s) {
  return {{"name", s.name},         {"layers", s.layers},
          {"hidden_dim", s.hidden_dim}, {"head_count", s.head_count},
          {"head_dim", s.head_dim}, {"ffn_dim", s.ffn_dim},
          {"bytes_per_param", s.bytes_per_param}};
}

inline QuantProfile quant_profile_from_json(const nlohmann::json& j,
                                            const std::string& where) {
  if (!j.is_object()) throw ConfigError(where, "expected an object");
  QuantProfile p;
  p.name = detail::required<std::string>(j, "name", where);
  p.method = detail::optional<std::string>(j, "method", "RTN", where);
  p.weight_bits = detail::optional<int>(j, "weight_bits", 16, where);
  p.activation_bits = detail::optional<int>(j, "activation_bits", 16, where);
  p.alpha = detail::required<double>(j, "alpha", where);
  p.beta = detail::required<double>(j, "beta", where);
  if (j.contains("delta_ppl")) {
    const auto& table = j.at("delta_ppl");
    if (!table.is_object()) {
      throw ConfigError(where + ".delta_ppl", "expected an object");
    }
    for (const auto& [model, value] : table.items()) {
      if (!value.is_number()) {
        throw ConfigError(where + ".delta_ppl." + model, "expected a number");
      }
      p.delta_ppl_by_model[model] = value.get<double>();
    }
  }
  p.validate(where);
  return p;
}

inline nlohmann::json to_json(const QuantProfile& p) {
  nlohmann::json table = nlohmann::json::object();
  for (const auto& [model, value] : p.delta_ppl_by_model) table[model] = value;
  return {{"name", p.name},
          {"method", p.method},
          {"weight_bits", p.weight_bits},
          {"activation_bits", p.activation_bits},
          {"alpha", p.alpha},
          {"beta", p.beta},
          {"delta_ppl", table}};
}

// Reads `models` / `quant_profiles` arrays from `j` (either may be absent)
// and merges them over `base`.
inline Catalog catalog_from_json(const nlohmann::json& j,
                                 const Catalog& base = Catalog()) {
  std::vector<LlmSpec> models;
  std::vector<QuantProfile> profiles;
  if (j.contains("models")) {
    const auto& arr = j.at("models");
    if (!arr.is_array()) throw ConfigError("models", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      models.push_back(
          llm_spec_from_json(arr[i], "models[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("quant_profiles")) {
    const auto& arr = j.at("quant_profiles");
    if (!arr.is_array()) {
      throw ConfigError("quant_profiles", "expected an array");
    }
    for (std::size_t i = 0; i < arr.size(); ++i) {
      profiles.push_back(quant_profile_from_json(
          arr[i], "quant_profiles[" + std::to_string(i) + "]"));
    }
  }
  return Catalog::merged(base, models, profiles);
}

inline nlohmann::json to_json(const Catalog& c) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : c.models()) models.push_back(to_json(m));
  nlohmann::json profiles = nlohmann::json::array();
  for (const auto& p : c.profiles()) profiles.push_back(to_json(p));
  return {{"models", models}, {"quant_profiles", profiles}};
}

}  // namespace edgebatch
