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

// JSON scenario files.
//
// Every field is optional; unset fields keep the Scenario defaults. Unknown
// keys are rejected. Schema (units in the key names):
//
//   model, quant_profile, scheduler (dftsp | stb | nob | brute)
//   arrival_rate, duration_s, epoch_s, seed
//   ladder [output lengths], prompt_lengths [..]
//   deadline_s {min, max}, deadline_scale, tolerance_cap, accuracy_check
//   radio {uplink_bandwidth_hz, downlink_bandwidth_hz, uplink_power_dbm,
//          downlink_power_dbm, noise_density_dbm_per_hz, slot_up_s,
//          slot_down_s, bits_per_token, mean_channel_gain,
//          channel_mode (shared | per_user)}
//   node {gpu_count, gpu_flops, gpu_memory_bytes, weight_replicas}
//   search {pruning, pruning_rule (tight | literal), tau_min_mode
//           (class_bound | exact), compute_slot_check, compare_pruning,
//           verify_oracle, oracle_cap, oracle_every, debug_checks}
//   models [..], quant_profiles [..]   (catalog entries, see model_catalog)

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "edgebatch/core.hpp"
#include "edgebatch/model_catalog.hpp"
#include "edgebatch/sim.hpp"
#include "json.hpp"

namespace edgebatch {

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::string& where,
                           std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw ConfigError(where.empty() ? "<root>" : where, "expected an object");
  }
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!keys.contains(key)) {
      throw ConfigError(where.empty() ? key : where + "." + key, "unknown key");
    }
  }
}

inline std::string join(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

template <typename T>
void read(const nlohmann::json& j, const std::string& where,
          const std::string& key, T& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  const std::string field = join(where, key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(field, "expected true or false");
    out = v.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(field, "expected an integer");
    if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() &&
        v.get<std::int64_t>() < 0) {
      throw ConfigError(field, "must be >= 0");
    }
    out = v.get<T>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(field, "expected a number");
    out = v.get<T>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(field, "expected a string");
    out = v.get<std::string>();
  } else {
    // std::vector<Tokens>
    if (!v.is_array()) throw ConfigError(field, "expected an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer()) {
        throw ConfigError(field + "[" + std::to_string(i) + "]",
                          "expected an integer");
      }
      out.push_back(v[i].get<typename T::value_type>());
    }
  }
}

// 1-based line of the first `"key"` in the source, for error messages.
inline int locate_key(const std::string& text, const std::string& field) {
  if (text.empty() || field.empty()) return 0;
  std::string leaf = field.substr(field.find_last_of('.') + 1);
  leaf = leaf.substr(0, leaf.find('['));
  const auto pos = text.find("\"" + leaf + "\"");
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() +
                                         static_cast<std::ptrdiff_t>(pos), '\n'));
}

inline Scenario scenario_from_json_unlocated(const nlohmann::json& j) {
  reject_unknown(j, "",
                 {"model", "quant_profile", "scheduler", "arrival_rate",
                  "duration_s", "epoch_s", "seed", "ladder", "prompt_lengths",
                  "deadline_s", "deadline_scale", "tolerance_cap",
                  "accuracy_check", "radio", "node", "search", "models",
                  "quant_profiles"});
  Scenario sc;
  sc.catalog = catalog_from_json(j);
  read(j, "", "model", sc.model);
  read(j, "", "quant_profile", sc.quant_profile);
  std::string scheduler = to_string(sc.scheduler);
  read(j, "", "scheduler", scheduler);
  if (auto k = scheduler_from_string(scheduler)) {
    sc.scheduler = *k;
  } else {
    throw ConfigError("scheduler", "unknown scheduler '" + scheduler +
                                       "' (dftsp, stb, nob, brute)");
  }
  read(j, "", "arrival_rate", sc.arrival_rate);
  read(j, "", "duration_s", sc.duration_s);
  read(j, "", "epoch_s", sc.epoch_s);
  read(j, "", "seed", sc.seed);
  read(j, "", "ladder", sc.ladder);
  read(j, "", "prompt_lengths", sc.prompt_lengths);
  if (j.contains("deadline_s")) {
    const auto& d = j.at("deadline_s");
    reject_unknown(d, "deadline_s", {"min", "max"});
    read(d, "deadline_s", "min", sc.deadline_min_s);
    read(d, "deadline_s", "max", sc.deadline_max_s);
  }
  read(j, "", "deadline_scale", sc.deadline_scale);
  read(j, "", "tolerance_cap", sc.tolerance_cap);
  read(j, "", "accuracy_check", sc.accuracy_check);

  if (j.contains("radio")) {
    const auto& r = j.at("radio");
    reject_unknown(r, "radio",
                   {"uplink_bandwidth_hz", "downlink_bandwidth_hz",
                    "uplink_power_dbm", "downlink_power_dbm",
                    "noise_density_dbm_per_hz", "slot_up_s", "slot_down_s",
                    "bits_per_token", "mean_channel_gain", "channel_mode"});
    read(r, "radio", "uplink_bandwidth_hz", sc.radio.uplink_band_hz);
    read(r, "radio", "downlink_bandwidth_hz", sc.radio.downlink_band_hz);
    read(r, "radio", "uplink_power_dbm", sc.uplink_power_dbm);
    read(r, "radio", "downlink_power_dbm", sc.downlink_power_dbm);
    read(r, "radio", "noise_density_dbm_per_hz", sc.noise_density_dbm_per_hz);
    read(r, "radio", "slot_up_s", sc.radio.slot_up_s);
    read(r, "radio", "slot_down_s", sc.radio.slot_down_s);
    read(r, "radio", "bits_per_token", sc.radio.bits_per_token);
    read(r, "radio", "mean_channel_gain", sc.mean_channel_gain);
    std::string mode = to_string(sc.channel_mode);
    read(r, "radio", "channel_mode", mode);
    if (mode == "shared") {
      sc.channel_mode = ChannelMode::kShared;
    } else if (mode == "per_user") {
      sc.channel_mode = ChannelMode::kPerUser;
    } else {
      throw ConfigError("radio.channel_mode", "expected shared or per_user");
    }
  }
  if (j.contains("node")) {
    const auto& n = j.at("node");
    reject_unknown(n, "node",
                   {"gpu_count", "gpu_flops", "gpu_memory_bytes",
                    "weight_replicas"});
    read(n, "node", "gpu_count", sc.node.gpu_count);
    read(n, "node", "gpu_flops", sc.node.gpu_flops);
    read(n, "node", "gpu_memory_bytes", sc.node.gpu_memory_bytes);
    read(n, "node", "weight_replicas", sc.node.weight_replicas);
  }
  if (j.contains("search")) {
    const auto& s = j.at("search");
    reject_unknown(s, "search",
                   {"pruning", "pruning_rule", "tau_min_mode",
                    "compute_slot_check", "compare_pruning", "verify_oracle",
                    "oracle_cap", "oracle_every", "debug_checks"});
    read(s, "search", "pruning", sc.pruning);
    std::string rule = to_string(sc.pruning_rule);
    read(s, "search", "pruning_rule", rule);
    if (rule == "tight") {
      sc.pruning_rule = PruningRule::kTight;
    } else if (rule == "literal") {
      sc.pruning_rule = PruningRule::kLiteral;
    } else {
      throw ConfigError("search.pruning_rule", "expected tight or literal");
    }
    std::string tau = to_string(sc.tau_min_mode);
    read(s, "search", "tau_min_mode", tau);
    if (tau == "class_bound") {
      sc.tau_min_mode = TauMinMode::kClassBound;
    } else if (tau == "exact") {
      sc.tau_min_mode = TauMinMode::kExact;
    } else {
      throw ConfigError("search.tau_min_mode", "expected class_bound or exact");
    }
    read(s, "search", "compute_slot_check", sc.compute_slot_check);
    read(s, "search", "compare_pruning", sc.compare_pruning);
    read(s, "search", "verify_oracle", sc.verify_oracle);
    read(s, "search", "oracle_cap", sc.oracle_cap);
    read(s, "search", "oracle_every", sc.oracle_every);
    read(s, "search", "debug_checks", sc.debug_checks);
  }
  sc.validate();
  return sc;
}

}  // namespace detail

// `source` is the original text, used only to attach line numbers.
inline Scenario scenario_from_json(const nlohmann::json& j,
                                   const std::string& source = "") {
  try {
    return detail::scenario_from_json_unlocated(j);
  } catch (const ConfigError& e) {
    if (e.line() > 0) throw;
    // Strip the field prefix the constructor added; re-add with the line.
    std::string what = e.what();
    const std::string prefix = e.field() + ": ";
    if (!e.field().empty() && what.rfind(prefix, 0) == 0) {
      what = what.substr(prefix.size());
    }
    throw ConfigError(e.field(), what, detail::locate_key(source, e.field()));
  }
}

inline Scenario parse_scenario_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0,
                                                   text.size());
    int line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("", "column " + std::to_string(col) + ": syntax error",
                      line);
  }
  return scenario_from_json(j, text);
}

inline Scenario parse_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open scenario file '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

// Fully resolved scenario. Catalog entries are included when the scenario
// uses them or when they differ from the built-in catalog.
inline nlohmann::json to_json(const Scenario& sc) {
  using nlohmann::json;
  json j;
  j["model"] = sc.model;
  j["quant_profile"] = sc.quant_profile;
  j["scheduler"] = to_string(sc.scheduler);
  j["arrival_rate"] = sc.arrival_rate;
  j["duration_s"] = sc.duration_s;
  j["epoch_s"] = sc.epoch_s;
  j["seed"] = sc.seed;
  j["ladder"] = sc.ladder;
  j["prompt_lengths"] = sc.prompt_lengths;
  j["deadline_s"] = {{"min", sc.deadline_min_s}, {"max", sc.deadline_max_s}};
  j["deadline_scale"] = sc.deadline_scale;
  j["tolerance_cap"] = sc.tolerance_cap;
  j["accuracy_check"] = sc.accuracy_check;
  j["radio"] = {{"uplink_bandwidth_hz", sc.radio.uplink_band_hz},
                {"downlink_bandwidth_hz", sc.radio.downlink_band_hz},
                {"uplink_power_dbm", sc.uplink_power_dbm},
                {"downlink_power_dbm", sc.downlink_power_dbm},
                {"noise_density_dbm_per_hz", sc.noise_density_dbm_per_hz},
                {"slot_up_s", sc.radio.slot_up_s},
                {"slot_down_s", sc.radio.slot_down_s},
                {"bits_per_token", sc.radio.bits_per_token},
                {"mean_channel_gain", sc.mean_channel_gain},
                {"channel_mode", to_string(sc.channel_mode)}};
  j["node"] = {{"gpu_count", sc.node.gpu_count},
               {"gpu_flops", sc.node.gpu_flops},
               {"gpu_memory_bytes", sc.node.gpu_memory_bytes},
               {"weight_replicas", sc.node.weight_replicas}};
  j["search"] = {{"pruning", sc.pruning},
                 {"pruning_rule", to_string(sc.pruning_rule)},
                 {"tau_min_mode", to_string(sc.tau_min_mode)},
                 {"compute_slot_check", sc.compute_slot_check},
                 {"compare_pruning", sc.compare_pruning},
                 {"verify_oracle", sc.verify_oracle},
                 {"oracle_cap", sc.oracle_cap},
                 {"oracle_every", sc.oracle_every},
                 {"debug_checks", sc.debug_checks}};

  const Catalog builtin;
  json models = json::array();
  for (const auto& m : sc.catalog.models()) {
    bool stock = false;
    for (const auto& b : builtin.models()) stock = stock || b == m;
    if (m.name == sc.model || !stock) models.push_back(to_json(m));
  }
  json profiles = json::array();
  for (const auto& p : sc.catalog.profiles()) {
    bool stock = false;
    for (const auto& b : builtin.profiles()) stock = stock || b == p;
    if (p.name == sc.quant_profile || !stock) profiles.push_back(to_json(p));
  }
  j["models"] = models;
  j["quant_profiles"] = profiles;
  return j;
}

// FNV-1a over the compact dump of the resolved scenario.
inline std::uint64_t config_hash(const Scenario& sc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_json(sc).dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash_hex(const Scenario& sc) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(config_hash(sc)));
  return buf;
}

}  // namespace edgebatch
