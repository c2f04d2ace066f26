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

// OFDMA link model with continuous bandwidth fractions.
//
// The noise power in the rate formula is the noise density integrated over
// the whole band, so spectral efficiency does not depend on the fraction a
// user is given and the minimum fraction is linear in the payload.

#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>

#include "edgebatch/core.hpp"

namespace edgebatch {

inline double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) / 1e3; }
inline double watts_to_dbm(double w) { return 10.0 * std::log10(w * 1e3); }

struct RadioConfig {
  double uplink_band_hz = 20e6;
  double downlink_band_hz = 20e6;
  double downlink_power_w = dbm_to_watts(43.0);
  double noise_density_w_per_hz = dbm_to_watts(-174.0);
  Seconds slot_up_s = 0.25;
  Seconds slot_down_s = 0.25;
  double bits_per_token = 16.0;

  double uplink_noise_w() const { return noise_density_w_per_hz * uplink_band_hz; }
  double downlink_noise_w() const {
    return noise_density_w_per_hz * downlink_band_hz;
  }

  void validate(const std::string& where = "radio") const {
    const std::pair<const char*, double> fields[] = {
        {"uplink_bandwidth_hz", uplink_band_hz},
        {"downlink_bandwidth_hz", downlink_band_hz},
        {"downlink_power", downlink_power_w},
        {"noise_density", noise_density_w_per_hz},
        {"slot_up_s", slot_up_s},
        {"slot_down_s", slot_down_s},
        {"bits_per_token", bits_per_token}};
    for (const auto& [field, value] : fields) {
      if (!(value > 0.0) || !std::isfinite(value)) {
        throw ConfigError(where + "." + field, "must be > 0");
      }
    }
  }
};

struct UserLink {
  double channel_power = 1e-3;  // |h|^2
  double uplink_power_w = dbm_to_watts(20.0);
};

// log2(1 + p h^2 / N0), bits/s/Hz.
inline double spectral_efficiency(double power_w, double channel_power,
                                  double noise_w) {
  if (!(power_w > 0.0) || !(channel_power > 0.0) || !(noise_w > 0.0)) {
    throw DomainError("spectral_efficiency: inputs must be positive");
  }
  return std::log2(1.0 + power_w * channel_power / noise_w);
}

namespace detail {

inline double min_fraction(Tokens tokens, double efficiency, Seconds slot,
                           double band_hz, double bits_per_token) {
  if (tokens < 0) throw DomainError("token count must be >= 0");
  if (!(efficiency > 0.0)) throw DomainError("spectral efficiency is zero");
  // Per-token coefficient first, so that coefficient * tokens reproduces
  // this value bit for bit.
  return static_cast<double>(tokens) *
         (bits_per_token / (slot * band_hz * efficiency));
}

}  // namespace detail

// Smallest uplink fraction that delivers `prompt_tokens` within T_U. Values
// above 1 mean the request cannot be served at all.
inline double min_uplink_fraction(Tokens prompt_tokens, const UserLink& link,
                                  const RadioConfig& cfg) {
  if (prompt_tokens < 0) throw DomainError("token count must be >= 0");
  const double eta = spectral_efficiency(link.uplink_power_w,
                                         link.channel_power,
                                         cfg.uplink_noise_w());
  return detail::min_fraction(prompt_tokens, eta, cfg.slot_up_s,
                              cfg.uplink_band_hz, cfg.bits_per_token);
}

inline double min_downlink_fraction(Tokens output_tokens, const UserLink& link,
                                    const RadioConfig& cfg) {
  if (output_tokens < 0) throw DomainError("token count must be >= 0");
  const double eta = spectral_efficiency(cfg.downlink_power_w,
                                         link.channel_power,
                                         cfg.downlink_noise_w());
  return detail::min_fraction(output_tokens, eta, cfg.slot_down_s,
                              cfg.downlink_band_hz, cfg.bits_per_token);
}

// Rayleigh amplitude => exponentially distributed power gain.
template <typename Rng>
double sample_channel_power(Rng& rng, double mean_gain) {
  if (!(mean_gain > 0.0)) throw DomainError("mean channel gain must be > 0");
  std::exponential_distribution<double> dist(1.0 / mean_gain);
  double h2 = dist(rng);
  // exponential_distribution may return exactly 0 on some generators.
  while (!(h2 > 0.0)) h2 = dist(rng);
  return h2;
}

}  // namespace edgebatch
