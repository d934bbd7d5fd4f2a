/* Copyright 2026 The prfaas-pd Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace prfaas {

// One measured row of a (hardware, model) profiling table.
struct ProfilePoint {
  int64_t seq_len = 0;
  double kv_size_mib = 0.0;
  double prefill_latency_s = 0.0;
};

// Reference KV throughput at a sequence length, for models whose raw
// size/latency tables are not available.
struct KvThroughputPoint {
  int64_t seq_len = 0;
  double gbps = 0.0;
};

enum class Extrapolation { kDisabled, kLinear };

struct HardwareModelProfile {
  std::string name;
  int parallelism = 1;  // GPUs per instance
  std::optional<double> decode_token_rate;  // tokens/s per instance
  std::optional<int> max_batch_size;
  std::optional<double> decode_step_s;
  std::vector<ProfilePoint> points;
  std::vector<KvThroughputPoint> kv_throughput_points;

  bool has_latency_table() const { return !points.empty(); }

  // Throws Error(kInvalidProfile / kEmptyProfile) when an invariant fails.
  void validate() const;
};

struct KvThroughput {
  double gbps = 0.0;
};

double interpolate_kv_size(const HardwareModelProfile& profile, double l,
                           Extrapolation mode = Extrapolation::kDisabled);

double interpolate_prefill_latency(
    const HardwareModelProfile& profile, double l,
    Extrapolation mode = Extrapolation::kDisabled);

// KV bytes produced per second of prefill: S_kv(l) / T_prefill(l). Profiles
// that only carry reference throughput points interpolate those instead.
KvThroughput kv_throughput(const HardwareModelProfile& profile, double l,
                           Extrapolation mode = Extrapolation::kDisabled);

// Egress needed by a prefill fleet of n_gpus at average length l_avg. GPUs
// that do not fill a whole instance are dropped (floor(n_gpus / P)).
double cluster_egress_demand(const HardwareModelProfile& profile,
                             int64_t n_gpus, double l_avg,
                             Extrapolation mode = Extrapolation::kDisabled);

int64_t whole_instances(const HardwareModelProfile& profile, int64_t n_gpus);

HardwareModelProfile profile_from_json(const nlohmann::json& j);
nlohmann::json profile_to_json(const HardwareModelProfile& profile);
HardwareModelProfile load_profile(const std::string& path);

}  // namespace prfaas
