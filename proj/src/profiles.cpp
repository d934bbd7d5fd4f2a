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

#include "prfaas/profiles.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>

#include "prfaas/error.h"
#include "prfaas/units.h"

namespace prfaas {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kOutOfRange: return "OutOfRange";
    case ErrorKind::kEmptyProfile: return "EmptyProfile";
    case ErrorKind::kInvalidProfile: return "InvalidProfile";
    case ErrorKind::kDegenerateDistribution: return "DegenerateDistribution";
    case ErrorKind::kDegenerateSplit: return "DegenerateSplit";
    case ErrorKind::kInfeasibleConfig: return "InfeasibleConfig";
    case ErrorKind::kInfeasibleSpace: return "InfeasibleSpace";
    case ErrorKind::kPoolExhausted: return "PoolExhausted";
    case ErrorKind::kUnknownRequest: return "UnknownRequest";
    case ErrorKind::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace {

struct Knot {
  double x;
  double y;
};

double piecewise_linear(std::span<const Knot> knots, double x,
                        Extrapolation mode, const std::string& what) {
  if (knots.empty()) {
    throw Error(ErrorKind::kEmptyProfile, what + ": no table points");
  }
  if (knots.size() == 1) {
    if (x == knots[0].x) return knots[0].y;
    throw Error(ErrorKind::kOutOfRange,
                what + ": single-point table cannot be interpolated");
  }
  const double lo = knots.front().x;
  const double hi = knots.back().x;
  if ((x < lo || x > hi) && mode == Extrapolation::kDisabled) {
    throw Error(ErrorKind::kOutOfRange,
                what + ": length " + std::to_string(x) + " outside [" +
                    std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  // Segment index i such that knots[i].x <= x <= knots[i+1].x, clamped to
  // the outermost segment for extrapolation.
  auto it = std::upper_bound(knots.begin(), knots.end(), x,
                             [](double v, const Knot& k) { return v < k.x; });
  size_t i = it == knots.begin() ? 0 : static_cast<size_t>(it - knots.begin()) - 1;
  i = std::min(i, knots.size() - 2);
  const Knot& a = knots[i];
  const Knot& b = knots[i + 1];
  if (x == a.x) return a.y;
  if (x == b.x) return b.y;
  const double y = a.y + (x - a.x) * (b.y - a.y) / (b.x - a.x);
  return mode == Extrapolation::kLinear ? std::max(y, 0.0) : y;
}

std::vector<Knot> kv_knots(const HardwareModelProfile& p) {
  std::vector<Knot> k;
  k.reserve(p.points.size());
  for (const auto& pt : p.points) {
    k.push_back({static_cast<double>(pt.seq_len), pt.kv_size_mib});
  }
  return k;
}

std::vector<Knot> latency_knots(const HardwareModelProfile& p) {
  std::vector<Knot> k;
  k.reserve(p.points.size());
  for (const auto& pt : p.points) {
    k.push_back({static_cast<double>(pt.seq_len), pt.prefill_latency_s});
  }
  return k;
}

}  // namespace

void HardwareModelProfile::validate() const {
  if (parallelism < 1) {
    throw Error(ErrorKind::kInvalidProfile, name + ": parallelism must be >= 1");
  }
  if (points.empty() && kv_throughput_points.empty()) {
    throw Error(ErrorKind::kEmptyProfile, name + ": profile has no points");
  }
  for (size_t i = 0; i < points.size(); ++i) {
    const auto& pt = points[i];
    if (pt.seq_len < 1 || !(pt.kv_size_mib > 0) || !(pt.prefill_latency_s > 0)) {
      throw Error(ErrorKind::kInvalidProfile,
                  name + ": point " + std::to_string(i) + " is not positive");
    }
    if (i > 0) {
      const auto& prev = points[i - 1];
      if (pt.seq_len <= prev.seq_len || pt.kv_size_mib <= prev.kv_size_mib ||
          pt.prefill_latency_s <= prev.prefill_latency_s) {
        throw Error(ErrorKind::kInvalidProfile,
                    name + ": points must be strictly increasing");
      }
    }
  }
  for (size_t i = 0; i < kv_throughput_points.size(); ++i) {
    const auto& pt = kv_throughput_points[i];
    if (pt.seq_len < 1 || !(pt.gbps > 0) ||
        (i > 0 && pt.seq_len <= kv_throughput_points[i - 1].seq_len)) {
      throw Error(ErrorKind::kInvalidProfile,
                  name + ": kv throughput points must be positive and "
                         "strictly increasing in seq_len");
    }
  }
  if (decode_token_rate && !(*decode_token_rate > 0)) {
    throw Error(ErrorKind::kInvalidProfile, name + ": decode_token_rate <= 0");
  }
  if (max_batch_size && *max_batch_size < 1) {
    throw Error(ErrorKind::kInvalidProfile, name + ": max_batch_size < 1");
  }
  if (decode_step_s && !(*decode_step_s > 0)) {
    throw Error(ErrorKind::kInvalidProfile, name + ": decode_step_s <= 0");
  }
  if (max_batch_size && decode_step_s && decode_token_rate) {
    const double implied = *max_batch_size / *decode_step_s;
    if (std::abs(implied - *decode_token_rate) > 1e-9 * *decode_token_rate) {
      throw Error(ErrorKind::kInvalidProfile,
                  name + ": decode_token_rate != max_batch_size / decode_step_s");
    }
  }
}

double interpolate_kv_size(const HardwareModelProfile& profile, double l,
                           Extrapolation mode) {
  const auto knots = kv_knots(profile);
  return piecewise_linear(knots, l, mode, profile.name + " kv_size");
}

double interpolate_prefill_latency(const HardwareModelProfile& profile,
                                   double l, Extrapolation mode) {
  const auto knots = latency_knots(profile);
  return piecewise_linear(knots, l, mode, profile.name + " prefill_latency");
}

KvThroughput kv_throughput(const HardwareModelProfile& profile, double l,
                           Extrapolation mode) {
  if (profile.has_latency_table()) {
    const double latency = interpolate_prefill_latency(profile, l, mode);
    if (!(latency > 0)) return {0.0};
    const double kv = interpolate_kv_size(profile, l, mode);
    return {units::mib_per_s_to_gbps(kv / latency)};
  }
  std::vector<Knot> knots;
  for (const auto& pt : profile.kv_throughput_points) {
    knots.push_back({static_cast<double>(pt.seq_len), pt.gbps});
  }
  return {piecewise_linear(knots, l, mode, profile.name + " kv_throughput")};
}

int64_t whole_instances(const HardwareModelProfile& profile, int64_t n_gpus) {
  if (n_gpus <= 0) return 0;
  return n_gpus / profile.parallelism;
}

double cluster_egress_demand(const HardwareModelProfile& profile,
                             int64_t n_gpus, double l_avg, Extrapolation mode) {
  const int64_t instances = whole_instances(profile, n_gpus);
  if (instances == 0) return 0.0;
  return static_cast<double>(instances) * kv_throughput(profile, l_avg, mode).gbps;
}

HardwareModelProfile profile_from_json(const nlohmann::json& j) {
  HardwareModelProfile p;
  try {
    p.name = j.at("name").get<std::string>();
    p.parallelism = j.at("parallelism").get<int>();
    if (j.contains("decode_token_rate") && !j["decode_token_rate"].is_null()) {
      p.decode_token_rate = j["decode_token_rate"].get<double>();
    }
    if (j.contains("max_batch_size") && !j["max_batch_size"].is_null()) {
      p.max_batch_size = j["max_batch_size"].get<int>();
    }
    if (j.contains("decode_step_s") && !j["decode_step_s"].is_null()) {
      p.decode_step_s = j["decode_step_s"].get<double>();
    }
    for (const auto& pt : j.value("points", nlohmann::json::array())) {
      p.points.push_back({pt.at("seq_len").get<int64_t>(),
                          pt.at("kv_size_mib").get<double>(),
                          pt.at("prefill_latency_s").get<double>()});
    }
    for (const auto& pt :
         j.value("kv_throughput_points", nlohmann::json::array())) {
      p.kv_throughput_points.push_back(
          {pt.at("seq_len").get<int64_t>(), pt.at("gbps").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfigError,
                std::string("malformed profile: ") + e.what());
  }
  p.validate();
  return p;
}

nlohmann::json profile_to_json(const HardwareModelProfile& p) {
  nlohmann::json j;
  j["name"] = p.name;
  j["parallelism"] = p.parallelism;
  if (p.decode_token_rate) j["decode_token_rate"] = *p.decode_token_rate;
  if (p.max_batch_size) j["max_batch_size"] = *p.max_batch_size;
  if (p.decode_step_s) j["decode_step_s"] = *p.decode_step_s;
  if (!p.points.empty()) {
    auto& pts = j["points"] = nlohmann::json::array();
    for (const auto& pt : p.points) {
      pts.push_back({{"seq_len", pt.seq_len},
                     {"kv_size_mib", pt.kv_size_mib},
                     {"prefill_latency_s", pt.prefill_latency_s}});
    }
  }
  if (!p.kv_throughput_points.empty()) {
    auto& pts = j["kv_throughput_points"] = nlohmann::json::array();
    for (const auto& pt : p.kv_throughput_points) {
      pts.push_back({{"seq_len", pt.seq_len}, {"gbps", pt.gbps}});
    }
  }
  return j;
}

HardwareModelProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::kConfigError, "cannot open profile " + path);
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfigError, path + ": " + e.what());
  }
  return profile_from_json(j);
}

}  // namespace prfaas
