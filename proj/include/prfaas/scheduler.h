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

#include "json.hpp"
#include "prfaas/cache_pool.h"
#include "prfaas/optimizer.h"
#include "prfaas/throughput_model.h"

namespace prfaas {

inline constexpr const char* kPdCluster = "pd";
inline constexpr const char* kPrfaasCluster = "prfaas";

enum class RouteTarget { kPdPrefill, kPrfaas };
enum class BandwidthMode { kScarce, kAbundant };

const char* to_string(RouteTarget t);
const char* to_string(BandwidthMode m);

struct RoutingContext {
  int64_t l_total = 0;
  MatchInfo match_pd;
  MatchInfo match_prfaas;
  double t = 0.0;
  BandwidthMode bandwidth_mode = BandwidthMode::kScarce;
  // Bytes of each cluster's usable cached prefix, charged when moved.
  int64_t cache_bytes_pd = 0;
  int64_t cache_bytes_prfaas = 0;
};

struct CacheTransfer {
  std::string from_cluster;
  std::string to_cluster;
  int64_t bytes = 0;
};

struct RoutingDecision {
  RouteTarget target = RouteTarget::kPdPrefill;
  int64_t uncached_len = 0;
  std::optional<CacheTransfer> cache_transfer;
};

// Length-based routing with cache awareness. Requests whose uncached length
// is at most t stay on PD-P. With scarce bandwidth each cluster's cache is
// judged on its own; with abundant bandwidth the longest cache anywhere
// counts and is shipped to the compute cluster when it lives elsewhere.
RoutingDecision route(const RoutingContext& ctx);

struct SchedulerPolicy {
  double util_threshold = 0.85;
  double queue_threshold_factor = 2.0;  // x PrfaaS instance count
  double scarce_utilization = 0.5;
  double congestion_window_s = 10.0;
  double realloc_period_s = 300.0;
  bool short_term_enabled = true;
  bool long_term_enabled = true;
};

BandwidthMode bandwidth_mode_for(double egress_utilization,
                                 const SchedulerPolicy& policy);

struct CongestionState {
  double egress_utilization = 0.0;
  int64_t queue_depth = 0;
  double util_threshold = 0.85;
  double queue_threshold = 0.0;

  bool triggered() const {
    return egress_utilization >= util_threshold ||
           static_cast<double>(queue_depth) >= queue_threshold;
  }
};

// Re-solves the threshold against the deployment's current egress bandwidth
// and instance counts, over the given (incremental) length distribution.
// Returns the current threshold unchanged when not triggered and not forced,
// or when the sweep has no feasible point.
double short_term_update(const CongestionState& state,
                         const LengthDistribution& dist,
                         const DeploymentConfig& config, bool force = false);

enum class ReallocTrigger { kPrefillBound, kDecodeBound, kPeriodic };

const char* to_string(ReallocTrigger t);

struct ReallocationPlan {
  int64_t new_np = 0;
  int64_t new_nd = 0;
  double new_t = 0.0;
  ReallocTrigger trigger = ReallocTrigger::kPeriodic;

  bool changes(const DeploymentConfig& c) const {
    return new_np != c.pd.prefill_instances || new_nd != c.pd.decode_instances;
  }
};

struct ObservedLoad {
  double prfaas_utilization = 0.0;
  double pdp_utilization = 0.0;
  double pdd_utilization = 0.0;
  int64_t prfaas_queue = 0;
  int64_t pdp_queue = 0;
  int64_t pdd_queue = 0;
  // Recent uncached-length distribution; the configured one when absent.
  std::optional<LengthDistribution> length_dist;
};

// Re-optimizes the PD prefill/decode split for the observed traffic with the
// total PD instance count held fixed, then re-optimizes t for that split.
// An unchanged split keeps the current threshold, so the optimizer's own
// optimum is a fixed point.
ReallocationPlan long_term_realloc(const ObservedLoad& observed,
                                   const DeploymentConfig& config);

nlohmann::json decision_to_json(int64_t request_id, double time,
                                const RoutingContext& ctx,
                                const RoutingDecision& d);

}  // namespace prfaas
