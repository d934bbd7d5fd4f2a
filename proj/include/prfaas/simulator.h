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
#include "prfaas/egress_link.h"
#include "prfaas/scheduler.h"
#include "prfaas/throughput_model.h"
#include "prfaas/workload.h"

namespace prfaas {

struct SimulationOptions {
  double duration_s = 3600.0;
  double warmup_fraction = 0.1;
  uint64_t seed = 1;
  double slo_tokens_per_s = 40.0;
  double sample_interval_s = 10.0;
  SchedulerPolicy policy;
  bool record_epochs = false;
  bool record_requests = false;
  bool log_decisions = false;
};

struct RequestRecord {
  int64_t id = 0;
  double arrival_time = 0.0;
  int64_t l_total = 0;
  int64_t cached_pd = 0;
  int64_t cached_prfaas = 0;
  int64_t output_len = 0;
  RouteTarget target = RouteTarget::kPdPrefill;
  int64_t uncached_len = 0;
  double routed = -1.0;
  double prefill_start = -1.0;
  double prefill_end = -1.0;
  double transfer_end = -1.0;  // KV shipped (PrfaaS) or prefill_end (local)
  double decode_start = -1.0;
  double decode_end = -1.0;

  double ttft() const { return std::max(prefill_end, transfer_end) - arrival_time; }
};

struct TimeSeriesRow {
  double time = 0.0;
  int64_t queue_prfaas = 0;
  int64_t queue_pdp = 0;
  int64_t queue_pdd = 0;
  double egress_util = 0.0;  // over the preceding sample interval
  // Conservation bookkeeping.
  int64_t arrived = 0;
  int64_t completed = 0;
  int64_t in_flight = 0;  // in service or in transfer
  int64_t queued = 0;
  double threshold = 0.0;
  int64_t np = 0;
  int64_t nd = 0;
};

struct ThresholdUpdate {
  double time = 0.0;
  double old_t = 0.0;
  double new_t = 0.0;
  CongestionState state;
};

struct ReallocationEvent {
  double time = 0.0;
  ReallocationPlan plan;
};

struct SimMetrics {
  int64_t arrived = 0;
  int64_t completed = 0;
  double offered_rate = 0.0;
  double achieved_throughput = 0.0;
  double ttft_mean_s = 0.0;
  double ttft_p50_s = 0.0;
  double ttft_p90_s = 0.0;
  double ttft_p99_s = 0.0;
  double egress_mean_gbps = 0.0;
  double egress_mean_util = 0.0;
  double egress_peak_util = 0.0;
  int64_t congestion_events = 0;
  int64_t offloaded = 0;
  double final_threshold = 0.0;
  int64_t final_np = 0;
  int64_t final_nd = 0;
};

struct SimulationResult {
  SimMetrics metrics;
  std::vector<TimeSeriesRow> series;
  std::vector<ThresholdUpdate> threshold_updates;
  std::vector<ReallocationEvent> reallocations;
  std::vector<RequestRecord> requests;  // when record_requests
  std::vector<nlohmann::json> decisions;  // when log_decisions
  std::vector<EgressLink::Epoch> epochs;  // when record_epochs
};

// Runs the converging pipeline with arrivals drawn from config.workload
// (rate, process, length distribution) and options.seed.
SimulationResult run(const DeploymentConfig& config,
                     const SimulationOptions& options);

// Same, replaying an explicit arrival trace.
SimulationResult run_trace(const DeploymentConfig& config,
                           const std::vector<RequestArrival>& arrivals,
                           const SimulationOptions& options);

// Congestion signal as seen by the scheduler.
CongestionState congestion_signal(const EgressLink& link, double window,
                                  int64_t prfaas_queue_depth,
                                  const SchedulerPolicy& policy,
                                  int64_t prfaas_instances);

// Requests each decode instance runs concurrently.
int64_t decode_batch_size(const HardwareModelProfile& profile,
                          double slo_tokens_per_s);

nlohmann::json metrics_to_json(const SimMetrics& m);
std::string series_csv(const std::vector<TimeSeriesRow>& rows);

}  // namespace prfaas
