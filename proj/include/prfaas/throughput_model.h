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
#include "prfaas/profiles.h"
#include "prfaas/workload.h"

namespace prfaas {

struct PrfaasSide {
  HardwareModelProfile profile;
  int64_t instances = 0;
  double egress_gbps = 0.0;  // B_out
};

struct PdSide {
  HardwareModelProfile profile;  // serves both PD-P and PD-D roles
  int64_t prefill_instances = 0;
  int64_t decode_instances = 0;
};

struct DeploymentConfig {
  std::string name;
  std::optional<PrfaasSide> prfaas;
  PdSide pd;
  double threshold = 0.0;  // t: uncached length above which requests offload
  WorkloadSpec workload;

  bool has_prfaas() const { return prfaas && prfaas->instances > 0; }
  // Checks counts and bandwidth; throws Error(kInfeasibleConfig).
  void validate() const;
};

enum class Bottleneck { kPrfaasCompute, kPrfaasBandwidth, kPdPrefill, kPdDecode };

const char* to_string(Bottleneck b);

struct ThroughputReport {
  double theta_prfaas = 0.0;  // +inf when the stage receives no traffic
  double theta_pdp = 0.0;
  double theta_pdd = 0.0;
  double lambda_max = 0.0;
  Bottleneck bottleneck = Bottleneck::kPdDecode;
  SplitStats split;
  double egress_load_gbps = 0.0;
  std::optional<double> ttft_mean_s;
  std::optional<double> ttft_p90_s;
};

struct TtftStats {
  double mean_s = 0.0;
  double p90_s = 0.0;
};

struct BalanceResiduals {
  double producer_balance = 0.0;  // theta_prfaas/p - theta_pdp/(1-p)
  double pipeline_balance = 0.0;  // theta_prfaas + theta_pdp - theta_pdd
};

// The split actually seen by the stages. A deployment without PrfaaS
// capacity keeps every request local regardless of its threshold.
SplitStats effective_split(const DeploymentConfig& config);

double theta_prfaas(const DeploymentConfig& config, const SplitStats& split);
double theta_pdp(const DeploymentConfig& config, const SplitStats& split);
double theta_pdd(const DeploymentConfig& config);

// Steady-state capacity of the converging pipeline. Does not fill TTFT.
ThroughputReport lambda_max(const DeploymentConfig& config);

// lambda_max plus the TTFT fields.
ThroughputReport full_report(const DeploymentConfig& config);

// No-queueing TTFT over the full length distribution: each request pays the
// prefill latency of its own length on the hardware it is routed to (and,
// for offloaded requests, at least its transfer time at full link rate).
TtftStats ttft_stats(const DeploymentConfig& config);

BalanceResiduals balance_residuals(const DeploymentConfig& config);

// Per-request service time on each path, as used by ttft_stats.
double local_ttft(const DeploymentConfig& config, double uncached_len);
double offload_ttft(const DeploymentConfig& config, double uncached_len);

nlohmann::json report_to_json(const ThroughputReport& r);
std::string report_csv_header();
std::string report_csv_row(const ThroughputReport& r);

}  // namespace prfaas
