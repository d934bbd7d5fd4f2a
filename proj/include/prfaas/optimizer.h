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

#include "prfaas/throughput_model.h"

namespace prfaas {

struct PdSplit {
  int64_t prefill = 0;
  int64_t decode = 0;

  bool operator==(const PdSplit&) const = default;
};

struct SearchSpace {
  DeploymentConfig base;  // threshold and PD counts are overwritten per point
  std::vector<double> t_grid;
  std::vector<PdSplit> splits;
  bool refine = true;  // localize t* between its grid neighbours
};

struct ThresholdRow {
  double t = 0.0;
  double p = 0.0;
  double theta_prfaas_over_p = 0.0;
  double theta_pdp_over_1mp = 0.0;
  double theta_pdd = 0.0;
  double lambda_max = 0.0;
};

struct AllocationRow {
  int64_t np = 0;
  int64_t nd = 0;
  double theta_producer = 0.0;  // theta_prfaas + theta_pdp
  double theta_pdd = 0.0;
  double lambda_max = 0.0;
};

struct GridPoint {
  double t = 0.0;
  PdSplit split;
  double lambda_max = 0.0;
};

struct Optimum {
  double t_star = 0.0;
  bool threshold_used = true;  // false when the deployment has no PrfaaS
  PdSplit split;
  ThroughputReport report;  // includes TTFT
  std::vector<GridPoint> evaluated;
  std::vector<ThresholdRow> threshold_sweep;    // at the optimal split
  std::vector<AllocationRow> allocation_sweep;  // at t*
};

// n log-spaced thresholds over the distribution support plus its
// percentiles (1%..99%).
std::vector<double> default_t_grid(const LengthDistribution& dist, int n = 200);

// Every integer split of `total` with at least one decode instance. Zero
// prefill instances are allowed only when PrfaaS can carry the load.
std::vector<PdSplit> splits_for_total(int64_t total, bool allow_zero_prefill);

// Exhaustive grid search for the maximum lambda_max. Ties prefer more decode
// instances, then the smaller threshold.
Optimum optimize(const SearchSpace& space);

std::vector<ThresholdRow> sweep_threshold(const DeploymentConfig& config,
                                          const std::vector<double>& t_grid);

// Threshold where theta_prfaas/p meets theta_pdp/(1-p), interpolated between
// the bracketing rows. Empty when the curves do not cross on the grid.
std::optional<double> find_crossing(const std::vector<ThresholdRow>& rows);

std::vector<AllocationRow> sweep_allocation(const DeploymentConfig& config,
                                            const std::vector<PdSplit>& splits);

DeploymentConfig with_point(const DeploymentConfig& base, double t, PdSplit split);

std::string threshold_csv(const std::vector<ThresholdRow>& rows);
std::string allocation_csv(const std::vector<AllocationRow>& rows);
nlohmann::json optimum_to_json(const Optimum& o);

}  // namespace prfaas
