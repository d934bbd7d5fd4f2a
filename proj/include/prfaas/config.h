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
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "prfaas/optimizer.h"
#include "prfaas/profiles.h"
#include "prfaas/scheduler.h"
#include "prfaas/simulator.h"
#include "prfaas/throughput_model.h"
#include "prfaas/workload.h"

namespace prfaas {

inline constexpr int kConfigVersion = 1;

struct DeploymentEntry {
  std::string name;
  bool active = false;
  std::string prfaas_profile;  // empty: PD only
  std::string pd_profile;
  int64_t pd_total = 0;  // fixed N_p + N_d searched by the optimizer
  bool optimize_threshold = true;
  bool optimize_split = true;
  DeploymentConfig config;  // profiles resolved, workload attached
};

struct SearchConfig {
  int t_grid_points = 200;
  std::vector<double> t_grid;  // explicit grid; default grid when empty
  bool refine = true;
  bool allow_zero_prefill = false;
};

struct SimulatorConfig {
  double duration_s = 7200.0;
  double warmup_fraction = 0.1;
  uint64_t seed = 1;
  std::vector<double> load_factors{0.9};
  double slo_tokens_per_s = 40.0;
  double sample_interval_s = 10.0;
};

struct RunConfig {
  int version = kConfigVersion;
  std::vector<std::string> profile_files;  // as written, relative to base_dir
  std::map<std::string, HardwareModelProfile> profiles;  // by profile name
  WorkloadSpec workload;
  std::vector<DeploymentEntry> deployments;
  SearchConfig search;
  SimulatorConfig simulator;
  SchedulerPolicy policy;
  std::string compare_baseline;
  std::string output_dir = "out";
  std::string base_dir = ".";  // not serialized
};

// Throws Error(kConfigError) for anything malformed or unresolvable.
RunConfig parse_run_config(const nlohmann::json& j, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_to_json(const RunConfig& c);

const DeploymentEntry& active_deployment(const RunConfig& c);
const DeploymentEntry& find_deployment(const RunConfig& c, const std::string& name);

SearchSpace search_space_for(const RunConfig& c, const DeploymentEntry& d);
SimulationOptions simulation_options_for(const RunConfig& c);

}  // namespace prfaas
