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

#include "prfaas/config.h"

#include <filesystem>
#include <fstream>

#include "prfaas/error.h"

namespace prfaas {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorKind::kConfigError, what);
}

const HardwareModelProfile& resolve(const RunConfig& c, const std::string& name) {
  auto it = c.profiles.find(name);
  if (it == c.profiles.end()) config_error("unknown profile '" + name + "'");
  return it->second;
}

DeploymentEntry parse_deployment(const json& j, const RunConfig& c) {
  DeploymentEntry d;
  d.name = j.at("name").get<std::string>();
  d.active = j.value("active", false);
  d.config.name = d.name;
  d.config.workload = c.workload;
  d.config.threshold = j.value("threshold", 0.0);

  if (j.contains("prfaas") && !j.at("prfaas").is_null()) {
    const json& p = j.at("prfaas");
    d.prfaas_profile = p.at("profile").get<std::string>();
    PrfaasSide side;
    side.profile = resolve(c, d.prfaas_profile);
    if (p.contains("gpus")) {
      side.instances = whole_instances(side.profile, p.at("gpus").get<int64_t>());
    } else {
      side.instances = p.at("instances").get<int64_t>();
    }
    side.egress_gbps = p.at("egress_gbps").get<double>();
    if (side.instances < 0 || side.egress_gbps < 0) {
      config_error(d.name + ": negative PrfaaS capacity");
    }
    d.config.prfaas = side;
  }

  const json& pd = j.at("pd");
  d.pd_profile = pd.at("profile").get<std::string>();
  d.config.pd.profile = resolve(c, d.pd_profile);
  auto count = [&](const char* inst, const char* gpus) -> int64_t {
    if (pd.contains(gpus)) {
      return whole_instances(d.config.pd.profile, pd.at(gpus).get<int64_t>());
    }
    return pd.value(inst, int64_t{0});
  };
  d.config.pd.prefill_instances = count("prefill_instances", "prefill_gpus");
  d.config.pd.decode_instances = count("decode_instances", "decode_gpus");
  d.pd_total = count("total_instances", "total_gpus");
  if (d.pd_total == 0) {
    d.pd_total = d.config.pd.prefill_instances + d.config.pd.decode_instances;
  }
  if (d.config.pd.prefill_instances + d.config.pd.decode_instances == 0) {
    // Only a total given: start from an even split until solved.
    d.config.pd.decode_instances = std::max<int64_t>(1, d.pd_total / 2);
    d.config.pd.prefill_instances = d.pd_total - d.config.pd.decode_instances;
  }
  if (d.pd_total <= 0 || d.config.pd.prefill_instances < 0 ||
      d.config.pd.decode_instances < 0 ||
      d.config.pd.prefill_instances + d.config.pd.decode_instances != d.pd_total) {
    config_error(d.name + ": inconsistent PD instance counts");
  }

  const json opt = j.value("optimize", json::object());
  d.optimize_threshold = opt.value("threshold", true);
  d.optimize_split = opt.value("split", true);
  return d;
}

json deployment_to_json(const DeploymentEntry& d) {
  json j;
  j["name"] = d.name;
  j["active"] = d.active;
  j["threshold"] = d.config.threshold;
  if (d.config.prfaas) {
    j["prfaas"] = {{"profile", d.prfaas_profile},
                   {"instances", d.config.prfaas->instances},
                   {"egress_gbps", d.config.prfaas->egress_gbps}};
  } else {
    j["prfaas"] = nullptr;
  }
  j["pd"] = {{"profile", d.pd_profile},
             {"prefill_instances", d.config.pd.prefill_instances},
             {"decode_instances", d.config.pd.decode_instances},
             {"total_instances", d.pd_total}};
  j["optimize"] = {{"threshold", d.optimize_threshold}, {"split", d.optimize_split}};
  return j;
}

}  // namespace

RunConfig parse_run_config(const json& j, const std::string& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  try {
    c.version = j.value("version", kConfigVersion);
    if (c.version != kConfigVersion) {
      config_error("unsupported config version " + std::to_string(c.version));
    }
    const json& files = j.at("profiles");
    if (!files.is_array() || files.empty()) config_error("empty profile list");
    for (const auto& f : files) {
      const auto rel = f.get<std::string>();
      c.profile_files.push_back(rel);
      const auto path = (std::filesystem::path(base_dir) / rel).string();
      HardwareModelProfile p = load_profile(path);
      if (!c.profiles.emplace(p.name, p).second) {
        config_error("duplicate profile name '" + p.name + "'");
      }
    }
    if (j.contains("workload")) c.workload = workload_from_json(j.at("workload"), base_dir);

    if (j.contains("scheduler")) {
      const json& s = j.at("scheduler");
      auto& p = c.policy;
      p.util_threshold = s.value("util_threshold", p.util_threshold);
      p.queue_threshold_factor = s.value("queue_threshold_factor", p.queue_threshold_factor);
      p.scarce_utilization = s.value("scarce_utilization", p.scarce_utilization);
      p.congestion_window_s = s.value("congestion_window_s", p.congestion_window_s);
      p.realloc_period_s = s.value("realloc_period_s", p.realloc_period_s);
      p.short_term_enabled = s.value("short_term_enabled", p.short_term_enabled);
      p.long_term_enabled = s.value("long_term_enabled", p.long_term_enabled);
    }
    if (j.contains("search")) {
      const json& s = j.at("search");
      c.search.t_grid_points = s.value("t_grid_points", c.search.t_grid_points);
      c.search.t_grid = s.value("t_grid", c.search.t_grid);
      c.search.refine = s.value("refine", c.search.refine);
      c.search.allow_zero_prefill = s.value("allow_zero_prefill", c.search.allow_zero_prefill);
      if (c.search.t_grid_points < 2 && c.search.t_grid.empty()) {
        config_error("search.t_grid_points must be >= 2");
      }
    }
    if (j.contains("simulator")) {
      const json& s = j.at("simulator");
      auto& m = c.simulator;
      m.duration_s = s.value("duration_s", m.duration_s);
      m.warmup_fraction = s.value("warmup_fraction", m.warmup_fraction);
      m.seed = s.value("seed", m.seed);
      m.load_factors = s.value("load_factors", m.load_factors);
      m.slo_tokens_per_s = s.value("slo_tokens_per_s", m.slo_tokens_per_s);
      m.sample_interval_s = s.value("sample_interval_s", m.sample_interval_s);
      if (m.duration_s < 0 || m.sample_interval_s <= 0 || m.load_factors.empty()) {
        config_error("invalid simulator parameters");
      }
    }

    const json& deps = j.at("deployments");
    if (!deps.is_array() || deps.empty()) config_error("no deployments");
    for (const auto& dj : deps) {
      DeploymentEntry d = parse_deployment(dj, c);
      for (const auto& other : c.deployments) {
        if (other.name == d.name) config_error("duplicate deployment '" + d.name + "'");
      }
      c.deployments.push_back(std::move(d));
    }
    int active = 0;
    for (const auto& d : c.deployments) active += d.active ? 1 : 0;
    if (active == 0 && c.deployments.size() == 1) {
      c.deployments.front().active = true;
      active = 1;
    }
    if (active != 1) config_error("exactly one deployment must be active");

    c.compare_baseline = j.value("compare_baseline", std::string());
    if (!c.compare_baseline.empty()) find_deployment(c, c.compare_baseline);
    c.output_dir = j.value("output_dir", c.output_dir);
  } catch (const json::exception& e) {
    config_error(std::string("malformed config: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfigError) throw;
    config_error(e.what());
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    config_error(path + ": " + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_run_config(j, dir.empty() ? "." : dir.string());
}

json run_config_to_json(const RunConfig& c) {
  json j;
  j["version"] = c.version;
  j["profiles"] = c.profile_files;
  j["workload"] = workload_to_json(c.workload);
  j["deployments"] = json::array();
  for (const auto& d : c.deployments) j["deployments"].push_back(deployment_to_json(d));
  j["search"] = {{"t_grid_points", c.search.t_grid_points},
                 {"t_grid", c.search.t_grid},
                 {"refine", c.search.refine},
                 {"allow_zero_prefill", c.search.allow_zero_prefill}};
  j["simulator"] = {{"duration_s", c.simulator.duration_s},
                    {"warmup_fraction", c.simulator.warmup_fraction},
                    {"seed", c.simulator.seed},
                    {"load_factors", c.simulator.load_factors},
                    {"slo_tokens_per_s", c.simulator.slo_tokens_per_s},
                    {"sample_interval_s", c.simulator.sample_interval_s}};
  const auto& p = c.policy;
  j["scheduler"] = {{"util_threshold", p.util_threshold},
                    {"queue_threshold_factor", p.queue_threshold_factor},
                    {"scarce_utilization", p.scarce_utilization},
                    {"congestion_window_s", p.congestion_window_s},
                    {"realloc_period_s", p.realloc_period_s},
                    {"short_term_enabled", p.short_term_enabled},
                    {"long_term_enabled", p.long_term_enabled}};
  j["compare_baseline"] = c.compare_baseline;
  j["output_dir"] = c.output_dir;
  return j;
}

const DeploymentEntry& active_deployment(const RunConfig& c) {
  for (const auto& d : c.deployments) {
    if (d.active) return d;
  }
  config_error("no active deployment");
}

const DeploymentEntry& find_deployment(const RunConfig& c, const std::string& name) {
  for (const auto& d : c.deployments) {
    if (d.name == name) return d;
  }
  config_error("unknown deployment '" + name + "'");
}

SearchSpace search_space_for(const RunConfig& c, const DeploymentEntry& d) {
  SearchSpace s;
  s.base = d.config;
  s.refine = c.search.refine && d.optimize_threshold;
  if (!d.optimize_threshold) {
    s.t_grid = {d.config.threshold};
  } else if (!c.search.t_grid.empty()) {
    s.t_grid = c.search.t_grid;
  } else {
    s.t_grid = default_t_grid(d.config.workload.length_dist, c.search.t_grid_points);
  }
  if (d.optimize_split) {
    s.splits = splits_for_total(d.pd_total, c.search.allow_zero_prefill);
  } else {
    s.splits = {{d.config.pd.prefill_instances, d.config.pd.decode_instances}};
  }
  return s;
}

SimulationOptions simulation_options_for(const RunConfig& c) {
  SimulationOptions o;
  o.duration_s = c.simulator.duration_s;
  o.warmup_fraction = c.simulator.warmup_fraction;
  o.seed = c.simulator.seed;
  o.slo_tokens_per_s = c.simulator.slo_tokens_per_s;
  o.sample_interval_s = c.simulator.sample_interval_s;
  o.policy = c.policy;
  return o;
}

}  // namespace prfaas
