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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "prfaas/config.h"
#include "prfaas/error.h"
#include "prfaas/optimizer.h"
#include "prfaas/profiles.h"
#include "prfaas/simulator.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;

struct CommonFlags {
  std::string config;
  std::optional<uint64_t> seed;
  std::string out_dir;
  std::optional<double> load_factor;
  std::optional<double> duration;
};

struct BandwidthFlags {
  std::string profile;
  int64_t gpus = 0;
  double seq_len = 32768;
};

json with_header(json body) {
  json j;
  j["format_version"] = prfaas::kConfigVersion;
  for (auto& [k, v] : body.items()) j[k] = v;
  return j;
}

fs::path output_dir(const prfaas::RunConfig& c, const CommonFlags& f) {
  fs::path dir = f.out_dir.empty() ? fs::path(c.base_dir) / c.output_dir
                                   : fs::path(f.out_dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  os << text;
  if (!os) {
    throw prfaas::Error(prfaas::ErrorKind::kConfigError,
                        "cannot write " + path.string());
  }
}

prfaas::RunConfig load(const CommonFlags& f) {
  if (f.config.empty()) {
    throw prfaas::Error(prfaas::ErrorKind::kConfigError, "--config is required");
  }
  prfaas::RunConfig c = prfaas::load_run_config(f.config);
  if (f.seed) c.simulator.seed = *f.seed;
  if (f.duration) c.simulator.duration_s = *f.duration;
  if (f.load_factor) c.simulator.load_factors = {*f.load_factor};
  return c;
}

prfaas::Optimum solve_deployment(const prfaas::RunConfig& c,
                                 const prfaas::DeploymentEntry& d) {
  return prfaas::optimize(prfaas::search_space_for(c, d));
}

int cmd_solve(const CommonFlags& f) {
  const auto c = load(f);
  const auto& d = prfaas::active_deployment(c);
  const auto opt = solve_deployment(c, d);
  const auto dir = output_dir(c, f);
  json j = with_header(prfaas::optimum_to_json(opt));
  j["deployment"] = d.name;
  write_file(dir / "optimum.json", j.dump(2) + "\n");
  write_file(dir / "threshold_sweep.csv", prfaas::threshold_csv(opt.threshold_sweep));
  write_file(dir / "allocation_sweep.csv", prfaas::allocation_csv(opt.allocation_sweep));
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_sweep(const CommonFlags& f) {
  const auto c = load(f);
  const auto& d = prfaas::active_deployment(c);
  const auto space = prfaas::search_space_for(c, d);
  const auto rows_t = prfaas::sweep_threshold(d.config, space.t_grid);
  const auto rows_a = prfaas::sweep_allocation(d.config, space.splits);
  const auto dir = output_dir(c, f);
  write_file(dir / "threshold_sweep.csv", prfaas::threshold_csv(rows_t));
  write_file(dir / "allocation_sweep.csv", prfaas::allocation_csv(rows_a));
  json j = with_header({{"deployment", d.name},
                        {"threshold_rows", rows_t.size()},
                        {"allocation_rows", rows_a.size()}});
  if (auto x = prfaas::find_crossing(rows_t)) j["crossing_t"] = *x;
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

std::string factor_tag(double factor) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << factor;
  return os.str();
}

int cmd_simulate(const CommonFlags& f) {
  const auto c = load(f);
  const auto& d = prfaas::active_deployment(c);
  const auto opt = solve_deployment(c, d);
  const auto dir = output_dir(c, f);
  auto deployment = prfaas::with_point(d.config, opt.t_star, opt.split);
  deployment.workload.process = c.workload.process;

  json runs = json::array();
  for (double factor : c.simulator.load_factors) {
    deployment.workload.arrival_rate = factor * opt.report.lambda_max;
    const auto result = prfaas::run(deployment, prfaas::simulation_options_for(c));
    const std::string tag = factor_tag(factor);
    json m = with_header(prfaas::metrics_to_json(result.metrics));
    m["deployment"] = d.name;
    m["load_factor"] = factor;
    m["lambda_max"] = opt.report.lambda_max;
    m["arrival_rate"] = deployment.workload.arrival_rate;
    m["seed"] = c.simulator.seed;
    m["duration_s"] = c.simulator.duration_s;
    m["threshold_updates"] = result.threshold_updates.size();
    m["reallocations"] = result.reallocations.size();
    write_file(dir / ("metrics_" + tag + ".json"), m.dump(2) + "\n");
    write_file(dir / ("series_" + tag + ".csv"), prfaas::series_csv(result.series));
    runs.push_back(m);
  }
  std::cout << json({{"runs", runs}}).dump(2) << "\n";
  return kExitOk;
}

int cmd_compare(const CommonFlags& f) {
  const auto c = load(f);
  std::vector<std::pair<const prfaas::DeploymentEntry*, prfaas::Optimum>> solved;
  for (const auto& d : c.deployments) solved.emplace_back(&d, solve_deployment(c, d));

  const std::string baseline =
      c.compare_baseline.empty() ? c.deployments.front().name : c.compare_baseline;
  double base_lambda = 0;
  for (const auto& [d, o] : solved) {
    if (d->name == baseline) base_lambda = o.report.lambda_max;
  }
  if (!(base_lambda > 0)) {
    throw prfaas::Error(prfaas::ErrorKind::kInfeasibleSpace,
                        "baseline " + baseline + " has zero throughput");
  }

  json rows = json::array();
  std::ostringstream csv;
  csv << "deployment,t,n_prfaas,np,nd,theta_prfaas,theta_pdp,theta_pdd,"
         "lambda_max,ttft_mean_s,ttft_p90_s,ratio\n";
  std::printf("%-14s %9s %5s %4s %4s %9s %9s %9s %7s\n", "deployment", "t", "Npf",
              "Np", "Nd", "lambda", "ttft", "p90", "ratio");
  for (const auto& [d, o] : solved) {
    const auto& r = o.report;
    const double ratio = r.lambda_max / base_lambda;
    const int64_t n_prfaas = d->config.prfaas ? d->config.prfaas->instances : 0;
    json row = {{"deployment", d->name},
                {"t", o.threshold_used ? json(o.t_star) : json(nullptr)},
                {"n_prfaas", n_prfaas},
                {"np", o.split.prefill},
                {"nd", o.split.decode},
                {"report", prfaas::report_to_json(r)},
                {"ratio", ratio}};
    rows.push_back(row);
    auto finite = [](double v) { return std::isfinite(v) ? v : 0.0; };
    csv << d->name << ',' << (o.threshold_used ? o.t_star : 0.0) << ','
        << n_prfaas << ',' << o.split.prefill << ',' << o.split.decode << ','
        << finite(r.theta_prfaas) << ',' << finite(r.theta_pdp) << ','
        << r.theta_pdd << ',' << r.lambda_max << ',' << r.ttft_mean_s.value_or(0)
        << ',' << r.ttft_p90_s.value_or(0) << ',' << ratio << '\n';
    std::printf("%-14s %9.0f %5lld %4lld %4lld %9.3f %9.3f %9.3f %6.2fx\n",
                d->name.c_str(), o.threshold_used ? o.t_star : 0.0,
                static_cast<long long>(n_prfaas),
                static_cast<long long>(o.split.prefill),
                static_cast<long long>(o.split.decode), r.lambda_max,
                r.ttft_mean_s.value_or(0), r.ttft_p90_s.value_or(0), ratio);
  }
  const auto dir = output_dir(c, f);
  write_file(dir / "comparison.json",
             with_header({{"baseline", baseline}, {"rows", rows}}).dump(2) + "\n");
  write_file(dir / "comparison.csv", csv.str());
  return kExitOk;
}

int cmd_bandwidth(const BandwidthFlags& b) {
  const auto profile = prfaas::load_profile(b.profile);
  const double gbps = prfaas::cluster_egress_demand(profile, b.gpus, b.seq_len);
  json j = with_header({{"profile", profile.name},
                        {"gpus", b.gpus},
                        {"instances", prfaas::whole_instances(profile, b.gpus)},
                        {"seq_len", b.seq_len},
                        {"phi_kv_gbps", prfaas::kv_throughput(profile, b.seq_len).gbps},
                        {"egress_gbps", gbps}});
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PrfaaS-PD capacity planner and simulator"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto add_common = [&flags](CLI::App* sub) {
    sub->add_option("--config", flags.config, "Run config JSON")->required();
    sub->add_option("--seed", flags.seed, "Simulator seed override");
    sub->add_option("--out-dir", flags.out_dir, "Output directory override");
    sub->add_option("--load-factor", flags.load_factor,
                    "Offered load as a multiple of the solved lambda_max");
    sub->add_option("--duration", flags.duration, "Simulated seconds");
  };
  auto* solve = app.add_subcommand("solve", "Grid-search t and the PD split");
  auto* sweep = app.add_subcommand("sweep", "Write threshold and allocation sweeps");
  auto* simulate = app.add_subcommand("simulate", "Simulate at the solved optimum");
  auto* compare = app.add_subcommand("compare", "Compare deployments at their optima");
  for (auto* s : {solve, sweep, simulate, compare}) add_common(s);

  BandwidthFlags bw;
  auto* bandwidth = app.add_subcommand("bandwidth", "Egress demand of a prefill fleet");
  bandwidth->add_option("--profile", bw.profile, "Profile JSON")->required();
  bandwidth->add_option("--gpus", bw.gpus, "Prefill GPUs")->required();
  bandwidth->add_option("--seq-len", bw.seq_len, "Average input length (tokens)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*solve) return cmd_solve(flags);
    if (*sweep) return cmd_sweep(flags);
    if (*simulate) return cmd_simulate(flags);
    if (*compare) return cmd_compare(flags);
    if (*bandwidth) return cmd_bandwidth(bw);
  } catch (const prfaas::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case prfaas::ErrorKind::kInfeasibleSpace:
        return kExitInfeasible;
      case prfaas::ErrorKind::kConfigError:
      case prfaas::ErrorKind::kEmptyProfile:
      case prfaas::ErrorKind::kInvalidProfile:
      case prfaas::ErrorKind::kInfeasibleConfig:
        return kExitConfig;
      default:
        return kExitFailure;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
