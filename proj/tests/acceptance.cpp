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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "prfaas/optimizer.h"
#include "prfaas/profiles.h"
#include "prfaas/simulator.h"
#include "prfaas/throughput_model.h"
#include "prfaas/workload.h"

using namespace prfaas;

namespace {

std::string src(const std::string& rel) { return std::string(PRFAAS_SOURCE_DIR) + "/" + rel; }

HardwareModelProfile profile(const std::string& name) {
  return load_profile(src("fixtures/profiles/" + name + ".json"));
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

struct Check {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const char* fmt, ...) __attribute__((format(printf, 3, 4)));
};

void Check::expect(bool cond, const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  if (!detail.empty()) detail += "; ";
  detail += buf;
  if (!cond) {
    detail += " [x]";
    ok = false;
  }
}

int failures = 0;

void report(int n, const char* title, const std::function<void(Check&)>& body) {
  Check c;
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail += std::string(" exception: ") + e.what();
  }
  if (!c.ok) ++failures;
  std::printf("%s criterion %d: %s: %s\n", c.ok ? "PASS" : "FAIL", n, title, c.detail.c_str());
  std::fflush(stdout);
}

DeploymentConfig case_study(double t, int64_t np, int64_t nd, double b) {
  DeploymentConfig c;
  c.name = "prfaas-pd";
  c.prfaas = PrfaasSide{profile("internal-1t-h200"), 4, b};
  c.pd = PdSide{profile("internal-1t-h20"), np, nd};
  c.threshold = t;
  return c;
}

Optimum solve(const DeploymentConfig& base, int64_t total, bool zero_prefill) {
  SearchSpace s;
  s.base = base;
  s.t_grid = default_t_grid(base.workload.length_dist);
  s.splits = splits_for_total(total, zero_prefill);
  return optimize(s);
}

// Least-squares slope of y(x).
double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

SimulationOptions sim_options(double duration, uint64_t seed) {
  SimulationOptions o;
  o.duration_s = duration;
  o.seed = seed;
  return o;
}

}  // namespace

int main() {
  report(1, "KV throughput table", [](Check& c) {
    const auto p = profile("internal-1t-h200");
    const double want[] = {3.61, 3.59, 3.19, 2.62};
    const int64_t lens[] = {1024, 8192, 32768, 131072};
    for (int i = 0; i < 4; ++i) {
      const double g = kv_throughput(p, lens[i]).gbps;
      c.expect(rel(g, want[i]) <= 0.02, "%lldK %.3f vs %.2f",
               static_cast<long long>(lens[i] / 1024), g, want[i]);
    }
  });

  report(2, "egress demand", [](Check& c) {
    const auto p = profile("ring-2.5-1t");
    const double small = cluster_egress_demand(p, 512, 32768);
    const double large = cluster_egress_demand(p, 10000, 131072);
    c.expect(rel(small, 170) <= 0.05, "512 GPUs %.1f Gbps vs 170", small);
    c.expect(rel(large, 1800) <= 0.10, "10000 GPUs %.0f Gbps vs 1800", large);
  });

  report(3, "workload statistics", [](Check& c) {
    const auto d = LengthDistribution::truncated_lognormal(9.90, 1.00, 128, 131072);
    const double mean = mean_length(d);
    const auto s = split_stats(d, 19400);
    c.expect(rel(mean, 27000) <= 0.05, "mean %.0f vs 27000", mean);
    c.expect(std::abs(s.p - 0.496) <= 0.01, "p %.4f vs 0.496", s.p);
    c.expect(rel(*s.l_long, 44000) <= 0.05, "E[L|L>t] %.0f vs 44000", *s.l_long);

    // Independent sampler: rejection into the support.
    std::mt19937_64 rng(2024);
    std::lognormal_distribution<double> ln(9.90, 1.00);
    double sum = 0, sum_long = 0;
    int64_t n_long = 0;
    const int n = 1000000;
    for (int i = 0; i < n;) {
      const double x = ln(rng);
      if (x < 128 || x > 131072) continue;
      sum += x;
      if (x > 19400) {
        sum_long += x;
        ++n_long;
      }
      ++i;
    }
    const double mc_mean = sum / n;
    const double mc_p = static_cast<double>(n_long) / n;
    const double mc_long = sum_long / n_long;
    c.expect(rel(mean, mc_mean) <= 0.01, "MC mean %.0f", mc_mean);
    c.expect(rel(s.p, mc_p) <= 0.01, "MC p %.4f", mc_p);
    c.expect(rel(*s.l_long, mc_long) <= 0.01, "MC E[L|L>t] %.0f", mc_long);
  });

  report(4, "PD profile calibration", [](Check& c) {
    const double out_len = 1024;
    const double rates[] = {3.91 * out_len / 5, 2.35 * out_len / 3, 6.25 * out_len / 8};
    const double lo = *std::min_element(std::begin(rates), std::end(rates));
    const double hi = *std::max_element(std::begin(rates), std::end(rates));
    const double mean = (rates[0] + rates[1] + rates[2]) / 3;
    c.expect(hi / lo - 1 <= 0.005, "decode rates %.1f/%.1f/%.1f spread %.2f%%", rates[0],
             rates[1], rates[2], 100 * (hi / lo - 1));
    const auto p = profile("internal-1t-h20");
    c.expect(p.decode_token_rate && rel(*p.decode_token_rate, mean) <= 1e-6,
             "fixture rate %.3f vs mean %.3f", p.decode_token_rate.value_or(0), mean);

    const auto d = LengthDistribution::truncated_lognormal(9.90, 1.00, 128, 131072);
    const double l_short = *split_stats(d, 19400).l_short;
    const double l_mean = mean_length(d);
    const double l_q90 = quantile(d, 0.9);
    auto t = [&](double l) { return interpolate_prefill_latency(p, l, Extrapolation::kLinear); };
    c.expect(rel(t(l_short), 3 / 1.64) <= 0.01, "T(%.0f) %.3f vs %.3f", l_short, t(l_short),
             3 / 1.64);
    c.expect(rel(t(l_mean), 9 / 2.11) <= 0.01, "T(%.0f) %.3f vs %.3f", l_mean, t(l_mean),
             9 / 2.11);
    c.expect(rel(t(l_q90), 9.73) <= 0.01, "T(%.0f) %.3f vs 9.73", l_q90, t(l_q90));
    std::FILE* f = std::fopen(src("tools/derive_h20_profile.cpp").c_str(), "r");
    c.expect(f != nullptr, "derivation tool present");
    if (f) std::fclose(f);
  });

  double case_lambda = 0;
  report(5, "optimal configuration", [&](Check& c) {
    const auto start = std::chrono::steady_clock::now();
    const auto pf = solve(case_study(19400, 3, 5, 100), 8, false);
    DeploymentConfig homo;
    homo.pd = PdSide{profile("internal-1t-h20"), 6, 6};
    const auto ho = solve(homo, 12, false);
    const auto naive = lambda_max(case_study(0, 0, 8, 100)).lambda_max;
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    case_lambda = pf.report.lambda_max;
    c.expect(std::abs(pf.t_star - 19400) <= 500, "t* %.0f", pf.t_star);
    c.expect(pf.split == PdSplit{3, 5}, "split (%lld,%lld)",
             static_cast<long long>(pf.split.prefill), static_cast<long long>(pf.split.decode));
    c.expect(rel(pf.report.lambda_max, 3.24) <= 0.05, "lambda %.3f vs 3.24",
             pf.report.lambda_max);
    c.expect(ho.split == PdSplit{9, 3}, "homogeneous (%lld,%lld)",
             static_cast<long long>(ho.split.prefill), static_cast<long long>(ho.split.decode));
    c.expect(rel(ho.report.lambda_max, 2.11) <= 0.05, "homogeneous %.3f vs 2.11",
             ho.report.lambda_max);
    c.expect(rel(naive, 2.45) <= 0.05, "naive %.3f vs 2.45", naive);
    const double r1 = pf.report.lambda_max / ho.report.lambda_max;
    const double r2 = naive / ho.report.lambda_max;
    c.expect(rel(r1, 1.54) <= 0.05, "ratio %.3f vs 1.54", r1);
    c.expect(rel(r2, 1.16) <= 0.05, "ratio %.3f vs 1.16", r2);
    c.expect(secs < 60, "%.2f s", secs);
  });

  report(6, "TTFT reconstruction", [](Check& c) {
    DeploymentConfig homo;
    homo.pd = PdSide{profile("internal-1t-h20"), 9, 3};
    const struct {
      const char* name;
      DeploymentConfig cfg;
      double mean, p90;
    } cols[] = {{"prfaas-pd", case_study(19400, 3, 5, 100), 2.22, 3.51},
                {"homogeneous", homo, 4.44, 9.73},
                {"naive", case_study(0, 0, 8, 100), 1.74, 3.51}};
    for (const auto& col : cols) {
      const auto s = ttft_stats(col.cfg);
      c.expect(rel(s.mean_s, col.mean) <= 0.10 && rel(s.p90_s, col.p90) <= 0.10,
               "%s %.3f/%.3f vs %.2f/%.2f", col.name, s.mean_s, s.p90_s, col.mean, col.p90);
    }
  });

  report(7, "egress at the operating point", [&](Check& c) {
    auto cfg = case_study(19400, 3, 5, 100);
    const auto r = lambda_max(cfg);
    c.expect(rel(r.egress_load_gbps, 13) <= 0.10, "analytic %.2f Gbps vs 13",
             r.egress_load_gbps);
    cfg.workload.arrival_rate = r.lambda_max;
    const auto sim = run(cfg, sim_options(7200, 7));
    c.expect(rel(sim.metrics.egress_mean_gbps, 13) <= 0.15, "simulated %.2f Gbps vs 13",
             sim.metrics.egress_mean_gbps);
  });

  report(8, "model and simulation agree", [&](Check& c) {
    const auto opt = solve(case_study(19400, 3, 5, 100), 8, false);
    auto cfg = with_point(case_study(19400, 3, 5, 100), opt.t_star, opt.split);
    const double lam = opt.report.lambda_max;
    const double duration = 7200;

    auto start = std::chrono::steady_clock::now();
    cfg.workload.arrival_rate = 0.9 * lam;
    const auto low = run(cfg, sim_options(duration, 7));
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.expect(rel(low.metrics.achieved_throughput, low.metrics.offered_rate) <= 0.05,
             "0.9x achieved %.3f offered %.3f", low.metrics.achieved_throughput,
             low.metrics.offered_rate);
    std::vector<double> x, y;
    int64_t peak = 0;
    for (const auto& row : low.series) {
      if (row.time < duration / 2) continue;
      x.push_back(row.time);
      y.push_back(static_cast<double>(row.queued));
      peak = std::max(peak, row.queued);
    }
    const double drift = slope(x, y);
    c.expect(std::abs(drift) <= 0.01 && peak < 100, "0.9x queue drift %.4f/s peak %lld",
             drift, static_cast<long long>(peak));
    c.expect(secs < 120, "%.1f s", secs);

    // Stages whose capacity share sits within 1% of lambda_max all saturate
    // together; their queues absorb the excess.
    const auto& r = opt.report;
    const double p = r.split.p;
    const bool prfaas_binds = p > 0 && r.theta_prfaas / p <= lam * 1.01;
    const bool pdp_binds = p < 1 && r.theta_pdp / (1 - p) <= lam * 1.01;
    const bool pdd_binds = r.theta_pdd <= lam * 1.01;

    start = std::chrono::steady_clock::now();
    cfg.workload.arrival_rate = 1.3 * lam;
    const auto high = run(cfg, sim_options(duration, 7));
    secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    x.clear();
    y.clear();
    for (const auto& row : high.series) {
      if (row.time < duration / 2) continue;
      x.push_back(row.time);
      y.push_back(static_cast<double>((prfaas_binds ? row.queue_prfaas : 0) +
                                      (pdp_binds ? row.queue_pdp : 0) +
                                      (pdd_binds ? row.queue_pdd : 0)));
    }
    const double growth = slope(x, y);
    const double want = high.metrics.offered_rate - lam;
    c.expect(rel(growth, want) <= 0.20, "1.3x growth %.3f/s vs %.3f (%s%s%s)", growth, want,
             prfaas_binds ? "prfaas " : "", pdp_binds ? "pd_p " : "", pdd_binds ? "pd_d" : "");
    c.expect(secs < 120, "%.1f s", secs);
  });

  report(9, "property suites", [](Check& c) {
    const std::string cmd = std::string(PRFAAS_UNIT_PATH) +
                            " --source-file=*test_cache_pool.cpp,*test_scheduler.cpp,"
                            "*test_optimizer.cpp,*test_simulator.cpp,*test_egress_link.cpp"
                            " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    c.expect(rc == 0, "cache pool, routing, optimizer, simulator and link suites (rc %d)", rc);
  });

  report(10, "closed-loop threshold update", [&](Check& c) {
    // 20 Gbps link at 0.9x the solved rate with t held at 19.4K.
    for (double b : {20.0, 8.0}) {
      auto cfg = case_study(19400, 3, 5, b);
      const double lam = lambda_max(cfg).lambda_max;
      cfg.workload.arrival_rate = (b == 20.0 ? 0.9 * 3.198 : 0.8 * lam);
      auto o = sim_options(3600, 7);
      o.policy.long_term_enabled = false;
      const auto sim = run(cfg, o);
      if (sim.threshold_updates.empty()) {
        c.expect(false, "B=%.0f no trigger", b);
        continue;
      }
      const auto& u = sim.threshold_updates.front();
      double util = 0;
      int rows = 0;
      const double settle = u.time + 0.25 * (o.duration_s - u.time);
      for (const auto& row : sim.series) {
        if (row.time < settle) continue;
        util += row.egress_util;
        ++rows;
      }
      util = rows ? util / rows : 1.0;
      c.expect(u.new_t > 19400 && sim.metrics.final_threshold > 19400 &&
                   util < o.policy.util_threshold,
               "B=%.0f trigger at %.0fs (util %.2f queue %lld) t %.0f -> %.0f, after %.2f", b,
               u.time, u.state.egress_utilization, static_cast<long long>(u.state.queue_depth),
               u.old_t, u.new_t, util);
    }
  });

  return failures == 0 ? 0 : 1;
}
