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

#include "prfaas/throughput_model.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "prfaas/error.h"
#include "prfaas/units.h"

namespace prfaas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr auto kModelExtrapolation = Extrapolation::kLinear;

double latency(const HardwareModelProfile& p, double l) {
  return interpolate_prefill_latency(p, l, kModelExtrapolation);
}

double kv_gigabits(const HardwareModelProfile& p, double l) {
  return units::mib_to_gigabits(interpolate_kv_size(p, l, kModelExtrapolation));
}

std::vector<double> knots_of(const HardwareModelProfile& p) {
  std::vector<double> xs;
  for (const auto& pt : p.points) xs.push_back(static_cast<double>(pt.seq_len));
  return xs;
}

// Smallest l in [lo, hi] with g(l) > x for nondecreasing g; hi if none.
double invert_monotone(const std::function<double(double)>& g, double x,
                       double lo, double hi) {
  if (g(lo) > x) return lo;
  if (g(hi) <= x) return hi;
  for (int i = 0; i < 200 && hi - lo > 1e-9 * std::max(1.0, hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) <= x) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace

const char* to_string(Bottleneck b) {
  switch (b) {
    case Bottleneck::kPrfaasCompute: return "prfaas_compute";
    case Bottleneck::kPrfaasBandwidth: return "prfaas_bandwidth";
    case Bottleneck::kPdPrefill: return "pd_prefill";
    case Bottleneck::kPdDecode: return "pd_decode";
  }
  return "unknown";
}

void DeploymentConfig::validate() const {
  if (pd.prefill_instances < 0 || pd.decode_instances < 0) {
    throw Error(ErrorKind::kInfeasibleConfig, name + ": negative PD counts");
  }
  if (prfaas && (prfaas->instances < 0 || prfaas->egress_gbps < 0)) {
    throw Error(ErrorKind::kInfeasibleConfig,
                name + ": negative PrfaaS instances or bandwidth");
  }
  if (!has_prfaas() && pd.prefill_instances == 0) {
    throw Error(ErrorKind::kInfeasibleConfig, name + ": no prefill capacity");
  }
}

SplitStats effective_split(const DeploymentConfig& config) {
  const auto& dist = config.workload.length_dist;
  return split_stats(dist, config.has_prfaas() ? config.threshold : dist.upper());
}

double theta_prfaas(const DeploymentConfig& config, const SplitStats& split) {
  if (!(split.p > 0.0) || !split.l_long) return kInf;
  if (!config.has_prfaas()) return 0.0;
  const auto& side = *config.prfaas;
  const double l = *split.l_long;
  const double compute = static_cast<double>(side.instances) / latency(side.profile, l);
  const double bandwidth = side.egress_gbps / kv_gigabits(side.profile, l);
  return std::min(compute, bandwidth);
}

double theta_pdp(const DeploymentConfig& config, const SplitStats& split) {
  if (!(split.p < 1.0) || !split.l_short) return kInf;
  if (config.pd.prefill_instances == 0) return 0.0;
  return static_cast<double>(config.pd.prefill_instances) /
         latency(config.pd.profile, *split.l_short);
}

double theta_pdd(const DeploymentConfig& config) {
  if (config.pd.decode_instances == 0) return 0.0;
  const auto& rate = config.pd.profile.decode_token_rate;
  if (!rate) {
    throw Error(ErrorKind::kInvalidProfile,
                config.pd.profile.name + ": no decode_token_rate");
  }
  return static_cast<double>(config.pd.decode_instances) * *rate /
         static_cast<double>(config.workload.output_len);
}

ThroughputReport lambda_max(const DeploymentConfig& config) {
  config.validate();
  if (config.pd.decode_instances == 0) {
    throw Error(ErrorKind::kInfeasibleConfig, config.name + ": no decode instances");
  }
  ThroughputReport r;
  r.split = effective_split(config);
  r.theta_prfaas = theta_prfaas(config, r.split);
  r.theta_pdp = theta_pdp(config, r.split);
  r.theta_pdd = theta_pdd(config);

  // A stage receiving no traffic imposes no constraint.
  const double via_prfaas = r.split.p > 0.0 ? r.theta_prfaas / r.split.p : kInf;
  const double via_pdp = r.split.p < 1.0 ? r.theta_pdp / (1.0 - r.split.p) : kInf;
  r.lambda_max = std::min({via_prfaas, via_pdp, r.theta_pdd});

  if (via_prfaas <= via_pdp && via_prfaas <= r.theta_pdd) {
    const auto& side = *config.prfaas;
    const double l = *r.split.l_long;
    const double compute =
        static_cast<double>(side.instances) / latency(side.profile, l);
    r.bottleneck = r.theta_prfaas < compute ? Bottleneck::kPrfaasBandwidth
                                            : Bottleneck::kPrfaasCompute;
  } else if (via_pdp <= r.theta_pdd) {
    r.bottleneck = Bottleneck::kPdPrefill;
  } else {
    r.bottleneck = Bottleneck::kPdDecode;
  }

  if (r.split.p > 0.0 && config.has_prfaas()) {
    r.egress_load_gbps = r.lambda_max * r.split.p *
                         kv_gigabits(config.prfaas->profile, *r.split.l_long);
  }
  return r;
}

double local_ttft(const DeploymentConfig& config, double uncached_len) {
  return latency(config.pd.profile, uncached_len);
}

double offload_ttft(const DeploymentConfig& config, double uncached_len) {
  const auto& side = *config.prfaas;
  const double compute = latency(side.profile, uncached_len);
  if (!(side.egress_gbps > 0)) return kInf;
  return std::max(compute, kv_gigabits(side.profile, uncached_len) / side.egress_gbps);
}

TtftStats ttft_stats(const DeploymentConfig& config) {
  config.validate();
  const auto& dist = config.workload.length_dist;
  const double lo = dist.lower();
  const double hi = dist.upper();
  const double t = config.has_prfaas() ? std::clamp(config.threshold, lo, hi) : hi;

  auto local = [&](double l) { return local_ttft(config, l); };
  auto remote = [&](double l) { return offload_ttft(config, l); };

  std::vector<double> breaks = knots_of(config.pd.profile);
  if (config.has_prfaas()) {
    auto more = knots_of(config.prfaas->profile);
    breaks.insert(breaks.end(), more.begin(), more.end());
  }

  TtftStats s;
  s.mean_s = dist.partial_expectation(local, lo, t, breaks);
  if (t < hi) s.mean_s += dist.partial_expectation(remote, t, hi, breaks);

  // Both paths are nondecreasing in length, so P(TTFT <= x) splits into one
  // interval per path.
  const double f_t = dist.cdf(t);
  auto ttft_cdf = [&](double x) {
    if (dist.kind() == LengthDistributionKind::kEmpirical) {
      double n = 0;
      for (int64_t v : dist.samples()) {
        const double l = static_cast<double>(v);
        n += (l <= t ? local(l) : remote(l)) <= x;
      }
      return n / dist.samples().size();
    }
    double c = dist.cdf(std::min(t, invert_monotone(local, x, lo, hi)));
    if (t < hi) {
      const double l_remote = invert_monotone(remote, x, lo, hi);
      c += std::max(0.0, dist.cdf(l_remote) - f_t);
    }
    return c;
  };
  double x_lo = 0.0;
  double x_hi = std::max(local(hi), t < hi ? remote(hi) : 0.0);
  for (int i = 0; i < 200 && x_hi - x_lo > 1e-12 * x_hi; ++i) {
    const double mid = 0.5 * (x_lo + x_hi);
    if (ttft_cdf(mid) >= 0.9) {
      x_hi = mid;
    } else {
      x_lo = mid;
    }
  }
  s.p90_s = x_hi;
  return s;
}

ThroughputReport full_report(const DeploymentConfig& config) {
  ThroughputReport r = lambda_max(config);
  const TtftStats s = ttft_stats(config);
  r.ttft_mean_s = s.mean_s;
  r.ttft_p90_s = s.p90_s;
  return r;
}

BalanceResiduals balance_residuals(const DeploymentConfig& config) {
  const SplitStats split = effective_split(config);
  if (!(split.p > 0.0 && split.p < 1.0)) {
    throw Error(ErrorKind::kDegenerateSplit,
                "balance residuals need 0 < p < 1, got p=" + std::to_string(split.p));
  }
  const double tp = theta_prfaas(config, split);
  const double tq = theta_pdp(config, split);
  BalanceResiduals b;
  b.producer_balance = tp / split.p - tq / (1.0 - split.p);
  b.pipeline_balance = tp + tq - theta_pdd(config);
  return b;
}

namespace {

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json report_to_json(const ThroughputReport& r) {
  nlohmann::json j;
  j["theta_prfaas"] = finite_or_null(r.theta_prfaas);
  j["theta_pdp"] = finite_or_null(r.theta_pdp);
  j["theta_pdd"] = finite_or_null(r.theta_pdd);
  j["lambda_max"] = r.lambda_max;
  j["bottleneck"] = to_string(r.bottleneck);
  j["split"] = {{"t", r.split.t},
                {"p", r.split.p},
                {"l_long", r.split.l_long ? nlohmann::json(*r.split.l_long)
                                          : nlohmann::json(nullptr)},
                {"l_short", r.split.l_short ? nlohmann::json(*r.split.l_short)
                                            : nlohmann::json(nullptr)}};
  j["egress_load_gbps"] = r.egress_load_gbps;
  j["ttft_mean_s"] = r.ttft_mean_s ? nlohmann::json(*r.ttft_mean_s) : nlohmann::json(nullptr);
  j["ttft_p90_s"] = r.ttft_p90_s ? nlohmann::json(*r.ttft_p90_s) : nlohmann::json(nullptr);
  return j;
}

std::string report_csv_header() {
  return "t,p,l_long,l_short,theta_prfaas,theta_pdp,theta_pdd,lambda_max,"
         "bottleneck,egress_load_gbps,ttft_mean_s,ttft_p90_s";
}

std::string report_csv_row(const ThroughputReport& r) {
  std::ostringstream os;
  os.precision(10);
  auto opt = [&](const std::optional<double>& v) {
    if (v) os << *v;
  };
  os << r.split.t << ',' << r.split.p << ',';
  opt(r.split.l_long);
  os << ',';
  opt(r.split.l_short);
  os << ',' << r.theta_prfaas << ',' << r.theta_pdp << ',' << r.theta_pdd << ','
     << r.lambda_max << ',' << to_string(r.bottleneck) << ','
     << r.egress_load_gbps << ',';
  opt(r.ttft_mean_s);
  os << ',';
  opt(r.ttft_p90_s);
  return os.str();
}

}  // namespace prfaas
