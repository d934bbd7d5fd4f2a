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

#include "prfaas/scheduler.h"

#include <algorithm>

#include "prfaas/error.h"

namespace prfaas {

const char* to_string(RouteTarget t) {
  return t == RouteTarget::kPdPrefill ? "pd_p" : "prfaas";
}

const char* to_string(BandwidthMode m) {
  return m == BandwidthMode::kScarce ? "scarce" : "abundant";
}

const char* to_string(ReallocTrigger t) {
  switch (t) {
    case ReallocTrigger::kPrefillBound: return "prefill_bound";
    case ReallocTrigger::kDecodeBound: return "decode_bound";
    case ReallocTrigger::kPeriodic: return "periodic";
  }
  return "unknown";
}

RoutingDecision route(const RoutingContext& ctx) {
  const int64_t l_pd = std::min(ctx.match_pd.usable_prefix(), ctx.l_total);
  const int64_t l_prfaas = std::min(ctx.match_prfaas.usable_prefix(), ctx.l_total);
  RoutingDecision d;

  if (ctx.bandwidth_mode == BandwidthMode::kScarce) {
    if (static_cast<double>(ctx.l_total - l_pd) <= ctx.t) {
      d.target = RouteTarget::kPdPrefill;
      d.uncached_len = ctx.l_total - l_pd;
    } else {
      d.target = RouteTarget::kPrfaas;
      d.uncached_len = ctx.l_total - l_prfaas;
    }
    return d;
  }

  const int64_t l_prefix = std::max(l_pd, l_prfaas);
  d.target = static_cast<double>(ctx.l_total - l_prefix) <= ctx.t
                 ? RouteTarget::kPdPrefill
                 : RouteTarget::kPrfaas;
  d.uncached_len = ctx.l_total - l_prefix;
  const int64_t local = d.target == RouteTarget::kPdPrefill ? l_pd : l_prfaas;
  if (l_prefix > local) {
    const bool from_pd = d.target == RouteTarget::kPrfaas;
    d.cache_transfer = CacheTransfer{
        from_pd ? kPdCluster : kPrfaasCluster,
        from_pd ? kPrfaasCluster : kPdCluster,
        from_pd ? ctx.cache_bytes_pd : ctx.cache_bytes_prfaas};
  }
  return d;
}

BandwidthMode bandwidth_mode_for(double egress_utilization,
                                 const SchedulerPolicy& policy) {
  return egress_utilization >= policy.scarce_utilization ? BandwidthMode::kScarce
                                                         : BandwidthMode::kAbundant;
}

double short_term_update(const CongestionState& state,
                         const LengthDistribution& dist,
                         const DeploymentConfig& config, bool force) {
  if (!force && !state.triggered()) return config.threshold;
  if (!config.has_prfaas()) return config.threshold;
  DeploymentConfig current = config;
  current.workload.length_dist = dist;
  SearchSpace space;
  space.base = current;
  space.t_grid = default_t_grid(dist);
  space.splits = {{config.pd.prefill_instances, config.pd.decode_instances}};
  try {
    return optimize(space).t_star;
  } catch (const Error&) {
    return config.threshold;
  }
}

ReallocationPlan long_term_realloc(const ObservedLoad& observed,
                                   const DeploymentConfig& config) {
  DeploymentConfig current = config;
  if (observed.length_dist) current.workload.length_dist = *observed.length_dist;
  const auto& dist = current.workload.length_dist;
  const int64_t total = config.pd.prefill_instances + config.pd.decode_instances;

  ReallocationPlan plan;
  plan.new_np = config.pd.prefill_instances;
  plan.new_nd = config.pd.decode_instances;
  plan.new_t = config.threshold;

  SearchSpace space;
  space.base = current;
  space.t_grid = default_t_grid(dist);
  space.splits = splits_for_total(total, config.has_prfaas());
  Optimum best;
  try {
    best = optimize(space);
  } catch (const Error&) {
    return plan;
  }
  const PdSplit now{config.pd.prefill_instances, config.pd.decode_instances};
  if (best.split == now) return plan;

  // Only convert nodes when the current split, even at its own best
  // threshold, is strictly worse.
  space.splits = {now};
  double current_lambda = -1.0;
  try {
    current_lambda = optimize(space).report.lambda_max;
  } catch (const Error&) {
  }
  const double tol = 1e-9 * std::max(1.0, best.report.lambda_max);
  if (best.report.lambda_max <= current_lambda + tol) return plan;

  plan.new_np = best.split.prefill;
  plan.new_nd = best.split.decode;
  plan.new_t = best.threshold_used ? best.t_star : config.threshold;
  if (plan.new_np > config.pd.prefill_instances) {
    plan.trigger = ReallocTrigger::kPrefillBound;
  } else if (plan.new_np < config.pd.prefill_instances) {
    plan.trigger = ReallocTrigger::kDecodeBound;
  }
  return plan;
}

nlohmann::json decision_to_json(int64_t request_id, double time,
                                const RoutingContext& ctx,
                                const RoutingDecision& d) {
  nlohmann::json j = {{"request_id", request_id},
                      {"time", time},
                      {"l_total", ctx.l_total},
                      {"l_pd", ctx.match_pd.usable_prefix()},
                      {"l_prfaas", ctx.match_prfaas.usable_prefix()},
                      {"t", ctx.t},
                      {"mode", to_string(ctx.bandwidth_mode)},
                      {"target", to_string(d.target)},
                      {"uncached_len", d.uncached_len}};
  if (d.cache_transfer) {
    j["cache_transfer"] = {{"from", d.cache_transfer->from_cluster},
                           {"to", d.cache_transfer->to_cluster},
                           {"bytes", d.cache_transfer->bytes}};
  }
  return j;
}

}  // namespace prfaas
