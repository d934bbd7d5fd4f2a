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

#include "prfaas/optimizer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "prfaas/error.h"

namespace prfaas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// True when candidate a should replace incumbent b.
bool better(const GridPoint& a, const GridPoint& b) {
  const double tol = 1e-12 * std::max(1.0, std::abs(b.lambda_max));
  if (a.lambda_max > b.lambda_max + tol) return true;
  if (a.lambda_max < b.lambda_max - tol) return false;
  if (a.split.decode != b.split.decode) return a.split.decode > b.split.decode;
  return a.t < b.t;
}

std::optional<GridPoint> evaluate(const DeploymentConfig& base, double t,
                                  PdSplit split) {
  try {
    const auto r = lambda_max(with_point(base, t, split));
    return GridPoint{t, split, r.lambda_max};
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::string csv_number(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

DeploymentConfig with_point(const DeploymentConfig& base, double t,
                            PdSplit split) {
  DeploymentConfig c = base;
  c.threshold = t;
  c.pd.prefill_instances = split.prefill;
  c.pd.decode_instances = split.decode;
  return c;
}

std::vector<double> default_t_grid(const LengthDistribution& dist, int n) {
  std::vector<double> grid;
  const double lo = std::log(dist.lower());
  const double hi = std::log(dist.upper());
  for (int i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    grid.push_back(std::exp(lo + f * (hi - lo)));
  }
  for (int pct = 1; pct <= 99; ++pct) grid.push_back(quantile(dist, pct / 100.0));
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

std::vector<PdSplit> splits_for_total(int64_t total, bool allow_zero_prefill) {
  std::vector<PdSplit> out;
  for (int64_t np = allow_zero_prefill ? 0 : 1; np <= total - 1; ++np) {
    out.push_back({np, total - np});
  }
  return out;
}

Optimum optimize(const SearchSpace& space) {
  if (space.splits.empty() || space.t_grid.empty()) {
    throw Error(ErrorKind::kInfeasibleSpace, "empty search space");
  }
  const bool uses_t = space.base.has_prfaas();
  const std::vector<double> t_grid =
      uses_t ? space.t_grid
             : std::vector<double>{space.base.workload.length_dist.upper()};

  Optimum o;
  std::optional<GridPoint> best;
  for (const auto& split : space.splits) {
    for (double t : t_grid) {
      auto pt = evaluate(space.base, t, split);
      if (!pt) continue;
      o.evaluated.push_back(*pt);
      if (!best || better(*pt, *best)) best = pt;
    }
  }
  if (!best) throw Error(ErrorKind::kInfeasibleSpace, "every grid point failed");

  if (uses_t && space.refine) {
    // lambda_max(t) is the min of a nondecreasing and a nonincreasing curve,
    // so it is unimodal between the neighbours of the best grid point.
    auto it = std::lower_bound(t_grid.begin(), t_grid.end(), best->t);
    double lo = it == t_grid.begin() ? best->t : *(it - 1);
    double hi = (it + 1) == t_grid.end() ? best->t : *(it + 1);
    const PdSplit split = best->split;
    auto f = [&](double t) {
      auto pt = evaluate(space.base, t, split);
      return pt ? pt->lambda_max : -kInf;
    };
    while (hi - lo > 1.0) {
      const double m1 = lo + (hi - lo) / 3.0;
      const double m2 = hi - (hi - lo) / 3.0;
      if (f(m1) < f(m2)) {
        lo = m1;
      } else {
        hi = m2;
      }
    }
    for (double t : {lo, 0.5 * (lo + hi), hi}) {
      auto pt = evaluate(space.base, t, split);
      if (!pt) continue;
      o.evaluated.push_back(*pt);
      if (better(*pt, *best)) best = pt;
    }
  }

  o.t_star = best->t;
  o.threshold_used = uses_t;
  o.split = best->split;
  const DeploymentConfig at_best = with_point(space.base, o.t_star, o.split);
  o.report = full_report(at_best);
  if (uses_t) o.threshold_sweep = sweep_threshold(at_best, space.t_grid);
  o.allocation_sweep = sweep_allocation(at_best, space.splits);
  return o;
}

std::vector<ThresholdRow> sweep_threshold(const DeploymentConfig& config,
                                          const std::vector<double>& t_grid) {
  std::vector<ThresholdRow> rows;
  rows.reserve(t_grid.size());
  for (double t : t_grid) {
    DeploymentConfig c = config;
    c.threshold = t;
    const SplitStats split = effective_split(c);
    ThresholdRow row;
    row.t = t;
    row.p = split.p;
    row.theta_prfaas_over_p = split.p > 0 ? theta_prfaas(c, split) / split.p : kInf;
    row.theta_pdp_over_1mp =
        split.p < 1 ? theta_pdp(c, split) / (1.0 - split.p) : kInf;
    row.theta_pdd = theta_pdd(c);
    row.lambda_max =
        std::min({row.theta_prfaas_over_p, row.theta_pdp_over_1mp, row.theta_pdd});
    rows.push_back(row);
  }
  return rows;
}

std::optional<double> find_crossing(const std::vector<ThresholdRow>& rows) {
  for (size_t i = 0; i + 1 < rows.size(); ++i) {
    const auto& a = rows[i];
    const auto& b = rows[i + 1];
    const double da = a.theta_prfaas_over_p - a.theta_pdp_over_1mp;
    const double db = b.theta_prfaas_over_p - b.theta_pdp_over_1mp;
    if (!std::isfinite(da) || !std::isfinite(db)) continue;
    if (da == 0.0) return a.t;
    if ((da < 0) != (db < 0)) {
      return a.t + (b.t - a.t) * da / (da - db);
    }
  }
  return std::nullopt;
}

std::vector<AllocationRow> sweep_allocation(const DeploymentConfig& config,
                                            const std::vector<PdSplit>& splits) {
  std::vector<AllocationRow> rows;
  for (const auto& s : splits) {
    const DeploymentConfig c = with_point(config, config.threshold, s);
    AllocationRow row;
    row.np = s.prefill;
    row.nd = s.decode;
    const SplitStats split = effective_split(c);
    const double tp = split.p > 0 ? theta_prfaas(c, split) : 0.0;
    const double tq = split.p < 1 ? theta_pdp(c, split) : 0.0;
    row.theta_producer = tp + tq;
    row.theta_pdd = theta_pdd(c);
    try {
      row.lambda_max = lambda_max(c).lambda_max;
    } catch (const Error&) {
      row.lambda_max = 0.0;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string threshold_csv(const std::vector<ThresholdRow>& rows) {
  std::string out = "t,p,theta_prfaas_over_p,theta_pdp_over_1mp,theta_pdd,lambda_max\n";
  for (const auto& r : rows) {
    out += csv_number(r.t) + ',' + csv_number(r.p) + ',' +
           csv_number(r.theta_prfaas_over_p) + ',' +
           csv_number(r.theta_pdp_over_1mp) + ',' + csv_number(r.theta_pdd) +
           ',' + csv_number(r.lambda_max) + '\n';
  }
  return out;
}

std::string allocation_csv(const std::vector<AllocationRow>& rows) {
  std::string out = "np,nd,theta_producer,theta_pdd,lambda_max\n";
  for (const auto& r : rows) {
    out += std::to_string(r.np) + ',' + std::to_string(r.nd) + ',' +
           csv_number(r.theta_producer) + ',' + csv_number(r.theta_pdd) + ',' +
           csv_number(r.lambda_max) + '\n';
  }
  return out;
}

nlohmann::json optimum_to_json(const Optimum& o) {
  nlohmann::json j;
  j["t_star"] = o.threshold_used ? nlohmann::json(o.t_star) : nlohmann::json(nullptr);
  j["threshold_used"] = o.threshold_used;
  j["np_star"] = o.split.prefill;
  j["nd_star"] = o.split.decode;
  j["report"] = report_to_json(o.report);
  j["grid_points_evaluated"] = o.evaluated.size();
  return j;
}

}  // namespace prfaas
