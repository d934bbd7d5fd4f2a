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

#include "doctest.h"
#include "prfaas/error.h"
#include "prfaas/optimizer.h"
#include "test_support.h"

using namespace prfaas;
using namespace prfaas::testing;

namespace {

SearchSpace case_space(double egress = 100) {
  SearchSpace s;
  s.base = case_study(19400, 3, 5, egress);
  s.t_grid = default_t_grid(s.base.workload.length_dist);
  s.splits = splits_for_total(8, false);
  return s;
}

}  // namespace

TEST_CASE("default grid covers the support and is sorted") {
  const auto d = WorkloadSpec{}.length_dist;
  const auto g = default_t_grid(d);
  CHECK(g.front() == doctest::Approx(128));
  CHECK(g.back() == doctest::Approx(131072));
  CHECK(g.size() >= 290);
  CHECK(std::is_sorted(g.begin(), g.end()));
  CHECK(std::adjacent_find(g.begin(), g.end()) == g.end());
}

TEST_CASE("splits for a fixed total") {
  const auto s = splits_for_total(4, false);
  REQUIRE(s.size() == 3);
  CHECK(s.front() == PdSplit{1, 3});
  CHECK(s.back() == PdSplit{3, 1});
  CHECK(splits_for_total(4, true).front() == PdSplit{0, 4});
}

TEST_CASE("case-study optimum") {
  auto space = case_space();
  const auto o = optimize(space);
  CHECK(o.split == PdSplit{3, 5});
  CHECK(std::abs(o.t_star - 19400) < 500);
  CHECK(rel_err(o.report.lambda_max, 3.24) < 0.05);
  CHECK(o.threshold_used);
  CHECK(o.report.ttft_mean_s.has_value());
}

TEST_CASE("optimum equals the brute-force maximum of its grid") {
  auto space = case_space();
  space.refine = false;
  const auto o = optimize(space);
  double best = -1;
  for (const auto& sp : space.splits) {
    for (double t : space.t_grid) {
      best = std::max(best, lambda_max(with_point(space.base, t, sp)).lambda_max);
    }
  }
  CHECK(o.report.lambda_max == best);
  for (const auto& g : o.evaluated) CHECK(g.lambda_max <= o.report.lambda_max);
  // Refinement can only help.
  CHECK(optimize(case_space()).report.lambda_max >= best);
}

TEST_CASE("adding grid points never lowers the optimum") {
  auto coarse = case_space();
  coarse.refine = false;
  coarse.t_grid = default_t_grid(coarse.base.workload.length_dist, 20);
  auto fine = coarse;
  fine.t_grid = default_t_grid(fine.base.workload.length_dist, 400);
  fine.t_grid.insert(fine.t_grid.end(), coarse.t_grid.begin(), coarse.t_grid.end());
  std::sort(fine.t_grid.begin(), fine.t_grid.end());
  CHECK(optimize(fine).report.lambda_max >= optimize(coarse).report.lambda_max);
}

TEST_CASE("lambda_max is monotone in bandwidth and prfaas instances") {
  double prev = 0;
  for (double b : {0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 100.0, 1e6}) {
    const double v = optimize(case_space(b)).report.lambda_max;
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
  prev = 0;
  for (int n : {1, 2, 4, 8}) {
    auto s = case_space();
    s.base.prfaas->instances = n;
    const double v = optimize(s).report.lambda_max;
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
}

TEST_CASE("homogeneous optimum ignores the threshold") {
  SearchSpace s;
  s.base = homogeneous();
  s.t_grid = {1000, 5000};
  s.splits = splits_for_total(12, false);
  const auto o = optimize(s);
  CHECK_FALSE(o.threshold_used);
  CHECK(o.split == PdSplit{9, 3});
  CHECK(rel_err(o.report.lambda_max, 2.11) < 0.05);
  CHECK(o.threshold_sweep.empty());
  CHECK(optimum_to_json(o)["t_star"].is_null());
}

TEST_CASE("single-point grid returns that point") {
  SearchSpace s;
  s.base = case_study();
  s.t_grid = {12345};
  s.splits = {{2, 6}};
  const auto o = optimize(s);
  CHECK(o.t_star == 12345);
  CHECK(o.split == PdSplit{2, 6});
}

TEST_CASE("infeasible spaces") {
  SearchSpace s;
  s.base = homogeneous();
  s.t_grid = {1000};
  s.splits = {{0, 12}};
  try {
    optimize(s);
    FAIL("expected InfeasibleSpace");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInfeasibleSpace);
  }
  s.splits.clear();
  CHECK_THROWS_AS(optimize(s), Error);
}

TEST_CASE("ties prefer more decode instances then smaller t") {
  // Decode-starved everywhere: every t gives the same lambda per split.
  SearchSpace s;
  s.base = case_study();
  s.base.pd.profile.decode_token_rate = 1.0;
  s.base.pd.profile.max_batch_size.reset();
  s.base.pd.profile.decode_step_s.reset();
  s.t_grid = {5000, 10000, 20000};
  s.splits = {{4, 4}};
  s.refine = false;
  const auto o = optimize(s);
  CHECK(o.t_star == 5000);
}

TEST_CASE("threshold sweep endpoints and crossing") {
  const auto c = case_study();
  const auto grid = default_t_grid(c.workload.length_dist);
  const auto rows = sweep_threshold(c, grid);
  CHECK(rows.front().p == doctest::Approx(1.0));
  CHECK(rows.front().lambda_max ==
        doctest::Approx(std::min(rows.front().theta_prfaas_over_p, rows.front().theta_pdd)));
  CHECK(rows.back().p == doctest::Approx(0.0));
  CHECK(std::isinf(rows.back().theta_prfaas_over_p));
  // One sign change only.
  int changes = 0;
  for (size_t i = 0; i + 1 < rows.size(); ++i) {
    const double a = rows[i].theta_prfaas_over_p - rows[i].theta_pdp_over_1mp;
    const double b = rows[i + 1].theta_prfaas_over_p - rows[i + 1].theta_pdp_over_1mp;
    if (std::isfinite(a) && std::isfinite(b) && (a < 0) != (b < 0)) ++changes;
  }
  CHECK(changes == 1);
  const auto x = find_crossing(rows);
  REQUIRE(x);
  CHECK(std::abs(*x - 19400) < 500);
  const auto o = optimize(case_space());
  auto step = std::upper_bound(grid.begin(), grid.end(), *x);
  CHECK(std::abs(*x - o.t_star) <= *step - *(step - 1));
}

TEST_CASE("balance at the interior optimum within one grid step") {
  auto space = case_space();
  const auto o = optimize(space);
  const auto at = with_point(space.base, o.t_star, o.split);
  const auto b = balance_residuals(at);
  auto it = std::upper_bound(space.t_grid.begin(), space.t_grid.end(), o.t_star);
  const auto lo = balance_residuals(with_point(space.base, *(it - 1), o.split));
  const auto hi = balance_residuals(with_point(space.base, *it, o.split));
  CHECK(std::abs(b.producer_balance) <=
        std::abs(hi.producer_balance - lo.producer_balance));
  // Pipeline residual: adjacent splits bound it.
  const auto left = balance_residuals(with_point(space.base, o.t_star, {2, 6}));
  const auto right = balance_residuals(with_point(space.base, o.t_star, {4, 4}));
  CHECK(std::abs(b.pipeline_balance) <=
        std::max(std::abs(b.pipeline_balance - left.pipeline_balance),
                 std::abs(right.pipeline_balance - b.pipeline_balance)));
}

TEST_CASE("allocation sweep") {
  const auto c = case_study(19400);
  const auto rows = sweep_allocation(c, splits_for_total(8, true));
  size_t peak = 0;
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].lambda_max > rows[peak].lambda_max) peak = i;
  }
  CHECK(rows[peak].np == 3);
  CHECK(rows[peak].nd == 5);
  // Unimodal: rises to the peak, falls after.
  for (size_t i = 1; i <= peak; ++i) CHECK(rows[i].lambda_max >= rows[i - 1].lambda_max);
  for (size_t i = peak + 1; i < rows.size(); ++i) {
    CHECK(rows[i].lambda_max <= rows[i - 1].lambda_max);
  }
  const auto& starved = rows.back();
  CHECK(starved.nd == 1);
  CHECK(starved.lambda_max == doctest::Approx(starved.theta_pdd));

  const auto nv = sweep_allocation(naive(), {{0, 8}});
  CHECK(rel_err(nv[0].lambda_max, 2.45) < 0.05);
}

TEST_CASE("sweep csv headers") {
  const auto c = case_study();
  const auto t = threshold_csv(sweep_threshold(c, {1000, 20000}));
  CHECK(t.rfind("t,p,theta_prfaas_over_p,theta_pdp_over_1mp,theta_pdd,lambda_max\n", 0) == 0);
  CHECK(std::count(t.begin(), t.end(), '\n') == 3);
  const auto a = allocation_csv(sweep_allocation(c, {{3, 5}}));
  CHECK(a.rfind("np,nd,theta_producer,theta_pdd,lambda_max\n3,5,", 0) == 0);
}
