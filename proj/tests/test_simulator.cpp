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
#include "prfaas/simulator.h"
#include "test_support.h"

using namespace prfaas;
using namespace prfaas::testing;

namespace {

DeploymentConfig loaded(DeploymentConfig c, double factor) {
  c.workload.arrival_rate = factor * lambda_max(c).lambda_max;
  c.workload.seed = 11;
  return c;
}

SimulationOptions opts(double duration, uint64_t seed = 5) {
  SimulationOptions o;
  o.duration_s = duration;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_CASE("identical seeds give identical runs") {
  const auto c = loaded(case_study(), 0.7);
  auto o = opts(900);
  o.record_requests = true;
  const auto a = run(c, o);
  const auto b = run(c, o);
  CHECK(metrics_to_json(a.metrics).dump() == metrics_to_json(b.metrics).dump());
  CHECK(series_csv(a.series) == series_csv(b.series));
  REQUIRE(a.requests.size() == b.requests.size());
  for (size_t i = 0; i < a.requests.size(); ++i) {
    CHECK(a.requests[i].decode_end == b.requests[i].decode_end);
  }
  o.seed = 6;
  CHECK(series_csv(run(c, o).series) != series_csv(a.series));
}

TEST_CASE("requests are conserved and causally ordered") {
  auto o = opts(1800);
  o.record_requests = true;
  o.record_epochs = true;
  for (double factor : {0.5, 1.3}) {
    const auto c = loaded(case_study(), factor);
    const auto r = run(c, o);
    REQUIRE_FALSE(r.series.empty());
    for (const auto& row : r.series) {
      CHECK(row.arrived == row.completed + row.in_flight + row.queued);
      CHECK(row.queued == row.queue_prfaas + row.queue_pdp + row.queue_pdd);
      CHECK(row.egress_util <= 1.0 + 1e-9);
    }
    for (const auto& q : r.requests) {
      if (q.decode_end < 0) continue;
      CHECK(q.arrival_time <= q.routed);
      CHECK(q.routed <= q.prefill_start);
      CHECK(q.prefill_start <= q.prefill_end);
      CHECK(q.prefill_end <= q.transfer_end);
      CHECK(q.transfer_end <= q.decode_start);
      CHECK(q.decode_start <= q.decode_end);
      CHECK(q.ttft() >= 0);
    }
    for (const auto& e : r.epochs) CHECK(e.total_rate <= 100e9 * (1 + 1e-9));
  }
}

TEST_CASE("single offloaded request pays prefill or transfer time") {
  auto c = case_study(1000);
  RequestArrival a;
  a.id = 0;
  a.arrival_time = 1.0;
  a.l_total = 32768;
  a.output_len = 16;
  auto o = opts(100);
  o.warmup_fraction = 0;
  o.record_requests = true;
  const auto r = run_trace(c, {a}, o);
  REQUIRE(r.requests.size() == 1);
  const auto& q = r.requests[0];
  CHECK(q.target == RouteTarget::kPrfaas);
  const double want = offload_ttft(c, 32768);
  CHECK(q.ttft() == doctest::Approx(want).epsilon(1e-6));
  CHECK(q.ttft() == doctest::Approx(1.84).epsilon(0.02));
  CHECK(r.metrics.completed == 1);

  // The same request stays local above the threshold.
  c.threshold = 40000;
  const auto local = run_trace(c, {a}, o);
  CHECK(local.requests[0].target == RouteTarget::kPdPrefill);
  CHECK(local.requests[0].ttft() == doctest::Approx(local_ttft(c, 32768)).epsilon(1e-6));
}

TEST_CASE("edge configurations") {
  const auto c = loaded(case_study(), 0.5);
  const auto r = run(c, opts(0));
  CHECK(r.metrics.arrived == 0);
  CHECK(r.metrics.completed == 0);

  auto bad = c;
  bad.pd.decode_instances = 0;
  try {
    run(bad, opts(60));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfigError);
  }
  CHECK_THROWS_AS(run(c, opts(-1)), Error);
}

TEST_CASE("light-load TTFT tracks the analytic estimate") {
  const auto c = loaded(case_study(), 0.1);
  const auto analytic = ttft_stats(c);
  const auto r = run(c, opts(7200));
  CHECK(r.metrics.completed > 1000);
  CHECK(r.metrics.ttft_mean_s >= analytic.mean_s * 0.98);
  CHECK(rel_err(r.metrics.ttft_mean_s, analytic.mean_s) <= 0.15);
}

TEST_CASE("stable below capacity") {
  const auto c = loaded(case_study(), 0.9);
  const auto r = run(c, opts(3600));
  CHECK(rel_err(r.metrics.achieved_throughput, r.metrics.offered_rate) <= 0.05);
  const auto& last = r.series.back();
  CHECK(last.queued < 40);
}

TEST_CASE("decode batch size and congestion signal") {
  CHECK(decode_batch_size(h20(), 40) == 20);
  auto p = h20();
  p.max_batch_size.reset();
  CHECK(decode_batch_size(p, 40) == 20);
  CHECK(decode_batch_size(p, 1e9) == 1);

  EgressLink link(100);
  SchedulerPolicy pol;
  auto s = congestion_signal(link, 10, 7, pol, 4);
  CHECK(s.queue_threshold == 8);
  CHECK_FALSE(s.triggered());
  s = congestion_signal(link, 10, 8, pol, 4);
  CHECK(s.triggered());
}

TEST_CASE("thin link raises the threshold in closed loop") {
  auto c = case_study(19400, 3, 5, 8);
  c.workload.arrival_rate = 0.8 * lambda_max(c).lambda_max;
  c.workload.seed = 3;
  auto o = opts(3600, 3);
  o.policy.long_term_enabled = false;
  const auto r = run(c, o);
  REQUIRE_FALSE(r.threshold_updates.empty());
  const auto& u = r.threshold_updates.front();
  CHECK(u.new_t > 19400);
  CHECK(r.metrics.final_threshold > 19400);

  SearchSpace s;
  s.base = c;
  s.t_grid = default_t_grid(c.workload.length_dist);
  s.splits = {{3, 5}};
  CHECK(r.metrics.final_threshold == doctest::Approx(optimize(s).t_star));
}
