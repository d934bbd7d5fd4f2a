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

#include <fstream>

#include "doctest.h"
#include "prfaas/config.h"
#include "prfaas/error.h"
#include "test_support.h"

using namespace prfaas;
using namespace prfaas::testing;
using nlohmann::json;

namespace {

json read(const std::string& rel) {
  std::ifstream in(source_path(rel));
  return json::parse(in);
}

std::string configs() { return source_path("configs"); }

ErrorKind kind_of(const json& j) {
  try {
    parse_run_config(j, configs());
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kOutOfRange;
}

}  // namespace

TEST_CASE("shipped configs load") {
  for (const char* name : {"case_study", "homogeneous", "three_way"}) {
    CAPTURE(name);
    const auto c = load_run_config(source_path(std::string("configs/") + name + ".json"));
    CHECK(c.profiles.size() == 2);
    CHECK(c.simulator.seed == 7);
    CHECK_NOTHROW(active_deployment(c));
  }
}

TEST_CASE("GPU counts convert to whole instances") {
  const auto c = load_run_config(source_path("configs/case_study.json"));
  const auto& d = active_deployment(c);
  REQUIRE(d.config.prfaas);
  CHECK(d.config.prfaas->instances == 4);
  CHECK(d.config.prfaas->egress_gbps == 100);
  CHECK(d.pd_total == 8);
  CHECK(d.config.pd.prefill_instances + d.config.pd.decode_instances == 8);
  CHECK(d.config.threshold == 19400);
  CHECK(d.config.workload.length_dist.mu() == doctest::Approx(9.9));
}

TEST_CASE("three-way config") {
  const auto c = load_run_config(source_path("configs/three_way.json"));
  CHECK(c.deployments.size() == 3);
  CHECK(active_deployment(c).name == "prfaas-pd");
  CHECK(c.compare_baseline == "homogeneous");
  const auto& h = find_deployment(c, "homogeneous");
  CHECK_FALSE(h.config.prfaas);
  CHECK(h.pd_total == 12);
  const auto& n = find_deployment(c, "naive");
  CHECK(n.config.pd.prefill_instances == 0);
  CHECK(n.config.pd.decode_instances == 8);
  const auto s = search_space_for(c, n);
  CHECK(s.t_grid == std::vector<double>{0.0});
  REQUIRE(s.splits.size() == 1);
  CHECK(s.splits[0] == PdSplit{0, 8});
  CHECK_THROWS_AS(find_deployment(c, "missing"), Error);
}

TEST_CASE("serialize and parse round trip") {
  for (const char* name : {"case_study", "three_way"}) {
    const auto a = parse_run_config(read(std::string("configs/") + name + ".json"), configs());
    const auto ja = run_config_to_json(a);
    const auto b = parse_run_config(ja, configs());
    CHECK(run_config_to_json(b) == ja);
    CHECK(b.deployments.size() == a.deployments.size());
    const auto oa = simulation_options_for(a);
    const auto ob = simulation_options_for(b);
    CHECK(oa.duration_s == ob.duration_s);
    CHECK(oa.seed == ob.seed);
    CHECK(oa.policy.util_threshold == ob.policy.util_threshold);
  }
}

TEST_CASE("malformed configs") {
  const json base = read("configs/case_study.json");

  auto j = base;
  j["profiles"] = json::array();
  CHECK(kind_of(j) == ErrorKind::kConfigError);

  j = base;
  j["deployments"][0]["pd"]["profile"] = "nope";
  CHECK(kind_of(j) == ErrorKind::kConfigError);

  j = base;
  auto second = j["deployments"][0];
  second["name"] = "other";
  j["deployments"].push_back(second);
  CHECK(kind_of(j) == ErrorKind::kConfigError);

  j = base;
  j["deployments"][0]["pd"] = {{"profile", "internal-1t-h20"},
                               {"prefill_instances", 3},
                               {"decode_instances", 5},
                               {"total_instances", 9}};
  CHECK(kind_of(j) == ErrorKind::kConfigError);

  j = base;
  j["deployments"][0]["prfaas"]["egress_gbps"] = -1;
  CHECK(kind_of(j) == ErrorKind::kConfigError);

  j = base;
  j["version"] = 2;
  CHECK(kind_of(j) == ErrorKind::kConfigError);

  j = base;
  j["deployments"][0].erase("pd");
  CHECK(kind_of(j) == ErrorKind::kConfigError);

  j = base;
  j["simulator"]["load_factors"] = json::array();
  CHECK(kind_of(j) == ErrorKind::kConfigError);

  CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), Error);
}
