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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "prfaas/error.h"
#include "prfaas/workload.h"
#include "test_support.h"

using namespace prfaas;
using prfaas::testing::rel_err;

namespace {

constexpr double kMu = 9.90;
constexpr double kSigma = 1.00;
constexpr double kLo = 128;
constexpr double kHi = 131072;

LengthDistribution case_dist() {
  return LengthDistribution::truncated_lognormal(kMu, kSigma, kLo, kHi);
}

double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Composite Simpson over u = ln x of f(x) * lognormal density, restricted to
// (a, b] and renormalized to [kLo, kHi].
double simpson_moment(const std::function<double(double)>& f, double a, double b) {
  const double mass = phi((std::log(kHi) - kMu) / kSigma) - phi((std::log(kLo) - kMu) / kSigma);
  const int n = 20000;
  const double ua = std::log(a), ub = std::log(b), h = (ub - ua) / n;
  double s = 0;
  for (int i = 0; i <= n; ++i) {
    const double u = ua + i * h;
    const double z = (u - kMu) / kSigma;
    const double g = f(std::exp(u)) * std::exp(-0.5 * z * z) / (kSigma * std::sqrt(2 * M_PI));
    s += g * (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2));
  }
  return s * h / 3 / mass;
}

struct McStats {
  double mean, p, l_long, l_short;
};

McStats monte_carlo(int n, double t, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::lognormal_distribution<double> ln(kMu, kSigma);
  double sum = 0, sum_long = 0, sum_short = 0;
  int n_long = 0;
  for (int i = 0; i < n;) {
    const double x = ln(rng);
    if (x < kLo || x > kHi) continue;
    ++i;
    sum += x;
    if (x > t) {
      ++n_long;
      sum_long += x;
    } else {
      sum_short += x;
    }
  }
  return {sum / n, double(n_long) / n, sum_long / n_long, sum_short / (n - n_long)};
}

}  // namespace

TEST_CASE("closed-form moments match quadrature") {
  const auto d = case_dist();
  const double mean = simpson_moment([](double x) { return x; }, kLo, kHi);
  CHECK(mean_length(d) == doctest::Approx(mean).epsilon(1e-8));
  CHECK(d.partial_mean(kLo, 19400) ==
        doctest::Approx(simpson_moment([](double x) { return x; }, kLo, 19400)).epsilon(1e-8));
  CHECK(d.cdf(19400) ==
        doctest::Approx(simpson_moment([](double) { return 1.0; }, kLo, 19400)).epsilon(1e-8));
  const double e_sq = d.partial_expectation([](double x) { return x * x; }, kLo, kHi);
  CHECK(e_sq == doctest::Approx(simpson_moment([](double x) { return x * x; }, kLo, kHi))
                    .epsilon(1e-7));
}

TEST_CASE("case-study workload statistics") {
  const auto d = case_dist();
  CHECK(rel_err(mean_length(d), 27000) < 0.05);
  const auto s = split_stats(d, 19400);
  CHECK(std::abs(s.p - 0.496) < 0.01);
  CHECK(rel_err(*s.l_long, 44000) < 0.05);
  // Direct normal-CDF arithmetic.
  const double za = (std::log(kLo) - kMu) / kSigma, zb = (std::log(kHi) - kMu) / kSigma;
  const double zt = (std::log(19400.0) - kMu) / kSigma;
  CHECK(s.p == doctest::Approx((phi(zb) - phi(zt)) / (phi(zb) - phi(za))).epsilon(1e-12));
  CHECK(s.p * *s.l_long + (1 - s.p) * *s.l_short == doctest::Approx(mean_length(d)));
}

TEST_CASE("closed form agrees with a 10^6-sample Monte Carlo") {
  const auto d = case_dist();
  const auto mc = monte_carlo(1000000, 19400, 42);
  const auto s = split_stats(d, 19400);
  CHECK(rel_err(mean_length(d), mc.mean) < 0.01);
  CHECK(rel_err(s.p, mc.p) < 0.01);
  CHECK(rel_err(*s.l_long, mc.l_long) < 0.01);
  CHECK(rel_err(*s.l_short, mc.l_short) < 0.01);
}

TEST_CASE("degenerate splits are flagged") {
  const auto d = case_dist();
  auto lo = split_stats(d, 0);
  CHECK(lo.p == 1.0);
  CHECK(!lo.l_short);
  CHECK(lo.degenerate());
  CHECK(*lo.l_long == doctest::Approx(mean_length(d)));
  auto hi = split_stats(d, 1e9);
  CHECK(hi.p == 0.0);
  CHECK(!hi.l_long);
  CHECK(*hi.l_short == doctest::Approx(mean_length(d)));
}

TEST_CASE("p is non-increasing in t") {
  const auto d = case_dist();
  double prev = 1.0;
  for (double t = 64; t < 2e5; t *= 1.13) {
    const double p = split_stats(d, t).p;
    CHECK(p <= prev + 1e-15);
    prev = p;
  }
}

TEST_CASE("quantiles invert the cdf") {
  const auto d = case_dist();
  for (double q : {0.01, 0.1, 0.5, 0.9, 0.99}) {
    CHECK(d.cdf(quantile(d, q)) == doctest::Approx(q).epsilon(1e-9));
  }
  CHECK_THROWS_AS(quantile(d, 0.0), Error);
  CHECK_THROWS_AS(quantile(d, 1.0), Error);
}

TEST_CASE("invalid distributions") {
  auto expect_kind = [](auto fn) {
    try {
      fn();
      FAIL("expected DegenerateDistribution");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kDegenerateDistribution);
    }
  };
  expect_kind([] { LengthDistribution::truncated_lognormal(9.9, 0.0, 128, 1000); });
  expect_kind([] { LengthDistribution::truncated_lognormal(9.9, 1.0, 1000, 128); });
  expect_kind([] { LengthDistribution::empirical({}, 1, 10); });
}

TEST_CASE("empirical distribution statistics by counting") {
  std::vector<int64_t> xs = {100, 200, 300, 400, 1000};
  const auto d = LengthDistribution::empirical(xs, 100, 1000);
  CHECK(mean_length(d) == doctest::Approx(400.0));
  const auto s = split_stats(d, 300);
  CHECK(s.p == doctest::Approx(0.4));
  CHECK(*s.l_long == doctest::Approx(700.0));
  CHECK(*s.l_short == doctest::Approx(200.0));
  CHECK(quantile(d, 0.5) == 300);
  CHECK(quantile(d, 0.9) == 1000);
  CHECK(d.cdf(100) == doctest::Approx(0.2));
}

TEST_CASE("trace sampling is deterministic and bounded") {
  WorkloadSpec spec;
  spec.arrival_rate = 2.0;
  spec.seed = 9;
  const auto a = sample_trace(spec, 5000);
  const auto b = sample_trace(spec, 5000);
  const auto prefix = sample_trace(spec, 100);
  REQUIRE(a.size() == 5000);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].arrival_time == b[i].arrival_time);
    CHECK(a[i].l_total == b[i].l_total);
    CHECK(a[i].l_total >= 128);
    CHECK(a[i].l_total <= 131072);
    CHECK(a[i].output_len == 1024);
    if (i > 0) CHECK(a[i].arrival_time >= a[i - 1].arrival_time);
  }
  for (size_t i = 0; i < prefix.size(); ++i) CHECK(prefix[i].l_total == a[i].l_total);
  spec.seed = 10;
  CHECK(sample_trace(spec, 10)[3].l_total != a[3].l_total);
  // Rate check: 5000 poisson arrivals at 2/s span about 2500 s.
  CHECK(a.back().arrival_time == doctest::Approx(2500).epsilon(0.05));

  spec.process = ArrivalProcess::kDeterministicUniform;
  const auto u = sample_trace(spec, 4);
  CHECK(u[1].arrival_time - u[0].arrival_time == doctest::Approx(0.5));
  CHECK(u[3].arrival_time - u[2].arrival_time == doctest::Approx(0.5));
}

TEST_CASE("trace file lengths") {
  const std::string path = "/tmp/prfaas_trace_test.txt";
  {
    std::ofstream os(path);
    os << "# lengths\n100\n\n2000\n  300 \n";
  }
  const auto xs = load_trace_lengths(path);
  CHECK(xs == std::vector<int64_t>{100, 2000, 300});
  nlohmann::json j = {{"kind", "empirical"}, {"trace_file", "prfaas_trace_test.txt"},
                      {"lower", 1}, {"upper", 5000}};
  const auto d = distribution_from_json(j, "/tmp");
  CHECK(mean_length(d) == doctest::Approx(800.0));
  CHECK_THROWS_AS(load_trace_lengths("/nonexistent/trace.txt"), Error);
}

TEST_CASE("workload json round trip") {
  WorkloadSpec spec;
  spec.arrival_rate = 3.5;
  spec.process = ArrivalProcess::kDeterministicUniform;
  spec.seed = 77;
  spec.output_len = 512;
  const auto j = workload_to_json(spec);
  const auto back = workload_from_json(j);
  CHECK(workload_to_json(back) == j);
  CHECK(back.length_dist.mu() == 9.90);

  const auto e = LengthDistribution::empirical({5, 3, 9}, 1, 10);
  CHECK(distribution_to_json(distribution_from_json(distribution_to_json(e))) ==
        distribution_to_json(e));
  CHECK_THROWS_AS(distribution_from_json({{"kind", "weibull"}}), Error);
}
