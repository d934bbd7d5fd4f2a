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

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace prfaas {

enum class LengthDistributionKind { kTruncatedLognormal, kEmpirical };

// Distribution of uncached input length L, supported on [lower, upper].
// The analytic kind is a log-normal conditioned on the interval.
class LengthDistribution {
 public:
  static LengthDistribution truncated_lognormal(double mu, double sigma,
                                                double lower, double upper);
  // Samples need not be sorted; bounds must contain every sample.
  static LengthDistribution empirical(std::vector<int64_t> samples,
                                      double lower, double upper);

  LengthDistributionKind kind() const { return kind_; }
  double mu() const { return mu_; }
  double sigma() const { return sigma_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  // Sorted ascending; empty for the analytic kind.
  const std::vector<int64_t>& samples() const { return samples_; }

  // P(L <= x).
  double cdf(double x) const;

  // E[f(L) ; a < L <= b], the unnormalized partial expectation (a at or
  // below the lower bound includes it). For the
  // analytic kind this is adaptive Gauss-Kronrod over log-length with the
  // given interior breakpoints (kinks of f) honoured exactly.
  double partial_expectation(const std::function<double(double)>& f, double a,
                             double b,
                             const std::vector<double>& breakpoints = {}) const;

  // E[L ; a < L <= b] in closed form (analytic) or by partition (empirical).
  double partial_mean(double a, double b) const;

 private:
  LengthDistribution() = default;

  LengthDistributionKind kind_ = LengthDistributionKind::kTruncatedLognormal;
  double mu_ = 0.0;
  double sigma_ = 1.0;
  double lower_ = 0.0;
  double upper_ = 0.0;
  double mass_ = 1.0;  // untruncated probability of [lower, upper]
  std::vector<int64_t> samples_;
};

struct SplitStats {
  double t = 0.0;
  double p = 0.0;                  // P(L > t)
  std::optional<double> l_long;    // E[L | L > t]; empty when p == 0
  std::optional<double> l_short;   // E[L | L <= t]; empty when p == 1

  bool degenerate() const { return !l_long || !l_short; }
};

double mean_length(const LengthDistribution& dist);

// Thresholds outside [lower, upper] are clamped; p = 0 or 1 is reported with
// the empty side left unset rather than thrown.
SplitStats split_stats(const LengthDistribution& dist, double t);

double quantile(const LengthDistribution& dist, double q);

enum class ArrivalProcess { kDeterministicUniform, kPoisson };

struct WorkloadSpec {
  LengthDistribution length_dist =
      LengthDistribution::truncated_lognormal(9.90, 1.00, 128, 131072);
  int64_t output_len = 1024;
  double arrival_rate = 1.0;  // requests/s
  ArrivalProcess process = ArrivalProcess::kPoisson;
  uint64_t seed = 1;
};

struct RequestArrival {
  int64_t id = 0;
  double arrival_time = 0.0;
  int64_t l_total = 0;
  int64_t cached_pd = 0;
  int64_t cached_prfaas = 0;
  int64_t output_len = 0;
};

// Deterministic in spec.seed. Lengths are rejection-sampled into the
// distribution bounds (or resampled from the empirical set).
std::vector<RequestArrival> sample_trace(const WorkloadSpec& spec, int64_t n);

// Newline-delimited integer token lengths; blank lines and '#' comments are
// skipped.
std::vector<int64_t> load_trace_lengths(const std::string& path);

nlohmann::json distribution_to_json(const LengthDistribution& dist);
LengthDistribution distribution_from_json(const nlohmann::json& j,
                                          const std::string& base_dir = ".");
nlohmann::json workload_to_json(const WorkloadSpec& spec);
WorkloadSpec workload_from_json(const nlohmann::json& j,
                                const std::string& base_dir = ".");

}  // namespace prfaas
