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

#include "prfaas/workload.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "prfaas/error.h"

namespace prfaas {

namespace {

const boost::math::normal kStdNormal(0.0, 1.0);

double std_cdf(double z) {
  if (z == std::numeric_limits<double>::infinity()) return 1.0;
  if (z == -std::numeric_limits<double>::infinity()) return 0.0;
  return boost::math::cdf(kStdNormal, z);
}

}  // namespace

LengthDistribution LengthDistribution::truncated_lognormal(double mu,
                                                           double sigma,
                                                           double lower,
                                                           double upper) {
  if (!(sigma > 0) || !std::isfinite(mu)) {
    throw Error(ErrorKind::kDegenerateDistribution, "sigma must be > 0");
  }
  if (!(lower > 0) || !(lower < upper)) {
    throw Error(ErrorKind::kDegenerateDistribution,
                "truncation bounds must satisfy 0 < lower < upper");
  }
  LengthDistribution d;
  d.kind_ = LengthDistributionKind::kTruncatedLognormal;
  d.mu_ = mu;
  d.sigma_ = sigma;
  d.lower_ = lower;
  d.upper_ = upper;
  d.mass_ = std_cdf((std::log(upper) - mu) / sigma) -
            std_cdf((std::log(lower) - mu) / sigma);
  if (!(d.mass_ > 0)) {
    throw Error(ErrorKind::kDegenerateDistribution,
                "truncation interval carries no probability mass");
  }
  return d;
}

LengthDistribution LengthDistribution::empirical(std::vector<int64_t> samples,
                                                 double lower, double upper) {
  if (samples.empty()) {
    throw Error(ErrorKind::kDegenerateDistribution, "empty sample set");
  }
  if (!(lower < upper)) {
    throw Error(ErrorKind::kDegenerateDistribution, "lower must be < upper");
  }
  std::sort(samples.begin(), samples.end());
  if (samples.front() < lower || samples.back() > upper) {
    throw Error(ErrorKind::kDegenerateDistribution,
                "samples fall outside [lower, upper]");
  }
  LengthDistribution d;
  d.kind_ = LengthDistributionKind::kEmpirical;
  d.lower_ = lower;
  d.upper_ = upper;
  d.samples_ = std::move(samples);
  return d;
}

double LengthDistribution::cdf(double x) const {
  if (x < lower_) return 0.0;
  if (x >= upper_) return 1.0;
  if (kind_ == LengthDistributionKind::kEmpirical) {
    auto it = std::upper_bound(samples_.begin(), samples_.end(), x);
    return static_cast<double>(it - samples_.begin()) / samples_.size();
  }
  const double za = (std::log(lower_) - mu_) / sigma_;
  const double zx = (std::log(x) - mu_) / sigma_;
  return (std_cdf(zx) - std_cdf(za)) / mass_;
}

double LengthDistribution::partial_mean(double a, double b) const {
  if (kind_ == LengthDistributionKind::kEmpirical) {
    return partial_expectation([](double l) { return l; }, a, b);
  }
  a = std::max(a, lower_);
  b = std::min(b, upper_);
  if (!(a < b)) return 0.0;
  // E[L ; a < L <= b] for a log-normal: exp(mu + s^2/2) times the normal
  // mass of the interval shifted by sigma in z-space.
  const double za = (std::log(a) - mu_) / sigma_ - sigma_;
  const double zb = (std::log(b) - mu_) / sigma_ - sigma_;
  return std::exp(mu_ + 0.5 * sigma_ * sigma_) * (std_cdf(zb) - std_cdf(za)) /
         mass_;
}

double LengthDistribution::partial_expectation(
    const std::function<double(double)>& f, double a, double b,
    const std::vector<double>& breakpoints) const {
  if (kind_ == LengthDistributionKind::kEmpirical) {
    // Half-open (a, b], except that a <= lower includes the lower bound.
    auto first = a <= lower_
                     ? samples_.begin()
                     : std::upper_bound(samples_.begin(), samples_.end(), a);
    auto last = std::upper_bound(samples_.begin(), samples_.end(), b);
    double sum = 0.0;
    for (auto it = first; it < last; ++it) sum += f(static_cast<double>(*it));
    return sum / samples_.size();
  }
  a = std::max(a, lower_);
  b = std::min(b, upper_);
  if (!(a < b)) return 0.0;
  std::vector<double> cuts{std::log(a)};
  for (double x : breakpoints) {
    if (x > a && x < b) cuts.push_back(std::log(x));
  }
  cuts.push_back(std::log(b));
  std::sort(cuts.begin(), cuts.end());
  const double mu = mu_;
  const double sigma = sigma_;
  auto integrand = [&](double u) {
    const double z = (u - mu) / sigma;
    return f(std::exp(u)) * std::exp(-0.5 * z * z) /
           (sigma * std::sqrt(2.0 * M_PI));
  };
  double total = 0.0;
  for (size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        integrand, cuts[i], cuts[i + 1], 10, 1e-12);
  }
  return total / mass_;
}

double mean_length(const LengthDistribution& dist) {
  return dist.partial_mean(dist.lower(), dist.upper());
}

SplitStats split_stats(const LengthDistribution& dist, double t) {
  SplitStats s;
  s.t = std::clamp(t, dist.lower(), dist.upper());
  s.p = 1.0 - dist.cdf(s.t);
  if (dist.kind() == LengthDistributionKind::kTruncatedLognormal &&
      s.t <= dist.lower()) {
    s.p = 1.0;
  }
  s.p = std::clamp(s.p, 0.0, 1.0);
  const double below = dist.partial_mean(dist.lower(), s.t);
  const double above = dist.partial_mean(s.t, dist.upper());
  if (s.p > 0.0) s.l_long = above / s.p;
  if (s.p < 1.0) s.l_short = below / (1.0 - s.p);
  return s;
}

double quantile(const LengthDistribution& dist, double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw Error(ErrorKind::kOutOfRange, "quantile level must be in (0, 1)");
  }
  if (dist.kind() == LengthDistributionKind::kEmpirical) {
    const auto& s = dist.samples();
    const size_t rank = static_cast<size_t>(std::ceil(q * s.size()));
    return static_cast<double>(s[std::clamp<size_t>(rank, 1, s.size()) - 1]);
  }
  const double fa = std_cdf((std::log(dist.lower()) - dist.mu()) / dist.sigma());
  const double fb = std_cdf((std::log(dist.upper()) - dist.mu()) / dist.sigma());
  const double target = fa + q * (fb - fa);
  if (target >= 1.0) return dist.upper();
  const double z = boost::math::quantile(kStdNormal, target);
  return std::clamp(std::exp(dist.mu() + dist.sigma() * z), dist.lower(),
                    dist.upper());
}

std::vector<RequestArrival> sample_trace(const WorkloadSpec& spec, int64_t n) {
  std::vector<RequestArrival> out;
  if (n <= 0) return out;
  out.reserve(static_cast<size_t>(n));
  std::mt19937_64 rng(spec.seed);
  const auto& dist = spec.length_dist;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> gap(
      spec.arrival_rate > 0 ? spec.arrival_rate : 1.0);
  std::uniform_int_distribution<size_t> pick(
      0, dist.samples().empty() ? 0 : dist.samples().size() - 1);

  double now = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    RequestArrival r;
    r.id = i;
    if (spec.arrival_rate > 0) {
      now += spec.process == ArrivalProcess::kPoisson ? gap(rng)
                                                      : 1.0 / spec.arrival_rate;
    }
    r.arrival_time = now;
    if (dist.kind() == LengthDistributionKind::kEmpirical) {
      r.l_total = dist.samples()[pick(rng)];
    } else {
      double l;
      do {
        l = std::exp(dist.mu() + dist.sigma() * normal(rng));
      } while (l < dist.lower() || l > dist.upper());
      r.l_total = std::clamp<int64_t>(std::llround(l),
                                      static_cast<int64_t>(std::ceil(dist.lower())),
                                      static_cast<int64_t>(dist.upper()));
    }
    r.output_len = spec.output_len;
    out.push_back(r);
  }
  return out;
}

std::vector<int64_t> load_trace_lengths(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kConfigError, "cannot open trace " + path);
  std::vector<int64_t> lengths;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    int64_t v;
    if (!(ss >> v)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw Error(ErrorKind::kConfigError,
                  path + ":" + std::to_string(line_no) + ": not an integer");
    }
    lengths.push_back(v);
  }
  return lengths;
}

nlohmann::json distribution_to_json(const LengthDistribution& d) {
  if (d.kind() == LengthDistributionKind::kEmpirical) {
    return {{"kind", "empirical"},
            {"lower", d.lower()},
            {"upper", d.upper()},
            {"samples", d.samples()}};
  }
  return {{"kind", "truncated_lognormal"},
          {"mu", d.mu()},
          {"sigma", d.sigma()},
          {"lower", d.lower()},
          {"upper", d.upper()}};
}

LengthDistribution distribution_from_json(const nlohmann::json& j,
                                          const std::string& base_dir) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "truncated_lognormal") {
      return LengthDistribution::truncated_lognormal(
          j.at("mu").get<double>(), j.at("sigma").get<double>(),
          j.at("lower").get<double>(), j.at("upper").get<double>());
    }
    if (kind == "empirical") {
      std::vector<int64_t> samples;
      if (j.contains("samples")) {
        samples = j["samples"].get<std::vector<int64_t>>();
      } else {
        std::filesystem::path p = j.at("trace_file").get<std::string>();
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        samples = load_trace_lengths(p.string());
      }
      double lower = j.contains("lower") ? j["lower"].get<double>()
                     : samples.empty()
                         ? 0.0
                         : static_cast<double>(
                               *std::min_element(samples.begin(), samples.end()));
      double upper = j.contains("upper") ? j["upper"].get<double>()
                     : samples.empty()
                         ? 1.0
                         : static_cast<double>(
                               *std::max_element(samples.begin(), samples.end()));
      if (!(lower < upper)) upper = lower + 1.0;
      return LengthDistribution::empirical(std::move(samples), lower, upper);
    }
    throw Error(ErrorKind::kConfigError, "unknown distribution kind " + kind);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfigError,
                std::string("malformed length distribution: ") + e.what());
  }
}

nlohmann::json workload_to_json(const WorkloadSpec& s) {
  return {{"length_dist", distribution_to_json(s.length_dist)},
          {"output_len", s.output_len},
          {"arrival",
           {{"rate", s.arrival_rate},
            {"process", s.process == ArrivalProcess::kPoisson
                            ? "poisson"
                            : "deterministic_uniform"}}},
          {"seed", s.seed}};
}

WorkloadSpec workload_from_json(const nlohmann::json& j,
                                const std::string& base_dir) {
  WorkloadSpec s;
  try {
    s.length_dist = distribution_from_json(j.at("length_dist"), base_dir);
    s.output_len = j.value("output_len", int64_t{1024});
    if (j.contains("arrival")) {
      const auto& a = j["arrival"];
      s.arrival_rate = a.value("rate", 1.0);
      const auto process = a.value("process", std::string("poisson"));
      if (process == "poisson") {
        s.process = ArrivalProcess::kPoisson;
      } else if (process == "deterministic_uniform") {
        s.process = ArrivalProcess::kDeterministicUniform;
      } else {
        throw Error(ErrorKind::kConfigError, "unknown arrival process " + process);
      }
    }
    s.seed = j.value("seed", uint64_t{1});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfigError,
                std::string("malformed workload: ") + e.what());
  }
  if (s.output_len < 1) {
    throw Error(ErrorKind::kConfigError, "output_len must be >= 1");
  }
  if (s.arrival_rate < 0) {
    throw Error(ErrorKind::kConfigError, "arrival rate must be >= 0");
  }
  return s;
}

}  // namespace prfaas
