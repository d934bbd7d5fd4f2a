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

// Back-solves the H20 (PD cluster) profile of the internal 1T model from the
// reference optimal-configuration table, then writes it as a profile JSON.
//
//   derive_h20_profile <h200-profile.json> <out.json>
//
// Decode: every column gives rate = theta_pdd * L_out / N_d.
// Prefill: theta_pdp = N_p / T(l) pins T at l_short (t = 19.4K) and at E[L]
// (homogeneous PD serves the whole distribution), and the homogeneous P90
// TTFT pins T at the 90th length percentile. Sizes are taken from the H200
// table since the KV footprint does not depend on the accelerator.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <vector>

#include "prfaas/profiles.h"
#include "prfaas/workload.h"

namespace {

using prfaas::Extrapolation;

struct Column {
  const char* name;
  double theta_pdd;
  int n_d;
};

constexpr double kOutputLen = 1024;
constexpr double kThreshold = 19400;
constexpr int kMaxBatch = 20;  // 800.97 / 20 ~ 40 tok/s, the SLO

struct Knot {
  double l;
  double t;
};

// Piecewise-linear through the knots, extended linearly past both ends.
double calibrated_latency(const std::vector<Knot>& k, double l) {
  size_t i = 1;
  while (i + 1 < k.size() && l > k[i].l) ++i;
  const Knot& a = k[i - 1];
  const Knot& b = k[i];
  return a.t + (b.t - a.t) * (l - a.l) / (b.l - a.l);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: derive_h20_profile <h200-profile.json> <out.json>\n";
    return 2;
  }
  const auto h200 = prfaas::load_profile(argv[1]);

  const Column columns[] = {
      {"prfaas-pd", 3.91, 5}, {"homogeneous", 2.35, 3}, {"naive", 6.25, 8}};
  double sum = 0;
  double lo = INFINITY;
  double hi = 0;
  for (const auto& c : columns) {
    const double rate = c.theta_pdd * kOutputLen / c.n_d;
    std::printf("decode rate from %-12s %.3f tok/s\n", c.name, rate);
    sum += rate;
    lo = std::min(lo, rate);
    hi = std::max(hi, rate);
  }
  const double rate = sum / 3;
  const double spread = (hi - lo) / rate;
  std::printf("mean %.3f tok/s, spread %.3f%%\n", rate, 100 * spread);
  if (spread > 0.005) {
    std::cerr << "decode columns disagree by more than 0.5%\n";
    return 1;
  }

  const auto dist = prfaas::WorkloadSpec{}.length_dist;
  const auto split = prfaas::split_stats(dist, kThreshold);
  const double l_short = *split.l_short;
  const double l_mean = prfaas::mean_length(dist);
  const double l_p90 = prfaas::quantile(dist, 0.9);

  std::vector<Knot> anchors = {
      {l_short, 3 / 1.64}, {l_mean, 9 / 2.11}, {l_p90, 9.73}};
  std::printf("T(%.1f) = %.4f s\nT(%.1f) = %.4f s\nT(%.1f) = %.4f s\n",
              anchors[0].l, anchors[0].t, anchors[1].l, anchors[1].t,
              anchors[2].l, anchors[2].t);

  prfaas::HardwareModelProfile out;
  out.name = "internal-1t-h20";
  out.parallelism = 8;
  out.decode_token_rate = rate;
  out.max_batch_size = kMaxBatch;
  out.decode_step_s = kMaxBatch / rate;

  std::vector<double> lengths = {1024, 8192, l_short, l_mean, 32768, l_p90, 131072};
  for (double l : lengths) {
    prfaas::ProfilePoint p;
    p.seq_len = std::llround(l);
    // Knots sit on integer lengths; re-evaluate there so the anchor
    // latencies remain on the calibrated line.
    const double li = static_cast<double>(p.seq_len);
    p.kv_size_mib = prfaas::interpolate_kv_size(h200, li);
    p.prefill_latency_s = calibrated_latency(anchors, li);
    if (p.prefill_latency_s <= 0) {
      std::cerr << "non-positive latency at " << p.seq_len << "\n";
      return 1;
    }
    out.points.push_back(p);
  }
  out.validate();

  std::ofstream os(argv[2]);
  os << prfaas::profile_to_json(out).dump(2) << "\n";
  std::printf("wrote %s\n", argv[2]);
  return os ? 0 : 1;
}
