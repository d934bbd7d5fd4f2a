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
#include <deque>
#include <map>
#include <vector>

namespace prfaas {

// Fluid model of a rate-limited inter-cluster link. Active flows share the
// capacity max-min fairly. A flow fed by a running prefill cannot send bits
// that have not been produced yet: its eligible volume at time tau is
// (tau - produce_start) / (produce_end - produce_start) of its total.
class EgressLink {
 public:
  struct Flow {
    int64_t id = 0;
    double total_bits = 0.0;
    double sent_bits = 0.0;
    double produce_start = 0.0;
    double produce_end = 0.0;  // == produce_start for already-produced data
    double rate = 0.0;         // bits/s, constant until the next epoch
  };

  struct Epoch {
    double time = 0.0;
    double total_rate = 0.0;
    size_t active_flows = 0;
  };

  explicit EgressLink(double capacity_gbps, bool record_epochs = false);

  double capacity_gbps() const { return capacity_bps_ / 1e9; }
  double capacity_bps() const { return capacity_bps_; }
  double now() const { return now_; }

  void add_flow(int64_t id, double total_bits, double produce_start,
                double produce_end);

  // Integrates all flows to `time` (monotone) and returns the ids of flows
  // that finished, in id order. Rates are recomputed afterwards.
  std::vector<int64_t> advance(double time);

  // Earliest time at which some flow finishes, catches up with its producer
  // or its producer finishes. Infinity when nothing will change.
  double next_event_time() const;

  // Bits delivered so far per active flow.
  std::map<int64_t, double> transfer_progress() const;

  const std::map<int64_t, Flow>& flows() const { return flows_; }
  double total_rate_bps() const;

  // Mean utilization over [now - window, now].
  double utilization(double window) const;
  double total_bits_sent() const { return bits_sent_; }

  const std::vector<Epoch>& epochs() const { return epochs_; }

 private:
  double produced(const Flow& f, double time) const;
  double production_rate(const Flow& f) const;
  void recompute_rates();

  double capacity_bps_;
  bool record_epochs_;
  double now_ = 0.0;
  double bits_sent_ = 0.0;
  std::map<int64_t, Flow> flows_;
  // (start time, total rate) segments, trimmed to the longest window asked.
  std::deque<std::pair<double, double>> history_;
  std::vector<Epoch> epochs_;
};

}  // namespace prfaas
