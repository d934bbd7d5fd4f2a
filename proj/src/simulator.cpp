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

#include "prfaas/simulator.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <sstream>

#include "prfaas/error.h"
#include "prfaas/units.h"

namespace prfaas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class EventType {
  kArrival,
  kPrefillDone,
  kDecodeDone,
  kSample,
  kCongestionCheck,
  kRealloc,
  kWarmupMark,
};

struct Event {
  double time = 0.0;
  uint64_t seq = 0;
  EventType type = EventType::kArrival;
  int64_t request = -1;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    return a.time > b.time || (a.time == b.time && a.seq > b.seq);
  }
};

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t rank = static_cast<size_t>(std::ceil(q * v.size()));
  return v[std::clamp<size_t>(rank, 1, v.size()) - 1];
}

class Simulation {
 public:
  Simulation(const DeploymentConfig& config,
             const std::vector<RequestArrival>& arrivals,
             const SimulationOptions& options)
      : config_(config),
        options_(options),
        link_(config.has_prfaas() ? config.prfaas->egress_gbps : 0.0,
              options.record_epochs) {
    if (!(options_.duration_s >= 0)) {
      throw Error(ErrorKind::kConfigError, "duration must be >= 0");
    }
    if (options_.warmup_fraction < 0 || options_.warmup_fraction >= 1) {
      throw Error(ErrorKind::kConfigError, "warmup fraction must be in [0, 1)");
    }
    if (options_.duration_s > 0) {
      config_.validate();
      if (config_.pd.decode_instances <= 0) {
        throw Error(ErrorKind::kConfigError, "no decode instances");
      }
      if (!config_.pd.profile.decode_token_rate) {
        throw Error(ErrorKind::kConfigError,
                    config_.pd.profile.name + " has no decode_token_rate");
      }
      batch_ = decode_batch_size(config_.pd.profile, options_.slo_tokens_per_s);
      per_request_rate_ = *config_.pd.profile.decode_token_rate / batch_;
    }
    requests_.reserve(arrivals.size());
    for (const auto& a : arrivals) {
      RequestRecord r;
      r.id = a.id;
      r.arrival_time = a.arrival_time;
      r.l_total = a.l_total;
      r.cached_pd = a.cached_pd;
      r.cached_prfaas = a.cached_prfaas;
      r.output_len = a.output_len > 0 ? a.output_len : config_.workload.output_len;
      requests_.push_back(r);
    }
    threshold_ = config_.threshold;
  }

  SimulationResult run() {
    SimulationResult result;
    end_ = options_.duration_s;
    warmup_ = options_.warmup_fraction * end_;
    if (end_ <= 0) {
      result.metrics.final_threshold = threshold_;
      result.metrics.final_np = config_.pd.prefill_instances;
      result.metrics.final_nd = config_.pd.decode_instances;
      return result;
    }
    for (size_t i = 0; i < requests_.size(); ++i) {
      if (requests_[i].arrival_time <= end_) {
        push(requests_[i].arrival_time, EventType::kArrival, static_cast<int64_t>(i));
      }
    }
    push(warmup_, EventType::kWarmupMark);
    push(options_.sample_interval_s, EventType::kSample);
    if (config_.has_prfaas()) {
      push(options_.policy.congestion_window_s, EventType::kCongestionCheck);
    }
    if (options_.policy.long_term_enabled && options_.policy.realloc_period_s > 0) {
      push(options_.policy.realloc_period_s, EventType::kRealloc);
    }

    while (true) {
      const double t_event = events_.empty() ? kInf : events_.top().time;
      double t_link = link_.next_event_time();
      if (t_link <= link_.now()) t_link = std::nextafter(link_.now(), kInf);
      const double next = std::min(t_event, t_link);
      if (next > end_) break;
      now_ = next;
      if (t_link <= t_event) {
        on_link_done(link_.advance(now_));
        continue;
      }
      const Event ev = events_.top();
      events_.pop();
      on_link_done(link_.advance(now_));
      handle(ev, result);
    }
    now_ = end_;
    link_.advance(end_);
    finish(result);
    return result;
  }

 private:
  void push(double time, EventType type, int64_t request = -1) {
    events_.push(Event{time, seq_++, type, request});
  }

  DeploymentConfig current_config() const {
    DeploymentConfig c = config_;
    c.threshold = threshold_;
    return c;
  }

  void handle(const Event& ev, SimulationResult& result) {
    switch (ev.type) {
      case EventType::kArrival: on_arrival(ev.request, result); break;
      case EventType::kPrefillDone: on_prefill_done(ev.request); break;
      case EventType::kDecodeDone: on_decode_done(ev.request); break;
      case EventType::kSample: on_sample(result); break;
      case EventType::kCongestionCheck: on_congestion_check(result); break;
      case EventType::kRealloc: on_realloc(result); break;
      case EventType::kWarmupMark: bits_at_warmup_ = link_.total_bits_sent(); break;
    }
  }

  void on_arrival(int64_t idx, SimulationResult& result) {
    auto& r = requests_[idx];
    ++arrived_;
    RoutingContext ctx;
    ctx.l_total = r.l_total;
    ctx.match_pd = MatchInfo{kPdCluster, r.cached_pd, true};
    ctx.match_prfaas = MatchInfo{kPrfaasCluster, r.cached_prfaas, true};
    ctx.t = threshold_;
    ctx.bandwidth_mode = bandwidth_mode_for(
        link_.utilization(options_.policy.congestion_window_s), options_.policy);
    const auto& kv_profile =
        config_.has_prfaas() ? config_.prfaas->profile : config_.pd.profile;
    ctx.cache_bytes_pd = kv_bytes(kv_profile, r.cached_pd);
    ctx.cache_bytes_prfaas = kv_bytes(kv_profile, r.cached_prfaas);

    RoutingDecision d;
    if (config_.has_prfaas()) {
      d = route(ctx);
    } else {
      d.target = RouteTarget::kPdPrefill;
      d.uncached_len = r.l_total - std::min(r.cached_pd, r.l_total);
    }
    if (options_.log_decisions) {
      result.decisions.push_back(decision_to_json(r.id, now_, ctx, d));
    }
    r.target = d.target;
    r.uncached_len = d.uncached_len;
    r.routed = now_;
    if (r.target == RouteTarget::kPrfaas) ++offloaded_;

    if (d.cache_transfer && d.cache_transfer->bytes > 0 && link_.capacity_bps() > 0) {
      // The prefill may only start once the reused prefix has arrived.
      ++waiting_cache_;
      link_.add_flow(2 * idx + 1, 8.0 * static_cast<double>(d.cache_transfer->bytes),
                     now_, now_);
      return;
    }
    enqueue_prefill(idx);
  }

  static int64_t kv_bytes(const HardwareModelProfile& p, int64_t len) {
    if (len <= 0 || !p.has_latency_table()) return 0;
    return static_cast<int64_t>(
        interpolate_kv_size(p, static_cast<double>(len), Extrapolation::kLinear) *
        units::kBytesPerMiB);
  }

  void enqueue_prefill(int64_t idx) {
    if (requests_[idx].target == RouteTarget::kPrfaas) {
      prfaas_queue_.push_back(idx);
    } else {
      pdp_queue_.push_back(idx);
    }
    dispatch_prefill();
  }

  void dispatch_prefill() {
    const int64_t n_prfaas = config_.has_prfaas() ? config_.prfaas->instances : 0;
    while (prfaas_busy_ < n_prfaas && !prfaas_queue_.empty()) {
      const int64_t idx = prfaas_queue_.front();
      prfaas_queue_.pop_front();
      ++prfaas_busy_;
      start_prefill(idx, config_.prfaas->profile, /*remote=*/true);
    }
    while (pdp_busy_ < config_.pd.prefill_instances && !pdp_queue_.empty()) {
      const int64_t idx = pdp_queue_.front();
      pdp_queue_.pop_front();
      ++pdp_busy_;
      start_prefill(idx, config_.pd.profile, /*remote=*/false);
    }
  }

  void start_prefill(int64_t idx, const HardwareModelProfile& profile, bool remote) {
    auto& r = requests_[idx];
    const double len = static_cast<double>(r.uncached_len);
    const double latency =
        len > 0 ? interpolate_prefill_latency(profile, len, Extrapolation::kLinear)
                : 0.0;
    r.prefill_start = now_;
    push(now_ + latency, EventType::kPrefillDone, idx);
    if (remote) {
      const double bits =
          len > 0 ? units::mib_to_bits(
                        interpolate_kv_size(profile, len, Extrapolation::kLinear))
                  : 0.0;
      if (bits > 0) {
        link_.add_flow(2 * idx, bits, now_, now_ + latency);
        ++transfers_active_;
      } else {
        r.transfer_end = now_ + latency;
      }
    }
  }

  void on_prefill_done(int64_t idx) {
    auto& r = requests_[idx];
    r.prefill_end = now_;
    if (r.target == RouteTarget::kPrfaas) {
      --prfaas_busy_;
      if (r.transfer_end >= 0) {
        to_decode(idx);
      } else {
        ++awaiting_transfer_;
      }
    } else {
      --pdp_busy_;
      r.transfer_end = now_;
      to_decode(idx);
    }
    dispatch_prefill();
  }

  void on_link_done(const std::vector<int64_t>& flows) {
    for (int64_t flow : flows) {
      const int64_t idx = flow / 2;
      if (flow % 2 == 1) {
        --waiting_cache_;
        enqueue_prefill(idx);
        continue;
      }
      --transfers_active_;
      auto& r = requests_[idx];
      r.transfer_end = now_;
      if (r.prefill_end >= 0) {
        --awaiting_transfer_;
        to_decode(idx);
      }
    }
  }

  void to_decode(int64_t idx) {
    decode_queue_.push_back(idx);
    dispatch_decode();
  }

  void dispatch_decode() {
    const int64_t slots = config_.pd.decode_instances * batch_;
    while (decode_active_ < slots && !decode_queue_.empty()) {
      const int64_t idx = decode_queue_.front();
      decode_queue_.pop_front();
      ++decode_active_;
      auto& r = requests_[idx];
      r.decode_start = now_;
      push(now_ + static_cast<double>(r.output_len) / per_request_rate_,
           EventType::kDecodeDone, idx);
    }
  }

  void on_decode_done(int64_t idx) {
    requests_[idx].decode_end = now_;
    --decode_active_;
    ++completed_;
    dispatch_decode();
  }

  int64_t queued() const {
    return static_cast<int64_t>(prfaas_queue_.size() + pdp_queue_.size() +
                                decode_queue_.size());
  }

  int64_t in_flight() const {
    // Prefill in service, KV still in flight after prefill, cache transfers
    // ahead of prefill, and decodes.
    return prfaas_busy_ + pdp_busy_ + awaiting_transfer_ + waiting_cache_ +
           decode_active_;
  }

  void on_sample(SimulationResult& result) {
    TimeSeriesRow row;
    row.time = now_;
    row.queue_prfaas = static_cast<int64_t>(prfaas_queue_.size());
    row.queue_pdp = static_cast<int64_t>(pdp_queue_.size());
    row.queue_pdd = static_cast<int64_t>(decode_queue_.size());
    row.egress_util = link_.utilization(options_.sample_interval_s);
    row.arrived = arrived_;
    row.completed = completed_;
    row.in_flight = in_flight();
    row.queued = queued();
    row.threshold = threshold_;
    row.np = config_.pd.prefill_instances;
    row.nd = config_.pd.decode_instances;
    result.series.push_back(row);
    push(now_ + options_.sample_interval_s, EventType::kSample);
  }

  void on_congestion_check(SimulationResult& result) {
    const auto& policy = options_.policy;
    const CongestionState state = congestion_signal(
        link_, policy.congestion_window_s,
        static_cast<int64_t>(prfaas_queue_.size()), policy,
        config_.prfaas->instances);
    if (state.triggered()) {
      ++congestion_events_;
      if (policy.short_term_enabled) {
        const double new_t = short_term_update(
            state, config_.workload.length_dist, current_config());
        result.threshold_updates.push_back({now_, threshold_, new_t, state});
        threshold_ = new_t;
      }
    }
    push(now_ + policy.congestion_window_s, EventType::kCongestionCheck);
  }

  void on_realloc(SimulationResult& result) {
    ObservedLoad observed;
    observed.prfaas_queue = static_cast<int64_t>(prfaas_queue_.size());
    observed.pdp_queue = static_cast<int64_t>(pdp_queue_.size());
    observed.pdd_queue = static_cast<int64_t>(decode_queue_.size());
    const ReallocationPlan plan = long_term_realloc(observed, current_config());
    if (plan.changes(current_config())) {
      config_.pd.prefill_instances = plan.new_np;
      config_.pd.decode_instances = plan.new_nd;
      threshold_ = plan.new_t;
      result.reallocations.push_back({now_, plan});
      dispatch_prefill();
      dispatch_decode();
    }
    push(now_ + options_.policy.realloc_period_s, EventType::kRealloc);
  }

  void finish(SimulationResult& result) {
    auto& m = result.metrics;
    const double window = end_ - warmup_;
    std::vector<double> ttfts;
    int64_t arrived_in_window = 0;
    int64_t completed_in_window = 0;
    for (const auto& r : requests_) {
      if (r.arrival_time < warmup_ || r.arrival_time > end_) continue;
      ++arrived_in_window;
      if (r.decode_end >= 0) ++completed_in_window;
      if (r.prefill_end >= 0 && r.transfer_end >= 0) ttfts.push_back(r.ttft());
    }
    m.arrived = arrived_;
    m.completed = completed_;
    m.offered_rate = window > 0 ? arrived_in_window / window : 0.0;
    m.achieved_throughput = window > 0 ? completed_in_window / window : 0.0;
    if (!ttfts.empty()) {
      double sum = 0.0;
      for (double v : ttfts) sum += v;
      m.ttft_mean_s = sum / ttfts.size();
      m.ttft_p50_s = percentile(ttfts, 0.50);
      m.ttft_p90_s = percentile(ttfts, 0.90);
      m.ttft_p99_s = percentile(ttfts, 0.99);
    }
    const double bits = link_.total_bits_sent() - bits_at_warmup_;
    m.egress_mean_gbps = window > 0 ? bits / window / 1e9 : 0.0;
    m.egress_mean_util =
        link_.capacity_bps() > 0 ? m.egress_mean_gbps * 1e9 / link_.capacity_bps() : 0.0;
    for (const auto& row : result.series) {
      if (row.time >= warmup_) m.egress_peak_util = std::max(m.egress_peak_util, row.egress_util);
    }
    m.congestion_events = congestion_events_;
    m.offloaded = offloaded_;
    m.final_threshold = threshold_;
    m.final_np = config_.pd.prefill_instances;
    m.final_nd = config_.pd.decode_instances;
    if (options_.record_requests) result.requests = requests_;
    if (options_.record_epochs) result.epochs = link_.epochs();
  }

  DeploymentConfig config_;
  SimulationOptions options_;
  EgressLink link_;
  std::vector<RequestRecord> requests_;
  std::priority_queue<Event, std::vector<Event>, Later> events_;
  uint64_t seq_ = 0;
  double now_ = 0.0;
  double end_ = 0.0;
  double warmup_ = 0.0;
  double threshold_ = 0.0;
  int64_t batch_ = 1;
  double per_request_rate_ = 1.0;

  std::deque<int64_t> prfaas_queue_;
  std::deque<int64_t> pdp_queue_;
  std::deque<int64_t> decode_queue_;
  int64_t prfaas_busy_ = 0;
  int64_t pdp_busy_ = 0;
  int64_t decode_active_ = 0;
  int64_t awaiting_transfer_ = 0;
  int64_t transfers_active_ = 0;
  int64_t waiting_cache_ = 0;
  int64_t arrived_ = 0;
  int64_t completed_ = 0;
  int64_t offloaded_ = 0;
  int64_t congestion_events_ = 0;
  double bits_at_warmup_ = 0.0;
};

}  // namespace

int64_t decode_batch_size(const HardwareModelProfile& profile,
                          double slo_tokens_per_s) {
  if (profile.max_batch_size) return *profile.max_batch_size;
  if (!profile.decode_token_rate || !(slo_tokens_per_s > 0)) return 1;
  return std::max<int64_t>(1, std::llround(*profile.decode_token_rate / slo_tokens_per_s));
}

CongestionState congestion_signal(const EgressLink& link, double window,
                                  int64_t prfaas_queue_depth,
                                  const SchedulerPolicy& policy,
                                  int64_t prfaas_instances) {
  CongestionState s;
  s.egress_utilization = link.utilization(window);
  s.queue_depth = prfaas_queue_depth;
  s.util_threshold = policy.util_threshold;
  s.queue_threshold =
      policy.queue_threshold_factor * static_cast<double>(std::max<int64_t>(1, prfaas_instances));
  return s;
}

SimulationResult run_trace(const DeploymentConfig& config,
                           const std::vector<RequestArrival>& arrivals,
                           const SimulationOptions& options) {
  Simulation sim(config, arrivals, options);
  return sim.run();
}

SimulationResult run(const DeploymentConfig& config,
                     const SimulationOptions& options) {
  WorkloadSpec spec = config.workload;
  spec.seed = options.seed;
  std::vector<RequestArrival> arrivals;
  if (options.duration_s > 0 && spec.arrival_rate > 0) {
    // The sampler is sequential, so a longer draw extends a shorter one.
    auto n = static_cast<int64_t>(spec.arrival_rate * options.duration_s * 1.2) + 64;
    arrivals = sample_trace(spec, n);
    while (arrivals.back().arrival_time <= options.duration_s) {
      n *= 2;
      arrivals = sample_trace(spec, n);
    }
  }
  return run_trace(config, arrivals, options);
}

nlohmann::json metrics_to_json(const SimMetrics& m) {
  return {{"arrived", m.arrived},
          {"completed", m.completed},
          {"offered_rate", m.offered_rate},
          {"achieved_throughput", m.achieved_throughput},
          {"ttft_mean_s", m.ttft_mean_s},
          {"ttft_p50_s", m.ttft_p50_s},
          {"ttft_p90_s", m.ttft_p90_s},
          {"ttft_p99_s", m.ttft_p99_s},
          {"egress_mean_gbps", m.egress_mean_gbps},
          {"egress_mean_util", m.egress_mean_util},
          {"egress_peak_util", m.egress_peak_util},
          {"congestion_events", m.congestion_events},
          {"offloaded", m.offloaded},
          {"final_threshold", m.final_threshold},
          {"final_np", m.final_np},
          {"final_nd", m.final_nd}};
}

std::string series_csv(const std::vector<TimeSeriesRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "time,queue_prfaas,queue_pdp,queue_pdd,egress_util\n";
  for (const auto& r : rows) {
    os << r.time << ',' << r.queue_prfaas << ',' << r.queue_pdp << ','
       << r.queue_pdd << ',' << r.egress_util << '\n';
  }
  return os.str();
}

}  // namespace prfaas
