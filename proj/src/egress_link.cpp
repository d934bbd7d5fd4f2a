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

#include "prfaas/egress_link.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace prfaas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHistoryHorizon = 3600.0;

double bits_eps(double total) { return std::max(1e-9 * total, 1e-6); }

}  // namespace

EgressLink::EgressLink(double capacity_gbps, bool record_epochs)
    : capacity_bps_(std::max(0.0, capacity_gbps) * 1e9),
      record_epochs_(record_epochs) {
  history_.emplace_back(0.0, 0.0);
}

double EgressLink::produced(const Flow& f, double time) const {
  if (time >= f.produce_end) return f.total_bits;
  if (time <= f.produce_start) return 0.0;
  return f.total_bits * (time - f.produce_start) / (f.produce_end - f.produce_start);
}

double EgressLink::production_rate(const Flow& f) const {
  if (now_ >= f.produce_end) return kInf;
  return f.total_bits / (f.produce_end - f.produce_start);
}

void EgressLink::add_flow(int64_t id, double total_bits, double produce_start,
                          double produce_end) {
  advance(std::max(now_, produce_start));
  Flow f;
  f.id = id;
  f.total_bits = total_bits;
  f.produce_start = produce_start;
  f.produce_end = std::max(produce_start, produce_end);
  flows_[id] = f;
  recompute_rates();
}

std::vector<int64_t> EgressLink::advance(double time) {
  std::vector<int64_t> done;
  if (time > now_) {
    const double dt = time - now_;
    for (auto& [id, f] : flows_) {
      f.sent_bits = std::min(f.sent_bits + f.rate * dt, produced(f, time));
      f.sent_bits = std::min(f.sent_bits, f.total_bits);
    }
    bits_sent_ += total_rate_bps() * dt;
    now_ = time;
  }
  for (auto it = flows_.begin(); it != flows_.end();) {
    if (it->second.sent_bits >= it->second.total_bits - bits_eps(it->second.total_bits)) {
      done.push_back(it->first);
      it = flows_.erase(it);
    } else {
      ++it;
    }
  }
  recompute_rates();
  return done;
}

void EgressLink::recompute_rates() {
  // Water-filling: flows that are caught up with their producer are capped
  // at the production rate; everything else takes an equal share of what is
  // left.
  std::vector<std::pair<double, Flow*>> caps;
  caps.reserve(flows_.size());
  for (auto& [id, f] : flows_) {
    const double pr = production_rate(f);
    const bool caught_up = f.sent_bits >= produced(f, now_) - bits_eps(f.total_bits);
    caps.emplace_back(caught_up ? pr : kInf, &f);
  }
  std::sort(caps.begin(), caps.end(), [](const auto& a, const auto& b) {
    return a.first < b.first || (a.first == b.first && a.second->id < b.second->id);
  });
  double remaining = capacity_bps_;
  size_t left = caps.size();
  for (auto& [cap, f] : caps) {
    const double share = remaining / static_cast<double>(left);
    f->rate = std::min(cap, share);
    remaining = std::max(0.0, remaining - f->rate);
    --left;
  }
  const double total = total_rate_bps();
  if (history_.back().first == now_) {
    history_.back().second = total;
  } else {
    history_.emplace_back(now_, total);
  }
  while (history_.size() > 2 && history_[1].first < now_ - kHistoryHorizon) {
    history_.pop_front();
  }
  if (record_epochs_) epochs_.push_back({now_, total, flows_.size()});
}

double EgressLink::next_event_time() const {
  double next = kInf;
  for (const auto& [id, f] : flows_) {
    const double remaining = f.total_bits - f.sent_bits;
    const double pr = production_rate(f);
    if (now_ < f.produce_end) next = std::min(next, f.produce_end);
    if (f.rate <= 0) continue;
    if (now_ >= f.produce_end) {
      next = std::min(next, now_ + remaining / f.rate);
      continue;
    }
    const double gap = produced(f, now_) - f.sent_bits;
    if (gap > bits_eps(f.total_bits) && f.rate > pr) {
      next = std::min(next, now_ + gap / (f.rate - pr));
    }
  }
  return next;
}

std::map<int64_t, double> EgressLink::transfer_progress() const {
  std::map<int64_t, double> out;
  for (const auto& [id, f] : flows_) out[id] = f.sent_bits;
  return out;
}

double EgressLink::total_rate_bps() const {
  double total = 0.0;
  for (const auto& [id, f] : flows_) total += f.rate;
  return total;
}

double EgressLink::utilization(double window) const {
  if (!(window > 0) || !(capacity_bps_ > 0)) return 0.0;
  const double from = now_ - window;
  double bits = 0.0;
  for (size_t i = 0; i < history_.size(); ++i) {
    const double start = std::max(history_[i].first, from);
    const double end = i + 1 < history_.size() ? history_[i + 1].first : now_;
    if (end > start) bits += history_[i].second * (end - start);
  }
  return bits / (capacity_bps_ * window);
}

}  // namespace prfaas
