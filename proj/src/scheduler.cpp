/* Copyright 2026 The adrenaline-sim Authors. All Rights Reserved.

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

#include "adrenaline/scheduler.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "adrenaline/errors.hpp"

namespace adrenaline {

void TpotWindow::add(TpotSample s) {
  if (length_ == 0) return;
  samples_.push_back(s);
  while (samples_.size() > length_) samples_.pop_front();
}

double ob_mem(std::span<const double> hbm_p, std::span<const double> bw_p,
              double hbm_d, double bw_d) {
  if (hbm_p.size() != bw_p.size()) {
    throw Error("ob_mem: capacity and bandwidth lists differ in length");
  }
  if (hbm_p.empty()) return 0.0;
  const double hbm = std::accumulate(hbm_p.begin(), hbm_p.end(), 0.0);
  const double bw = std::accumulate(bw_p.begin(), bw_p.end(), 0.0);
  return std::min(hbm / hbm_d, bw / bw_d);
}

double ob_comp(double b_max, double b_tpot) {
  if (b_max <= b_tpot) return 0.0;
  return (b_max - b_tpot) / b_tpot;
}

double combined_bound(double ob_mem_value, double ob_comp_value) {
  return std::min(ob_mem_value, ob_comp_value);
}

OffloadBounds make_bounds(double ob_mem_value, double ob_comp_value) {
  return {ob_mem_value, ob_comp_value,
          combined_bound(ob_mem_value, ob_comp_value)};
}

std::int64_t estimate_b_tpot(
    const TpotWindow& window, double tpot_slo,
    const std::function<double(std::int64_t)>& model_step_latency,
    std::int64_t cap) {
  if (!window.empty()) {
    std::map<std::int64_t, std::pair<double, std::int64_t>> by_batch;
    for (const auto& s : window.samples()) {
      auto& acc = by_batch[s.batch];
      acc.first += s.latency;
      acc.second += 1;
    }
    std::int64_t best = 1;
    for (const auto& [batch, acc] : by_batch) {
      if (acc.first / static_cast<double>(acc.second) <= tpot_slo) {
        best = std::max(best, batch);
      }
    }
    return best;
  }
  if (!model_step_latency) return 1;
  // Binary search on a non-decreasing latency model.
  std::int64_t lo = 1;
  std::int64_t hi = cap;
  if (model_step_latency(lo) > tpot_slo) return 1;
  while (lo < hi) {
    const std::int64_t mid = lo + (hi - lo + 1) / 2;
    if (model_step_latency(mid) <= tpot_slo) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

DecodeLoad summarize_load(std::span<const Request> local,
                          std::span<const Request> offloaded) {
  DecodeLoad load;
  for (const auto& r : offloaded) {
    load.attn_max_tokens += r.max_token;
    load.attn_used_tokens += r.used_token;
  }
  for (const auto& r : local) load.decode_used_tokens += r.used_token;
  load.num_offloaded = offloaded.size();
  load.num_local = local.size();
  return load;
}

OffloadDecision need_offload(const Request& req, double ob,
                             const DecodeLoad& load, bool c1_uses_max_tokens) {
  OffloadDecision d;
  d.load = load;
  d.ob = ob;
  const double budget = static_cast<double>(load.decode_used_tokens) * ob;
  const std::int64_t attn_c1 =
      c1_uses_max_tokens ? load.attn_max_tokens : load.attn_used_tokens;
  d.c1 = static_cast<double>(attn_c1 + req.max_token) < budget;
  if (!d.c1) {
    d.c2 = static_cast<double>(load.attn_used_tokens + req.used_token) < budget &&
           static_cast<double>(load.num_offloaded + 1) <
               static_cast<double>(load.num_local) * ob;
  }
  d.offload = d.c1 || d.c2;
  return d;
}

OffloadDecision need_offload(const Request& req, double ob,
                             std::span<const Request> local,
                             std::span<const Request> offloaded,
                             bool c1_uses_max_tokens) {
  return need_offload(req, ob, summarize_load(local, offloaded),
                      c1_uses_max_tokens);
}

std::size_t least_loaded(std::span<const double> loads) {
  if (loads.empty()) throw Error("least_loaded: no instances");
  std::size_t best = 0;
  for (std::size_t i = 1; i < loads.size(); ++i) {
    if (loads[i] < loads[best]) best = i;
  }
  return best;
}

GlobalScheduler::GlobalScheduler(SchedulerConfig config,
                                 std::size_t num_decoders,
                                 DecoderResources decoder)
    : config_(config), decoder_(decoder) {
  if (num_decoders == 0) throw ConfigError("cluster.num_decoding", "must be >= 1");
  meta_.resize(num_decoders);
  for (auto& m : meta_) m.tpot_window = TpotWindow(config_.tpot_window);
  bounds_.resize(num_decoders);
}

Assignment GlobalScheduler::route(std::span<const double> prefill_loads,
                                  std::span<const double> decoder_loads) const {
  return {least_loaded(prefill_loads), least_loaded(decoder_loads)};
}

void GlobalScheduler::refresh_ob_mem() {
  std::vector<double> hbm;
  std::vector<double> bw;
  for (const auto& e : executors_) {
    hbm.push_back(e.hbm_bytes);
    bw.push_back(e.bandwidth);
  }
  // Every decoder shares the executor pool evenly.
  const double share = 1.0 / static_cast<double>(meta_.size());
  for (auto& h : hbm) h *= share;
  for (auto& b : bw) b *= share;
  const double mem = ob_mem(hbm, bw, decoder_.hbm_bytes, decoder_.bandwidth);
  for (std::size_t d = 0; d < meta_.size(); ++d) {
    meta_[d].n_prefill = executors_.size();
    bounds_[d] = make_bounds(mem, bounds_[d].ob_comp);
  }
}

std::vector<Relocation> GlobalScheduler::on_topology_change(
    std::vector<ExecutorResources> executors,
    std::span<const std::pair<RequestId, std::int64_t>> placements) {
  executors_ = std::move(executors);
  refresh_ob_mem();
  std::vector<Relocation> out;
  for (const auto& [req, inst] : placements) {
    const bool alive = std::any_of(
        executors_.begin(), executors_.end(),
        [inst = inst](const ExecutorResources& e) { return e.instance_id == inst; });
    if (!alive) out.push_back({req, inst});
  }
  return out;
}

void GlobalScheduler::refresh_ob_comp(
    std::size_t decoder,
    const std::function<double(std::int64_t)>& model_step_latency) {
  const auto b_tpot = estimate_b_tpot(meta_.at(decoder).tpot_window,
                                      config_.tpot_slo, model_step_latency);
  auto& b = bounds_.at(decoder);
  b = make_bounds(b.ob_mem, ob_comp(static_cast<double>(config_.b_max),
                                    static_cast<double>(b_tpot)));
}

void GlobalScheduler::observe_step(
    std::size_t decoder, std::int64_t local_batch, double latency,
    const std::function<double(std::int64_t)>& model_step_latency) {
  meta_.at(decoder).tpot_window.add({local_batch, latency});
  if (config_.mode == OffloadMode::kAuto) refresh_ob_comp(decoder, model_step_latency);
}

OffloadBounds GlobalScheduler::bounds(std::size_t decoder) const {
  return bounds_.at(decoder);
}

double GlobalScheduler::effective_ob(std::size_t decoder) const {
  switch (config_.mode) {
    case OffloadMode::kOff:
      return 0.0;
    case OffloadMode::kFixed:
      return config_.fixed_ratio;
    case OffloadMode::kAuto:
      break;
  }
  return bounds_.at(decoder).ob;
}

OffloadDecision GlobalScheduler::decide(const Request& req, std::size_t decoder,
                                        const DecodeLoad& load) {
  const double ob = effective_ob(decoder);
  OffloadDecision d = need_offload(req, ob, load, config_.c1_uses_max_tokens);
  if (executors_.empty()) d.offload = false;
  const auto& b = bounds_.at(decoder);
  trace_.push_back({{"request", req.id},
                    {"decoder", decoder},
                    {"c1", d.c1},
                    {"c2", d.c2},
                    {"offload", d.offload},
                    {"attn_max_tokens", load.attn_max_tokens},
                    {"attn_used_tokens", load.attn_used_tokens},
                    {"decode_used_tokens", load.decode_used_tokens},
                    {"req_max_token", req.max_token},
                    {"req_used_token", req.used_token},
                    {"num_offloaded", load.num_offloaded},
                    {"num_local", load.num_local},
                    {"ob", ob},
                    {"ob_mem", b.ob_mem},
                    {"ob_comp", b.ob_comp}});
  return d;
}

void GlobalScheduler::mark_running(std::size_t decoder, RequestId id,
                                   bool offloaded) {
  auto& m = meta_.at(decoder);
  (offloaded ? m.offloaded : m.local).push_back(id);
}

void GlobalScheduler::mark_finished(std::size_t decoder, RequestId id) {
  auto& m = meta_.at(decoder);
  std::erase(m.local, id);
  std::erase(m.offloaded, id);
}

}  // namespace adrenaline
