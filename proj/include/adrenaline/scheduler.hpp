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

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

namespace adrenaline {

using RequestId = std::int64_t;

struct Request {
  RequestId id = 0;
  double arrival_time = 0.0;
  std::int64_t prompt_tokens = 0;
  // prompt + maximum output tokens.
  std::int64_t max_token = 0;
  // prompt + tokens generated so far.
  std::int64_t used_token = 0;
  bool offloaded = false;

  std::int64_t output_tokens() const { return max_token - prompt_tokens; }
};

struct TpotSample {
  std::int64_t batch = 0;
  double latency = 0.0;
};

// Fixed-length sliding window of (batch size, step latency) observations.
class TpotWindow {
 public:
  static constexpr std::size_t kDefaultLength = 50;

  explicit TpotWindow(std::size_t length = kDefaultLength) : length_(length) {}

  void add(TpotSample s);
  const std::deque<TpotSample>& samples() const { return samples_; }
  std::size_t length() const { return length_; }
  bool empty() const { return samples_.empty(); }

 private:
  std::size_t length_;
  std::deque<TpotSample> samples_;
};

// Proxy-side view of one decoding instance: which running requests decode
// attention locally (LR) and which run it on an attention executor (OR).
struct RuntimeMetadata {
  std::vector<RequestId> local;
  std::vector<RequestId> offloaded;
  TpotWindow tpot_window;
  // Prefill instances (attention executors) serving this decoding instance.
  std::size_t n_prefill = 0;
};

struct OffloadBounds {
  double ob_mem = 0.0;
  double ob_comp = 0.0;
  double ob = 0.0;
};

double ob_mem(std::span<const double> hbm_p, std::span<const double> bw_p,
              double hbm_d, double bw_d);
double ob_comp(double b_max, double b_tpot);
double combined_bound(double ob_mem_value, double ob_comp_value);
OffloadBounds make_bounds(double ob_mem_value, double ob_comp_value);

// Largest batch whose mean observed step latency meets `tpot_slo`. With an
// empty window, inverts `model_step_latency` (assumed non-decreasing in the
// batch) over [1, cap]. Never returns less than 1.
std::int64_t estimate_b_tpot(
    const TpotWindow& window, double tpot_slo,
    const std::function<double(std::int64_t)>& model_step_latency,
    std::int64_t cap = 4096);

// Token aggregates over the running set of one decoding instance.
struct DecodeLoad {
  std::int64_t attn_max_tokens = 0;
  std::int64_t attn_used_tokens = 0;
  std::int64_t decode_used_tokens = 0;
  std::size_t num_offloaded = 0;
  std::size_t num_local = 0;
};

DecodeLoad summarize_load(std::span<const Request> local,
                          std::span<const Request> offloaded);

struct OffloadDecision {
  bool offload = false;
  bool c1 = false;
  bool c2 = false;
  DecodeLoad load;
  double ob = 0.0;
};

// Per-request offload decision. C1 admits when the executor can absorb the
// new request at its maximal length; C2 when both current token share and
// batch share stay under the bound. Strict inequalities; C1 is checked first.
//
// With `c1_uses_max_tokens` C1 reads attn_max_tokens instead of
// attn_used_tokens.
OffloadDecision need_offload(const Request& req, double ob,
                             const DecodeLoad& load,
                             bool c1_uses_max_tokens = false);
OffloadDecision need_offload(const Request& req, double ob,
                             std::span<const Request> local,
                             std::span<const Request> offloaded,
                             bool c1_uses_max_tokens = false);

// Index of the smallest load; ties go to the lowest index.
std::size_t least_loaded(std::span<const double> loads);

// Memory resources one prefill instance contributes to attention offloading.
struct ExecutorResources {
  std::int64_t instance_id = 0;
  double hbm_bytes = 0.0;
  double bandwidth = 0.0;
};

struct DecoderResources {
  double hbm_bytes = 0.0;
  double bandwidth = 0.0;
};

enum class OffloadMode { kOff, kAuto, kFixed };

struct SchedulerConfig {
  OffloadMode mode = OffloadMode::kAuto;
  // Bound used in kFixed mode.
  double fixed_ratio = 0.0;
  bool c1_uses_max_tokens = false;
  double tpot_slo = 0.1;
  std::size_t tpot_window = TpotWindow::kDefaultLength;
  std::int64_t b_max = 1;
};

struct Assignment {
  std::size_t prefill_instance = 0;
  std::size_t decoding_instance = 0;
};

// A request whose KV must leave an executor that is being removed.
struct Relocation {
  RequestId request = 0;
  std::int64_t from_instance = 0;
};

// The proxy: tracks runtime metadata per decoding instance, keeps the offload
// bound current and makes the per-request offload decision. Not thread-safe;
// every mutation goes through this one object.
class GlobalScheduler {
 public:
  GlobalScheduler(SchedulerConfig config, std::size_t num_decoders,
                  DecoderResources decoder);

  const SchedulerConfig& config() const { return config_; }

  // Deterministic least-loaded routing, ties to the lowest instance index.
  Assignment route(std::span<const double> prefill_loads,
                   std::span<const double> decoder_loads) const;

  // Recomputes OB_mem over the given executors for every decoder. Returns
  // the relocations needed for offloaded requests whose executor vanished.
  std::vector<Relocation> on_topology_change(
      std::vector<ExecutorResources> executors,
      std::span<const std::pair<RequestId, std::int64_t>> placements = {});

  // Feeds one decode step; refreshes OB_comp when the bound is automatic.
  void observe_step(std::size_t decoder, std::int64_t local_batch,
                    double latency,
                    const std::function<double(std::int64_t)>& model_step_latency);

  // Re-estimates B_TPOT from the decoder's window and updates OB_comp.
  void refresh_ob_comp(
      std::size_t decoder,
      const std::function<double(std::int64_t)>& model_step_latency);

  OffloadBounds bounds(std::size_t decoder) const;
  // Bound actually applied to decisions (mode-dependent).
  double effective_ob(std::size_t decoder) const;

  OffloadDecision decide(const Request& req, std::size_t decoder,
                         const DecodeLoad& load);

  void mark_running(std::size_t decoder, RequestId id, bool offloaded);
  void mark_finished(std::size_t decoder, RequestId id);

  const RuntimeMetadata& metadata(std::size_t decoder) const {
    return meta_.at(decoder);
  }

  // One JSON object per decision, in decision order.
  const std::vector<nlohmann::json>& decision_trace() const { return trace_; }

 private:
  void refresh_ob_mem();

  SchedulerConfig config_;
  DecoderResources decoder_;
  std::vector<ExecutorResources> executors_;
  std::vector<RuntimeMetadata> meta_;
  std::vector<OffloadBounds> bounds_;
  std::vector<nlohmann::json> trace_;
};

}  // namespace adrenaline
