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

#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <json.hpp>

#include "adrenaline/config.hpp"

namespace adrenaline {

enum class EventKind {
  kArrival,
  kPrefillDone,
  kKvTransferDone,
  kDecodeStepDone,
  kPreempt,
  kResume,
  kMetricSample,
  kTopologyChange,
};

const char* event_kind_name(EventKind k);

struct Event {
  double time = 0.0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::kArrival;
  // Request index, instance index, or topology-change index by kind.
  std::int64_t target = -1;
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

struct StepTiming {
  double launch = 0.0;
  double qkv_send = 0.0;
  double local_attn = 0.0;
  double remote_attn = 0.0;
  double attn_recv = 0.0;
  double nonattn = 0.0;
  double stall = 0.0;

  double total() const { return launch + nonattn + local_attn + stall; }
};

// Shape of one decode step as seen by the cost model.
struct StepInputs {
  std::int64_t local_batch = 0;
  std::int64_t offloaded_batch = 0;
  double local_kv_bytes = 0.0;
  // Per executor: (KV bytes read for this decoder, effective bandwidth).
  std::vector<std::pair<double, double>> remote;
};

struct StepCostModel {
  ModelSpec model;
  GpuSpec gpu;
  std::int64_t b_max = 1;
  std::optional<GraphGrid> grid;
  double replay_cost = -1.0;
  bool ideal_sync = false;
  // Without offloading the graphs are one-dimensional (no C_o padding).
  bool offload_axis = true;
};

struct StepResult {
  StepTiming timing;
  bool graphed = false;
  GraphChoice graph;
};

StepResult decode_step_timing(const StepCostModel& cost, const StepInputs& in);

struct RequestRecord {
  RequestId id = 0;
  double arrival = 0.0;
  std::int64_t prompt_tokens = 0;
  std::int64_t output_tokens = 0;
  std::size_t decoder = 0;
  bool offloaded = false;
  bool admitted_by_c1 = false;
  // Bound in force when the offload decision was made.
  double decision_ob = 0.0;
  bool completed = false;
  double ttft = std::numeric_limits<double>::quiet_NaN();
  double completion_time = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> tpot_samples;
  std::int64_t preemptions = 0;
  // Sum of the sync stalls of every step this request took part in.
  double stall_total = 0.0;
  double kv_allocated = 0.0;
  double kv_freed = 0.0;
};

struct StepRecord {
  std::size_t decoder = 0;
  double start = 0.0;
  double end = 0.0;
  StepTiming timing;
  std::int64_t local_batch = 0;
  std::int64_t offloaded_batch = 0;
  bool graphed = false;
  GraphChoice graph;
};

// Time integrals binned at `sample_period`; bin i covers
// [i * period, (i + 1) * period).
struct UtilizationSeries {
  std::string kind;
  std::size_t instance = 0;
  double capacity = 0.0;
  double bandwidth = 0.0;
  // HBM bytes in use x seconds.
  std::vector<double> hbm_byte_seconds;
  // Bytes moved through HBM.
  std::vector<double> bw_bytes;
  // Compute busy seconds, weighted by modeled kernel intensity.
  std::vector<double> compute_seconds;
  // Running batch size at each MetricSample (decoders only).
  std::vector<std::pair<double, std::int64_t>> batch_samples;
};

struct SimulationReport {
  std::vector<RequestRecord> requests;
  std::vector<StepRecord> steps;
  std::vector<UtilizationSeries> prefill;
  std::vector<UtilizationSeries> decoding;
  // Decoder preemptions and admission attempts blocked on decoder HBM.
  std::vector<double> saturation_times;
  std::int64_t preemptions = 0;
  std::int64_t executor_preemptions = 0;
  std::uint64_t events_processed = 0;
  double sample_period = 0.1;
  double end_time = 0.0;
  SmPartition partition;
  std::int64_t b_max = 1;
  std::string config_hash;

  nlohmann::json to_json() const;
  // Hash of the canonical JSON; equal across runs with equal inputs.
  std::string hash() const;
};

// Deterministic discrete-event engine for one cluster: prefill instances
// with colocated attention executors, decoding instances, the proxy.
// Single-threaded; one instance per simulation.
class Simulator {
 public:
  explicit Simulator(SimConfig config);
  ~Simulator();
  Simulator(Simulator&&) noexcept;
  Simulator& operator=(Simulator&&) noexcept;

  // Enqueues an arrival. Rejects arrivals in the past and requests whose KV
  // can never fit.
  void submit(const Request& req);

  // Takes effect at `time`: prefill instance `instance` stops serving
  // (active=false) or comes back (active=true).
  void schedule_topology_change(double time, std::size_t instance, bool active);

  // Drains every event.
  void run();

  SimulationReport run_to_completion(const Workload& workload);

  double now() const;
  const SimConfig& config() const;
  const GlobalScheduler& scheduler() const;
  const SimulationReport& report() const;
  // Every processed event in processing order (kept when check_invariants).
  const std::vector<Event>& event_log() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

void write_step_trace(std::ostream& out, const SimulationReport& report);
void write_decision_trace(std::ostream& out, const GlobalScheduler& sched);

}  // namespace adrenaline
