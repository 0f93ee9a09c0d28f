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
#include <optional>
#include <string>

#include <json.hpp>

#include "adrenaline/colocation.hpp"
#include "adrenaline/core_model.hpp"
#include "adrenaline/graph_select.hpp"
#include "adrenaline/scheduler.hpp"
#include "adrenaline/workload.hpp"

namespace adrenaline {

struct ClusterConfig {
  std::size_t num_prefill = 1;
  std::size_t num_decoding = 1;
  // Decoder KV budget = gpu_memory_utilization * capacity - weights.
  double gpu_memory_utilization = 0.8;
  // Fraction of each prefill GPU held back for activations/workspace.
  double activation_reserve = 0.1;
  // Part of the prefill KV pool kept for the prefill engine itself; the rest
  // of the pool is the attention executor's budget.
  double prefill_kv_reserve = 8.0 * 1024 * 1024 * 1024;
  std::int64_t max_prefill_tokens = 8192;
};

struct ColocationConfig {
  // Explicit prefill SM share; used when offloading is on and no TTFT SLO
  // drives the partition.
  double prefill_sm_ratio = 0.7;
  // When set, the partition is the smallest grid ratio meeting this SLO.
  std::optional<double> ttft_slo;
  // Prompt tokens the SLO must hold for (0 = max_prefill_tokens).
  std::int64_t expected_prompt_tokens = 0;
  double grid_step = kDefaultSmGridStep;
};

struct GraphConfig {
  bool enabled = true;
  std::int64_t interval = kDefaultGraphInterval;
  std::int64_t budget = kDefaultGraphBudget;
  std::int64_t max_local = 256;
  std::int64_t max_offloaded = 256;
  // Replay cost of a captured graph (negative = one cpu_launch_per_layer).
  double replay_cost = -1.0;
  double notification_cost = 20e-6;
};

struct SimOptions {
  double sample_period = 0.1;
  // Livelock guard on simulated time.
  double horizon = 1e6;
  // Drop qkv/output message costs so runtime matches the bound model.
  bool ideal_sync = false;
  // Assert memory invariants after every event.
  bool check_invariants = false;
};

struct SimConfig {
  GpuSpec gpu = GpuSpec::a100_80gb();
  ModelSpec model = ModelSpec::llama2_7b();
  CalibrationCurves curves = CalibrationCurves::defaults();
  ClusterConfig cluster;
  SchedulerConfig scheduler;
  ColocationConfig colocation;
  GraphConfig graphs;
  SimOptions sim;
  // 0 = analytic crossover.
  std::int64_t b_max_override = 0;
  std::int64_t b_max_cap = kDefaultBatchCap;

  void validate() const;
  bool offload_enabled() const { return scheduler.mode != OffloadMode::kOff; }
};

struct WorkloadConfig {
  std::string preset = "sharegpt-like";
  std::string trace;
  std::size_t num_requests = 1000;
  std::optional<double> rate = 3.0;
  std::uint64_t seed = 42;
  std::optional<LengthDist> prompt;
  std::optional<LengthDist> output;

  void validate() const;
  Workload build() const;
};

struct ExperimentConfig {
  SimConfig sim;
  WorkloadConfig workload;
};

// Missing keys keep their defaults; unknown keys are rejected with their path.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

// Parses "off", "auto", or a non-negative ratio (0 means off).
void apply_offload_flag(SchedulerConfig& sched, const std::string& value);

std::string offload_mode_name(OffloadMode m);

// FNV-1a 64 of the canonical JSON dump, as 16 hex digits.
std::string content_hash(const std::string& text);

}  // namespace adrenaline
