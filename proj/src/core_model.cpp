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

#include "adrenaline/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "adrenaline/colocation.hpp"
#include "adrenaline/errors.hpp"

namespace adrenaline {

namespace {

void require_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(field, "must be a finite value > 0");
  }
}

}  // namespace

void GpuSpec::validate() const {
  require_positive(flops_peak, "gpu.flops_peak");
  require_positive(hbm_capacity, "gpu.hbm_capacity");
  require_positive(hbm_bandwidth, "gpu.hbm_bandwidth");
  require_positive(interconnect_bw, "gpu.interconnect_bw");
  require_positive(cpu_launch_per_layer, "gpu.cpu_launch_per_layer");
  if (interconnect_bw > hbm_bandwidth) {
    throw ConfigError("gpu.interconnect_bw", "must not exceed hbm_bandwidth");
  }
}

GpuSpec GpuSpec::a100_80gb() {
  GpuSpec g;
  g.flops_peak = 312e12;
  g.hbm_capacity = 80.0 * 1024 * 1024 * 1024;
  g.hbm_bandwidth = 2039e9;
  g.interconnect_bw = 600e9;
  g.cpu_launch_per_layer = 1.137e-3;
  return g;
}

void ModelSpec::validate() const {
  if (num_layers < 1) throw ConfigError("model.num_layers", "must be >= 1");
  if (hidden_size < 1) throw ConfigError("model.hidden_size", "must be >= 1");
  require_positive(bytes_per_element, "model.bytes_per_element");
  require_positive(weight_bytes, "model.weight_bytes");
  require_positive(kv_bytes_per_token, "model.kv_bytes_per_token");
  require_positive(flops_per_prompt_token, "model.flops_per_prompt_token");
  require_positive(flops_per_decode_token_nonattn,
                   "model.flops_per_decode_token_nonattn");
  require_positive(bytes_per_decode_step_nonattn,
                   "model.bytes_per_decode_step_nonattn");
  if (prefill_activation_bytes_per_token < 0.0) {
    throw ConfigError("model.prefill_activation_bytes_per_token",
                      "must be >= 0");
  }
}

ModelSpec ModelSpec::llama2_7b() {
  constexpr double params = 6.738e9;
  ModelSpec m;
  m.num_layers = 32;
  m.hidden_size = 4096;
  m.bytes_per_element = 2.0;
  m.weight_bytes = params * 2.0;
  m.kv_bytes_per_token = m.dense_kv_bytes_per_token();
  m.flops_per_prompt_token = 2.0 * params;
  m.flops_per_decode_token_nonattn = 2.0 * params;
  m.bytes_per_decode_step_nonattn = m.weight_bytes;
  // Unfused per-layer reads+writes: ~14h for norms/projections/attention
  // I/O plus ~5x the FFN width, fp16.
  m.prefill_activation_bytes_per_token = 2.0 * 32 * (14.0 * 4096 + 5.0 * 11008);
  return m;
}

ModelSpec ModelSpec::llama2_13b() {
  constexpr double params = 13.016e9;
  ModelSpec m;
  m.num_layers = 40;
  m.hidden_size = 5120;
  m.bytes_per_element = 2.0;
  m.weight_bytes = params * 2.0;
  m.kv_bytes_per_token = m.dense_kv_bytes_per_token();
  m.flops_per_prompt_token = 2.0 * params;
  m.flops_per_decode_token_nonattn = 2.0 * params;
  m.bytes_per_decode_step_nonattn = m.weight_bytes;
  m.prefill_activation_bytes_per_token = 2.0 * 40 * (14.0 * 5120 + 5.0 * 13824);
  return m;
}

double kv_bytes(const ModelSpec& model, std::int64_t seq_len) {
  return static_cast<double>(std::max<std::int64_t>(seq_len, 0)) *
         model.kv_bytes_per_token;
}

double arithmetic_intensity_nonattn(double hidden_size, double batch) {
  return 1.0 / (1.0 / hidden_size + 1.0 / batch);
}

std::int64_t estimate_b_max(std::vector<std::pair<std::int64_t, double>> samples,
                            double tolerance) {
  if (samples.empty()) throw Error("estimate_b_max needs at least one step sample");
  if (!(tolerance >= 0.0)) throw Error("estimate_b_max tolerance must be >= 0");
  for (const auto& [b, t] : samples) {
    if (b < 1 || !(t > 0.0)) throw Error("step samples need batch >= 1 and latency > 0");
  }
  std::sort(samples.begin(), samples.end());
  const double flat = samples.front().second;
  std::int64_t best = samples.front().first;
  for (const auto& [b, t] : samples) {
    if (t <= flat * (1.0 + tolerance)) best = std::max(best, b);
  }
  return best;
}

BatchLimit b_max_for_balance(double hidden_size, double machine_balance,
                             std::int64_t cap) {
  // 1/(1/h + 1/b) >= balance  <=>  b >= 1 / (1/balance - 1/h), reachable only
  // while balance < h.
  const double inv = 1.0 / machine_balance - 1.0 / hidden_size;
  if (!(inv > 0.0)) return {cap, true};
  const double crossover = 1.0 / inv;
  if (crossover >= static_cast<double>(cap)) return {cap, true};
  auto b = static_cast<std::int64_t>(std::floor(crossover));
  return {std::max<std::int64_t>(b, 1), false};
}

BatchLimit b_max(const ModelSpec& model, const GpuSpec& gpu, std::int64_t cap) {
  return b_max_for_balance(static_cast<double>(model.hidden_size),
                           gpu.machine_balance(), cap);
}

double prefill_latency(const ModelSpec& model, const GpuSpec& gpu,
                       std::int64_t total_prompt_tokens, double sm_ratio,
                       const CalibrationCurves& curves) {
  const double base = static_cast<double>(total_prompt_tokens) *
                      model.flops_per_prompt_token / gpu.flops_peak;
  return base * prefill_slowdown(sm_ratio, curves);
}

KernelCost prefill_cost(const ModelSpec& model, const GpuSpec& gpu,
                        std::int64_t total_prompt_tokens, double sm_ratio,
                        const CalibrationCurves& curves) {
  KernelCost c;
  c.gpu_time = prefill_latency(model, gpu, total_prompt_tokens, sm_ratio, curves);
  const auto tokens = static_cast<double>(total_prompt_tokens);
  c.flops = tokens * model.flops_per_prompt_token;
  c.bytes_moved = model.weight_bytes + kv_bytes(model, total_prompt_tokens) +
                  tokens * model.prefill_activation_bytes_per_token;
  return c;
}

double attention_step_latency(double resident_kv_bytes, double bw_effective) {
  if (resident_kv_bytes <= 0.0) return 0.0;
  return resident_kv_bytes / bw_effective;
}

double nonattn_step_latency(const ModelSpec& model, const GpuSpec& gpu,
                            std::int64_t total_batch, std::int64_t b_max) {
  const double flat = model.bytes_per_decode_step_nonattn / gpu.hbm_bandwidth;
  if (total_batch <= b_max) return flat;
  return flat * (static_cast<double>(total_batch) / static_cast<double>(b_max));
}

double launch_overhead(std::int64_t num_layers, bool graphed, const GpuSpec& gpu,
                       double per_layer_gpu_time, double replay_cost) {
  if (graphed) {
    return replay_cost >= 0.0 ? replay_cost : gpu.cpu_launch_per_layer;
  }
  const double per_layer =
      std::max(0.0, gpu.cpu_launch_per_layer - per_layer_gpu_time);
  return static_cast<double>(num_layers) * per_layer;
}

}  // namespace adrenaline
