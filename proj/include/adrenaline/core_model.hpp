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
#include <utility>
#include <vector>

namespace adrenaline {

class CalibrationCurves;

// Hardware constants of one GPU instance. All units SI: FLOP/s, bytes,
// bytes/s, seconds.
struct GpuSpec {
  double flops_peak = 0.0;
  double hbm_capacity = 0.0;
  double hbm_bandwidth = 0.0;
  double interconnect_bw = 0.0;
  double cpu_launch_per_layer = 0.0;

  // Throws ConfigError("gpu.<field>", ...) on the first violated invariant.
  void validate() const;

  double machine_balance() const { return flops_peak / hbm_bandwidth; }

  // A100-80GB SXM: 312 TFLOP/s fp16 dense, 2039 GB/s HBM2e, 600 GB/s NVLink.
  static GpuSpec a100_80gb();
};

struct ModelSpec {
  std::int64_t num_layers = 0;
  std::int64_t hidden_size = 0;
  double bytes_per_element = 2.0;
  double weight_bytes = 0.0;
  // K and V of every layer for one token.
  double kv_bytes_per_token = 0.0;
  double flops_per_prompt_token = 0.0;
  double flops_per_decode_token_nonattn = 0.0;
  double bytes_per_decode_step_nonattn = 0.0;
  // HBM traffic of intermediate activations during prefill, per prompt
  // token. Only feeds bandwidth accounting, never latency.
  double prefill_activation_bytes_per_token = 0.0;

  void validate() const;

  // Dense-attention KV footprint for this model's shape.
  double dense_kv_bytes_per_token() const {
    return 2.0 * bytes_per_element * static_cast<double>(hidden_size) *
           static_cast<double>(num_layers);
  }

  static ModelSpec llama2_7b();
  static ModelSpec llama2_13b();
};

struct KernelCost {
  double gpu_time = 0.0;
  double bytes_moved = 0.0;
  double flops = 0.0;
};

struct BatchLimit {
  std::int64_t batch = 1;
  // True when the memory/compute crossover is unreachable and `batch` is the
  // configured cap.
  bool capped = false;
};

inline constexpr std::int64_t kDefaultBatchCap = 1024;

double kv_bytes(const ModelSpec& model, std::int64_t seq_len);

// FLOP:byte scale of the non-attention decode kernels, 1 / (1/h + 1/b).
double arithmetic_intensity_nonattn(double hidden_size, double batch);

// Largest batch for which the non-attention kernels stay memory-bound:
// floor of the b solving arithmetic_intensity_nonattn(h, b) = balance.
BatchLimit b_max(const ModelSpec& model, const GpuSpec& gpu,
                 std::int64_t cap = kDefaultBatchCap);
BatchLimit b_max_for_balance(double hidden_size, double machine_balance,
                             std::int64_t cap = kDefaultBatchCap);

// Largest sampled batch whose step latency stays within `tolerance` of the
// latency at the smallest sampled batch (the flat, memory-bound region).
std::int64_t estimate_b_max(std::vector<std::pair<std::int64_t, double>> samples,
                            double tolerance = 0.05);

// Prefill time for a batch of prompts on `sm_ratio` of the SMs.
double prefill_latency(const ModelSpec& model, const GpuSpec& gpu,
                       std::int64_t total_prompt_tokens, double sm_ratio,
                       const CalibrationCurves& curves);
KernelCost prefill_cost(const ModelSpec& model, const GpuSpec& gpu,
                        std::int64_t total_prompt_tokens, double sm_ratio,
                        const CalibrationCurves& curves);

// Attention is bandwidth-bound: one full read of the resident KV per step.
double attention_step_latency(double resident_kv_bytes, double bw_effective);

double nonattn_step_latency(const ModelSpec& model, const GpuSpec& gpu,
                            std::int64_t total_batch, std::int64_t b_max);

// CPU launch stall of one forward pass. Ungraphed, each layer waits
// max(0, cpu - gpu) for its kernels to be issued; a captured graph replays
// in `replay_cost` seconds total (negative = one cpu_launch_per_layer).
double launch_overhead(std::int64_t num_layers, bool graphed,
                       const GpuSpec& gpu, double per_layer_gpu_time,
                       double replay_cost = -1.0);

}  // namespace adrenaline
