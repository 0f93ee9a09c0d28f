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
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adrenaline/sim.hpp"

namespace adrenaline {

// Nearest-rank percentile, p in (0, 100]. NaN for an empty sample.
double percentile_nearest_rank(std::vector<double> samples, double p);

struct StableWindow {
  enum class Rule { kSaturation, kPeakBatch, kFullRun };
  double start = 0.0;
  double end = 0.0;
  Rule rule = Rule::kFullRun;
  // True when neither rule applied and the whole run is used.
  bool flagged = false;

  double length() const { return end - start; }
};

const char* window_rule_name(StableWindow::Rule r);

// Batches at or above this share of the peak count as steady state when no
// decoder ever saturated.
inline constexpr double kPeakBatchShare = 0.8;

StableWindow stable_window(const SimulationReport& report);

struct SummaryRow {
  std::string config_hash;
  double rate = 0.0;
  std::string offload;
  StableWindow window;
  // Set when the window has zero length; metric fields are then NaN.
  bool empty = false;
  std::size_t requests = 0;
  std::size_t completed = 0;
  std::size_t offloaded = 0;
  double mean_ttft = 0.0;
  double mean_tpot = 0.0;
  double p99_tpot = 0.0;
  // Output tokens per second inside the window.
  double throughput = 0.0;
  double prefill_hbm_util = 0.0;
  double prefill_bw_util = 0.0;
  double decoder_hbm_util = 0.0;
  double decoder_bw_util = 0.0;
  // Modeled: nonattn busy time weighted by min(1, batch / b_max).
  double decoder_compute_util = 0.0;
  std::int64_t preemptions = 0;

  nlohmann::json to_json() const;
};

SummaryRow summarize(const SimulationReport& report, const StableWindow& window);

std::string summary_csv_header();
std::string summary_csv_row(const SummaryRow& row);

}  // namespace adrenaline
