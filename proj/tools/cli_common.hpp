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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adrenaline/config.hpp"
#include "adrenaline/metrics.hpp"
#include "adrenaline/sim.hpp"

namespace adrenaline::cli {

// Flags shared by `run` and `sweep`; unset flags keep the config's values.
struct Overrides {
  std::string config;
  std::string preset;
  std::string trace;
  std::optional<double> rate;
  std::string offload;
  std::optional<double> sm_ratio;
  std::optional<std::uint64_t> seed;
  std::optional<double> ttft_slo;
  std::optional<double> tpot_slo;
  std::optional<std::size_t> num_requests;
};

ExperimentConfig build_experiment(const Overrides& o);

std::string offload_label(const SchedulerConfig& s);

struct PointResult {
  SimulationReport report;
  SummaryRow row;
  std::string decisions;
};

PointResult run_point(const ExperimentConfig& ec);

// report.json, summary.csv, step_trace.jsonl, decisions.jsonl.
void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& ec,
                       const PointResult& res);

enum class SweepAxis { kRate, kOffloadRatio, kSmRatio };

SweepAxis parse_axis(const std::string& s);
const char* axis_name(SweepAxis a);

// Runs every point; returns the process exit code.
int run_sweep(const ExperimentConfig& base, SweepAxis axis,
              const std::vector<std::string>& values, const std::filesystem::path& out_dir);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<Series>& series);

}  // namespace adrenaline::cli
