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
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "adrenaline/core_model.hpp"

namespace adrenaline {

using CurvePoint = std::pair<double, double>;

// Profiled SM-ratio response of the two colocated workloads on a prefill
// instance: attention bandwidth (fraction of peak HBM bandwidth) and prefill
// slowdown (latency multiplier vs. the full GPU).
//
// Both lists are sorted by ratio, duplicate-free, and end at (1, 1). The
// bandwidth curve is implicitly anchored at (0, 0). Construction validates
// the shape and throws CurveError naming the offending point indices.
class CalibrationCurves {
 public:
  CalibrationCurves(std::vector<CurvePoint> bw_points,
                    std::vector<CurvePoint> slowdown_points);

  // Synthetic curves through the two profiled anchors (20% of SMs reach 60%
  // of peak bandwidth; half the SMs cost 1.4x prefill latency).
  static CalibrationCurves defaults();

  static CalibrationCurves from_json(const nlohmann::json& j);
  static CalibrationCurves load(const std::string& path);
  nlohmann::json to_json() const;

  const std::vector<CurvePoint>& bw_points() const { return bw_; }
  const std::vector<CurvePoint>& slowdown_points() const { return slowdown_; }

  static void validate_bw(const std::vector<CurvePoint>& pts);
  static void validate_slowdown(const std::vector<CurvePoint>& pts);

 private:
  std::vector<CurvePoint> bw_;
  std::vector<CurvePoint> slowdown_;
};

struct SmPartition {
  double prefill_sm_ratio = 1.0;
  double attn_sm_ratio = 0.0;

  static SmPartition with_prefill_ratio(double prefill_sm_ratio);
};

// Fraction of peak HBM bandwidth the attention kernel reaches on `sm_ratio`
// of the SMs. 0 at 0, 1 at 1, piecewise-linear in between.
double attn_bw_fraction(double sm_ratio, const CalibrationCurves& curves);

// Prefill latency multiplier on `sm_ratio` of the SMs. Throws
// InvalidPartition for ratios outside (0, 1].
double prefill_slowdown(double sm_ratio, const CalibrationCurves& curves);

// Builds curves from profiled points listed by increasing SM ratio. Values
// are rescaled so the full-GPU point reads exactly 1; the point is appended
// when missing. CurveError indices refer to the input lists.
CalibrationCurves fit_curves(std::vector<CurvePoint> bw_points,
                             std::vector<CurvePoint> slowdown_points);

inline constexpr double kDefaultSmGridStep = 0.05;

// Smallest prefill SM ratio on the grid {step, 2*step, ..., 1} whose prefill
// latency for `expected_prompt_tokens` meets `ttft_slo`; the rest of the SMs
// go to the attention executor. Throws InfeasibleSlo when even the full GPU
// misses the target.
SmPartition min_sm_ratio_for_slo(double ttft_slo,
                                 std::int64_t expected_prompt_tokens,
                                 const ModelSpec& model, const GpuSpec& gpu,
                                 const CalibrationCurves& curves,
                                 double grid_step = kDefaultSmGridStep);

}  // namespace adrenaline
