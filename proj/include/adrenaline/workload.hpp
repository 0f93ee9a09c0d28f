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
#include <vector>

#include <json.hpp>

#include "adrenaline/scheduler.hpp"

namespace adrenaline {

struct TraceRecord {
  std::optional<double> arrival;
  std::int64_t prompt_tokens = 0;
  std::int64_t output_tokens = 0;
};

using Workload = std::vector<Request>;

// Spacing added to a non-increasing arrival to keep the sequence strictly
// increasing.
inline constexpr double kArrivalJitter = 1e-9;

struct LengthDist {
  enum class Kind { kConstant, kUniform, kLognormal };
  Kind kind = Kind::kConstant;
  // constant: a = value. uniform: [a, b]. lognormal: a = mean, b = sigma of
  // the underlying normal.
  double a = 1.0;
  double b = 0.0;
  // Samples are rounded and clamped to [1, max_value].
  std::int64_t max_value = 4096;

  static LengthDist constant(double v) { return {Kind::kConstant, v, 0.0}; }
  static LengthDist uniform(double lo, double hi) { return {Kind::kUniform, lo, hi}; }
  static LengthDist lognormal(double mean, double sigma, std::int64_t cap = 4096) {
    return {Kind::kLognormal, mean, sigma, cap};
  }

  void validate(const std::string& field) const;
  static LengthDist from_json(const nlohmann::json& j, const std::string& field);
  nlohmann::json to_json() const;
};

struct WorkloadPreset {
  std::string name;
  LengthDist prompt;
  LengthDist output;
};

// "sharegpt-like" (chat: prompts longer than outputs) and
// "openthoughts-like" (reasoning: outputs longer than prompts).
WorkloadPreset workload_preset(const std::string& name);
std::vector<std::string> workload_preset_names();

// Seeded Poisson arrivals at `rate` requests/s (cluster-wide).
std::vector<double> poisson_arrivals(std::size_t n, double rate, std::uint64_t seed);

Workload gen_synthetic(std::size_t n, const LengthDist& prompt_dist,
                       const LengthDist& output_dist, double rate,
                       std::uint64_t seed);

Workload from_records(const std::vector<TraceRecord>& records,
                      std::optional<double> rate_override, std::uint64_t seed);

// JSONL: one {"arrival"?, "prompt_tokens", "output_tokens"} object per line.
// Blank lines are skipped. If any record lacks an arrival or a rate override
// is given, arrivals are redrawn from a seeded Poisson process.
std::vector<TraceRecord> parse_trace(std::istream& in);
Workload load_trace(const std::string& path, std::optional<double> rate_override,
                    std::uint64_t seed);

void write_trace(std::ostream& out, const Workload& workload);

}  // namespace adrenaline
