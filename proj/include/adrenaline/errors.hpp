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
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace adrenaline {

// Base of every error raised by the library. Callers that only care about
// "something was rejected" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// SM ratio outside (0, 1].
class InvalidPartition : public Error {
 public:
  using Error::Error;
};

// No SM ratio on the search grid meets the TTFT target.
class InfeasibleSlo : public Error {
 public:
  InfeasibleSlo(double ttft_slo, double best_latency)
      : Error("TTFT SLO " + std::to_string(ttft_slo) +
              " s is infeasible; best achievable prefill latency is " +
              std::to_string(best_latency) + " s"),
        ttft_slo_(ttft_slo),
        best_latency_(best_latency) {}

  double ttft_slo() const noexcept { return ttft_slo_; }
  double best_latency() const noexcept { return best_latency_; }

 private:
  double ttft_slo_;
  double best_latency_;
};

// Calibration points violating monotonicity or the super/sub-linearity
// constraints. `indices` refer to positions in the input list.
class CurveError : public Error {
 public:
  CurveError(const std::string& what, std::vector<std::size_t> indices)
      : Error(what), indices_(std::move(indices)) {}

  const std::vector<std::size_t>& indices() const noexcept { return indices_; }

 private:
  std::vector<std::size_t> indices_;
};

// A batch that does not fit in the largest captured launch graph.
class GraphOverflow : public Error {
 public:
  using Error::Error;
};

// Invalid configuration. The message always starts with the field path,
// e.g. "gpu.hbm_bandwidth: must be > 0".
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& msg)
      : Error(field + ": " + msg), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Malformed trace input; line numbers are 1-based.
class TraceError : public Error {
 public:
  TraceError(std::size_t line, const std::string& msg)
      : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Raised by the event core: precondition violations on submit, invariant
// breaches when checking is enabled, and the livelock detector.
class SimulationError : public Error {
 public:
  using Error::Error;
};

}  // namespace adrenaline
