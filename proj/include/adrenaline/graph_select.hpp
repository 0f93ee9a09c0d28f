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
#include <vector>

#include "adrenaline/core_model.hpp"

namespace adrenaline {

// Captured launch graphs over (local batch C_d) x (offloaded batch C_o).
struct GraphGrid {
  std::vector<std::int64_t> cd_capacities;
  std::vector<std::int64_t> co_capacities;
  std::int64_t interval = 1;

  std::size_t size() const { return cd_capacities.size() * co_capacities.size(); }
  std::int64_t max_cd() const { return cd_capacities.back(); }
  std::int64_t max_co() const { return co_capacities.back(); }
};

struct GraphChoice {
  std::int64_t cd = 0;
  std::int64_t co = 0;
};

inline constexpr std::int64_t kDefaultGraphInterval = 8;
inline constexpr std::int64_t kDefaultGraphBudget = 64;

// Capacities {interval, 2*interval, ...} up to the first multiple covering
// each maximum. The interval doubles until the grid fits the budget.
GraphGrid build_grid(std::int64_t max_cd, std::int64_t max_co,
                     std::int64_t interval, std::int64_t budget);

// Smallest capacity covering each axis independently. Throws GraphOverflow
// when either batch exceeds the grid.
GraphChoice select_graph(std::int64_t local_batch, std::int64_t offload_batch,
                         const GraphGrid& grid);

struct GraphStepOverhead {
  // Added to the decode step.
  double critical_path = 0.0;
  // Sending the selected shape to the executor happens before the step and
  // is only executor-side work.
  double executor_notification = 0.0;
};

GraphStepOverhead step_overhead_with_graph(const GraphChoice& selected,
                                           const GpuSpec& gpu,
                                           std::int64_t num_layers,
                                           double notification_cost = 0.0);

}  // namespace adrenaline
