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

#include "adrenaline/graph_select.hpp"

#include <algorithm>
#include <string>

#include "adrenaline/errors.hpp"

namespace adrenaline {

namespace {

std::vector<std::int64_t> capacities(std::int64_t max_batch, std::int64_t interval) {
  std::vector<std::int64_t> out;
  for (std::int64_t c = interval;; c += interval) {
    out.push_back(c);
    if (c >= max_batch) break;
  }
  return out;
}

std::int64_t smallest_fit(const std::vector<std::int64_t>& caps,
                          std::int64_t batch, const char* axis) {
  auto it = std::lower_bound(caps.begin(), caps.end(), batch);
  if (it == caps.end()) {
    throw GraphOverflow(std::string(axis) + " batch " + std::to_string(batch) +
                        " exceeds largest graph capacity " +
                        std::to_string(caps.back()));
  }
  return *it;
}

}  // namespace

GraphGrid build_grid(std::int64_t max_cd, std::int64_t max_co,
                     std::int64_t interval, std::int64_t budget) {
  if (max_cd < 1 || max_co < 1) {
    throw ConfigError("graphs.max_batch", "maxima must be >= 1");
  }
  if (interval < 1) throw ConfigError("graphs.interval", "must be >= 1");
  if (budget < 1) throw ConfigError("graphs.budget", "must be >= 1");

  GraphGrid g;
  g.interval = interval;
  for (;;) {
    g.cd_capacities = capacities(max_cd, g.interval);
    g.co_capacities = capacities(max_co, g.interval);
    if (g.size() <= static_cast<std::size_t>(budget)) return g;
    g.interval *= 2;
  }
}

GraphChoice select_graph(std::int64_t local_batch, std::int64_t offload_batch,
                         const GraphGrid& grid) {
  if (local_batch < 0 || offload_batch < 0) {
    throw Error("select_graph: batch sizes must be >= 0");
  }
  return {smallest_fit(grid.cd_capacities, local_batch, "local"),
          smallest_fit(grid.co_capacities, offload_batch, "offloaded")};
}

GraphStepOverhead step_overhead_with_graph(const GraphChoice& /*selected*/,
                                           const GpuSpec& gpu,
                                           std::int64_t num_layers,
                                           double notification_cost) {
  GraphStepOverhead o;
  o.critical_path = launch_overhead(num_layers, /*graphed=*/true, gpu, 0.0);
  o.executor_notification = notification_cost;
  return o;
}

}  // namespace adrenaline
