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

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "adrenaline/errors.hpp"
#include "cli_common.hpp"

namespace adrenaline::cli {

SweepAxis parse_axis(const std::string& s) {
  if (s == "rate") return SweepAxis::kRate;
  if (s == "offload_ratio") return SweepAxis::kOffloadRatio;
  if (s == "sm_ratio") return SweepAxis::kSmRatio;
  throw ConfigError("axis", "expected rate|offload_ratio|sm_ratio, got '" + s + "'");
}

const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::kRate:
      return "rate";
    case SweepAxis::kOffloadRatio:
      return "offload_ratio";
    case SweepAxis::kSmRatio:
      return "sm_ratio";
  }
  return "?";
}

namespace {

double parse_number(const std::string& v) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size()) throw ConfigError("values", "not a number: '" + v + "'");
  return x;
}

ExperimentConfig apply_axis(ExperimentConfig ec, SweepAxis axis, const std::string& v) {
  switch (axis) {
    case SweepAxis::kRate:
      ec.workload.rate = parse_number(v);
      break;
    case SweepAxis::kOffloadRatio:
      apply_offload_flag(ec.sim.scheduler, v);
      break;
    case SweepAxis::kSmRatio:
      ec.sim.colocation.prefill_sm_ratio = parse_number(v);
      break;
  }
  ec.sim.validate();
  ec.workload.validate();
  return ec;
}

// Position of the point on the x axis; "off" counts as ratio 0.
double axis_value(SweepAxis axis, const std::string& v) {
  if (axis == SweepAxis::kOffloadRatio && v == "off") return 0.0;
  if (axis == SweepAxis::kOffloadRatio && v == "auto") return -1.0;
  return parse_number(v);
}

std::size_t thread_count(std::size_t points) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ADRENALINE_SIM_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
  }
  return std::min(n, points);
}

}  // namespace

int run_sweep(const ExperimentConfig& base, SweepAxis axis,
              const std::vector<std::string>& values, const std::filesystem::path& out_dir) {
  if (values.size() < 2) throw ConfigError("values", "a sweep needs at least 2 values");
  std::vector<ExperimentConfig> points;
  for (const auto& v : values) points.push_back(apply_axis(base, axis, v));
  std::filesystem::create_directories(out_dir);

  std::vector<std::optional<PointResult>> results(points.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  std::string first_error;

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      try {
        auto res = run_point(points[i]);
        write_run_outputs(out_dir / ("point_" + std::to_string(i)), points[i], res);
        results[i] = std::move(res);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (first_error.empty()) {
          first_error = std::string(axis_name(axis)) + "=" + values[i] + ": " + e.what();
        }
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t threads = thread_count(points.size());
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  // Completed points are kept even when the sweep aborts.
  {
    std::ofstream csv(out_dir / "sweep.csv");
    csv << "axis,value," << summary_csv_header() << '\n';
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!results[i]) continue;
      csv << axis_name(axis) << ',' << values[i] << ',' << summary_csv_row(results[i]->row)
          << '\n';
      std::cout << axis_name(axis) << '=' << values[i] << ' '
                << summary_csv_row(results[i]->row) << '\n';
    }
  }
  Series thr{"throughput", {}, {}};
  Series tpot{"mean TPOT", {}, {}};
  Series p99{"P99 TPOT", {}, {}};
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!results[i]) continue;
    const double x = axis_value(axis, values[i]);
    if (x < 0.0) continue;
    thr.x.push_back(x);
    thr.y.push_back(results[i]->row.throughput);
    tpot.x.push_back(x);
    tpot.y.push_back(results[i]->row.mean_tpot * 1e3);
    p99.x.push_back(x);
    p99.y.push_back(results[i]->row.p99_tpot * 1e3);
  }
  std::ofstream(out_dir / "throughput.svg")
      << line_chart_svg("Output throughput", axis_name(axis), "tokens/s", {thr});
  std::ofstream(out_dir / "tpot.svg")
      << line_chart_svg("Time per output token", axis_name(axis), "ms", {tpot, p99});

  if (failed) {
    std::cerr << "error: sweep aborted at " << first_error << '\n';
    return 1;
  }
  return 0;
}

}  // namespace adrenaline::cli
