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

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cli_common.hpp"

namespace adrenaline::cli {

ExperimentConfig build_experiment(const Overrides& o) {
  ExperimentConfig ec = o.config.empty() ? ExperimentConfig{} : load_experiment(o.config);
  if (!o.preset.empty()) {
    ec.workload.preset = o.preset;
    ec.workload.trace.clear();
    ec.workload.prompt.reset();
    ec.workload.output.reset();
  }
  if (!o.trace.empty()) {
    ec.workload.trace = o.trace;
    // A replayed trace keeps its own timestamps unless --rate is given.
    if (!o.rate) ec.workload.rate.reset();
  }
  if (o.rate) ec.workload.rate = *o.rate;
  if (!o.offload.empty()) apply_offload_flag(ec.sim.scheduler, o.offload);
  if (o.sm_ratio) ec.sim.colocation.prefill_sm_ratio = *o.sm_ratio;
  if (o.seed) ec.workload.seed = *o.seed;
  if (o.ttft_slo) ec.sim.colocation.ttft_slo = *o.ttft_slo;
  if (o.tpot_slo) ec.sim.scheduler.tpot_slo = *o.tpot_slo;
  if (o.num_requests) ec.workload.num_requests = *o.num_requests;
  ec.sim.validate();
  ec.workload.validate();
  return ec;
}

std::string offload_label(const SchedulerConfig& s) {
  if (s.mode != OffloadMode::kFixed) return offload_mode_name(s.mode);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", s.fixed_ratio);
  return buf;
}

PointResult run_point(const ExperimentConfig& ec) {
  Simulator sim(ec.sim);
  PointResult res;
  res.report = sim.run_to_completion(ec.workload.build());
  res.row = summarize(res.report, stable_window(res.report));
  // The row identifies the whole experiment, workload included.
  res.row.config_hash = content_hash(to_json(ec).dump());
  res.row.rate = ec.workload.rate.value_or(0.0);
  res.row.offload = offload_label(ec.sim.scheduler);
  std::ostringstream d;
  write_decision_trace(d, sim.scheduler());
  res.decisions = d.str();
  return res;
}

void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& ec,
                       const PointResult& res) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("report.json");
    nlohmann::json j = res.report.to_json();
    j["config"] = to_json(ec);
    j["summary"] = res.row.to_json();
    j["report_hash"] = res.report.hash();
    f << j.dump(1) << '\n';
  }
  {
    auto f = open("summary.csv");
    f << summary_csv_header() << '\n' << summary_csv_row(res.row) << '\n';
  }
  {
    auto f = open("step_trace.jsonl");
    write_step_trace(f, res.report);
  }
  {
    auto f = open("decisions.jsonl");
    f << res.decisions;
  }
}

}  // namespace adrenaline::cli
