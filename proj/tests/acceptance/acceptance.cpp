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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Tolerances are pinned here and nowhere else.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "adrenaline/config.hpp"
#include "adrenaline/errors.hpp"
#include "adrenaline/metrics.hpp"
#include "adrenaline/scheduler.hpp"
#include "adrenaline/sim.hpp"

using namespace adrenaline;

namespace {

// Scenario shared by criteria 6-10 and 12.
constexpr double kSaturatingRate = 6.0;
constexpr std::size_t kScenarioRequests = 1000;
constexpr std::uint64_t kScenarioSeed = 42;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

bool close(double a, double b) {
  return std::fabs(a - b) <= 4.0 * std::numeric_limits<double>::epsilon() *
                                 std::max(1.0, std::fabs(b));
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

ExperimentConfig scenario(const std::string& offload, double rate) {
  ExperimentConfig ec;
  ec.workload.preset = "sharegpt-like";
  ec.workload.rate = rate;
  ec.workload.num_requests = kScenarioRequests;
  ec.workload.seed = kScenarioSeed;
  apply_offload_flag(ec.sim.scheduler, offload);
  return ec;
}

struct Run {
  SimulationReport report;
  SummaryRow row;
};

Run run(const ExperimentConfig& ec) {
  Simulator sim(ec.sim);
  Run r;
  r.report = sim.run_to_completion(ec.workload.build());
  r.row = summarize(r.report, stable_window(r.report));
  return r;
}

// Cached runs of the shared scenario.
const Run& scenario_run(const std::string& offload) {
  static std::vector<std::pair<std::string, Run>> cache;
  for (const auto& [k, v] : cache) {
    if (k == offload) return v;
  }
  cache.emplace_back(offload, run(scenario(offload, kSaturatingRate)));
  return cache.back().second;
}

// --- 1 ---------------------------------------------------------------------

Outcome bounds_exactness() {
  struct MemCase {
    std::vector<double> hbm_p, bw_p;
    double hbm_d, bw_d, expect;
  };
  const std::vector<MemCase> mem = {
      {{40e9, 40e9}, {1.0e12, 1.0e12}, 64e9, 2.0e12, 1.0},
      {{}, {}, 64e9, 2.0e12, 0.0},
      {{64e9}, {2.0e12}, 64e9, 2.0e12, 1.0},
      {{32e9}, {1.0e12}, 64e9, 2.0e12, 0.5},
      {{48e9}, {1.6e12}, 64e9, 2.0e12, 0.75},
      {{10e9, 20e9, 30e9}, {0.5e12, 0.5e12, 0.5e12}, 40e9, 1.0e12, 1.5},
      {{80e9}, {0.4e12}, 40e9, 2.0e12, 0.2},
  };
  struct CompCase {
    double b_max, b_tpot, expect;
  };
  const std::vector<CompCase> comp = {
      {128, 80, 0.6}, {80, 80, 0.0}, {160, 80, 1.0}, {50, 80, 0.0}, {159, 53, 2.0},
      {132, 100, 0.32},
  };
  struct MinCase {
    double a, b, expect;
  };
  const std::vector<MinCase> mins = {
      {0.6, 1.0, 0.6}, {0.0, 0.7, 0.0}, {0.5, 0.5, 0.5}, {1.2, 0.9, 0.9}, {1.0, 0.6, 0.6},
  };
  int checked = 0;
  int bad = 0;
  for (const auto& c : mem) {
    ++checked;
    bad += close(ob_mem(c.hbm_p, c.bw_p, c.hbm_d, c.bw_d), c.expect) ? 0 : 1;
  }
  for (const auto& c : comp) {
    ++checked;
    bad += close(ob_comp(c.b_max, c.b_tpot), c.expect) ? 0 : 1;
  }
  for (const auto& c : mins) {
    ++checked;
    const auto b = make_bounds(c.a, c.b);
    bad += close(combined_bound(c.a, c.b), c.expect) && close(b.ob, c.expect) ? 0 : 1;
  }
  // End to end: memory and compute bounds feeding the combined bound.
  ++checked;
  {
    const std::vector<double> h{40e9}, w{1.2e12};
    bad += close(combined_bound(ob_mem(h, w, 64e9, 2e12), ob_comp(128, 64)), 0.6) ? 0 : 1;
  }
  ++checked;
  {
    const std::vector<double> h{50e9, 50e9}, w{0.7e12, 0.7e12};
    bad += close(combined_bound(ob_mem(h, w, 50e9, 2e12), ob_comp(120, 100)), 0.2) ? 0 : 1;
  }
  return {bad == 0 && checked == 20,
          std::to_string(checked - bad) + "/" + std::to_string(checked) + " vectors exact"};
}

// --- 2 ---------------------------------------------------------------------

// Reference offload rule, evaluated line by line.
bool reference_rule(const Request& r, double ob, const std::vector<Request>& LR,
                const std::vector<Request>& OR, bool c1_reads_max) {
  long long attn_max_tokens = 0;
  long long attn_used_tokens = 0;
  long long decode_used_tokens = 0;
  for (std::size_t i = 0; i < OR.size(); i++) attn_max_tokens = attn_max_tokens + OR[i].max_token;
  for (std::size_t i = 0; i < OR.size(); i++) attn_used_tokens = attn_used_tokens + OR[i].used_token;
  for (std::size_t i = 0; i < LR.size(); i++) {
    decode_used_tokens = decode_used_tokens + LR[i].used_token;
  }
  const long long c1_lhs = (c1_reads_max ? attn_max_tokens : attn_used_tokens) + r.max_token;
  if ((double)c1_lhs < (double)decode_used_tokens * ob) return true;
  if ((double)(attn_used_tokens + r.used_token) < (double)decode_used_tokens * ob) {
    if ((double)(OR.size() + 1) < (double)LR.size() * ob) return true;
  }
  return false;
}

Outcome offload_rule_oracle() {
  std::mt19937_64 rng(7);
  auto uni = [&](long long lo, long long hi) {
    return std::uniform_int_distribution<long long>(lo, hi)(rng);
  };
  auto make = [&]() {
    Request q;
    q.prompt_tokens = uni(1, 16384);
    q.max_token = q.prompt_tokens + uni(1, 16384);
    q.used_token = uni(q.prompt_tokens, q.max_token);
    return q;
  };
  int disagree = 0;
  int c1_hits = 0;
  int c2_hits = 0;
  const int n = 10000;
  for (int variant = 0; variant < 2; ++variant) {
    for (int i = 0; i < n; ++i) {
      std::vector<Request> lr(uni(0, 32)), orr(uni(0, 32));
      for (auto& q : lr) q = make();
      for (auto& q : orr) q = make();
      Request req = make();
      double ob = std::uniform_real_distribution<double>(0.0, 1.5)(rng);
      if (i % 10 == 0 && !lr.empty()) {
        // Land exactly on the C1 boundary to exercise the strict inequality.
        long long du = 0;
        long long au = 0;
        for (const auto& q : lr) du += q.used_token;
        for (const auto& q : orr) au += variant ? q.max_token : q.used_token;
        ob = 0.5;
        if (du % 2) {
          lr[0].used_token += lr[0].used_token < lr[0].max_token ? 1 : -1;
          du = 0;
          for (const auto& q : lr) du += q.used_token;
        }
        if (du % 2 == 0 && du / 2 - au > 0) {
          req.max_token = du / 2 - au;
          req.prompt_tokens = std::max<long long>(1, req.max_token / 2);
          req.used_token = req.prompt_tokens;
        }
      }
      const auto got = need_offload(req, ob, lr, orr, variant == 1);
      const bool want = reference_rule(req, ob, lr, orr, variant == 1);
      disagree += got.offload != want ? 1 : 0;
      c1_hits += got.c1 ? 1 : 0;
      c2_hits += (!got.c1 && got.c2) ? 1 : 0;
    }
  }
  return {disagree == 0 && c1_hits > 0 && c2_hits > 0,
          std::to_string(2 * n - disagree) + "/" + std::to_string(2 * n) +
              " agree (C1 " + std::to_string(c1_hits) + ", C2-only " +
              std::to_string(c2_hits) + ")"};
}

// --- 3 ---------------------------------------------------------------------

Outcome overlap_soundness() {
  std::mt19937_64 rng(11);
  int c1_requests = 0;
  int stalled = 0;
  double worst = 0.0;
  for (int w = 0; w < 500; ++w) {
    ExperimentConfig ec;
    ec.sim.sim.ideal_sync = true;
    ec.sim.scheduler.mode = OffloadMode::kAuto;
    ec.workload.preset = (w % 2) ? "openthoughts-like" : "sharegpt-like";
    ec.workload.rate = std::uniform_real_distribution<double>(1.0, 10.0)(rng);
    ec.workload.num_requests = 40 + rng() % 60;
    ec.workload.seed = rng();
    Simulator sim(ec.sim);
    const auto rep = sim.run_to_completion(ec.workload.build());
    for (const auto& r : rep.requests) {
      if (!r.admitted_by_c1) continue;
      ++c1_requests;
      if (r.stall_total != 0.0) {
        ++stalled;
        worst = std::max(worst, r.stall_total);
      }
    }
  }
  return {stalled == 0 && c1_requests > 0,
          std::to_string(stalled) + " of " + std::to_string(c1_requests) +
              " C1 admissions stalled (worst lifetime stall " + fmt("%.3g", worst) + " s)"};
}

// --- 4 ---------------------------------------------------------------------

Outcome conservation() {
  std::mt19937_64 rng(13);
  int violations = 0;
  std::string first;
  std::int64_t preempted = 0;
  for (int i = 0; i < 100; ++i) {
    ExperimentConfig ec;
    ec.sim.sim.check_invariants = true;
    ec.sim.cluster.num_prefill = 1 + rng() % 2;
    ec.sim.cluster.num_decoding = 1 + rng() % 2;
    // Tight decoder budgets force preemption.
    ec.sim.cluster.gpu_memory_utilization = 0.3 + 0.5 * (rng() % 100) / 100.0;
    const int mode = static_cast<int>(rng() % 3);
    ec.sim.scheduler.mode = mode == 0 ? OffloadMode::kOff
                                      : (mode == 1 ? OffloadMode::kAuto : OffloadMode::kFixed);
    ec.sim.scheduler.fixed_ratio = 0.3 + 0.7 * (rng() % 100) / 100.0;
    ec.workload.preset = (i % 2) ? "openthoughts-like" : "sharegpt-like";
    ec.workload.rate = 1.0 + (rng() % 90) / 10.0;
    ec.workload.num_requests = 60 + rng() % 60;
    ec.workload.seed = rng();
    try {
      Simulator sim(ec.sim);
      const auto wl = ec.workload.build();
      for (const auto& r : wl) sim.submit(r);
      if (ec.sim.cluster.num_prefill > 1 && i % 3 == 0) {
        const double t = wl[wl.size() / 3].arrival_time;
        sim.schedule_topology_change(t, 0, false);
        sim.schedule_topology_change(t + 20.0, 0, true);
      }
      sim.run();
      const auto& rep = sim.report();
      preempted += rep.preemptions + rep.executor_preemptions;
      for (const auto& r : rep.requests) {
        if (!r.completed || r.kv_allocated != r.kv_freed) {
          ++violations;
          if (first.empty()) first = "request " + std::to_string(r.id) + " not conserved";
        }
      }
    } catch (const std::exception& e) {
      ++violations;
      if (first.empty()) first = e.what();
    }
  }
  return {violations == 0, std::to_string(violations) + " violations over 100 runs, " +
                               std::to_string(preempted) + " preemptions exercised" +
                               (first.empty() ? "" : "; first: " + first)};
}

// --- 5 ---------------------------------------------------------------------

Outcome baseline_plateau() {
  const std::vector<double> rates{1, 2, 3, 4};
  std::vector<double> thr;
  std::vector<bool> sat;
  for (double r : rates) {
    const auto res = run(scenario("off", r));
    thr.push_back(res.row.throughput);
    sat.push_back(!res.report.saturation_times.empty());
  }
  bool ok = sat.back() && sat[sat.size() - 2];
  for (std::size_t i = 0; i + 1 < thr.size(); ++i) {
    if (sat[i] && sat[i + 1]) {
      ok = ok && std::fabs(thr[i + 1] - thr[i]) <= 0.05 * std::max(thr[i], thr[i + 1]);
    } else {
      ok = ok && thr[i + 1] >= thr[i];
    }
  }
  std::string d;
  for (std::size_t i = 0; i < thr.size(); ++i) {
    d += fmt("%.0f", thr[i]) + (sat[i] ? "*" : "") + (i + 1 < thr.size() ? ", " : "");
  }
  return {ok, "tok/s at rates 1-4: " + d + " (* = saturated)"};
}

// --- 6-10 --------------------------------------------------------------------

Outcome speedup_band() {
  const auto& base = scenario_run("0");
  const auto& off = scenario_run("0.7");
  const double s = off.row.throughput / base.row.throughput;
  const bool both_saturated = base.row.window.rule == StableWindow::Rule::kSaturation &&
                              off.row.window.rule == StableWindow::Rule::kSaturation;
  return {both_saturated && s >= 1.3 && s <= 1.8,
          fmt("speedup %.3fx", s) + fmt(" (%.0f", off.row.throughput) +
              fmt(" vs %.0f tok/s)", base.row.throughput)};
}

Outcome inflection() {
  const std::vector<std::string> ratios{"0.4", "0.5", "0.6", "0.7", "0.8", "0.9"};
  std::vector<double> thr;
  for (const auto& r : ratios) thr.push_back(scenario_run(r).row.throughput);
  const auto peak = static_cast<std::size_t>(
      std::max_element(thr.begin(), thr.end()) - thr.begin());
  bool unimodal = true;
  for (std::size_t i = 0; i + 1 < thr.size(); ++i) {
    if (i < peak) unimodal = unimodal && thr[i + 1] >= thr[i];
    if (i >= peak) unimodal = unimodal && thr[i + 1] <= thr[i];
  }
  const bool drops = thr[4] < thr[peak] || thr[5] < thr[peak];
  std::string d;
  for (std::size_t i = 0; i < thr.size(); ++i) {
    d += ratios[i] + ":" + fmt("%.0f", thr[i]) + (i + 1 < thr.size() ? " " : "");
  }
  return {unimodal && drops, d + " (peak " + ratios[peak] + ")"};
}

Outcome ratio_in(double (*pick)(const SummaryRow&), double lo, double hi) {
  const auto& base = scenario_run("0");
  const auto& off = scenario_run("0.7");
  const double b = pick(base.row);
  const double o = pick(off.row);
  const double ratio = o / b;
  return {ratio >= lo && ratio <= hi,
          fmt("ratio %.3f", ratio) + fmt(" (%.4f", o) + fmt(" vs %.4f)", b) +
              fmt(", band [%.2f, ", lo) + fmt("%.2f]", hi)};
}

// --- 11 ----------------------------------------------------------------------

Outcome launch_overhead_gain() {
  GpuSpec gpu = GpuSpec::a100_80gb();
  gpu.cpu_launch_per_layer = 1.137e-3;
  const double per_layer = 0.38e-3;
  const double layer_gpu = 32 * per_layer;
  const double direct = (layer_gpu + launch_overhead(32, false, gpu, per_layer)) /
                        (layer_gpu + launch_overhead(32, true, gpu, per_layer));

  StepCostModel cost;
  cost.model = ModelSpec::llama2_7b();
  cost.gpu = gpu;
  cost.b_max = b_max(cost.model, gpu).batch;
  StepInputs in;
  in.local_batch = 8;
  in.local_kv_bytes = 8 * kv_bytes(cost.model, 1024);
  const double ungraphed = decode_step_timing(cost, in).timing.total();
  cost.grid = build_grid(256, 1, kDefaultGraphInterval, kDefaultGraphBudget);
  cost.offload_axis = false;
  const double graphed = decode_step_timing(cost, in).timing.total();
  const double step = ungraphed / graphed;
  return {direct >= 2.0 && step >= 2.0,
          fmt("per-layer setting %.2fx", direct) + fmt(", batch 8 / seq 1K step %.2fx", step)};
}

// --- 12 ----------------------------------------------------------------------

Outcome determinism() {
  bool ok = true;
  std::string d;
  for (const std::string off : {"0", "0.7", "auto"}) {
    const auto a = run(scenario(off, kSaturatingRate)).report.hash();
    const auto b = run(scenario(off, kSaturatingRate)).report.hash();
    ok = ok && a == b;
    d += off + ":" + a + (a == b ? "" : "!=" + b) + " ";
  }
  return {ok, d};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "Offload bound exactness", 1.0, bounds_exactness},
      {2, "Offload rule oracle equivalence", 5.0, offload_rule_oracle},
      {3, "Overlap soundness (ideal sync)", 60.0, overlap_soundness},
      {4, "KV conservation", 60.0, conservation},
      {5, "Baseline plateau", 30.0, baseline_plateau},
      {6, "Speedup band", 60.0, speedup_band},
      {7, "Offload-ratio inflection", 120.0, inflection},
      {8, "Prefill HBM capacity gain", 60.0,
       [] { return ratio_in([](const SummaryRow& r) { return r.prefill_hbm_util; }, 1.7, 2.9); }},
      {9, "Prefill HBM bandwidth gain", 60.0,
       [] { return ratio_in([](const SummaryRow& r) { return r.prefill_bw_util; }, 1.3, 2.3); }},
      {10, "Decoder compute gain", 60.0,
       [] {
         return ratio_in([](const SummaryRow& r) { return r.decoder_compute_util; }, 1.4, 1.9);
       }},
      {11, "Launch-overhead reproduction", 5.0, launch_overhead_gain},
      {12, "Determinism", 30.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = dt <= c.budget_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("[%s] %2d %-32s %s; %.2f s of %.0f s%s\n", pass ? "PASS" : "FAIL", c.id,
                c.name, o.detail.c_str(), dt, c.budget_s, in_time ? "" : " (over budget)");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
