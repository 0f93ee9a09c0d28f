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

#include "adrenaline/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "adrenaline/errors.hpp"

namespace adrenaline {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Sum of binned values inside [t0, t1]; a partially covered bin contributes
// its covered fraction.
double integrate(const std::vector<double>& bins, double period, double t0, double t1) {
  if (!(t1 > t0)) return 0.0;
  double total = 0.0;
  const auto first = static_cast<std::size_t>(std::floor(t0 / period));
  for (std::size_t i = first; i < bins.size(); ++i) {
    const double b0 = static_cast<double>(i) * period;
    const double b1 = b0 + period;
    if (b0 >= t1) break;
    const double overlap = std::min(b1, t1) - std::max(b0, t0);
    if (overlap > 0.0) total += bins[i] * overlap / period;
  }
  return total;
}

template <typename F>
double instance_mean(const std::vector<UtilizationSeries>& series, F&& per_instance) {
  if (series.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& s : series) sum += per_instance(s);
  return sum / static_cast<double>(series.size());
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

double percentile_nearest_rank(std::vector<double> samples, double p) {
  if (!(p > 0.0 && p <= 100.0)) throw Error("percentile must be in (0, 100]");
  if (samples.empty()) return kNaN;
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, samples.size());
  return samples[rank - 1];
}

const char* window_rule_name(StableWindow::Rule r) {
  switch (r) {
    case StableWindow::Rule::kSaturation:
      return "saturation";
    case StableWindow::Rule::kPeakBatch:
      return "peak_batch";
    case StableWindow::Rule::kFullRun:
      return "full_run";
  }
  return "?";
}

StableWindow stable_window(const SimulationReport& report) {
  StableWindow w;
  if (!report.saturation_times.empty()) {
    const auto [lo, hi] = std::minmax_element(report.saturation_times.begin(),
                                              report.saturation_times.end());
    if (*hi > *lo) {
      w.start = *lo;
      w.end = *hi;
      w.rule = StableWindow::Rule::kSaturation;
      return w;
    }
  }

  // Cluster-wide running batch at each sample instant.
  std::map<double, std::int64_t> total;
  for (const auto& s : report.decoding) {
    for (const auto& [t, b] : s.batch_samples) total[t] += b;
  }
  std::int64_t peak = 0;
  for (const auto& [t, b] : total) peak = std::max(peak, b);
  // A run that never batched more than one request has no steady state.
  if (peak > 1) {
    const double threshold = kPeakBatchShare * static_cast<double>(peak);
    double first = kNaN;
    double last = kNaN;
    for (const auto& [t, b] : total) {
      if (static_cast<double>(b) < threshold) continue;
      if (std::isnan(first)) first = t;
      last = t;
    }
    if (last > first) {
      w.start = first;
      w.end = last;
      w.rule = StableWindow::Rule::kPeakBatch;
      return w;
    }
  }
  w.start = 0.0;
  w.end = report.end_time;
  w.rule = StableWindow::Rule::kFullRun;
  w.flagged = true;
  return w;
}

SummaryRow summarize(const SimulationReport& report, const StableWindow& window) {
  SummaryRow row;
  row.config_hash = report.config_hash;
  row.window = window;
  row.requests = report.requests.size();
  row.preemptions = report.preemptions + report.executor_preemptions;
  for (const auto& r : report.requests) {
    row.completed += r.completed ? 1 : 0;
    row.offloaded += r.offloaded ? 1 : 0;
  }
  const double t0 = window.start;
  const double t1 = window.end;
  const double len = window.length();
  if (!(len > 0.0)) {
    row.empty = true;
    row.mean_ttft = row.mean_tpot = row.p99_tpot = kNaN;
    row.throughput = row.prefill_hbm_util = row.prefill_bw_util = kNaN;
    row.decoder_hbm_util = row.decoder_bw_util = row.decoder_compute_util = kNaN;
    return row;
  }

  double ttft_sum = 0.0;
  std::size_t ttft_n = 0;
  std::vector<double> tpot;
  for (const auto& r : report.requests) {
    if (r.arrival >= t0 && r.arrival <= t1 && !std::isnan(r.ttft)) {
      ttft_sum += r.ttft;
      ++ttft_n;
    }
    if (std::isnan(r.ttft)) continue;
    const double first = r.arrival + r.ttft;
    const double last = r.completed ? r.completion_time : report.end_time;
    if (first <= t1 && last >= t0) {
      tpot.insert(tpot.end(), r.tpot_samples.begin(), r.tpot_samples.end());
    }
  }
  row.mean_ttft = ttft_n ? ttft_sum / static_cast<double>(ttft_n) : kNaN;
  if (tpot.empty()) {
    row.mean_tpot = row.p99_tpot = kNaN;
  } else {
    double s = 0.0;
    for (double v : tpot) s += v;
    row.mean_tpot = s / static_cast<double>(tpot.size());
    row.p99_tpot = percentile_nearest_rank(tpot, 99.0);
  }

  double tokens = 0.0;
  for (const auto& s : report.steps) {
    if (s.end >= t0 && s.end <= t1) {
      tokens += static_cast<double>(s.local_batch + s.offloaded_batch);
    }
  }
  row.throughput = tokens / len;

  const double period = report.sample_period;
  row.prefill_hbm_util = instance_mean(report.prefill, [&](const UtilizationSeries& s) {
    return integrate(s.hbm_byte_seconds, period, t0, t1) / (s.capacity * len);
  });
  row.prefill_bw_util = instance_mean(report.prefill, [&](const UtilizationSeries& s) {
    return integrate(s.bw_bytes, period, t0, t1) / (s.bandwidth * len);
  });
  row.decoder_hbm_util = instance_mean(report.decoding, [&](const UtilizationSeries& s) {
    return integrate(s.hbm_byte_seconds, period, t0, t1) / (s.capacity * len);
  });
  row.decoder_bw_util = instance_mean(report.decoding, [&](const UtilizationSeries& s) {
    return integrate(s.bw_bytes, period, t0, t1) / (s.bandwidth * len);
  });
  row.decoder_compute_util = instance_mean(report.decoding, [&](const UtilizationSeries& s) {
    return integrate(s.compute_seconds, period, t0, t1) / len;
  });
  return row;
}

nlohmann::json SummaryRow::to_json() const {
  auto num = [](double v) -> nlohmann::json {
    if (std::isnan(v)) return nullptr;
    return v;
  };
  return {{"config_hash", config_hash},
          {"rate", rate},
          {"offload", offload},
          {"window",
           {{"start", window.start},
            {"end", window.end},
            {"rule", window_rule_name(window.rule)},
            {"flagged", window.flagged}}},
          {"empty", empty},
          {"requests", requests},
          {"completed", completed},
          {"offloaded", offloaded},
          {"mean_ttft", num(mean_ttft)},
          {"mean_tpot", num(mean_tpot)},
          {"p99_tpot", num(p99_tpot)},
          {"throughput", num(throughput)},
          {"prefill_hbm_util", num(prefill_hbm_util)},
          {"prefill_bw_util", num(prefill_bw_util)},
          {"decoder_hbm_util", num(decoder_hbm_util)},
          {"decoder_bw_util", num(decoder_bw_util)},
          {"decoder_compute_util", num(decoder_compute_util)},
          {"preemptions", preemptions}};
}

std::string summary_csv_header() {
  return "config_hash,rate,offload,window_start,window_end,window_rule,window_flagged,"
         "empty,requests,completed,offloaded,mean_ttft,mean_tpot,p99_tpot,throughput,"
         "prefill_hbm_util,prefill_bw_util,decoder_hbm_util,decoder_bw_util,"
         "decoder_compute_util,preemptions";
}

std::string summary_csv_row(const SummaryRow& r) {
  std::ostringstream os;
  os << r.config_hash << ',' << fmt(r.rate) << ',' << r.offload << ','
     << fmt(r.window.start) << ',' << fmt(r.window.end) << ','
     << window_rule_name(r.window.rule) << ',' << (r.window.flagged ? 1 : 0) << ','
     << (r.empty ? 1 : 0) << ',' << r.requests << ',' << r.completed << ',' << r.offloaded
     << ',' << fmt(r.mean_ttft) << ',' << fmt(r.mean_tpot) << ',' << fmt(r.p99_tpot) << ','
     << fmt(r.throughput) << ',' << fmt(r.prefill_hbm_util) << ','
     << fmt(r.prefill_bw_util) << ',' << fmt(r.decoder_hbm_util) << ','
     << fmt(r.decoder_bw_util) << ',' << fmt(r.decoder_compute_util) << ','
     << r.preemptions;
  return os.str();
}

}  // namespace adrenaline
