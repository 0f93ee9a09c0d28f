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

#include "adrenaline/colocation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "adrenaline/errors.hpp"

namespace adrenaline {

namespace {

constexpr double kEps = 1e-12;

// Linear interpolation on sorted points; exact at the knots.
double interpolate(const std::vector<CurvePoint>& pts, double x) {
  auto hi = std::lower_bound(
      pts.begin(), pts.end(), x,
      [](const CurvePoint& p, double v) { return p.first < v; });
  if (hi == pts.end()) return pts.back().second;
  if (hi->first == x || hi == pts.begin()) return hi->second;
  auto lo = std::prev(hi);
  const double t = (x - lo->first) / (hi->first - lo->first);
  return lo->second + t * (hi->second - lo->second);
}

void check_common(const std::vector<CurvePoint>& pts, const char* name) {
  if (pts.empty()) {
    throw CurveError(std::string(name) + " curve is empty", {});
  }
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double r = pts[i].first;
    if (!(r > 0.0 && r <= 1.0) || !std::isfinite(pts[i].second)) bad.push_back(i);
  }
  if (!bad.empty()) {
    throw CurveError(std::string(name) + " curve: sm_ratio must be in (0, 1]",
                     bad);
  }
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (!(pts[i].first > pts[i - 1].first)) bad.push_back(i);
  }
  if (!bad.empty()) {
    throw CurveError(std::string(name) +
                         " curve: ratios must be strictly increasing",
                     bad);
  }
  const auto& last = pts.back();
  if (last.first != 1.0 || std::abs(last.second - 1.0) > kEps) {
    throw CurveError(std::string(name) + " curve must end at (1, 1)",
                     {pts.size() - 1});
  }
}

std::vector<CurvePoint> parse_points(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw ConfigError(std::string("curves.") + key, "expected an array of pairs");
  }
  std::vector<CurvePoint> out;
  std::size_t i = 0;
  for (const auto& p : j.at(key)) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw ConfigError(std::string("curves.") + key + "[" + std::to_string(i) + "]",
                        "expected [ratio, value]");
    }
    out.emplace_back(p[0].get<double>(), p[1].get<double>());
    ++i;
  }
  return out;
}

}  // namespace

void CalibrationCurves::validate_bw(const std::vector<CurvePoint>& pts) {
  check_common(pts, "bw");
  std::vector<std::size_t> bad;
  double prev = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto [r, f] = pts[i];
    if (!(f > 0.0 && f <= 1.0 + kEps) || f < prev) bad.push_back(i);
    prev = f;
  }
  if (!bad.empty()) {
    throw CurveError("bw curve: fractions must be in (0, 1] and non-decreasing",
                     bad);
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].second + kEps < pts[i].first) bad.push_back(i);
  }
  if (!bad.empty()) {
    throw CurveError("bw curve: fraction must be >= sm_ratio (super-linear)", bad);
  }
}

void CalibrationCurves::validate_slowdown(const std::vector<CurvePoint>& pts) {
  check_common(pts, "slowdown");
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double f = pts[i].second;
    if (f < 1.0 - kEps || (i > 0 && f > pts[i - 1].second)) bad.push_back(i);
  }
  if (!bad.empty()) {
    throw CurveError("slowdown curve: factors must be >= 1 and non-increasing",
                     bad);
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].first * pts[i].second > 1.0 + kEps) bad.push_back(i);
  }
  if (!bad.empty()) {
    throw CurveError(
        "slowdown curve: factor * sm_ratio must be <= 1 (sub-linear)", bad);
  }
}

CalibrationCurves::CalibrationCurves(std::vector<CurvePoint> bw_points,
                                     std::vector<CurvePoint> slowdown_points)
    : bw_(std::move(bw_points)), slowdown_(std::move(slowdown_points)) {
  validate_bw(bw_);
  validate_slowdown(slowdown_);
}

CalibrationCurves CalibrationCurves::defaults() {
  return CalibrationCurves(
      {{0.1, 0.35}, {0.2, 0.60}, {0.3, 0.70}, {0.4, 0.78}, {0.5, 0.84},
       {0.6, 0.89}, {0.7, 0.93}, {0.8, 0.96}, {0.9, 0.985}, {1.0, 1.0}},
      {{0.05, 12.0}, {0.1, 6.5}, {0.2, 3.4}, {0.3, 2.3}, {0.4, 1.7},
       {0.5, 1.4}, {0.6, 1.26}, {0.7, 1.18}, {0.8, 1.12}, {0.9, 1.05},
       {1.0, 1.0}});
}

CalibrationCurves CalibrationCurves::from_json(const nlohmann::json& j) {
  return CalibrationCurves(parse_points(j, "bw"), parse_points(j, "slowdown"));
}

CalibrationCurves CalibrationCurves::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("curves", "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("curves", std::string("invalid JSON: ") + e.what());
  }
  return from_json(j);
}

nlohmann::json CalibrationCurves::to_json() const {
  nlohmann::json j;
  j["bw"] = nlohmann::json::array();
  for (const auto& [r, f] : bw_) j["bw"].push_back({r, f});
  j["slowdown"] = nlohmann::json::array();
  for (const auto& [r, f] : slowdown_) j["slowdown"].push_back({r, f});
  return j;
}

SmPartition SmPartition::with_prefill_ratio(double prefill_sm_ratio) {
  if (!(prefill_sm_ratio > 0.0 && prefill_sm_ratio <= 1.0)) {
    throw InvalidPartition("prefill SM ratio must be in (0, 1], got " +
                           std::to_string(prefill_sm_ratio));
  }
  return {prefill_sm_ratio, 1.0 - prefill_sm_ratio};
}

double attn_bw_fraction(double sm_ratio, const CalibrationCurves& curves) {
  if (sm_ratio <= 0.0) return 0.0;
  if (sm_ratio >= 1.0) return 1.0;
  const auto& pts = curves.bw_points();
  if (sm_ratio < pts.front().first) {
    return pts.front().second * sm_ratio / pts.front().first;
  }
  return interpolate(pts, sm_ratio);
}

double prefill_slowdown(double sm_ratio, const CalibrationCurves& curves) {
  if (!(sm_ratio > 0.0 && sm_ratio <= 1.0)) {
    throw InvalidPartition("SM ratio must be in (0, 1], got " +
                           std::to_string(sm_ratio));
  }
  const auto& pts = curves.slowdown_points();
  if (sm_ratio < pts.front().first) {
    // Keep factor * ratio constant below the first profiled point.
    return pts.front().second * pts.front().first / sm_ratio;
  }
  return interpolate(pts, sm_ratio);
}

SmPartition min_sm_ratio_for_slo(double ttft_slo,
                                 std::int64_t expected_prompt_tokens,
                                 const ModelSpec& model, const GpuSpec& gpu,
                                 const CalibrationCurves& curves,
                                 double grid_step) {
  if (!(grid_step > 0.0 && grid_step <= 1.0)) {
    throw ConfigError("colocation.grid_step", "must be in (0, 1]");
  }
  const double full =
      prefill_latency(model, gpu, expected_prompt_tokens, 1.0, curves);
  if (full > ttft_slo) throw InfeasibleSlo(ttft_slo, full);

  const auto steps = static_cast<std::int64_t>(std::llround(1.0 / grid_step));
  for (std::int64_t k = 1; k < steps; ++k) {
    const double r = static_cast<double>(k) / static_cast<double>(steps);
    if (prefill_latency(model, gpu, expected_prompt_tokens, r, curves) <= ttft_slo) {
      return SmPartition::with_prefill_ratio(r);
    }
  }
  return SmPartition::with_prefill_ratio(1.0);
}

namespace {

std::vector<CurvePoint> normalize(std::vector<CurvePoint> pts, const char* name) {
  if (pts.empty() || pts.back().first < 1.0) {
    pts.emplace_back(1.0, 1.0);
    return pts;
  }
  const double at_full = pts.back().second;
  if (!(at_full > 0.0)) {
    throw CurveError(std::string(name) + ": value at the full GPU must be > 0",
                     {pts.size() - 1});
  }
  for (auto& p : pts) p.second /= at_full;
  pts.back().second = 1.0;
  return pts;
}

}  // namespace

CalibrationCurves fit_curves(std::vector<CurvePoint> bw_points,
                             std::vector<CurvePoint> slowdown_points) {
  return CalibrationCurves(normalize(std::move(bw_points), "bw"),
                           normalize(std::move(slowdown_points), "slowdown"));
}

}  // namespace adrenaline
