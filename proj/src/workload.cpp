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

#include "adrenaline/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "adrenaline/errors.hpp"

namespace adrenaline {

namespace {

std::int64_t clamp_length(double v, std::int64_t max_value) {
  const auto r = static_cast<std::int64_t>(std::llround(v));
  return std::clamp<std::int64_t>(r, 1, max_value);
}

std::int64_t sample(const LengthDist& d, std::mt19937_64& rng) {
  switch (d.kind) {
    case LengthDist::Kind::kConstant:
      return clamp_length(d.a, d.max_value);
    case LengthDist::Kind::kUniform: {
      std::uniform_real_distribution<double> u(d.a, d.b);
      return clamp_length(u(rng), d.max_value);
    }
    case LengthDist::Kind::kLognormal: {
      const double mu = std::log(d.a) - 0.5 * d.b * d.b;
      std::lognormal_distribution<double> ln(mu, d.b);
      return clamp_length(ln(rng), d.max_value);
    }
  }
  return 1;
}

Workload to_workload(const std::vector<TraceRecord>& records,
                     const std::vector<double>& arrivals) {
  Workload w;
  w.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    Request r;
    r.id = static_cast<RequestId>(i);
    r.arrival_time = arrivals[i];
    r.prompt_tokens = records[i].prompt_tokens;
    r.max_token = records[i].prompt_tokens + records[i].output_tokens;
    r.used_token = records[i].prompt_tokens;
    w.push_back(r);
  }
  std::stable_sort(w.begin(), w.end(), [](const Request& a, const Request& b) {
    return a.arrival_time < b.arrival_time;
  });
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (w[i].arrival_time <= w[i - 1].arrival_time) {
      w[i].arrival_time = w[i - 1].arrival_time + kArrivalJitter;
    }
  }
  for (std::size_t i = 0; i < w.size(); ++i) w[i].id = static_cast<RequestId>(i);
  return w;
}

}  // namespace

void LengthDist::validate(const std::string& field) const {
  if (max_value < 1) throw ConfigError(field + ".max", "must be >= 1");
  switch (kind) {
    case Kind::kConstant:
      if (!(a >= 1.0)) throw ConfigError(field + ".value", "must be >= 1");
      break;
    case Kind::kUniform:
      if (!(a >= 1.0 && b >= a)) {
        throw ConfigError(field, "uniform needs 1 <= low <= high");
      }
      break;
    case Kind::kLognormal:
      if (!(a >= 1.0)) throw ConfigError(field + ".mean", "must be >= 1");
      if (!(b >= 0.0)) throw ConfigError(field + ".sigma", "must be >= 0");
      break;
  }
}

LengthDist LengthDist::from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_object() || !j.contains("kind")) {
    throw ConfigError(field + ".kind", "missing distribution kind");
  }
  const auto kind = j.at("kind").get<std::string>();
  LengthDist d;
  d.max_value = j.value("max", std::int64_t{4096});
  if (kind == "constant") {
    d.kind = Kind::kConstant;
    d.a = j.at("value").get<double>();
  } else if (kind == "uniform") {
    d.kind = Kind::kUniform;
    d.a = j.at("low").get<double>();
    d.b = j.at("high").get<double>();
  } else if (kind == "lognormal") {
    d.kind = Kind::kLognormal;
    d.a = j.at("mean").get<double>();
    d.b = j.at("sigma").get<double>();
  } else {
    throw ConfigError(field + ".kind", "unknown distribution '" + kind + "'");
  }
  d.validate(field);
  return d;
}

nlohmann::json LengthDist::to_json() const {
  switch (kind) {
    case Kind::kConstant:
      return {{"kind", "constant"}, {"value", a}, {"max", max_value}};
    case Kind::kUniform:
      return {{"kind", "uniform"}, {"low", a}, {"high", b}, {"max", max_value}};
    case Kind::kLognormal:
      return {{"kind", "lognormal"}, {"mean", a}, {"sigma", b}, {"max", max_value}};
  }
  return {};
}

WorkloadPreset workload_preset(const std::string& name) {
  // Lengths are capped at the 4K context of the modeled models.
  if (name == "sharegpt-like") {
    return {name, LengthDist::lognormal(1100.0, 0.6, 3072),
            LengthDist::lognormal(750.0, 0.6, 2048)};
  }
  if (name == "openthoughts-like") {
    return {name, LengthDist::lognormal(300.0, 0.6, 1024),
            LengthDist::lognormal(1800.0, 0.5, 3072)};
  }
  throw ConfigError("workload.preset", "unknown preset '" + name + "'");
}

std::vector<std::string> workload_preset_names() {
  return {"sharegpt-like", "openthoughts-like"};
}

std::vector<double> poisson_arrivals(std::size_t n, double rate, std::uint64_t seed) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw ConfigError("workload.rate", "must be > 0");
  }
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(rate);
  std::vector<double> out;
  out.reserve(n);
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    t += gap(rng);
    out.push_back(t);
  }
  return out;
}

Workload gen_synthetic(std::size_t n, const LengthDist& prompt_dist,
                       const LengthDist& output_dist, double rate,
                       std::uint64_t seed) {
  prompt_dist.validate("workload.prompt");
  output_dist.validate("workload.output");
  const auto arrivals = poisson_arrivals(n, rate, seed);
  // Lengths use a stream independent of the arrival stream so the same
  // lengths appear at every rate.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<TraceRecord> records(n);
  for (auto& r : records) {
    r.prompt_tokens = sample(prompt_dist, rng);
    r.output_tokens = sample(output_dist, rng);
  }
  return to_workload(records, arrivals);
}

Workload from_records(const std::vector<TraceRecord>& records,
                      std::optional<double> rate_override, std::uint64_t seed) {
  const bool all_timed = std::all_of(records.begin(), records.end(),
                                     [](const TraceRecord& r) { return r.arrival.has_value(); });
  std::vector<double> arrivals;
  if (rate_override || !all_timed) {
    if (!rate_override) {
      throw ConfigError("workload.rate",
                        "trace lacks arrivals; a request rate is required");
    }
    arrivals = poisson_arrivals(records.size(), *rate_override, seed);
  } else {
    for (const auto& r : records) arrivals.push_back(*r.arrival);
  }
  return to_workload(records, arrivals);
}

std::vector<TraceRecord> parse_trace(std::istream& in) {
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw TraceError(lineno, "malformed JSON");
    }
    if (!j.is_object()) throw TraceError(lineno, "expected a JSON object");
    TraceRecord r;
    auto read_count = [&](const char* key) -> std::int64_t {
      if (!j.contains(key) || !j.at(key).is_number_integer()) {
        throw TraceError(lineno, std::string("missing integer field '") + key + "'");
      }
      const auto v = j.at(key).get<std::int64_t>();
      if (v < 1) throw TraceError(lineno, std::string("'") + key + "' must be >= 1");
      return v;
    };
    r.prompt_tokens = read_count("prompt_tokens");
    r.output_tokens = read_count("output_tokens");
    if (j.contains("arrival") && !j.at("arrival").is_null()) {
      if (!j.at("arrival").is_number()) throw TraceError(lineno, "'arrival' must be a number");
      const double a = j.at("arrival").get<double>();
      if (!(a >= 0.0) || !std::isfinite(a)) {
        throw TraceError(lineno, "'arrival' must be finite and >= 0");
      }
      r.arrival = a;
    }
    out.push_back(r);
  }
  return out;
}

Workload load_trace(const std::string& path, std::optional<double> rate_override,
                    std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ConfigError("workload.trace", "cannot open " + path);
  return from_records(parse_trace(in), rate_override, seed);
}

void write_trace(std::ostream& out, const Workload& workload) {
  for (const auto& r : workload) {
    nlohmann::json j{{"arrival", r.arrival_time},
                     {"prompt_tokens", r.prompt_tokens},
                     {"output_tokens", r.output_tokens()}};
    out << j.dump() << '\n';
  }
}

}  // namespace adrenaline
