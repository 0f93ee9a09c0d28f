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

#include "adrenaline/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "adrenaline/errors.hpp"

namespace adrenaline {

namespace {

using nlohmann::json;

// Reads fields of one JSON object, remembering which keys were consumed so
// leftovers can be reported with their full path.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key), "wrong type");
    }
  }

  template <typename T>
  void read_optional(const std::string& key, std::optional<T>& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key), "wrong type");
    }
  }

  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(field(k), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

GpuSpec gpu_preset(const std::string& name) {
  if (name == "a100-80gb") return GpuSpec::a100_80gb();
  throw ConfigError("gpu", "unknown GPU preset '" + name + "'");
}

ModelSpec model_preset(const std::string& name) {
  if (name == "llama2-7b") return ModelSpec::llama2_7b();
  if (name == "llama2-13b") return ModelSpec::llama2_13b();
  throw ConfigError("model", "unknown model preset '" + name + "'");
}

void read_gpu(const json& j, GpuSpec& g) {
  if (j.is_string()) {
    g = gpu_preset(j.get<std::string>());
    return;
  }
  ObjectReader r(j, "gpu");
  if (r.has("preset")) g = gpu_preset(r.raw("preset").get<std::string>());
  r.read("flops_peak", g.flops_peak);
  r.read("hbm_capacity", g.hbm_capacity);
  r.read("hbm_bandwidth", g.hbm_bandwidth);
  r.read("interconnect_bw", g.interconnect_bw);
  r.read("cpu_launch_per_layer", g.cpu_launch_per_layer);
  r.finish();
}

void read_model(const json& j, ModelSpec& m) {
  if (j.is_string()) {
    m = model_preset(j.get<std::string>());
    return;
  }
  ObjectReader r(j, "model");
  if (r.has("preset")) m = model_preset(r.raw("preset").get<std::string>());
  r.read("num_layers", m.num_layers);
  r.read("hidden_size", m.hidden_size);
  r.read("bytes_per_element", m.bytes_per_element);
  r.read("weight_bytes", m.weight_bytes);
  r.read("kv_bytes_per_token", m.kv_bytes_per_token);
  r.read("flops_per_prompt_token", m.flops_per_prompt_token);
  r.read("flops_per_decode_token_nonattn", m.flops_per_decode_token_nonattn);
  r.read("bytes_per_decode_step_nonattn", m.bytes_per_decode_step_nonattn);
  r.read("prefill_activation_bytes_per_token", m.prefill_activation_bytes_per_token);
  r.finish();
}

OffloadMode parse_mode(const std::string& s, const std::string& field) {
  if (s == "off") return OffloadMode::kOff;
  if (s == "auto") return OffloadMode::kAuto;
  if (s == "fixed") return OffloadMode::kFixed;
  throw ConfigError(field, "expected off|auto|fixed, got '" + s + "'");
}

void require(bool ok, const std::string& field, const std::string& msg) {
  if (!ok) throw ConfigError(field, msg);
}

}  // namespace

std::string offload_mode_name(OffloadMode m) {
  switch (m) {
    case OffloadMode::kOff:
      return "off";
    case OffloadMode::kAuto:
      return "auto";
    case OffloadMode::kFixed:
      return "fixed";
  }
  return "?";
}

void SimConfig::validate() const {
  gpu.validate();
  model.validate();
  require(cluster.num_prefill >= 1, "cluster.num_prefill", "must be >= 1");
  require(cluster.num_decoding >= 1, "cluster.num_decoding", "must be >= 1");
  require(cluster.gpu_memory_utilization > 0.0 && cluster.gpu_memory_utilization <= 1.0,
          "cluster.gpu_memory_utilization", "must be in (0, 1]");
  require(cluster.activation_reserve >= 0.0 && cluster.activation_reserve < 1.0,
          "cluster.activation_reserve", "must be in [0, 1)");
  require(cluster.prefill_kv_reserve >= 0.0, "cluster.prefill_kv_reserve", "must be >= 0");
  require(cluster.max_prefill_tokens >= 1, "cluster.max_prefill_tokens", "must be >= 1");
  require(cluster.gpu_memory_utilization * gpu.hbm_capacity > model.weight_bytes,
          "cluster.gpu_memory_utilization", "leaves no room for KV after weights");
  require((1.0 - cluster.activation_reserve) * gpu.hbm_capacity - model.weight_bytes >
              cluster.prefill_kv_reserve,
          "cluster.prefill_kv_reserve", "exceeds the prefill KV pool");
  require(scheduler.fixed_ratio >= 0.0 && std::isfinite(scheduler.fixed_ratio),
          "offload.ratio", "must be >= 0");
  require(scheduler.tpot_slo > 0.0, "slo.tpot", "must be > 0");
  require(colocation.prefill_sm_ratio > 0.0 && colocation.prefill_sm_ratio <= 1.0,
          "colocation.prefill_sm_ratio", "must be in (0, 1]");
  if (colocation.ttft_slo) require(*colocation.ttft_slo > 0.0, "slo.ttft", "must be > 0");
  require(colocation.expected_prompt_tokens >= 0, "colocation.expected_prompt_tokens",
          "must be >= 0");
  require(colocation.grid_step > 0.0 && colocation.grid_step <= 1.0,
          "colocation.grid_step", "must be in (0, 1]");
  require(graphs.interval >= 1, "graphs.interval", "must be >= 1");
  require(graphs.budget >= 1, "graphs.budget", "must be >= 1");
  require(graphs.max_local >= 1, "graphs.max_local", "must be >= 1");
  require(graphs.max_offloaded >= 1, "graphs.max_offloaded", "must be >= 1");
  require(graphs.notification_cost >= 0.0, "graphs.notification_cost", "must be >= 0");
  require(sim.sample_period > 0.0, "sim.sample_period", "must be > 0");
  require(sim.horizon > 0.0, "sim.horizon", "must be > 0");
  require(b_max_override >= 0, "b_max.override", "must be >= 0");
  require(b_max_cap >= 1, "b_max.cap", "must be >= 1");
}

void WorkloadConfig::validate() const {
  if (rate) require(*rate > 0.0 && std::isfinite(*rate), "workload.rate", "must be > 0");
  if (trace.empty()) {
    require(rate.has_value(), "workload.rate", "required for synthetic workloads");
    if (!prompt || !output) workload_preset(preset);
  }
  if (prompt) prompt->validate("workload.prompt");
  if (output) output->validate("workload.output");
}

Workload WorkloadConfig::build() const {
  validate();
  if (!trace.empty()) return load_trace(trace, rate, seed);
  LengthDist p;
  LengthDist o;
  if (!prompt || !output) {
    const auto pre = workload_preset(preset);
    p = pre.prompt;
    o = pre.output;
  }
  if (prompt) p = *prompt;
  if (output) o = *output;
  return gen_synthetic(num_requests, p, o, *rate, seed);
}

void apply_offload_flag(SchedulerConfig& sched, const std::string& value) {
  if (value == "off") {
    sched.mode = OffloadMode::kOff;
    return;
  }
  if (value == "auto") {
    sched.mode = OffloadMode::kAuto;
    return;
  }
  double v = 0.0;
  try {
    std::size_t pos = 0;
    v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
  } catch (const std::exception&) {
    throw ConfigError("offload", "expected off, auto, or a ratio; got '" + value + "'");
  }
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("offload", "ratio must be >= 0");
  if (v == 0.0) {
    sched.mode = OffloadMode::kOff;
    sched.fixed_ratio = 0.0;
  } else {
    sched.mode = OffloadMode::kFixed;
    sched.fixed_ratio = v;
  }
}

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig cfg;
  SimConfig& s = cfg.sim;
  ObjectReader top(j, "");
  if (top.has("gpu")) read_gpu(top.raw("gpu"), s.gpu);
  if (top.has("model")) read_model(top.raw("model"), s.model);
  if (top.has("curves")) {
    const auto& c = top.raw("curves");
    s.curves = c.is_string() ? CalibrationCurves::load(c.get<std::string>())
                             : CalibrationCurves::from_json(c);
  }
  if (top.has("cluster")) {
    ObjectReader r(top.raw("cluster"), "cluster");
    r.read("num_prefill", s.cluster.num_prefill);
    r.read("num_decoding", s.cluster.num_decoding);
    r.read("gpu_memory_utilization", s.cluster.gpu_memory_utilization);
    r.read("activation_reserve", s.cluster.activation_reserve);
    r.read("prefill_kv_reserve", s.cluster.prefill_kv_reserve);
    r.read("max_prefill_tokens", s.cluster.max_prefill_tokens);
    r.finish();
  }
  if (top.has("offload")) {
    ObjectReader r(top.raw("offload"), "offload");
    if (r.has("mode")) s.scheduler.mode = parse_mode(r.raw("mode").get<std::string>(), "offload.mode");
    r.read("ratio", s.scheduler.fixed_ratio);
    r.read("c1_uses_max_tokens", s.scheduler.c1_uses_max_tokens);
    r.read("tpot_window", s.scheduler.tpot_window);
    r.finish();
  }
  if (top.has("slo")) {
    ObjectReader r(top.raw("slo"), "slo");
    r.read_optional("ttft", s.colocation.ttft_slo);
    r.read("tpot", s.scheduler.tpot_slo);
    r.finish();
  }
  if (top.has("colocation")) {
    ObjectReader r(top.raw("colocation"), "colocation");
    r.read("prefill_sm_ratio", s.colocation.prefill_sm_ratio);
    r.read("expected_prompt_tokens", s.colocation.expected_prompt_tokens);
    r.read("grid_step", s.colocation.grid_step);
    r.finish();
  }
  if (top.has("graphs")) {
    ObjectReader r(top.raw("graphs"), "graphs");
    r.read("enabled", s.graphs.enabled);
    r.read("interval", s.graphs.interval);
    r.read("budget", s.graphs.budget);
    r.read("max_local", s.graphs.max_local);
    r.read("max_offloaded", s.graphs.max_offloaded);
    r.read("replay_cost", s.graphs.replay_cost);
    r.read("notification_cost", s.graphs.notification_cost);
    r.finish();
  }
  if (top.has("sim")) {
    ObjectReader r(top.raw("sim"), "sim");
    r.read("sample_period", s.sim.sample_period);
    r.read("horizon", s.sim.horizon);
    r.read("ideal_sync", s.sim.ideal_sync);
    r.read("check_invariants", s.sim.check_invariants);
    r.finish();
  }
  if (top.has("b_max")) {
    ObjectReader r(top.raw("b_max"), "b_max");
    r.read("override", s.b_max_override);
    r.read("cap", s.b_max_cap);
    r.finish();
  }
  if (top.has("workload")) {
    auto& w = cfg.workload;
    ObjectReader r(top.raw("workload"), "workload");
    r.read("preset", w.preset);
    r.read("trace", w.trace);
    r.read("num_requests", w.num_requests);
    r.read_optional("rate", w.rate);
    r.read("seed", w.seed);
    if (r.has("prompt")) w.prompt = LengthDist::from_json(r.raw("prompt"), "workload.prompt");
    if (r.has("output")) w.output = LengthDist::from_json(r.raw("output"), "workload.output");
    r.finish();
  }
  top.finish();
  s.validate();
  cfg.workload.validate();
  return cfg;
}

ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return experiment_from_json(j);
}

json to_json(const ExperimentConfig& cfg) {
  const SimConfig& s = cfg.sim;
  json j;
  j["gpu"] = {{"flops_peak", s.gpu.flops_peak},
              {"hbm_capacity", s.gpu.hbm_capacity},
              {"hbm_bandwidth", s.gpu.hbm_bandwidth},
              {"interconnect_bw", s.gpu.interconnect_bw},
              {"cpu_launch_per_layer", s.gpu.cpu_launch_per_layer}};
  j["model"] = {{"num_layers", s.model.num_layers},
                {"hidden_size", s.model.hidden_size},
                {"bytes_per_element", s.model.bytes_per_element},
                {"weight_bytes", s.model.weight_bytes},
                {"kv_bytes_per_token", s.model.kv_bytes_per_token},
                {"flops_per_prompt_token", s.model.flops_per_prompt_token},
                {"flops_per_decode_token_nonattn", s.model.flops_per_decode_token_nonattn},
                {"bytes_per_decode_step_nonattn", s.model.bytes_per_decode_step_nonattn},
                {"prefill_activation_bytes_per_token",
                 s.model.prefill_activation_bytes_per_token}};
  j["curves"] = s.curves.to_json();
  j["cluster"] = {{"num_prefill", s.cluster.num_prefill},
                  {"num_decoding", s.cluster.num_decoding},
                  {"gpu_memory_utilization", s.cluster.gpu_memory_utilization},
                  {"activation_reserve", s.cluster.activation_reserve},
                  {"prefill_kv_reserve", s.cluster.prefill_kv_reserve},
                  {"max_prefill_tokens", s.cluster.max_prefill_tokens}};
  j["offload"] = {{"mode", offload_mode_name(s.scheduler.mode)},
                  {"ratio", s.scheduler.fixed_ratio},
                  {"c1_uses_max_tokens", s.scheduler.c1_uses_max_tokens},
                  {"tpot_window", s.scheduler.tpot_window}};
  j["slo"] = {{"ttft", s.colocation.ttft_slo ? json(*s.colocation.ttft_slo) : json(nullptr)},
              {"tpot", s.scheduler.tpot_slo}};
  j["colocation"] = {{"prefill_sm_ratio", s.colocation.prefill_sm_ratio},
                     {"expected_prompt_tokens", s.colocation.expected_prompt_tokens},
                     {"grid_step", s.colocation.grid_step}};
  j["graphs"] = {{"enabled", s.graphs.enabled},
                 {"interval", s.graphs.interval},
                 {"budget", s.graphs.budget},
                 {"max_local", s.graphs.max_local},
                 {"max_offloaded", s.graphs.max_offloaded},
                 {"replay_cost", s.graphs.replay_cost},
                 {"notification_cost", s.graphs.notification_cost}};
  j["sim"] = {{"sample_period", s.sim.sample_period},
              {"horizon", s.sim.horizon},
              {"ideal_sync", s.sim.ideal_sync},
              {"check_invariants", s.sim.check_invariants}};
  j["b_max"] = {{"override", s.b_max_override}, {"cap", s.b_max_cap}};
  const auto& w = cfg.workload;
  json wj = {{"preset", w.preset},
             {"trace", w.trace},
             {"num_requests", w.num_requests},
             {"rate", w.rate ? json(*w.rate) : json(nullptr)},
             {"seed", w.seed}};
  if (w.prompt) wj["prompt"] = w.prompt->to_json();
  if (w.output) wj["output"] = w.output->to_json();
  j["workload"] = wj;
  return j;
}

std::string content_hash(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace adrenaline
