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

// Python bindings for the simulator core. Structured values cross the
// boundary as JSON text; the pure package layer decodes them.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "adrenaline/colocation.hpp"
#include "adrenaline/config.hpp"
#include "adrenaline/errors.hpp"
#include "adrenaline/graph_select.hpp"
#include "adrenaline/metrics.hpp"
#include "adrenaline/scheduler.hpp"
#include "adrenaline/sim.hpp"

namespace py = pybind11;
using namespace adrenaline;

namespace {

ModelSpec model_by_name(const std::string& name) {
  if (name == "llama2-7b") return ModelSpec::llama2_7b();
  if (name == "llama2-13b") return ModelSpec::llama2_13b();
  throw ConfigError("model", "unknown model preset '" + name + "'");
}

std::string simulate(const std::string& config_json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(config_json);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  const auto ec = experiment_from_json(j);
  const auto wl = ec.workload.build();
  SimulationReport report;
  {
    py::gil_scoped_release release;
    Simulator sim(ec.sim);
    report = sim.run_to_completion(wl);
  }
  auto row = summarize(report, stable_window(report));
  row.config_hash = content_hash(to_json(ec).dump());
  row.rate = ec.workload.rate.value_or(0.0);
  row.offload = offload_mode_name(ec.sim.scheduler.mode);
  nlohmann::json out;
  out["summary"] = row.to_json();
  out["report_hash"] = report.hash();
  out["partition"] = {{"prefill_sm_ratio", report.partition.prefill_sm_ratio},
                      {"attn_sm_ratio", report.partition.attn_sm_ratio}};
  out["b_max"] = report.b_max;
  nlohmann::json reqs = nlohmann::json::array();
  for (const auto& r : report.requests) {
    reqs.push_back({{"id", r.id},
                    {"offloaded", r.offloaded},
                    {"completed", r.completed},
                    {"ttft", r.ttft},
                    {"tpot_count", r.tpot_samples.size()},
                    {"stall_total", r.stall_total}});
  }
  out["requests"] = reqs;
  return out.dump();
}

py::dict decision(const Request& req, double ob, const DecodeLoad& load, bool c1_max) {
  const auto d = need_offload(req, ob, load, c1_max);
  py::dict out;
  out["offload"] = d.offload;
  out["c1"] = d.c1;
  out["c2"] = d.c2;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Attention-offloading simulator core";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<ConfigError> config_error(m, "ConfigError", base.ptr());
  static py::exception<CurveError> curve_error(m, "CurveError", base.ptr());
  static py::exception<InfeasibleSlo> infeasible(m, "InfeasibleSlo", base.ptr());
  static py::exception<TraceError> trace_error(m, "TraceError", base.ptr());
  static py::exception<SimulationError> sim_error(m, "SimulationError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      config_error(e.what());
    } catch (const CurveError& e) {
      curve_error(e.what());
    } catch (const InfeasibleSlo& e) {
      infeasible(e.what());
    } catch (const TraceError& e) {
      trace_error(e.what());
    } catch (const SimulationError& e) {
      sim_error(e.what());
    } catch (const Error& e) {
      base(e.what());
    }
  });

  m.def("simulate", &simulate, py::arg("config_json"),
        "Run one experiment from a JSON config; returns JSON text.");

  m.def("kv_bytes",
        [](std::int64_t seq_len, const std::string& model) {
          return kv_bytes(model_by_name(model), seq_len);
        },
        py::arg("seq_len"), py::arg("model") = "llama2-7b");
  m.def("arithmetic_intensity", &arithmetic_intensity_nonattn, py::arg("hidden_size"),
        py::arg("batch"));
  m.def("b_max_for_balance",
        [](double h, double balance, std::int64_t cap) {
          return b_max_for_balance(h, balance, cap).batch;
        },
        py::arg("hidden_size"), py::arg("machine_balance"), py::arg("cap") = kDefaultBatchCap);
  m.def("launch_overhead",
        [](std::int64_t layers, bool graphed, double cpu, double gpu_per_layer) {
          GpuSpec g = GpuSpec::a100_80gb();
          g.cpu_launch_per_layer = cpu;
          return launch_overhead(layers, graphed, g, gpu_per_layer);
        },
        py::arg("num_layers"), py::arg("graphed"), py::arg("cpu_launch_per_layer"),
        py::arg("per_layer_gpu_time"));

  m.def("attn_bw_fraction",
        [](double r) { return attn_bw_fraction(r, CalibrationCurves::defaults()); },
        py::arg("sm_ratio"));
  m.def("prefill_slowdown",
        [](double r) { return prefill_slowdown(r, CalibrationCurves::defaults()); },
        py::arg("sm_ratio"));
  m.def("fit_curves",
        [](std::vector<CurvePoint> bw, std::vector<CurvePoint> slowdown) {
          return fit_curves(std::move(bw), std::move(slowdown)).to_json().dump();
        },
        py::arg("bw"), py::arg("slowdown"));

  m.def("ob_mem",
        [](std::vector<double> hbm_p, std::vector<double> bw_p, double hbm_d, double bw_d) {
          return ob_mem(hbm_p, bw_p, hbm_d, bw_d);
        },
        py::arg("hbm_p"), py::arg("bw_p"), py::arg("hbm_d"), py::arg("bw_d"));
  m.def("ob_comp", &ob_comp, py::arg("b_max"), py::arg("b_tpot"));
  m.def("combined_bound", &combined_bound, py::arg("ob_mem"), py::arg("ob_comp"));
  m.def("need_offload",
        [](std::int64_t used, std::int64_t max, double ob, std::int64_t attn_max,
           std::int64_t attn_used, std::int64_t decode_used, std::size_t n_off,
           std::size_t n_local, bool c1_max) {
          Request r;
          r.used_token = used;
          r.prompt_tokens = used;
          r.max_token = max;
          DecodeLoad load{attn_max, attn_used, decode_used, n_off, n_local};
          return decision(r, ob, load, c1_max);
        },
        py::arg("used_token"), py::arg("max_token"), py::arg("ob"),
        py::arg("attn_max_tokens") = 0, py::arg("attn_used_tokens") = 0,
        py::arg("decode_used_tokens") = 0, py::arg("num_offloaded") = 0,
        py::arg("num_local") = 0, py::arg("c1_uses_max_tokens") = false);

  m.def("build_grid",
        [](std::int64_t max_cd, std::int64_t max_co, std::int64_t interval,
           std::int64_t budget) {
          const auto g = build_grid(max_cd, max_co, interval, budget);
          return py::make_tuple(g.cd_capacities, g.co_capacities, g.interval);
        },
        py::arg("max_cd"), py::arg("max_co"), py::arg("interval") = kDefaultGraphInterval,
        py::arg("budget") = kDefaultGraphBudget);
  m.def("select_graph",
        [](std::int64_t local, std::int64_t off, std::int64_t max_cd, std::int64_t max_co,
           std::int64_t interval, std::int64_t budget) {
          const auto c = select_graph(local, off, build_grid(max_cd, max_co, interval, budget));
          return py::make_tuple(c.cd, c.co);
        },
        py::arg("local_batch"), py::arg("offload_batch"), py::arg("max_cd"),
        py::arg("max_co"), py::arg("interval") = kDefaultGraphInterval,
        py::arg("budget") = kDefaultGraphBudget);

  m.def("percentile", &percentile_nearest_rank, py::arg("samples"), py::arg("p"));
  m.def("content_hash", &content_hash, py::arg("text"));
}
