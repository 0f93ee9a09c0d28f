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

// adrenaline_sim: run, sweep, calibrate, gen-trace.
//
// Exit codes: 0 ok, 1 simulation failure, 2 usage or configuration error.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "adrenaline/colocation.hpp"
#include "adrenaline/errors.hpp"
#include "cli_common.hpp"

namespace fs = std::filesystem;
using namespace adrenaline;

namespace {

void add_experiment_flags(CLI::App* cmd, cli::Overrides& o) {
  cmd->add_option("--config", o.config, "Experiment config JSON");
  cmd->add_option("--preset", o.preset, "Workload preset (sharegpt-like, openthoughts-like)");
  cmd->add_option("--trace", o.trace, "JSONL trace to replay");
  cmd->add_option("--rate", o.rate, "Cluster-wide Poisson request rate (req/s)");
  cmd->add_option("--offload", o.offload, "off | auto | fixed ratio (0 = off)");
  cmd->add_option("--sm-ratio", o.sm_ratio, "Prefill share of SMs on prefill instances");
  cmd->add_option("--seed", o.seed, "Workload seed");
  cmd->add_option("--ttft-slo", o.ttft_slo, "TTFT SLO (s); picks the SM partition");
  cmd->add_option("--tpot-slo", o.tpot_slo, "TPOT SLO (s) for the B_TPOT estimate");
  cmd->add_option("--num-requests", o.num_requests, "Synthetic workload size");
}

std::vector<CurvePoint> read_points(const nlohmann::json& j, const char* key) {
  std::vector<CurvePoint> out;
  if (!j.contains(key)) return out;
  for (const auto& p : j.at(key)) {
    if (!p.is_array() || p.size() != 2) {
      throw ConfigError(key, "points must be [ratio, value] pairs");
    }
    out.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return out;
}

int cmd_calibrate(const std::string& points_path, const std::string& out_path,
                  double tolerance) {
  std::ifstream in(points_path);
  if (!in) throw ConfigError("points", "cannot open " + points_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("points", std::string("invalid JSON: ") + e.what());
  }
  const auto curves = fit_curves(read_points(j, "bw"), read_points(j, "slowdown"));
  nlohmann::json out = curves.to_json();
  if (j.contains("step_samples")) {
    std::vector<std::pair<std::int64_t, double>> samples;
    for (const auto& s : j.at("step_samples")) {
      samples.emplace_back(s[0].get<std::int64_t>(), s[1].get<double>());
    }
    const auto b = estimate_b_max(samples, tolerance);
    std::cout << "b_max estimate: " << b << '\n';
    out["b_max_estimate"] = b;
  }
  std::ofstream f(out_path);
  if (!f) throw ConfigError("out", "cannot write " + out_path);
  f << out.dump(2) << '\n';
  std::cout << "wrote " << out_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event simulator for PD-disaggregated LLM serving with attention "
               "offloading"};
  app.require_subcommand(1);

  cli::Overrides run_o;
  std::string run_out = "out";
  auto* run = app.add_subcommand("run", "Run one simulation");
  add_experiment_flags(run, run_o);
  run->add_option("--out-dir", run_out, "Output directory");

  cli::Overrides sweep_o;
  std::string sweep_out = "sweep_out";
  std::string axis;
  std::vector<std::string> values;
  auto* sweep = app.add_subcommand("sweep", "Sweep one parameter");
  add_experiment_flags(sweep, sweep_o);
  sweep->add_option("--out-dir", sweep_out, "Output directory");
  sweep->add_option("--axis", axis, "rate | offload_ratio | sm_ratio")->required();
  sweep->add_option("--values", values, "Comma-separated axis values")
      ->required()
      ->delimiter(',');

  std::string points;
  std::string curves_out = "curves.json";
  double tolerance = 0.05;
  auto* cal = app.add_subcommand("calibrate", "Fit SM-ratio curves from profiled points");
  cal->add_option("points", points, "JSON with bw, slowdown and optional step_samples")
      ->required();
  cal->add_option("--out", curves_out, "Curves JSON to write");
  cal->add_option("--tolerance", tolerance, "Flat-region tolerance for the B_max estimate");

  std::string trace_preset = "sharegpt-like";
  double trace_rate = 3.0;
  std::size_t trace_n = 1000;
  std::uint64_t trace_seed = 42;
  std::string trace_out = "trace.jsonl";
  auto* gen = app.add_subcommand("gen-trace", "Write a synthetic JSONL trace");
  gen->add_option("--preset", trace_preset, "Workload preset");
  gen->add_option("--rate", trace_rate, "Request rate (req/s)");
  gen->add_option("--num-requests", trace_n, "Number of requests");
  gen->add_option("--seed", trace_seed, "Seed");
  gen->add_option("--out", trace_out, "Output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      const auto ec = cli::build_experiment(run_o);
      const auto res = cli::run_point(ec);
      cli::write_run_outputs(run_out, ec, res);
      std::cout << summary_csv_header() << '\n' << summary_csv_row(res.row) << '\n';
      return 0;
    }
    if (*sweep) {
      const auto ax = cli::parse_axis(axis);
      if (values.size() < 2) throw ConfigError("values", "a sweep needs at least 2 values");
      return cli::run_sweep(cli::build_experiment(sweep_o), ax, values, sweep_out);
    }
    if (*cal) return cmd_calibrate(points, curves_out, tolerance);
    if (*gen) {
      const auto p = workload_preset(trace_preset);
      const auto wl = gen_synthetic(trace_n, p.prompt, p.output, trace_rate, trace_seed);
      std::ofstream f(trace_out);
      if (!f) throw ConfigError("out", "cannot write " + trace_out);
      write_trace(f, wl);
      std::cout << "wrote " << wl.size() << " requests to " << trace_out << '\n';
      return 0;
    }
  } catch (const CurveError& e) {
    std::cerr << "error: " << e.what() << " (points";
    for (auto i : e.indices()) std::cerr << ' ' << i;
    std::cerr << ")\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const TraceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const InfeasibleSlo& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
