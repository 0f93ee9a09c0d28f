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

#include <gtest/gtest.h>

#include "adrenaline/config.hpp"
#include "adrenaline/errors.hpp"

namespace adrenaline {
namespace {

std::string field_of(const nlohmann::json& j) {
  try {
    experiment_from_json(j);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

TEST(Config, EmptyObjectKeepsDefaults) {
  const auto c = experiment_from_json(nlohmann::json::object());
  EXPECT_EQ(c.sim.model.num_layers, 32);
  EXPECT_EQ(c.sim.scheduler.mode, OffloadMode::kAuto);
  EXPECT_DOUBLE_EQ(c.sim.colocation.prefill_sm_ratio, 0.7);
  EXPECT_EQ(c.workload.preset, "sharegpt-like");
}

TEST(Config, UnknownKeysNameTheirPath) {
  EXPECT_EQ(field_of({{"bogus", 1}}), "bogus");
  EXPECT_EQ(field_of({{"cluster", {{"num_prefil", 2}}}}), "cluster.num_prefil");
  EXPECT_EQ(field_of({{"gpu", {{"hbm", 1}}}}), "gpu.hbm");
}

TEST(Config, InvalidValuesNameTheirPath) {
  EXPECT_EQ(field_of({{"workload", {{"rate", -1.0}}}}), "workload.rate");
  EXPECT_EQ(field_of({{"gpu", {{"hbm_bandwidth", 0.0}}}}), "gpu.hbm_bandwidth");
  EXPECT_EQ(field_of({{"cluster", {{"num_decoding", 0}}}}), "cluster.num_decoding");
  EXPECT_EQ(field_of({{"colocation", {{"prefill_sm_ratio", 1.5}}}}), "colocation.prefill_sm_ratio");
  EXPECT_EQ(field_of({{"offload", {{"mode", "sometimes"}}}}), "offload.mode");
  EXPECT_EQ(field_of({{"cluster", {{"num_prefill", "two"}}}}), "cluster.num_prefill");
  EXPECT_EQ(field_of({{"model", "gpt-9"}}), "model");
}

TEST(Config, PresetsAndOverrides) {
  const auto c = experiment_from_json(
      {{"model", "llama2-13b"},
       {"gpu", {{"preset", "a100-80gb"}, {"interconnect_bw", 300e9}}},
       {"offload", {{"mode", "fixed"}, {"ratio", 0.5}}},
       {"slo", {{"ttft", 2.0}, {"tpot", 0.08}}},
       {"workload", {{"preset", "openthoughts-like"}, {"rate", 2.5}, {"seed", 7}}}});
  EXPECT_EQ(c.sim.model.hidden_size, 5120);
  EXPECT_DOUBLE_EQ(c.sim.gpu.interconnect_bw, 300e9);
  EXPECT_DOUBLE_EQ(c.sim.gpu.hbm_bandwidth, 2039e9);
  EXPECT_EQ(c.sim.scheduler.mode, OffloadMode::kFixed);
  EXPECT_DOUBLE_EQ(*c.sim.colocation.ttft_slo, 2.0);
  EXPECT_DOUBLE_EQ(c.sim.scheduler.tpot_slo, 0.08);
  EXPECT_EQ(c.workload.seed, 7u);
}

TEST(Config, JsonRoundTripIsStable) {
  ExperimentConfig c;
  c.sim.scheduler.mode = OffloadMode::kFixed;
  c.sim.scheduler.fixed_ratio = 0.4;
  c.workload.prompt = LengthDist::uniform(10, 20);
  c.workload.output = LengthDist::constant(8);
  const auto j = to_json(c);
  const auto back = experiment_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(content_hash(to_json(back).dump()), content_hash(j.dump()));
}

TEST(Config, OffloadFlag) {
  SchedulerConfig s;
  apply_offload_flag(s, "off");
  EXPECT_EQ(s.mode, OffloadMode::kOff);
  apply_offload_flag(s, "0.7");
  EXPECT_EQ(s.mode, OffloadMode::kFixed);
  EXPECT_DOUBLE_EQ(s.fixed_ratio, 0.7);
  apply_offload_flag(s, "0");
  EXPECT_EQ(s.mode, OffloadMode::kOff);
  apply_offload_flag(s, "auto");
  EXPECT_EQ(s.mode, OffloadMode::kAuto);
  EXPECT_THROW(apply_offload_flag(s, "-0.2"), ConfigError);
  EXPECT_THROW(apply_offload_flag(s, "0.7x"), ConfigError);
}

TEST(Config, ContentHashIsFnv1a64) {
  // Published FNV-1a 64 test vectors.
  EXPECT_EQ(content_hash(""), "cbf29ce484222325");
  EXPECT_EQ(content_hash("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(content_hash("foobar"), "85944171f73967e8");
}

TEST(Config, WorkloadBuildUsesPresetAndOverrides) {
  WorkloadConfig w;
  w.num_requests = 12;
  w.rate = 2.0;
  w.output = LengthDist::constant(3);
  const auto wl = w.build();
  ASSERT_EQ(wl.size(), 12u);
  for (const auto& r : wl) EXPECT_EQ(r.output_tokens(), 3);
  w.rate.reset();
  EXPECT_THROW(w.build(), ConfigError);
}

}  // namespace
}  // namespace adrenaline
