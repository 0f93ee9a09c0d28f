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

#include <cmath>
#include <limits>

#include "adrenaline/colocation.hpp"
#include "adrenaline/errors.hpp"

namespace adrenaline {
namespace {

TEST(AttnBw, DefaultCurveAnchors) {
  const auto c = CalibrationCurves::defaults();
  EXPECT_DOUBLE_EQ(attn_bw_fraction(0.2, c), 0.6);
  EXPECT_DOUBLE_EQ(attn_bw_fraction(1.0, c), 1.0);
  EXPECT_DOUBLE_EQ(attn_bw_fraction(0.0, c), 0.0);
}

TEST(AttnBw, MonotoneAndSuperLinear) {
  const auto c = CalibrationCurves::defaults();
  double prev = 0.0;
  for (int k = 0; k <= 1000; ++k) {
    const double r = k / 1000.0;
    const double f = attn_bw_fraction(r, c);
    EXPECT_GE(f, prev);
    EXPECT_GE(f + 1e-12, r);
    EXPECT_LE(f, 1.0);
    prev = f;
  }
}

TEST(AttnBw, InterpolatesBetweenKnots) {
  const CalibrationCurves c({{0.5, 0.8}, {1.0, 1.0}}, {{0.5, 1.5}, {1.0, 1.0}});
  EXPECT_NEAR(attn_bw_fraction(0.75, c), 0.9, 1e-12);
  // Below the first knot the curve runs straight from the origin.
  EXPECT_NEAR(attn_bw_fraction(0.25, c), 0.4, 1e-12);
}

TEST(Slowdown, Examples) {
  const auto c = CalibrationCurves::defaults();
  EXPECT_DOUBLE_EQ(prefill_slowdown(1.0, c), 1.0);
  const double half = prefill_slowdown(0.5, c);
  EXPECT_GE(half, 1.0);
  EXPECT_LE(half, 2.0);
  EXPECT_DOUBLE_EQ(prefill_slowdown(0.8, c), 1.12);
  EXPECT_THROW(prefill_slowdown(0.0, c), InvalidPartition);
  EXPECT_THROW(prefill_slowdown(1.5, c), InvalidPartition);
}

TEST(Slowdown, SubLinearAndMonotone) {
  const auto c = CalibrationCurves::defaults();
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 1000; ++k) {
    const double r = k / 1000.0;
    const double f = prefill_slowdown(r, c);
    EXPECT_LE(f, prev);
    EXPECT_GE(f, 1.0);
    EXPECT_LE(f * r, 1.0 + 1e-12);
    prev = f;
  }
}

TEST(Curves, RejectsNonMonotoneBandwidth) {
  try {
    CalibrationCurves({{0.2, 0.6}, {0.4, 0.5}, {1.0, 1.0}}, {{1.0, 1.0}});
    FAIL();
  } catch (const CurveError& e) {
    ASSERT_EQ(e.indices().size(), 1u);
    EXPECT_EQ(e.indices()[0], 1u);
  }
}

TEST(Curves, RejectsSubLinearBandwidth) {
  try {
    CalibrationCurves({{0.5, 0.4}, {1.0, 1.0}}, {{1.0, 1.0}});
    FAIL();
  } catch (const CurveError& e) {
    EXPECT_EQ(e.indices(), std::vector<std::size_t>{0});
  }
}

TEST(Curves, RejectsSuperLinearSlowdown) {
  // 0.5 * 2.5 > 1
  try {
    CalibrationCurves({{1.0, 1.0}}, {{0.5, 2.5}, {1.0, 1.0}});
    FAIL();
  } catch (const CurveError& e) {
    EXPECT_EQ(e.indices(), std::vector<std::size_t>{0});
  }
}

TEST(Curves, RejectsUnsortedAndMissingEndpoint) {
  EXPECT_THROW(CalibrationCurves({{0.5, 0.8}, {0.3, 0.7}, {1.0, 1.0}}, {{1.0, 1.0}}),
               CurveError);
  EXPECT_THROW(CalibrationCurves({{0.5, 0.8}}, {{1.0, 1.0}}), CurveError);
  EXPECT_THROW(CalibrationCurves({{0.5, 0.8}, {1.0, 1.0}}, {}), CurveError);
}

TEST(Curves, JsonRoundTrip) {
  const auto c = CalibrationCurves::defaults();
  const auto back = CalibrationCurves::from_json(c.to_json());
  EXPECT_EQ(back.bw_points(), c.bw_points());
  EXPECT_EQ(back.slowdown_points(), c.slowdown_points());
  EXPECT_THROW(CalibrationCurves::from_json({{"bw", {{0.5}}}, {"slowdown", {}}}), ConfigError);
}

TEST(FitCurves, NormalizesToFullGpu) {
  // Raw bandwidth in GB/s and raw latency in ms.
  const auto c = fit_curves({{0.2, 1200.0}, {0.5, 1700.0}, {1.0, 2000.0}},
                            {{0.5, 70.0}, {1.0, 50.0}});
  EXPECT_DOUBLE_EQ(c.bw_points()[0].second, 0.6);
  EXPECT_DOUBLE_EQ(c.bw_points()[1].second, 0.85);
  EXPECT_DOUBLE_EQ(c.slowdown_points()[0].second, 1.4);
  EXPECT_DOUBLE_EQ(c.slowdown_points().back().second, 1.0);
}

TEST(FitCurves, AppendsMissingEndpoint) {
  const auto c = fit_curves({{0.2, 0.6}}, {{0.5, 1.4}});
  EXPECT_EQ(c.bw_points().back(), CurvePoint(1.0, 1.0));
  EXPECT_EQ(c.slowdown_points().back(), CurvePoint(1.0, 1.0));
}

TEST(FitCurves, ErrorIndicesReferToInput) {
  try {
    fit_curves({{0.2, 0.6}, {0.3, 0.5}, {1.0, 1.0}}, {{1.0, 1.0}});
    FAIL();
  } catch (const CurveError& e) {
    EXPECT_EQ(e.indices(), std::vector<std::size_t>{1});
  }
}

class SloSearch : public ::testing::Test {
 protected:
  ModelSpec m = ModelSpec::llama2_7b();
  GpuSpec g = GpuSpec::a100_80gb();
  CalibrationCurves c = CalibrationCurves::defaults();
  std::int64_t tokens = 4096;
  double base() const { return prefill_latency(m, g, tokens, 1.0, c); }
};

TEST_F(SloSearch, NoSlackMeansFullGpu) {
  const auto p = min_sm_ratio_for_slo(base(), tokens, m, g, c);
  EXPECT_DOUBLE_EQ(p.prefill_sm_ratio, 1.0);
  EXPECT_DOUBLE_EQ(p.attn_sm_ratio, 0.0);
}

TEST_F(SloSearch, UnboundedSloTakesSmallestGridRatio) {
  const auto p = min_sm_ratio_for_slo(std::numeric_limits<double>::infinity(), tokens, m, g, c);
  EXPECT_NEAR(p.prefill_sm_ratio, 0.05, 1e-12);
  EXPECT_NEAR(p.prefill_sm_ratio + p.attn_sm_ratio, 1.0, 1e-12);
}

TEST_F(SloSearch, HalfGpuAtSlowdown14) {
  const auto p = min_sm_ratio_for_slo(1.4 * base() * (1 + 1e-12), tokens, m, g, c);
  EXPECT_NEAR(p.prefill_sm_ratio, 0.5, 1e-12);
}

TEST_F(SloSearch, InfeasibleCarriesBestLatency) {
  try {
    min_sm_ratio_for_slo(0.5 * base(), tokens, m, g, c);
    FAIL();
  } catch (const InfeasibleSlo& e) {
    EXPECT_DOUBLE_EQ(e.best_latency(), base());
  }
}

TEST_F(SloSearch, ResultAlwaysMeetsSlo) {
  for (double mult = 1.0; mult < 15.0; mult += 0.137) {
    const double slo = mult * base();
    const auto p = min_sm_ratio_for_slo(slo, tokens, m, g, c);
    EXPECT_LE(prefill_latency(m, g, tokens, p.prefill_sm_ratio, c), slo);
    // The next grid ratio down misses the SLO.
    const double lower = p.prefill_sm_ratio - 0.05;
    if (lower > 1e-9) EXPECT_GT(prefill_latency(m, g, tokens, lower, c), slo);
  }
}

TEST(Partition, RejectsOutOfRange) {
  EXPECT_THROW(SmPartition::with_prefill_ratio(0.0), InvalidPartition);
  EXPECT_THROW(SmPartition::with_prefill_ratio(1.01), InvalidPartition);
  const auto p = SmPartition::with_prefill_ratio(0.7);
  EXPECT_NEAR(p.attn_sm_ratio, 0.3, 1e-12);
}

}  // namespace
}  // namespace adrenaline
