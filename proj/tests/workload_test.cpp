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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "adrenaline/errors.hpp"
#include "adrenaline/workload.hpp"

namespace adrenaline {
namespace {

std::string temp_file(const std::string& name, const std::string& body) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << body;
  return p.string();
}

TEST(Trace, RateOverrideIsSeeded) {
  const auto path = temp_file("wl_three.jsonl",
                              "{\"prompt_tokens\": 10, \"output_tokens\": 5}\n"
                              "{\"prompt_tokens\": 20, \"output_tokens\": 6}\n"
                              "{\"prompt_tokens\": 30, \"output_tokens\": 7}\n");
  const auto a = load_trace(path, 1.0, 42);
  const auto b = load_trace(path, 1.0, 42);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a[i].arrival_time, b[i].arrival_time);
    EXPECT_EQ(a[i].max_token, a[i].prompt_tokens + 5 + static_cast<std::int64_t>(i));
  }
  EXPECT_NE(load_trace(path, 1.0, 43)[0].arrival_time, a[0].arrival_time);
}

TEST(Trace, ExplicitArrivalsVerbatim) {
  std::istringstream in(
      "{\"arrival\": 0.5, \"prompt_tokens\": 10, \"output_tokens\": 5}\n"
      "\n"
      "{\"arrival\": 2.25, \"prompt_tokens\": 4, \"output_tokens\": 1}\n");
  const auto w = from_records(parse_trace(in), std::nullopt, 1);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].arrival_time, 0.5);
  EXPECT_EQ(w[1].arrival_time, 2.25);
  EXPECT_EQ(w[1].used_token, 4);
  EXPECT_EQ(w[1].output_tokens(), 1);
}

TEST(Trace, EmptyFileIsEmptyWorkload) {
  EXPECT_TRUE(load_trace(temp_file("wl_empty.jsonl", ""), std::nullopt, 1).empty());
}

TEST(Trace, MissingArrivalsNeedRate) {
  std::istringstream in("{\"prompt_tokens\": 10, \"output_tokens\": 5}\n");
  EXPECT_THROW(from_records(parse_trace(in), std::nullopt, 1), ConfigError);
}

TEST(Trace, ErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& body) -> std::size_t {
    std::istringstream in(body);
    try {
      parse_trace(in);
    } catch (const TraceError& e) {
      return e.line();
    }
    return 0;
  };
  const std::string ok = "{\"prompt_tokens\": 1, \"output_tokens\": 1}\n";
  EXPECT_EQ(line_of(ok + "not json\n"), 2u);
  EXPECT_EQ(line_of(ok + ok + "{\"prompt_tokens\": 0, \"output_tokens\": 1}\n"), 3u);
  EXPECT_EQ(line_of("{\"prompt_tokens\": 3}\n"), 1u);
  EXPECT_EQ(line_of("[1, 2]\n"), 1u);
  EXPECT_EQ(line_of("{\"arrival\": -1, \"prompt_tokens\": 1, \"output_tokens\": 1}\n"), 1u);
}

TEST(Trace, WriteThenParseRoundTrip) {
  const auto w = gen_synthetic(20, LengthDist::uniform(1, 50), LengthDist::uniform(1, 9), 2.0, 5);
  std::stringstream s;
  write_trace(s, w);
  const auto back = from_records(parse_trace(s), std::nullopt, 0);
  ASSERT_EQ(back.size(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_DOUBLE_EQ(back[i].arrival_time, w[i].arrival_time);
    EXPECT_EQ(back[i].max_token, w[i].max_token);
  }
}

TEST(Synthetic, ConstantShapes) {
  const auto w = gen_synthetic(10, LengthDist::constant(512), LengthDist::constant(128), 3.0, 1);
  ASSERT_EQ(w.size(), 10u);
  for (const auto& r : w) {
    EXPECT_EQ(r.prompt_tokens, 512);
    EXPECT_EQ(r.max_token, 640);
    EXPECT_EQ(r.used_token, r.prompt_tokens);
  }
}

TEST(Synthetic, SameSeedSameWorkload) {
  const auto p = workload_preset("sharegpt-like");
  const auto a = gen_synthetic(500, p.prompt, p.output, 4.0, 9);
  const auto b = gen_synthetic(500, p.prompt, p.output, 4.0, 9);
  std::stringstream sa;
  std::stringstream sb;
  write_trace(sa, a);
  write_trace(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Synthetic, ArrivalsStrictlyIncreasing) {
  std::vector<TraceRecord> recs(5, TraceRecord{1.0, 3, 3});
  const auto w = from_records(recs, std::nullopt, 0);
  for (std::size_t i = 1; i < w.size(); ++i) {
    EXPECT_GT(w[i].arrival_time, w[i - 1].arrival_time);
  }
}

TEST(Synthetic, PresetShapes) {
  auto ratio = [](const std::string& name) {
    const auto p = workload_preset(name);
    const auto w = gen_synthetic(10000, p.prompt, p.output, 1.0, 42);
    double prompt = 0.0;
    double output = 0.0;
    for (const auto& r : w) {
      prompt += static_cast<double>(r.prompt_tokens);
      output += static_cast<double>(r.output_tokens());
    }
    return output / prompt;
  };
  EXPECT_GT(ratio("openthoughts-like"), 1.0);
  EXPECT_LT(ratio("sharegpt-like"), 1.0);
  EXPECT_THROW(workload_preset("nope"), ConfigError);
}

TEST(Synthetic, PoissonMeanGap) {
  const auto a = poisson_arrivals(20000, 5.0, 3);
  EXPECT_NEAR(a.back() / 20000.0, 0.2, 0.01);
  EXPECT_THROW(poisson_arrivals(3, 0.0, 1), ConfigError);
  EXPECT_THROW(poisson_arrivals(3, -1.0, 1), ConfigError);
}

TEST(LengthDistTest, ValidationAndJson) {
  EXPECT_THROW(LengthDist::uniform(5, 2).validate("p"), ConfigError);
  EXPECT_THROW(LengthDist::constant(0).validate("p"), ConfigError);
  EXPECT_THROW(LengthDist::lognormal(100, -1).validate("p"), ConfigError);
  const auto d = LengthDist::lognormal(300, 0.5, 1024);
  const auto back = LengthDist::from_json(d.to_json(), "p");
  EXPECT_EQ(back.kind, d.kind);
  EXPECT_EQ(back.a, d.a);
  EXPECT_EQ(back.max_value, 1024);
  EXPECT_THROW(LengthDist::from_json({{"kind", "zipf"}}, "p"), ConfigError);
}

}  // namespace
}  // namespace adrenaline
