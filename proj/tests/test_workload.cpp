// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
//
// Trace parsing, serialization, validation, and the synthetic generator.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "rollsim/errors.hpp"
#include "rollsim/workload.hpp"

using namespace rollsim;
using namespace rollsim::testutil;

namespace {

const char* kTinyCsv =
    "# rollsim-trace v1\n"
    "# g 1\n"
    "# max_prompt_len 1024\n"
    "# max_response_len 2048\n"
    "# prompt p0 7 11 12 13\n"
    "# prompt p1 9 21 22\n"
    "step_idx,prompt_id,response_idx,actual_len\n"
    "0,p0,0,5\n"
    "0,p1,0,8\n";

WorkloadTrace tiny_trace() {
  return trace_from_string(kTinyCsv, TraceFormat::csv);
}

}  // namespace

TEST_CASE("csv with two prompts and one step parses completely") {
  WorkloadTrace t = tiny_trace();
  CHECK(t.responses_per_prompt == 1);
  CHECK(t.limits.max_prompt_len == 1024);
  CHECK(t.limits.max_response_len == 2048);
  REQUIRE(t.prompts.size() == 2);
  CHECK(t.prompts[0].id == "p0");
  CHECK(t.prompts[0].token_ids == std::vector<int32_t>{11, 12, 13});
  CHECK(t.prompts[0].ground_truth_len == 7);
  CHECK(t.prompts[1].id == "p1");
  CHECK(t.prompts[1].prompt_len() == 2);
  REQUIRE(t.steps.size() == 1);
  CHECK(t.steps[0].step_idx == 0);
  CHECK(t.steps[0].scheduled_prompts == std::vector<std::string>{"p0", "p1"});
  CHECK(t.steps[0].actual_lengths.at("p0") == std::vector<int>{5});
  CHECK(t.steps[0].actual_lengths.at("p1") == std::vector<int>{8});
}

TEST_CASE("zero response length fails validation") {
  std::string bad = kTinyCsv;
  auto pos = bad.rfind("0,p1,0,8");
  bad.replace(pos, 8, "0,p1,0,0");
  CHECK_THROWS_AS(trace_from_string(bad, TraceFormat::csv), ValidationError);
}

TEST_CASE("non-monotone step indices fail validation") {
  std::string jsonl =
      "{\"type\":\"header\",\"g\":1,\"prompts\":"
      "[{\"id\":\"p0\",\"ground_truth_len\":7,\"token_ids\":[11,12,13]}]}\n"
      "{\"step\":2,\"lengths\":{\"p0\":[5]}}\n"
      "{\"step\":1,\"lengths\":{\"p0\":[5]}}\n"
      "{\"step\":3,\"lengths\":{\"p0\":[5]}}\n";
  CHECK_THROWS_AS(trace_from_string(jsonl, TraceFormat::jsonl),
                  ValidationError);
  // In order the same lines parse fine.
  std::string ordered =
      "{\"type\":\"header\",\"g\":1,\"prompts\":"
      "[{\"id\":\"p0\",\"ground_truth_len\":7,\"token_ids\":[11,12,13]}]}\n"
      "{\"step\":1,\"lengths\":{\"p0\":[5]}}\n"
      "{\"step\":2,\"lengths\":{\"p0\":[5]}}\n"
      "{\"step\":3,\"lengths\":{\"p0\":[5]}}\n";
  WorkloadTrace t = trace_from_string(ordered, TraceFormat::jsonl);
  CHECK(t.steps.size() == 3);
  CHECK(t.steps[0].scheduled_prompts == std::vector<std::string>{"p0"});
}

TEST_CASE("csv rejects metadata after the header row") {
  std::string bad =
      "# rollsim-trace v1\n"
      "# g 1\n"
      "# prompt p0 7 11 12 13\n"
      "step_idx,prompt_id,response_idx,actual_len\n"
      "# max_prompt_len 99\n"
      "0,p0,0,5\n";
  CHECK_THROWS_AS(trace_from_string(bad, TraceFormat::csv), ParseError);
}

TEST_CASE("csv rejects out-of-order response indices") {
  std::string bad =
      "# rollsim-trace v1\n"
      "# g 2\n"
      "# prompt p0 7 11 12\n"
      "step_idx,prompt_id,response_idx,actual_len\n"
      "0,p0,1,5\n"
      "0,p0,0,6\n";
  CHECK_THROWS_AS(trace_from_string(bad, TraceFormat::csv), ParseError);
}

TEST_CASE("unknown scheduled prompt fails validation") {
  WorkloadTrace t = tiny_trace();
  t.steps[0].scheduled_prompts.push_back("ghost");
  t.steps[0].actual_lengths["ghost"] = {4};
  CHECK_THROWS_AS(t.validate(), ValidationError);
}

TEST_CASE("response count must match g exactly") {
  WorkloadTrace t = tiny_trace();
  t.steps[0].actual_lengths["p0"] = {5, 6};  // g is 1
  CHECK_THROWS_AS(t.validate(), ValidationError);
}

TEST_CASE("round trip preserves the trace in both formats") {
  SynthConfig cfg;
  cfg.prompt_count = 12;
  cfg.step_count = 3;
  cfg.responses_per_prompt = 4;
  WorkloadTrace t = generate_synthetic(cfg, 99);
  for (TraceFormat f : {TraceFormat::csv, TraceFormat::jsonl}) {
    std::string text = trace_to_string(t, f);
    WorkloadTrace back = trace_from_string(text, f);
    CHECK(back == t);
  }
}

TEST_CASE("file save and load round trips") {
  TempDir dir("rollsim-workload");
  SynthConfig cfg;
  cfg.prompt_count = 6;
  cfg.step_count = 2;
  cfg.responses_per_prompt = 2;
  WorkloadTrace t = generate_synthetic(cfg, 5);

  std::string csv_path = dir.file("t.csv");
  save_trace(t, csv_path, TraceFormat::csv);
  CHECK(load_trace(csv_path, TraceFormat::csv) == t);

  std::string jsonl_path = dir.file("t.jsonl");
  save_trace(t, jsonl_path, TraceFormat::jsonl);
  CHECK(load_trace(jsonl_path, TraceFormat::jsonl) == t);
}

TEST_CASE("format helpers") {
  CHECK(trace_format_from_string("csv") == TraceFormat::csv);
  CHECK(trace_format_from_string("jsonl") == TraceFormat::jsonl);
  CHECK_THROWS_AS(trace_format_from_string("xml"), ConfigError);
  CHECK(guess_trace_format("a/b/trace.csv") == TraceFormat::csv);
  CHECK(guess_trace_format("trace.jsonl") == TraceFormat::jsonl);
}

TEST_CASE("missing trace file raises a config error") {
  CHECK_THROWS_AS(load_trace("/nonexistent/trace.csv", TraceFormat::csv),
                  ConfigError);
}

TEST_CASE("synthetic generation is deterministic") {
  SynthConfig cfg;
  cfg.prompt_count = 20;
  cfg.step_count = 3;
  WorkloadTrace a = generate_synthetic(cfg, 1234);
  WorkloadTrace b = generate_synthetic(cfg, 1234);
  CHECK(a == b);
  CHECK(trace_to_string(a, TraceFormat::csv) ==
        trace_to_string(b, TraceFormat::csv));
  WorkloadTrace c = generate_synthetic(cfg, 1235);
  CHECK(a != c);
}

TEST_CASE("synthetic traces validate and honor shape knobs") {
  SynthConfig cfg;
  cfg.prompt_count = 30;
  cfg.step_count = 5;
  cfg.responses_per_prompt = 3;
  WorkloadTrace t = generate_synthetic(cfg, 7);
  t.validate();
  CHECK(t.prompts.size() == 30);
  CHECK(t.steps.size() == 5);
  CHECK(t.responses_per_prompt == 3);
  for (const Prompt& p : t.prompts) {
    CHECK(p.prompt_len() >= cfg.prompt_len_min);
    CHECK(p.prompt_len() <= cfg.limits.max_prompt_len);
    CHECK(p.ground_truth_len >= 1);
    CHECK(p.ground_truth_len <= cfg.limits.max_response_len);
  }
  for (const StepRecord& s : t.steps) {
    CHECK(s.scheduled_prompts.size() == 30);
    for (const auto& [id, lens] : s.actual_lengths) {
      CHECK(lens.size() == 3);
      for (int len : lens) {
        CHECK(len >= 1);
        CHECK(len <= cfg.limits.max_response_len);
      }
    }
  }
}

TEST_CASE("zero drift and zero jitter freeze response lengths") {
  SynthConfig cfg;
  cfg.prompt_count = 16;
  cfg.step_count = 4;
  cfg.responses_per_prompt = 2;
  cfg.drift_scale = 0;
  cfg.response_jitter = 0;
  cfg.ground_truth_error = 0;
  WorkloadTrace t = generate_synthetic(cfg, 11);
  for (const Prompt& p : t.prompts) {
    for (const StepRecord& s : t.steps) {
      for (int len : s.actual_lengths.at(p.id)) {
        CHECK(len == p.ground_truth_len);
      }
    }
  }
}

TEST_CASE("calibrated drift keeps most per-step movement small") {
  SynthConfig cfg;
  cfg.prompt_count = 100;
  cfg.step_count = 10;
  cfg.responses_per_prompt = 4;
  WorkloadTrace t = generate_synthetic(cfg, 7);

  auto step_mean = [&](const StepRecord& s, const std::string& id) {
    const auto& lens = s.actual_lengths.at(id);
    double sum = 0;
    for (int v : lens) sum += v;
    return sum / static_cast<double>(lens.size());
  };

  int pairs = 0, within50 = 0, within100 = 0;
  for (size_t k = 1; k < t.steps.size(); ++k) {
    for (const Prompt& p : t.prompts) {
      double d = std::abs(step_mean(t.steps[k], p.id) -
                          step_mean(t.steps[k - 1], p.id));
      ++pairs;
      if (d <= 50.0) ++within50;
      if (d <= 100.0) ++within100;
    }
  }
  CHECK(pairs == 900);
  CHECK(within50 >= pairs * 70 / 100);
  CHECK(within100 >= pairs * 90 / 100);
}

TEST_CASE("prefix sharing produces shared leading tokens") {
  SynthConfig cfg;
  cfg.prompt_count = 40;
  cfg.step_count = 1;
  cfg.prefix_sharing.fraction = 0.5;
  cfg.prefix_sharing.prefix_len = 32;
  cfg.prefix_sharing.group_count = 4;
  cfg.prompt_len_mean = 128;
  cfg.prompt_len_sigma = 16;
  WorkloadTrace t = generate_synthetic(cfg, 3);

  // Count prompts per shared 32-token head.
  std::map<std::vector<int32_t>, int> heads;
  for (const Prompt& p : t.prompts) {
    REQUIRE(p.prompt_len() >= 32);
    std::vector<int32_t> head(p.token_ids.begin(), p.token_ids.begin() + 32);
    ++heads[head];
  }
  int shared_prompts = 0;
  int shared_groups = 0;
  for (const auto& [head, count] : heads) {
    if (count > 1) {
      ++shared_groups;
      shared_prompts += count;
    }
  }
  CHECK(shared_groups == 4);
  CHECK(shared_prompts == 20);
}

TEST_CASE("synth config rejects bad knobs") {
  SynthConfig cfg;
  cfg.prompt_count = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.step_count = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.responses_per_prompt = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.prefix_sharing.fraction = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.base_len_median = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.increase_fraction = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("find_prompt and prompt_or_throw") {
  WorkloadTrace t = tiny_trace();
  CHECK(t.find_prompt("p0") != nullptr);
  CHECK(t.find_prompt("p9") == nullptr);
  CHECK(t.prompt_or_throw("p1").id == "p1");
  CHECK_THROWS_AS(t.prompt_or_throw("p9"), ValidationError);
}
