// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rollsim {

struct TraceLimits {
  int max_prompt_len = 1024;
  int max_response_len = 2048;
  bool operator==(const TraceLimits&) const = default;
};

struct Prompt {
  std::string id;
  std::vector<int32_t> token_ids;
  int ground_truth_len = 1;  // reference answer length, used for cold starts

  int prompt_len() const { return static_cast<int>(token_ids.size()); }
  bool operator==(const Prompt&) const = default;
};

// One training step: the scheduled batch and, per prompt, the observed
// length of each of the G sampled responses.
struct StepRecord {
  int step_idx = 0;
  std::vector<std::string> scheduled_prompts;              // batch order
  std::map<std::string, std::vector<int>> actual_lengths;  // id -> G lengths
  bool operator==(const StepRecord&) const = default;
};

struct WorkloadTrace {
  int responses_per_prompt = 1;  // G
  TraceLimits limits;
  std::vector<Prompt> prompts;  // sorted by id, unique
  std::vector<StepRecord> steps;

  const Prompt* find_prompt(const std::string& id) const;
  const Prompt& prompt_or_throw(const std::string& id) const;
  // Throws ValidationError on any structural violation.
  void validate() const;
  bool operator==(const WorkloadTrace&) const = default;
};

enum class TraceFormat { csv, jsonl };

TraceFormat trace_format_from_string(const std::string& s);
TraceFormat guess_trace_format(const std::string& path);

WorkloadTrace load_trace(const std::string& path, TraceFormat format);
void save_trace(const WorkloadTrace& trace, const std::string& path,
                TraceFormat format);
// String variants back the file API and keep determinism tests simple.
WorkloadTrace trace_from_string(const std::string& text, TraceFormat format,
                                const std::string& origin = "<string>");
std::string trace_to_string(const WorkloadTrace& trace, TraceFormat format);

struct PrefixSharingConfig {
  double fraction = 0.5;  // share of prompts that carry a shared prefix
  int prefix_len = 128;   // tokens in the shared prefix
  int group_count = 8;    // distinct shared prefixes, sharers split evenly
  bool operator==(const PrefixSharingConfig&) const = default;
};

// Synthetic workload knobs. With paper_calibration the per-epoch drift is
// drawn from three bounded buckets sized so that at least 70% of prompts move
// no more than 50 tokens between consecutive steps and at least 90% move no
// more than 100; the remaining tail is deliberately volatile.
struct SynthConfig {
  int prompt_count = 64;
  int step_count = 4;
  int responses_per_prompt = 8;
  TraceLimits limits;

  bool paper_calibration = true;
  double drift_scale = 1.0;        // 0 freezes lengths entirely
  double increase_fraction = 0.6;  // share of prompts trending longer

  // Custom drift model, used when paper_calibration is false.
  double trend_slope = 20.0;  // tokens per step, magnitude upper bound
  double noise_bound = 25.0;  // per-step uniform noise half-width

  double response_jitter = 8.0;      // per-response half-width around the mean
  double ground_truth_error = 0.15;  // relative error of ground-truth lengths

  double base_len_median = 400.0;  // lognormal body of initial lengths
  double base_len_log_sigma = 0.75;

  double prompt_len_mean = 384.0;
  double prompt_len_sigma = 96.0;
  int prompt_len_min = 16;

  PrefixSharingConfig prefix_sharing;
  int vocab_size = 32000;

  void validate() const;  // throws ConfigError
};

// Deterministic: same cfg and seed give byte-identical traces.
WorkloadTrace generate_synthetic(const SynthConfig& cfg, uint64_t seed);

}  // namespace rollsim
