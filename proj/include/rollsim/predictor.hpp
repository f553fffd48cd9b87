// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rollsim/workload.hpp"

namespace rollsim {

// Degrades predictions to a target bucket accuracy, emulating a cheaper
// learned predictor. identity leaves the EWMA estimate untouched.
struct NoiseModel {
  enum class Kind { identity, bucket };
  Kind kind = Kind::identity;
  double bucket_accuracy = 1.0;  // probability the output lands in the true bucket
  int bucket_width = 100;        // tokens per bucket
  uint64_t seed = 0;

  void validate(int max_response_len) const;
};

// Sliding-window EWMA estimator of per-prompt response length.
class LengthHistory {
 public:
  explicit LengthHistory(int window = 1, double alpha = 0.5,
                         int max_response_len = 2048);

  // Records the mean of one step's response lengths for a prompt and drops
  // observations older than the window.
  void observe(int step_idx, const std::string& prompt_id,
               const std::vector<int>& lengths);

  // EWMA over the retained window, oldest observation first:
  //   est = o_1;  est = alpha * o_k + (1 - alpha) * est  for k >= 2.
  // Falls back to the prompt's ground-truth length before any observation.
  // Output clamped to [1, max_response_len].
  double predict(const Prompt& prompt) const;

  double predict_noisy(const Prompt& prompt, const NoiseModel& noise) const;

  int window() const { return window_; }
  double alpha() const { return alpha_; }
  int max_response_len() const { return max_response_len_; }
  // nullptr when the prompt has never been observed.
  const std::deque<double>* observations(const std::string& prompt_id) const;

  nlohmann::json to_json() const;
  static LengthHistory from_json(const nlohmann::json& j);

 private:
  int window_;
  double alpha_;
  int max_response_len_;
  std::map<std::string, std::deque<double>> obs_;   // oldest first
  std::map<std::string, int> last_step_;
};

}  // namespace rollsim
