// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace rollsim {

// Measured latency surface of one model/hardware pair. tpot is a bilinear
// interpolation over a (batch size, context length) grid, clamped at the grid
// edges; prefill is piecewise linear in total batch tokens with edge-slope
// extrapolation. Grids must be strictly increasing and values positive and
// non-decreasing along both axes.
struct LatencyProfile {
  std::vector<double> batch_knots;
  std::vector<double> context_knots;
  std::vector<std::vector<double>> tpot_grid;  // [batch][context] seconds/token

  std::vector<double> prefill_token_knots;
  std::vector<double> prefill_seconds_knots;

  double rho = 0.0005;      // dollars per GPU-second
  int gpus_per_actor = 2;

  double tpot_seconds(double batch_size, double context_len) const;
  double prefill_seconds(double batch_tokens) const;

  void validate() const;  // throws ConfigError
  nlohmann::json to_json() const;
  static LatencyProfile from_json(const nlohmann::json& j);
  static LatencyProfile load(const std::string& path);
};

// Plausible single-node serving numbers used when no profile file is given.
LatencyProfile default_profile();

}  // namespace rollsim
