// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rollsim/profile.hpp"
#include "rollsim/workload.hpp"

namespace rollsim::testutil {

inline Prompt make_prompt(std::string id, std::vector<int32_t> tokens,
                          int ground_truth = 1) {
  Prompt p;
  p.id = std::move(id);
  p.token_ids = std::move(tokens);
  p.ground_truth_len = ground_truth;
  return p;
}

// A prompt of `len` tokens whose sequence is unique per `tag` (no accidental
// prefix sharing between prompts built with different tags).
inline Prompt make_prompt_n(std::string id, int len, int32_t tag,
                            int ground_truth = 1) {
  std::vector<int32_t> toks(static_cast<size_t>(len));
  for (int i = 0; i < len; ++i) toks[static_cast<size_t>(i)] = tag * 10000 + i;
  return make_prompt(std::move(id), std::move(toks), ground_truth);
}

// Flat latency surface: every (batch, context) cell costs the same.
inline LatencyProfile constant_profile(double tpot, double rho = 0.0005,
                                       int gpus_per_actor = 2,
                                       double prefill_per_token = 0.0001) {
  LatencyProfile p;
  p.batch_knots = {1, 4096};
  p.context_knots = {1, 1 << 20};
  p.tpot_grid = {{tpot, tpot}, {tpot, tpot}};
  p.prefill_token_knots = {1, 1e9};
  p.prefill_seconds_knots = {1 * prefill_per_token, 1e9 * prefill_per_token};
  p.rho = rho;
  p.gpus_per_actor = gpus_per_actor;
  return p;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    auto base = std::filesystem::temp_directory_path();
    for (int attempt = 0;; ++attempt) {
      path_ = base / (tag + "-" + std::to_string(::getpid()) + "-" +
                      std::to_string(attempt));
      std::error_code ec;
      if (std::filesystem::create_directory(path_, ec)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

}  // namespace rollsim::testutil
