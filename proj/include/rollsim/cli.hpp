// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rollsim/placement.hpp"
#include "rollsim/profile.hpp"
#include "rollsim/training.hpp"
#include "rollsim/workload.hpp"

namespace rollsim {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitRuntimeError = 2;

struct RunConfig {
  RunSettings settings;
  std::vector<Strategy> strategies = {Strategy::rlhfless};

  // Trace source: a file or a synthetic generator spec.
  std::string trace_file;
  std::string trace_format = "csv";
  bool use_synthetic = true;
  SynthConfig synth;

  // Empty path means built-in defaults.
  std::string profile_file;
  std::string topology_file;
  LatencyProfile profile;
  ClusterTopology topology;

  std::string output_dir = "out";

  void validate() const;
};

// Loads the declarative JSON config; unset keys keep defaults. Throws
// ConfigError/ParseError on bad input.
RunConfig load_run_config(const std::string& path);
RunConfig default_run_config();
// Resolves profile/topology files and the trace source.
WorkloadTrace resolve_trace(const RunConfig& cfg);
void resolve_profiles(RunConfig& cfg);

int cmd_simulate(const RunConfig& cfg);

struct SweepSpec {
  std::string param;  // tau | lambda | window
  std::vector<double> values;
};
int cmd_sweep(const RunConfig& cfg, const SweepSpec& sweep);

int cmd_plan_bench(const RunConfig& cfg, int batch_size, int node_count,
                   int gpus_per_node, int repetitions);

int cmd_gen_trace(const RunConfig& cfg, const std::string& out_path,
                  const std::string& format);

int cmd_validate(const std::string& trace_path, const std::string& format);

}  // namespace rollsim
