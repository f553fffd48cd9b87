// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rollsim/placement.hpp"
#include "rollsim/planner.hpp"
#include "rollsim/predictor.hpp"
#include "rollsim/simulator.hpp"
#include "rollsim/workload.hpp"

namespace rollsim {

enum class Strategy {
  rlhfless,             // dedup + ranking + scaling + locality + cut/migrate
  static_baseline,      // fixed N, raw prefill, round-robin, no cuts
  global_cut_baseline,  // fixed N, raw prefill, round-robin, global cut
};

Strategy strategy_from_string(const std::string& s);
std::string to_string(Strategy s);

struct RunSettings {
  double tau = 0.7;
  double lambda = 0.7;
  int window = 1;
  double ewma_alpha = 0.5;
  int n_min = 1;
  int n_max = 8;
  int n_static = 3;
  int b_prefill = 64;  // unique prefixes per prefill pass
  double model_bytes = 6e9;
  double kv_bytes_per_token = 36864.0;
  bool migration_payload_infinite = false;
  double prep_seconds = 10.0;
  double learn_seconds = 20.0;
  bool use_noisy_predictor = false;
  NoiseModel noise;
  uint64_t seed = 42;

  void validate() const;  // throws ConfigError
};

struct PlannedStep {
  GenerationPlan plan;
  PlacementPlan placement;
  double l_prefill_seconds = 0;
};

// Pure per-step planning pipeline (prediction snapshot -> dedup -> ranking ->
// scaling -> placement). No simulation, no mutation; this is what the
// planning benchmark times.
PlannedStep plan_step(const WorkloadTrace& trace, const StepRecord& step,
                      const LengthHistory& history, Strategy strategy,
                      const RunSettings& settings,
                      const LatencyProfile& profile,
                      const ClusterTopology& topo);

struct StepOutcome {
  int step_idx = 0;
  GenerationPlan plan;
  SimResult sim;
};

struct TrainingResult {
  Strategy strategy = Strategy::rlhfless;
  std::vector<StepOutcome> steps;

  double mean_step_wall_seconds = 0;
  double mean_generation_seconds = 0;
  double mean_step_cost = 0;
  double total_cost = 0;
  double total_gpu_seconds = 0;
  long total_cuts = 0;
  long total_migrations = 0;
  int64_t total_redundant_prefill_tokens = 0;
};

// Runs every step of the trace under one strategy, feeding observed lengths
// back into the predictor between steps.
TrainingResult run_training(const WorkloadTrace& trace, Strategy strategy,
                            const RunSettings& settings,
                            const LatencyProfile& profile,
                            const ClusterTopology& topo);

}  // namespace rollsim
