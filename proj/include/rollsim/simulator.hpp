// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rollsim/placement.hpp"
#include "rollsim/planner.hpp"
#include "rollsim/workload.hpp"

namespace rollsim {

enum class CutMode {
  none,       // run every response to completion where it started
  per_actor,  // cut overrunning responses once an actor passes tau complete
  global,     // cut everything unfinished once the whole step passes tau
};

struct SimConfig {
  double tau = 0.7;  // completion fraction that triggers cutting, in (0, 1]
  CutMode cut_mode = CutMode::per_actor;
  // Migration payload per context token (prompt + generated so far).
  // Infinity disables migration: cut responses simply finish locally.
  double kv_bytes_per_token = 36864.0;
  double prep_seconds = 10.0;   // reward/advantage phase placeholder
  double learn_seconds = 20.0;  // learner update placeholder

  void validate() const;  // throws ConfigError

  bool migrations_disabled() const {
    return kv_bytes_per_token == std::numeric_limits<double>::infinity();
  }
};

struct SimEvent {
  double t = 0;
  std::string kind;  // prefill_start/prefill_end/actor_start/finish/cut/
                     // migrate/arrive/release
  int actor = -1;
  int peer = -1;  // migration destination
  std::string prompt_id;
  int response_idx = -1;
  double value = 0;  // kind-specific: tokens generated, transfer seconds, ...
};

struct BusyRecord {
  std::string component;  // "actor", "prefill", "prep", "learn"
  int actor_id = -1;
  int gpu_count = 0;
  double start = 0;
  double end = 0;
};

// Tokens one response generated on one actor; a migrated response has one
// segment per actor it visited. Segment totals must add up to actual lengths.
struct ResponseSegment {
  std::string prompt_id;
  int response_idx = 0;
  int actor = 0;
  int64_t tokens = 0;
};

struct SimResult {
  double prefill_end_time = 0;        // seconds from step start
  double generation_wall_seconds = 0; // step start to last decode release
  double step_wall_seconds = 0;       // generation plus phase placeholders

  std::vector<double> actor_decode_start;    // per actor_id
  std::vector<double> actor_release;         // per actor_id
  std::vector<double> actor_decode_seconds;  // release - decode start
  std::vector<double> actor_busy_seconds;    // charged interval length

  std::vector<BusyRecord> busy;  // the cost ledger
  double gpu_seconds = 0;        // sum over busy of span * gpu_count
  double dollars = 0;            // rho * gpu_seconds, bit-exact

  long cuts = 0;
  long migrations = 0;
  double migration_transfer_seconds = 0;

  int64_t raw_prefill_tokens = 0;
  int64_t dedup_prefill_tokens = 0;       // tokens actually prefilled
  int64_t redundant_prefill_tokens = 0;   // actually prefilled minus dedup plan

  std::vector<ResponseSegment> segments;
  std::vector<SimEvent> events;

  nlohmann::json summary_json() const;
};

// Simulates one generation step. Decode advances token-by-token per actor:
// each tick every live response gains one token and the tick lasts
// tpot(live batch size, max live context). Responses finish at their actual
// length. Cut responses keep decoding locally until another live actor has a
// free slot (a completed response's batch position); the transfer takes
// payload / bandwidth seconds and the response resumes at the destination
// with its generated tokens intact.
SimResult run_step(const GenerationPlan& plan, const PlacementPlan& placement,
                   const StepRecord& actual, const LatencyProfile& profile,
                   const SimConfig& cfg);

// RLHFuse-style baseline: when the global completion fraction reaches tau,
// every unfinished response is cut and consolidated onto the lowest-id live
// actor (its batch may overflow); all other actors release immediately.
SimResult baseline_global_cut(const GenerationPlan& plan,
                              const PlacementPlan& placement,
                              const StepRecord& actual,
                              const LatencyProfile& profile,
                              const SimConfig& cfg);

}  // namespace rollsim
