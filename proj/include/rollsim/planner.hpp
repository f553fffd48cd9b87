// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rollsim/profile.hpp"

namespace rollsim {

struct PredictedPrompt {
  std::string id;
  int prompt_len = 0;
  double predicted_len = 1.0;  // tokens, fractional estimates allowed
};

struct ActorGroup {
  int actor_id = 0;
  std::vector<std::string> prompt_ids;
  std::vector<int> prompt_lens;
  std::vector<double> predicted_lengths;
  int gpu_count = 1;
};

// Ranking assignment: sort by predicted length descending (ties by prompt id
// ascending) and split into n contiguous chunks whose sizes differ by at most
// one, longer chunks first. Keeps same-length responses on the same actor.
std::vector<ActorGroup> assign(const std::vector<PredictedPrompt>& predicted,
                               int n_actors, int gpus_per_actor);

// One decoding response as the planner sees it.
struct ResponseSpec {
  int prompt_len = 0;
  double target_len = 1.0;  // live through tick t while t <= ceil(target_len)
};

// Token-by-token decode time: sum over ticks of
//   tpot(live batch size, max over live of prompt_len + tokens generated)
// until the longest response finishes. The live batch shrinks as shorter
// responses complete. The simulator advances decode with the same rule, so
// planned and simulated decode times agree when lengths match.
double integrate_decode_seconds(std::vector<ResponseSpec> responses,
                                const LatencyProfile& profile);

// Expands each prompt to responses_per_prompt responses at its predicted
// length and integrates.
double estimate_actor_time(const ActorGroup& group,
                           const LatencyProfile& profile,
                           int responses_per_prompt);

// rho * sum_i T(X_i, G_i) * gpus(i): GPU-seconds priced at the profile rate.
double estimate_cost(const std::vector<ActorGroup>& groups,
                     const LatencyProfile& profile, int responses_per_prompt);

struct ScaleCandidate {
  int n_actors = 0;
  double t_total = 0;    // max over actors of estimated time
  double t_penalty = 0;  // added before normalization (placement slack)
  double cost = 0;
  double t_norm = 0;
  double c_norm = 0;
  double score = 0;  // lambda * t_norm + (1 - lambda) * c_norm
};

struct ScaleResult {
  int n_star = 0;
  std::vector<ScaleCandidate> candidates;  // one per candidate N, ascending
  std::vector<ActorGroup> groups;          // assignment for n_star
  std::vector<double> actor_times;         // estimates for n_star
};

// Optional hook invoked per candidate N; its return value is added to that
// candidate's total time before normalization. Used to fold placement
// feasibility (negative overlap slack) into the trade-off.
using TimePenaltyFn = std::function<double(
    int n_actors, const std::vector<ActorGroup>& groups,
    const std::vector<double>& actor_times)>;

// Evaluates every N in [n_min, n_max], min-max normalizes total time and cost
// across candidates (degenerate spans normalize to 0), and picks the N
// minimizing lambda * t_norm + (1 - lambda) * c_norm. Ties resolve to the
// smaller N.
ScaleResult scale(const std::vector<PredictedPrompt>& predicted,
                  const LatencyProfile& profile, int responses_per_prompt,
                  int n_min, int n_max, double lambda, int gpus_per_actor,
                  const TimePenaltyFn& penalty = nullptr);

enum class PrefillMode {
  shared_dedup,  // one prefill pass over unique prefixes, KV shipped to actors
  per_actor,     // every actor refills its own prompts, one pass per response
};

struct GenerationPlan {
  int step_idx = 0;
  int responses_per_prompt = 1;

  PrefillMode prefill_mode = PrefillMode::shared_dedup;
  int l_star = 0;
  bool prefill_capacity_exceeded = false;
  std::vector<int64_t> prefill_wave_tokens;  // shared_dedup: tokens per pass
  int64_t raw_prefill_tokens = 0;
  int64_t dedup_prefill_tokens = 0;
  int prefill_gpu_count = 1;

  int n_actors = 0;
  std::vector<ActorGroup> groups;
  std::vector<double> est_time_per_actor;
  double est_total_time = 0;  // max over groups
  double est_cost = 0;
  double lambda = 0.7;

  std::vector<ScaleCandidate> scale_candidates;  // diagnostics
  std::vector<int64_t> unique_prefix_curve;      // D(L) for L = 1..max len

  nlohmann::json to_json() const;
};

}  // namespace rollsim
