// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#include "rollsim/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rollsim/dedup.hpp"
#include "rollsim/errors.hpp"
#include "rollsim/rng.hpp"

namespace rollsim {

Strategy strategy_from_string(const std::string& s) {
  if (s == "rlhfless") return Strategy::rlhfless;
  if (s == "static" || s == "static_baseline") return Strategy::static_baseline;
  if (s == "global_cut" || s == "global_cut_baseline")
    return Strategy::global_cut_baseline;
  throw ConfigError("unknown strategy '" + s +
                    "' (expected rlhfless, static, or global_cut)");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::rlhfless: return "rlhfless";
    case Strategy::static_baseline: return "static";
    case Strategy::global_cut_baseline: return "global_cut";
  }
  return "?";
}

void RunSettings::validate() const {
  if (!(tau > 0) || tau > 1) throw ConfigError("tau must be in (0, 1]");
  if (lambda < 0 || lambda > 1) throw ConfigError("lambda must be in [0, 1]");
  if (window < 1) throw ConfigError("window must be >= 1");
  if (!(ewma_alpha > 0) || ewma_alpha > 1)
    throw ConfigError("ewma_alpha must be in (0, 1]");
  if (n_min < 1) throw ConfigError("n_min must be >= 1");
  if (n_max < n_min) throw ConfigError("n_max must be >= n_min");
  if (n_static < 1) throw ConfigError("n_static must be >= 1");
  if (b_prefill < 1) throw ConfigError("b_prefill must be >= 1");
  if (model_bytes < 0) throw ConfigError("model_bytes must be >= 0");
  if (kv_bytes_per_token < 0)
    throw ConfigError("kv_bytes_per_token must be >= 0");
  if (prep_seconds < 0 || learn_seconds < 0)
    throw ConfigError("phase placeholders must be >= 0");
  if (use_noisy_predictor) noise.validate(TraceLimits{}.max_response_len);
}

namespace {

std::vector<PredictedPrompt> snapshot_predictions(
    const WorkloadTrace& trace, const StepRecord& step,
    const LengthHistory& history, const RunSettings& settings) {
  std::vector<PredictedPrompt> out;
  out.reserve(step.scheduled_prompts.size());
  for (const std::string& pid : step.scheduled_prompts) {
    const Prompt& p = trace.prompt_or_throw(pid);
    double est = settings.use_noisy_predictor
                     ? history.predict_noisy(p, settings.noise)
                     : history.predict(p);
    out.push_back({p.id, p.prompt_len(), est});
  }
  return out;
}

TransferSizes transfers_for(const std::vector<ActorGroup>& groups,
                            const RunSettings& settings) {
  TransferSizes tr;
  tr.model_bytes = settings.model_bytes;
  tr.kv_bytes_per_actor.clear();
  for (const ActorGroup& g : groups) {
    int64_t tokens = 0;
    for (int plen : g.prompt_lens) tokens += plen;
    tr.kv_bytes_per_actor.push_back(static_cast<double>(tokens) *
                                    settings.kv_bytes_per_token);
  }
  return tr;
}

std::vector<int64_t> split_waves(int64_t total_tokens, int waves) {
  std::vector<int64_t> out;
  if (waves < 1) waves = 1;
  int64_t q = total_tokens / waves;
  int64_t r = total_tokens % waves;
  for (int i = 0; i < waves; ++i) out.push_back(q + (i < r ? 1 : 0));
  return out;
}

std::vector<ActorGroup> round_robin_assign(
    const std::vector<PredictedPrompt>& predicted, int n_actors,
    int gpus_per_actor) {
  if (n_actors < 1) throw ConfigError("round robin needs n_actors >= 1");
  if (static_cast<int>(predicted.size()) < n_actors)
    throw ConfigError("fewer prompts than actors");
  std::vector<ActorGroup> groups(n_actors);
  for (int a = 0; a < n_actors; ++a) {
    groups[a].actor_id = a;
    groups[a].gpu_count = gpus_per_actor;
  }
  for (size_t i = 0; i < predicted.size(); ++i) {
    ActorGroup& g = groups[i % n_actors];
    g.prompt_ids.push_back(predicted[i].id);
    g.prompt_lens.push_back(predicted[i].prompt_len);
    g.predicted_lengths.push_back(predicted[i].predicted_len);
  }
  return groups;
}

PlannedStep plan_rlhfless(const WorkloadTrace& trace, const StepRecord& step,
                          const std::vector<PredictedPrompt>& predicted,
                          const RunSettings& settings,
                          const LatencyProfile& profile,
                          const ClusterTopology& topo) {
  const int g = trace.responses_per_prompt;
  const int learner_gpus = static_cast<int>(topo.learner_gpus.size());

  std::vector<const Prompt*> batch;
  batch.reserve(step.scheduled_prompts.size());
  for (const std::string& pid : step.scheduled_prompts)
    batch.push_back(&trace.prompt_or_throw(pid));

  PrefixIndex index = PrefixIndex::build(batch);
  PrefillCapacity cap{settings.b_prefill, learner_gpus};
  PrefixSelection sel =
      select_prefix_length(index, cap, 1, index.max_prompt_len());
  DedupSavings savings = dedup_savings(index, sel.prefix_len, g);

  int waves = 1;
  if (sel.capacity_exceeded) {
    int64_t d = index.unique_prefix_count(sel.prefix_len);
    waves = static_cast<int>((d + settings.b_prefill - 1) / settings.b_prefill);
  }
  std::vector<int64_t> wave_tokens =
      split_waves(savings.dedup_prefill_tokens, waves);
  double l_prefill = 0;
  for (int64_t w : wave_tokens)
    l_prefill += profile.prefill_seconds(static_cast<double>(w));

  int n_cap = topo.total_gpus() / profile.gpus_per_actor;
  int n_max = std::min(settings.n_max, n_cap);
  if (n_max < settings.n_min)
    throw ConfigError("cluster cannot host n_min actors of " +
                      std::to_string(profile.gpus_per_actor) + " GPUs");

  // Fold exposed transfer time into each candidate's total: place the
  // candidate, check the overlap-hiding inequality and charge any negative
  // slack as extra seconds on the critical path.
  TimePenaltyFn penalty = [&](int n, const std::vector<ActorGroup>& groups,
                              const std::vector<double>& times) {
    GenerationPlan probe;
    probe.responses_per_prompt = g;
    probe.prefill_mode = PrefillMode::shared_dedup;
    probe.n_actors = n;
    probe.groups = groups;
    probe.est_time_per_actor = times;
    probe.prefill_gpu_count = learner_gpus;
    PlacementPlan pl = place(probe, topo, transfers_for(groups, settings));
    double exposed = 0;
    for (const OverlapSlack& s : check_overlap(pl, probe, l_prefill))
      exposed = std::max(exposed, -s.slack);
    return exposed;
  };

  ScaleResult scaled =
      scale(predicted, profile, g, settings.n_min, n_max, settings.lambda,
            profile.gpus_per_actor, penalty);

  PlannedStep out;
  GenerationPlan& plan = out.plan;
  plan.step_idx = step.step_idx;
  plan.responses_per_prompt = g;
  plan.prefill_mode = PrefillMode::shared_dedup;
  plan.l_star = sel.prefix_len;
  plan.prefill_capacity_exceeded = sel.capacity_exceeded;
  plan.prefill_wave_tokens = wave_tokens;
  plan.raw_prefill_tokens = savings.raw_prefill_tokens;
  plan.dedup_prefill_tokens = savings.dedup_prefill_tokens;
  plan.prefill_gpu_count = learner_gpus;
  plan.n_actors = scaled.n_star;
  plan.groups = scaled.groups;
  plan.est_time_per_actor = scaled.actor_times;
  plan.est_total_time = 0;
  for (double t : scaled.actor_times)
    plan.est_total_time = std::max(plan.est_total_time, t);
  plan.est_cost = estimate_cost(scaled.groups, profile, g);
  plan.lambda = settings.lambda;
  plan.scale_candidates = scaled.candidates;
  plan.unique_prefix_curve.clear();
  for (int l = 1; l <= index.max_prompt_len(); ++l)
    plan.unique_prefix_curve.push_back(index.unique_prefix_count(l));

  out.placement = place(plan, topo, transfers_for(plan.groups, settings));
  out.l_prefill_seconds = l_prefill;
  std::vector<OverlapSlack> slacks =
      check_overlap(out.placement, plan, l_prefill);
  out.placement.overlap_slack.assign(plan.groups.size(), 0.0);
  for (const OverlapSlack& s : slacks)
    out.placement.overlap_slack[s.actor_id] = s.slack;
  return out;
}

PlacementPlan place_baseline(const GenerationPlan& plan,
                             const ClusterTopology& topo,
                             const RunSettings& settings) {
  TransferSizes tr;
  tr.model_bytes = settings.model_bytes;
  tr.kv_bytes_per_actor = {0.0};
  return naive_place(plan, topo, tr);
}

PlannedStep plan_baseline(const WorkloadTrace& trace, const StepRecord& step,
                          const std::vector<PredictedPrompt>& predicted,
                          const RunSettings& settings,
                          const LatencyProfile& profile,
                          const ClusterTopology& topo) {
  const int g = trace.responses_per_prompt;
  int n_cap = topo.total_gpus() / profile.gpus_per_actor;
  if (settings.n_static > n_cap)
    throw ConfigError("cluster cannot host n_static actors of " +
                      std::to_string(profile.gpus_per_actor) + " GPUs");

  std::vector<const Prompt*> batch;
  for (const std::string& pid : step.scheduled_prompts)
    batch.push_back(&trace.prompt_or_throw(pid));
  PrefixIndex index = PrefixIndex::build(batch);
  PrefillCapacity cap{settings.b_prefill,
                      static_cast<int>(topo.learner_gpus.size())};
  PrefixSelection sel =
      select_prefix_length(index, cap, 1, index.max_prompt_len());
  DedupSavings savings = dedup_savings(index, sel.prefix_len, g);

  PlannedStep out;
  GenerationPlan& plan = out.plan;
  plan.step_idx = step.step_idx;
  plan.responses_per_prompt = g;
  plan.prefill_mode = PrefillMode::per_actor;
  plan.l_star = sel.prefix_len;  // what dedup would have chosen
  plan.raw_prefill_tokens = savings.raw_prefill_tokens;
  plan.dedup_prefill_tokens = savings.dedup_prefill_tokens;
  plan.prefill_gpu_count = static_cast<int>(topo.learner_gpus.size());
  plan.n_actors = settings.n_static;
  plan.groups =
      round_robin_assign(predicted, settings.n_static, profile.gpus_per_actor);
  for (const ActorGroup& grp : plan.groups)
    plan.est_time_per_actor.push_back(estimate_actor_time(grp, profile, g));
  for (double t : plan.est_time_per_actor)
    plan.est_total_time = std::max(plan.est_total_time, t);
  plan.est_cost = estimate_cost(plan.groups, profile, g);
  plan.lambda = settings.lambda;

  out.placement = place_baseline(plan, topo, settings);
  out.l_prefill_seconds = 0;
  return out;
}

}  // namespace

PlannedStep plan_step(const WorkloadTrace& trace, const StepRecord& step,
                      const LengthHistory& history, Strategy strategy,
                      const RunSettings& settings,
                      const LatencyProfile& profile,
                      const ClusterTopology& topo) {
  settings.validate();
  profile.validate();
  topo.validate();
  std::vector<PredictedPrompt> predicted =
      snapshot_predictions(trace, step, history, settings);
  if (strategy == Strategy::rlhfless)
    return plan_rlhfless(trace, step, predicted, settings, profile, topo);
  return plan_baseline(trace, step, predicted, settings, profile, topo);
}

TrainingResult run_training(const WorkloadTrace& trace, Strategy strategy,
                            const RunSettings& settings,
                            const LatencyProfile& profile,
                            const ClusterTopology& topo) {
  RunSettings st = settings;
  st.validate();
  trace.validate();
  if (st.use_noisy_predictor && st.noise.seed == 0)
    st.noise.seed = hash_combine(st.seed, 0x6e6f6973);

  SimConfig sim;
  sim.tau = st.tau;
  sim.prep_seconds = st.prep_seconds;
  sim.learn_seconds = st.learn_seconds;
  sim.kv_bytes_per_token = st.migration_payload_infinite
                               ? std::numeric_limits<double>::infinity()
                               : st.kv_bytes_per_token;
  switch (strategy) {
    case Strategy::rlhfless: sim.cut_mode = CutMode::per_actor; break;
    case Strategy::static_baseline: sim.cut_mode = CutMode::none; break;
    case Strategy::global_cut_baseline: sim.cut_mode = CutMode::global; break;
  }

  LengthHistory history(st.window, st.ewma_alpha,
                        trace.limits.max_response_len);

  TrainingResult result;
  result.strategy = strategy;
  for (const StepRecord& step : trace.steps) {
    PlannedStep planned =
        plan_step(trace, step, history, strategy, st, profile, topo);
    SimResult simres =
        run_step(planned.plan, planned.placement, step, profile, sim);

    StepOutcome outcome;
    outcome.step_idx = step.step_idx;
    outcome.plan = planned.plan;
    outcome.sim = std::move(simres);
    result.steps.push_back(std::move(outcome));

    for (const std::string& pid : step.scheduled_prompts)
      history.observe(step.step_idx, pid, step.actual_lengths.at(pid));
  }

  const double n = static_cast<double>(result.steps.size());
  for (const StepOutcome& o : result.steps) {
    result.mean_step_wall_seconds += o.sim.step_wall_seconds;
    result.mean_generation_seconds += o.sim.generation_wall_seconds;
    result.mean_step_cost += o.sim.dollars;
    result.total_cost += o.sim.dollars;
    result.total_gpu_seconds += o.sim.gpu_seconds;
    result.total_cuts += o.sim.cuts;
    result.total_migrations += o.sim.migrations;
    result.total_redundant_prefill_tokens += o.sim.redundant_prefill_tokens;
  }
  if (n > 0) {
    result.mean_step_wall_seconds /= n;
    result.mean_generation_seconds /= n;
    result.mean_step_cost /= n;
  }
  return result;
}

}  // namespace rollsim
