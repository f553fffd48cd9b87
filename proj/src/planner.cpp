// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#include "rollsim/planner.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "rollsim/errors.hpp"

namespace rollsim {

using nlohmann::json;

std::vector<ActorGroup> assign(const std::vector<PredictedPrompt>& predicted,
                               int n_actors, int gpus_per_actor) {
  if (predicted.empty()) throw ValidationError("assign: empty batch");
  if (n_actors < 1) throw ValidationError("assign: n_actors must be >= 1");
  if (n_actors > static_cast<int>(predicted.size()))
    throw ValidationError("assign: more actors (" + std::to_string(n_actors) +
                          ") than prompts (" +
                          std::to_string(predicted.size()) + ")");

  std::vector<PredictedPrompt> sorted = predicted;
  std::sort(sorted.begin(), sorted.end(),
            [](const PredictedPrompt& a, const PredictedPrompt& b) {
              if (a.predicted_len != b.predicted_len)
                return a.predicted_len > b.predicted_len;
              return a.id < b.id;
            });

  const int n = static_cast<int>(sorted.size());
  const int q = n / n_actors;
  const int r = n % n_actors;
  std::vector<ActorGroup> groups(n_actors);
  int pos = 0;
  for (int a = 0; a < n_actors; ++a) {
    int size = q + (a < r ? 1 : 0);
    ActorGroup& g = groups[a];
    g.actor_id = a;
    g.gpu_count = gpus_per_actor;
    g.prompt_ids.reserve(size);
    for (int k = 0; k < size; ++k, ++pos) {
      g.prompt_ids.push_back(sorted[pos].id);
      g.prompt_lens.push_back(sorted[pos].prompt_len);
      g.predicted_lengths.push_back(sorted[pos].predicted_len);
    }
  }
  return groups;
}

namespace {

// Sum of tpot(batch, c) over the integer contexts c_lo, c_lo+1, ..., c_hi at
// a fixed batch size. For a fixed batch the clamped bilinear surface is
// piecewise linear in context, so the sum over each piece is an arithmetic
// series: count * (first + last) / 2. Pieces are delimited by the context
// knots; evaluating the endpoints through tpot_seconds keeps the clamping
// rules identical to per-tick evaluation.
double tpot_context_run_sum(const LatencyProfile& profile, double batch,
                            double c_lo, double c_hi) {
  const std::vector<double>& knots = profile.context_knots;
  double total = 0;
  double c = c_lo;
  while (c <= c_hi) {
    double piece_end;
    if (c < knots.front()) {
      piece_end = std::min(c_hi, std::ceil(knots.front()) - 1.0);
    } else if (c >= knots.back()) {
      piece_end = c_hi;
    } else {
      auto it = std::upper_bound(knots.begin(), knots.end(), c);
      piece_end = std::min(c_hi, std::floor(*it));
    }
    double count = piece_end - c + 1.0;
    total += count *
             (profile.tpot_seconds(batch, c) +
              profile.tpot_seconds(batch, piece_end)) /
             2.0;
    c = piece_end + 1.0;
  }
  return total;
}

}  // namespace

double integrate_decode_seconds(std::vector<ResponseSpec> responses,
                                const LatencyProfile& profile) {
  if (responses.empty()) return 0;
  for (const ResponseSpec& r : responses) {
    if (r.target_len < 1)
      throw ValidationError("integrate_decode_seconds: target length < 1");
  }
  // Sort by finishing tick so the live set is a suffix. Callers that already
  // deliver ascending targets (ranked groups) skip the sort.
  auto by_finish = [](const ResponseSpec& a, const ResponseSpec& b) {
    return std::ceil(a.target_len) < std::ceil(b.target_len);
  };
  if (!std::is_sorted(responses.begin(), responses.end(), by_finish))
    std::sort(responses.begin(), responses.end(), by_finish);
  const size_t n = responses.size();
  std::vector<int64_t> finish(n);
  for (size_t i = 0; i < n; ++i)
    finish[i] = static_cast<int64_t>(std::ceil(responses[i].target_len));
  // Max prompt length over the suffix [i, n): the live set at late ticks.
  std::vector<int> suffix_max_plen(n + 1, 0);
  for (size_t i = n; i-- > 0;)
    suffix_max_plen[i] =
        std::max(suffix_max_plen[i + 1], responses[i].prompt_len);

  // Between consecutive finish ticks the live batch is constant and the
  // context grows by one token per tick; each such run is summed in closed
  // form instead of tick by tick.
  double total = 0;
  size_t done = 0;
  int64_t t = 1;
  const int64_t last_tick = finish.back();
  while (t <= last_tick) {
    while (done < n && finish[done] < t) ++done;
    int64_t run_end = finish[done];
    double batch = static_cast<double>(n - done);
    double base = static_cast<double>(suffix_max_plen[done]);
    total += tpot_context_run_sum(profile, batch,
                                  base + static_cast<double>(t - 1),
                                  base + static_cast<double>(run_end - 1));
    t = run_end + 1;
  }
  return total;
}

double estimate_actor_time(const ActorGroup& group,
                           const LatencyProfile& profile,
                           int responses_per_prompt) {
  if (responses_per_prompt < 1)
    throw ValidationError("estimate_actor_time: responses_per_prompt >= 1");
  std::vector<ResponseSpec> rs;
  rs.reserve(group.prompt_ids.size() * responses_per_prompt);
  // Reverse order: ranked groups store lengths descending, and the
  // integrator's fast path wants ascending finish ticks.
  for (size_t i = group.prompt_ids.size(); i-- > 0;) {
    for (int r = 0; r < responses_per_prompt; ++r)
      rs.push_back({group.prompt_lens[i], group.predicted_lengths[i]});
  }
  return integrate_decode_seconds(std::move(rs), profile);
}

double estimate_cost(const std::vector<ActorGroup>& groups,
                     const LatencyProfile& profile, int responses_per_prompt) {
  double dollars = 0;
  for (const ActorGroup& g : groups) {
    dollars += profile.rho * estimate_actor_time(g, profile,
                                                 responses_per_prompt) *
               g.gpu_count;
  }
  return dollars;
}

ScaleResult scale(const std::vector<PredictedPrompt>& predicted,
                  const LatencyProfile& profile, int responses_per_prompt,
                  int n_min, int n_max, double lambda, int gpus_per_actor,
                  const TimePenaltyFn& penalty) {
  if (n_min < 1 || n_min > n_max)
    throw ValidationError("scale: need 1 <= n_min <= n_max");
  if (n_max > static_cast<int>(predicted.size()))
    throw ValidationError("scale: n_max exceeds prompt count");
  if (lambda < 0 || lambda > 1)
    throw ConfigError("scale: lambda must be in [0, 1]");

  struct Candidate {
    std::vector<ActorGroup> groups;
    std::vector<double> times;
  };
  std::vector<Candidate> cands;
  ScaleResult out;
  for (int n = n_min; n <= n_max; ++n) {
    Candidate c;
    c.groups = assign(predicted, n, gpus_per_actor);
    double t_total = 0;
    double dollars = 0;
    for (const ActorGroup& g : c.groups) {
      double t = estimate_actor_time(g, profile, responses_per_prompt);
      c.times.push_back(t);
      t_total = std::max(t_total, t);
      dollars += profile.rho * t * g.gpu_count;
    }
    ScaleCandidate sc;
    sc.n_actors = n;
    sc.t_total = t_total;
    sc.t_penalty = penalty ? penalty(n, c.groups, c.times) : 0.0;
    sc.cost = dollars;
    out.candidates.push_back(sc);
    cands.push_back(std::move(c));
  }

  double t_min = out.candidates.front().t_total + out.candidates.front().t_penalty;
  double t_max = t_min, c_min = out.candidates.front().cost, c_max = c_min;
  for (const ScaleCandidate& sc : out.candidates) {
    double t = sc.t_total + sc.t_penalty;
    t_min = std::min(t_min, t);
    t_max = std::max(t_max, t);
    c_min = std::min(c_min, sc.cost);
    c_max = std::max(c_max, sc.cost);
  }
  size_t best = 0;
  for (size_t i = 0; i < out.candidates.size(); ++i) {
    ScaleCandidate& sc = out.candidates[i];
    double t = sc.t_total + sc.t_penalty;
    sc.t_norm = t_max > t_min ? (t - t_min) / (t_max - t_min) : 0.0;
    sc.c_norm = c_max > c_min ? (sc.cost - c_min) / (c_max - c_min) : 0.0;
    sc.score = lambda * sc.t_norm + (1.0 - lambda) * sc.c_norm;
    if (sc.score < out.candidates[best].score) best = i;
  }
  out.n_star = out.candidates[best].n_actors;
  out.groups = std::move(cands[best].groups);
  out.actor_times = std::move(cands[best].times);
  return out;
}

json GenerationPlan::to_json() const {
  json j;
  j["step"] = step_idx;
  j["responses_per_prompt"] = responses_per_prompt;
  j["prefill_mode"] =
      prefill_mode == PrefillMode::shared_dedup ? "shared_dedup" : "per_actor";
  j["l_star"] = l_star;
  j["prefill_capacity_exceeded"] = prefill_capacity_exceeded;
  j["prefill_wave_tokens"] = prefill_wave_tokens;
  j["raw_prefill_tokens"] = raw_prefill_tokens;
  j["dedup_prefill_tokens"] = dedup_prefill_tokens;
  j["n_actors"] = n_actors;
  j["lambda"] = lambda;
  j["est_total_time"] = est_total_time;
  j["est_cost"] = est_cost;
  j["est_time_per_actor"] = est_time_per_actor;
  j["unique_prefix_curve"] = unique_prefix_curve;
  json groups_json = json::array();
  for (const ActorGroup& g : groups) {
    json gj;
    gj["actor_id"] = g.actor_id;
    gj["gpu_count"] = g.gpu_count;
    gj["prompt_ids"] = g.prompt_ids;
    gj["predicted_lengths"] = g.predicted_lengths;
    groups_json.push_back(std::move(gj));
  }
  j["groups"] = std::move(groups_json);
  json cand = json::array();
  for (const ScaleCandidate& sc : scale_candidates) {
    json cj;
    cj["n"] = sc.n_actors;
    cj["t_total"] = sc.t_total;
    cj["t_penalty"] = sc.t_penalty;
    cj["cost"] = sc.cost;
    cj["score"] = sc.score;
    cand.push_back(std::move(cj));
  }
  j["scale_candidates"] = std::move(cand);
  return j;
}

}  // namespace rollsim
