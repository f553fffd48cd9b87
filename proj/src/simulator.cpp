// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#include "rollsim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>

#include <nlohmann/json.hpp>

#include "rollsim/errors.hpp"

namespace rollsim {

using nlohmann::json;

void SimConfig::validate() const {
  if (!(tau > 0) || tau > 1) throw ConfigError("tau must be in (0, 1]");
  if (!(kv_bytes_per_token >= 0))
    throw ConfigError("kv_bytes_per_token must be >= 0");
  if (prep_seconds < 0 || learn_seconds < 0)
    throw ConfigError("phase placeholders must be >= 0");
}

namespace {

constexpr double kEps = 1e-9;

struct Resp {
  int idx = 0;
  std::string prompt_id;
  int response_idx = 0;
  int prompt_len = 0;
  int actual_len = 0;
  double predicted_len = 1;
  int home_actor = 0;

  int actor = 0;  // where it currently decodes
  int generated = 0;
  int64_t on_actor_tokens = 0;  // tokens produced on the current actor
  bool finished = false;
  bool cut = false;
  bool migrated = false;
};

struct Actor {
  int id = 0;
  double tick_origin = 0;  // time decoding may begin
  double busy_from = 0;    // charged from here
  int assigned = 0;
  int finished_assigned = 0;
  std::vector<int> live;
  std::deque<int> cut_queue;
  std::vector<int> waiting_join;
  int pending_arrivals = 0;
  bool armed = false;
  bool started = false;
  bool released = false;
  bool tick_scheduled = false;
  double now = 0;
  double release_time = 0;
};

enum class EvKind { arrive = 0, tick_end = 1 };

struct Ev {
  double t;
  EvKind kind;
  int actor;
  long seq;
  int resp = -1;  // arrivals
  bool operator>(const Ev& o) const {
    if (t != o.t) return t > o.t;
    if (kind != o.kind) return kind > o.kind;
    if (actor != o.actor) return actor > o.actor;
    return seq > o.seq;
  }
};

class StepEngine {
 public:
  StepEngine(const GenerationPlan& plan, const PlacementPlan& placement,
             const StepRecord& actual, const LatencyProfile& profile,
             const SimConfig& cfg)
      : plan_(plan),
        placement_(placement),
        actual_(actual),
        profile_(profile),
        cfg_(cfg) {}

  SimResult run() {
    cfg_.validate();
    build();
    start_phase();
    while (!pq_.empty()) {
      Ev ev = pq_.top();
      pq_.pop();
      if (ev.kind == EvKind::arrive)
        on_arrive(ev);
      else
        on_tick_end(ev);
    }
    return finish();
  }

 private:
  void log(double t, const std::string& kind, int actor, int peer,
           const std::string& pid, int ridx, double value) {
    result_.events.push_back({t, kind, actor, peer, pid, ridx, value});
  }

  void build() {
    if (plan_.groups.empty()) throw ValidationError("run_step: plan has no actors");
    if (placement_.actors.size() != plan_.groups.size())
      throw ValidationError("run_step: placement does not match the plan");
    const int n = static_cast<int>(plan_.groups.size());
    const int g = plan_.responses_per_prompt;
    actors_.resize(n);

    // Prefill window.
    if (plan_.prefill_mode == PrefillMode::shared_dedup) {
      double t = 0;
      for (int64_t wave : plan_.prefill_wave_tokens)
        t += profile_.prefill_seconds(static_cast<double>(wave));
      prefill_end_ = t;
      prefilled_tokens_ = plan_.dedup_prefill_tokens;
    } else {
      prefill_end_ = 0;
      prefilled_tokens_ = 0;  // accumulated per actor below
    }

    for (int a = 0; a < n; ++a) {
      const ActorGroup& grp = plan_.groups[a];
      const ActorPlacement& ap = placement_.actors[a];
      Actor& st = actors_[a];
      st.id = a;
      if (plan_.prefill_mode == PrefillMode::shared_dedup) {
        st.tick_origin = std::max(ap.l_model, prefill_end_ + ap.l_kv);
        st.busy_from = st.tick_origin;
      } else {
        int64_t raw = 0;
        for (int plen : grp.prompt_lens) raw += plen;
        raw *= g;
        prefilled_tokens_ += raw;
        st.busy_from = ap.l_model;
        st.tick_origin =
            ap.l_model + profile_.prefill_seconds(static_cast<double>(raw));
      }
      st.now = st.tick_origin;
      for (size_t i = 0; i < grp.prompt_ids.size(); ++i) {
        const std::string& pid = grp.prompt_ids[i];
        auto it = actual_.actual_lengths.find(pid);
        if (it == actual_.actual_lengths.end())
          throw ValidationError("run_step: no actual lengths for prompt '" +
                                pid + "'");
        if (static_cast<int>(it->second.size()) != g)
          throw ValidationError("run_step: prompt '" + pid + "' needs " +
                                std::to_string(g) + " response lengths");
        for (int r = 0; r < g; ++r) {
          Resp resp;
          resp.idx = static_cast<int>(resps_.size());
          resp.prompt_id = pid;
          resp.response_idx = r;
          resp.prompt_len = grp.prompt_lens[i];
          resp.actual_len = it->second[r];
          resp.predicted_len = grp.predicted_lengths[i];
          resp.home_actor = a;
          resp.actor = a;
          st.live.push_back(resp.idx);
          resps_.push_back(std::move(resp));
        }
      }
      st.assigned = static_cast<int>(st.live.size());
      total_responses_ += st.assigned;
    }
  }

  void start_phase() {
    if (plan_.prefill_mode == PrefillMode::shared_dedup) {
      log(0, "prefill_start", -1, -1, "", -1,
          static_cast<double>(plan_.dedup_prefill_tokens));
      log(prefill_end_, "prefill_end", -1, -1, "", -1, 0);
    }
    for (Actor& a : actors_) {
      a.started = true;
      log(a.tick_origin, "actor_start", a.id, -1, "", -1,
          static_cast<double>(a.assigned));
      schedule_tick(a);
    }
  }

  double max_context(const Actor& a) const {
    double ctx = 0;
    for (int ri : a.live) {
      const Resp& r = resps_[ri];
      ctx = std::max(ctx, static_cast<double>(r.prompt_len + r.generated));
    }
    return ctx;
  }

  void schedule_tick(Actor& a) {
    if (a.tick_scheduled || a.released || a.live.empty()) return;
    double dt = profile_.tpot_seconds(static_cast<double>(a.live.size()),
                                      max_context(a));
    a.tick_scheduled = true;
    pq_.push({a.now + dt, EvKind::tick_end, a.id, ++seq_});
  }

  void on_arrive(const Ev& ev) {
    Actor& a = actors_[ev.actor];
    Resp& r = resps_[ev.resp];
    a.pending_arrivals -= 1;
    r.actor = a.id;
    r.on_actor_tokens = 0;
    log(ev.t, "arrive", a.id, -1, r.prompt_id, r.response_idx,
        static_cast<double>(r.generated));
    if (a.tick_scheduled) {
      a.waiting_join.push_back(ev.resp);
    } else {
      // Idle destination: decoding resumes at the transfer's end.
      a.now = std::max(a.now, ev.t);
      a.live.push_back(ev.resp);
      schedule_tick(a);
    }
  }

  void on_tick_end(const Ev& ev) {
    Actor& a = actors_[ev.actor];
    a.tick_scheduled = false;
    if (a.released) return;
    a.now = ev.t;

    // Everyone still here decodes one token.
    for (int ri : a.live) {
      Resp& r = resps_[ri];
      r.generated += 1;
      r.on_actor_tokens += 1;
    }

    // Completions.
    std::vector<int> keep;
    keep.reserve(a.live.size());
    for (int ri : a.live) {
      Resp& r = resps_[ri];
      if (r.generated >= r.actual_len) {
        r.finished = true;
        finished_total_ += 1;
        if (r.home_actor == a.id) a.finished_assigned += 1;
        result_.segments.push_back(
            {r.prompt_id, r.response_idx, a.id, r.on_actor_tokens});
        log(ev.t, "finish", a.id, -1, r.prompt_id, r.response_idx,
            static_cast<double>(r.generated));
        auto qit = std::find(a.cut_queue.begin(), a.cut_queue.end(), ri);
        if (qit != a.cut_queue.end()) a.cut_queue.erase(qit);
      } else {
        keep.push_back(ri);
      }
    }
    a.live.swap(keep);

    if (cfg_.cut_mode == CutMode::per_actor) {
      if (!a.armed && a.assigned > 0 &&
          static_cast<double>(a.finished_assigned) >=
              cfg_.tau * a.assigned - kEps) {
        a.armed = true;
      }
      if (a.armed) {
        for (int ri : a.live) {
          Resp& r = resps_[ri];
          if (!r.cut && !r.migrated &&
              static_cast<double>(r.generated) >= r.predicted_len - kEps) {
            r.cut = true;
            result_.cuts += 1;
            a.cut_queue.push_back(ri);
            log(ev.t, "cut", a.id, -1, r.prompt_id, r.response_idx,
                static_cast<double>(r.generated));
          }
        }
      }
    }

    // Late joiners enter the batch for the next tick.
    for (int ri : a.waiting_join) a.live.push_back(ri);
    a.waiting_join.clear();

    if (cfg_.cut_mode == CutMode::global && !global_triggered_ &&
        static_cast<double>(finished_total_) >=
            cfg_.tau * total_responses_ - kEps) {
      global_triggered_ = true;
      global_consolidate(ev.t);
    }

    dispatch_pass(ev.t);
    schedule_tick(a);
    check_release(a, ev.t);
  }

  int64_t free_slots(const Actor& a) const {
    return static_cast<int64_t>(a.assigned) -
           static_cast<int64_t>(a.live.size()) - a.pending_arrivals -
           static_cast<int64_t>(a.waiting_join.size());
  }

  double transfer_seconds(const Resp& r, int src, int dst) const {
    double payload =
        (static_cast<double>(r.prompt_len) + r.generated) *
        cfg_.kv_bytes_per_token;
    return payload / placement_.actor_bw[src][dst];
  }

  void send(int ri, int src, int dst, double t) {
    Resp& r = resps_[ri];
    Actor& s = actors_[src];
    Actor& d = actors_[dst];
    auto lit = std::find(s.live.begin(), s.live.end(), ri);
    s.live.erase(lit);
    result_.segments.push_back(
        {r.prompt_id, r.response_idx, src, r.on_actor_tokens});
    r.migrated = true;
    double dt = transfer_seconds(r, src, dst);
    d.pending_arrivals += 1;
    result_.migrations += 1;
    result_.migration_transfer_seconds += dt;
    log(t, "migrate", src, dst, r.prompt_id, r.response_idx, dt);
    pq_.push({t + dt, EvKind::arrive, dst, ++seq_, ri});
  }

  void dispatch_pass(double t) {
    if (cfg_.cut_mode != CutMode::per_actor || cfg_.migrations_disabled())
      return;
    bool progress = true;
    while (progress) {
      progress = false;
      for (Actor& s : actors_) {
        if (s.released || s.cut_queue.empty()) continue;
        int best = -1;
        int64_t best_free = 0;
        for (Actor& d : actors_) {
          if (d.id == s.id || d.released) continue;
          int64_t f = free_slots(d);
          if (f > best_free) {
            best_free = f;
            best = d.id;
          }
        }
        if (best < 0) continue;
        int ri = s.cut_queue.front();
        s.cut_queue.pop_front();
        send(ri, s.id, best, t);
        check_release(s, t);
        progress = true;
      }
    }
  }

  void global_consolidate(double t) {
    int designated = -1;
    for (const Actor& a : actors_) {
      if (!a.released) {
        designated = a.id;
        break;
      }
    }
    if (designated < 0) return;
    log(t, "global_cut", designated, -1, "", -1,
        static_cast<double>(total_responses_ - finished_total_));
    for (Actor& s : actors_) {
      if (s.id == designated || s.released) continue;
      std::vector<int> moving = s.live;
      for (int ri : moving) {
        Resp& r = resps_[ri];
        r.cut = true;
        result_.cuts += 1;
        log(t, "cut", s.id, -1, r.prompt_id, r.response_idx,
            static_cast<double>(r.generated));
        // Consolidation ignores slot limits; the designated batch may
        // overflow and pay for it through slower ticks.
        send(ri, s.id, designated, t);
      }
      s.cut_queue.clear();
      check_release(s, t);
    }
  }

  void check_release(Actor& a, double t) {
    if (a.released || !a.live.empty() || !a.cut_queue.empty() ||
        a.pending_arrivals > 0 || !a.waiting_join.empty())
      return;
    a.released = true;
    a.tick_scheduled = false;
    a.release_time = std::max(t, a.tick_origin);
    log(a.release_time, "release", a.id, -1, "", -1, 0);
  }

  SimResult finish() {
    const int n = static_cast<int>(actors_.size());
    for (Resp& r : resps_) {
      if (!r.finished)
        throw Error("simulation ended with unfinished response " +
                    r.prompt_id + "#" + std::to_string(r.response_idx));
    }
    result_.prefill_end_time = prefill_end_;
    double gen_end = prefill_end_;
    result_.actor_decode_start.resize(n);
    result_.actor_release.resize(n);
    result_.actor_decode_seconds.resize(n);
    result_.actor_busy_seconds.resize(n);

    if (plan_.prefill_mode == PrefillMode::shared_dedup && prefill_end_ > 0) {
      result_.busy.push_back(
          {"prefill", -1, plan_.prefill_gpu_count, 0.0, prefill_end_});
    }
    for (const Actor& a : actors_) {
      result_.actor_decode_start[a.id] = a.tick_origin;
      result_.actor_release[a.id] = a.release_time;
      result_.actor_decode_seconds[a.id] = a.release_time - a.tick_origin;
      result_.actor_busy_seconds[a.id] = a.release_time - a.busy_from;
      result_.busy.push_back({"actor", a.id, plan_.groups[a.id].gpu_count,
                              a.busy_from, a.release_time});
      gen_end = std::max(gen_end, a.release_time);
    }
    int learner_gpus = static_cast<int>(placement_.prefill_gpus.size());
    if (learner_gpus < 1) learner_gpus = plan_.prefill_gpu_count;
    if (cfg_.prep_seconds > 0) {
      result_.busy.push_back(
          {"prep", -1, learner_gpus, gen_end, gen_end + cfg_.prep_seconds});
    }
    if (cfg_.learn_seconds > 0) {
      result_.busy.push_back({"learn", -1, learner_gpus,
                              gen_end + cfg_.prep_seconds,
                              gen_end + cfg_.prep_seconds + cfg_.learn_seconds});
    }
    result_.generation_wall_seconds = gen_end;
    result_.step_wall_seconds =
        gen_end + cfg_.prep_seconds + cfg_.learn_seconds;

    double gpu_seconds = 0;
    for (const BusyRecord& b : result_.busy)
      gpu_seconds += (b.end - b.start) * b.gpu_count;
    result_.gpu_seconds = gpu_seconds;
    result_.dollars = profile_.rho * gpu_seconds;

    result_.raw_prefill_tokens = plan_.raw_prefill_tokens;
    result_.dedup_prefill_tokens = prefilled_tokens_;
    result_.redundant_prefill_tokens =
        prefilled_tokens_ - plan_.dedup_prefill_tokens;
    return result_;
  }

  const GenerationPlan& plan_;
  const PlacementPlan& placement_;
  const StepRecord& actual_;
  const LatencyProfile& profile_;
  SimConfig cfg_;

  std::vector<Resp> resps_;
  std::vector<Actor> actors_;
  std::priority_queue<Ev, std::vector<Ev>, std::greater<Ev>> pq_;
  long seq_ = 0;
  double prefill_end_ = 0;
  int64_t prefilled_tokens_ = 0;
  long finished_total_ = 0;
  long total_responses_ = 0;
  bool global_triggered_ = false;
  SimResult result_;
};

}  // namespace

SimResult run_step(const GenerationPlan& plan, const PlacementPlan& placement,
                   const StepRecord& actual, const LatencyProfile& profile,
                   const SimConfig& cfg) {
  StepEngine engine(plan, placement, actual, profile, cfg);
  return engine.run();
}

SimResult baseline_global_cut(const GenerationPlan& plan,
                              const PlacementPlan& placement,
                              const StepRecord& actual,
                              const LatencyProfile& profile,
                              const SimConfig& cfg) {
  SimConfig c = cfg;
  c.cut_mode = CutMode::global;
  StepEngine engine(plan, placement, actual, profile, c);
  return engine.run();
}

json SimResult::summary_json() const {
  json j;
  j["step_wall_seconds"] = step_wall_seconds;
  j["generation_wall_seconds"] = generation_wall_seconds;
  j["prefill_end_time"] = prefill_end_time;
  j["gpu_seconds"] = gpu_seconds;
  j["dollars"] = dollars;
  j["cuts"] = cuts;
  j["migrations"] = migrations;
  j["migration_transfer_seconds"] = migration_transfer_seconds;
  j["raw_prefill_tokens"] = raw_prefill_tokens;
  j["dedup_prefill_tokens"] = dedup_prefill_tokens;
  j["redundant_prefill_tokens"] = redundant_prefill_tokens;
  j["actor_decode_start"] = actor_decode_start;
  j["actor_release"] = actor_release;
  j["actor_decode_seconds"] = actor_decode_seconds;
  j["actor_busy_seconds"] = actor_busy_seconds;
  return j;
}

}  // namespace rollsim
