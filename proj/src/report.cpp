// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#include "rollsim/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rollsim/errors.hpp"

namespace rollsim {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == static_cast<int64_t>(v) && std::fabs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld",
                  static_cast<long long>(static_cast<int64_t>(v)));
    return buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string steps_csv(const TrainingResult& result) {
  std::ostringstream out;
  out << "strategy,step_idx,n_actors,l_star,step_wall_seconds,"
         "generation_wall_seconds,prefill_end_time,gpu_seconds,dollars,"
         "cuts,migrations,migration_transfer_seconds,raw_prefill_tokens,"
         "dedup_prefill_tokens,redundant_prefill_tokens,est_total_time,"
         "est_cost\n";
  const std::string name = to_string(result.strategy);
  for (const StepOutcome& o : result.steps) {
    out << name << ',' << o.step_idx << ',' << o.plan.n_actors << ','
        << o.plan.l_star << ',' << format_double(o.sim.step_wall_seconds)
        << ',' << format_double(o.sim.generation_wall_seconds) << ','
        << format_double(o.sim.prefill_end_time) << ','
        << format_double(o.sim.gpu_seconds) << ','
        << format_double(o.sim.dollars) << ',' << o.sim.cuts << ','
        << o.sim.migrations << ','
        << format_double(o.sim.migration_transfer_seconds) << ','
        << o.sim.raw_prefill_tokens << ',' << o.sim.dedup_prefill_tokens << ','
        << o.sim.redundant_prefill_tokens << ','
        << format_double(o.plan.est_total_time) << ','
        << format_double(o.plan.est_cost) << '\n';
  }
  return out.str();
}

std::string events_jsonl(const TrainingResult& result) {
  std::ostringstream out;
  const std::string name = to_string(result.strategy);
  for (const StepOutcome& o : result.steps) {
    for (const SimEvent& e : o.sim.events) {
      json j;
      j["strategy"] = name;
      j["step_idx"] = o.step_idx;
      j["t"] = e.t;
      j["kind"] = e.kind;
      j["actor"] = e.actor;
      if (e.peer >= 0) j["peer"] = e.peer;
      if (!e.prompt_id.empty()) {
        j["prompt_id"] = e.prompt_id;
        j["response_idx"] = e.response_idx;
      }
      j["value"] = e.value;
      out << j.dump() << '\n';
    }
  }
  return out.str();
}

std::string plans_jsonl(const TrainingResult& result) {
  std::ostringstream out;
  const std::string name = to_string(result.strategy);
  for (const StepOutcome& o : result.steps) {
    json j = o.plan.to_json();
    j["strategy"] = name;
    j["sim"] = o.sim.summary_json();
    out << j.dump() << '\n';
  }
  return out.str();
}

namespace {

json result_json(const TrainingResult& r) {
  json j;
  j["strategy"] = to_string(r.strategy);
  j["steps"] = r.steps.size();
  j["mean_step_wall_seconds"] = r.mean_step_wall_seconds;
  j["mean_generation_seconds"] = r.mean_generation_seconds;
  j["mean_step_cost"] = r.mean_step_cost;
  j["total_cost"] = r.total_cost;
  j["total_gpu_seconds"] = r.total_gpu_seconds;
  j["total_cuts"] = r.total_cuts;
  j["total_migrations"] = r.total_migrations;
  j["total_redundant_prefill_tokens"] = r.total_redundant_prefill_tokens;
  return j;
}

}  // namespace

json summary_json(const std::vector<TrainingResult>& results) {
  json j;
  j["strategies"] = json::array();
  for (const TrainingResult& r : results) j["strategies"].push_back(result_json(r));
  return j;
}

std::string comparison_csv(const std::vector<TrainingResult>& results) {
  std::ostringstream out;
  out << "strategy,steps,mean_step_wall_seconds,mean_generation_seconds,"
         "mean_step_cost,total_cost,total_gpu_seconds,total_cuts,"
         "total_migrations,total_redundant_prefill_tokens\n";
  for (const TrainingResult& r : results) {
    out << to_string(r.strategy) << ',' << r.steps.size() << ','
        << format_double(r.mean_step_wall_seconds) << ','
        << format_double(r.mean_generation_seconds) << ','
        << format_double(r.mean_step_cost) << ','
        << format_double(r.total_cost) << ','
        << format_double(r.total_gpu_seconds) << ',' << r.total_cuts << ','
        << r.total_migrations << ',' << r.total_redundant_prefill_tokens
        << '\n';
  }
  return out.str();
}

std::string comparison_table(const std::vector<TrainingResult>& results) {
  std::ostringstream out;
  out << "strategy      mean_wall_s  mean_gen_s   mean_cost    cuts   migr\n";
  for (const TrainingResult& r : results) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s  %11.3f  %11.3f  %11.4f  %5ld  %5ld\n",
                  to_string(r.strategy).c_str(), r.mean_step_wall_seconds,
                  r.mean_generation_seconds, r.mean_step_cost, r.total_cuts,
                  r.total_migrations);
    out << line;
  }
  return out.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace rollsim
