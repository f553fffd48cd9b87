// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
#include "rollsim/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rollsim/errors.hpp"
#include "rollsim/report.hpp"

namespace rollsim {

using nlohmann::json;

namespace {

template <typename T>
void opt_get(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

void parse_noise(const json& j, NoiseModel& noise) {
  check_keys(j, {"kind", "bucket_accuracy", "bucket_width", "seed"}, "noise");
  if (j.contains("kind")) {
    std::string k = j.at("kind").get<std::string>();
    if (k == "identity")
      noise.kind = NoiseModel::Kind::identity;
    else if (k == "bucket")
      noise.kind = NoiseModel::Kind::bucket;
    else
      throw ConfigError("noise kind must be identity or bucket");
  }
  opt_get(j, "bucket_accuracy", noise.bucket_accuracy);
  opt_get(j, "bucket_width", noise.bucket_width);
  opt_get(j, "seed", noise.seed);
}

void parse_settings(const json& j, RunSettings& s) {
  check_keys(j,
             {"tau", "lambda", "window", "ewma_alpha", "n_min", "n_max",
              "n_static", "b_prefill", "model_bytes", "kv_bytes_per_token",
              "migration_payload_infinite", "prep_seconds", "learn_seconds",
              "use_noisy_predictor", "noise", "seed"},
             "settings");
  opt_get(j, "tau", s.tau);
  opt_get(j, "lambda", s.lambda);
  opt_get(j, "window", s.window);
  opt_get(j, "ewma_alpha", s.ewma_alpha);
  opt_get(j, "n_min", s.n_min);
  opt_get(j, "n_max", s.n_max);
  opt_get(j, "n_static", s.n_static);
  opt_get(j, "b_prefill", s.b_prefill);
  opt_get(j, "model_bytes", s.model_bytes);
  opt_get(j, "kv_bytes_per_token", s.kv_bytes_per_token);
  opt_get(j, "migration_payload_infinite", s.migration_payload_infinite);
  opt_get(j, "prep_seconds", s.prep_seconds);
  opt_get(j, "learn_seconds", s.learn_seconds);
  opt_get(j, "use_noisy_predictor", s.use_noisy_predictor);
  if (j.contains("noise")) parse_noise(j.at("noise"), s.noise);
  opt_get(j, "seed", s.seed);
}

void parse_synth(const json& j, SynthConfig& s) {
  check_keys(j,
             {"prompt_count", "step_count", "responses_per_prompt",
              "max_prompt_len", "max_response_len", "paper_calibration",
              "drift_scale", "increase_fraction", "trend_slope", "noise_bound",
              "response_jitter", "ground_truth_error", "base_len_median",
              "base_len_log_sigma", "prompt_len_mean", "prompt_len_sigma",
              "prompt_len_min", "prefix_sharing", "vocab_size"},
             "synthetic");
  opt_get(j, "prompt_count", s.prompt_count);
  opt_get(j, "step_count", s.step_count);
  opt_get(j, "responses_per_prompt", s.responses_per_prompt);
  opt_get(j, "max_prompt_len", s.limits.max_prompt_len);
  opt_get(j, "max_response_len", s.limits.max_response_len);
  opt_get(j, "paper_calibration", s.paper_calibration);
  opt_get(j, "drift_scale", s.drift_scale);
  opt_get(j, "increase_fraction", s.increase_fraction);
  opt_get(j, "trend_slope", s.trend_slope);
  opt_get(j, "noise_bound", s.noise_bound);
  opt_get(j, "response_jitter", s.response_jitter);
  opt_get(j, "ground_truth_error", s.ground_truth_error);
  opt_get(j, "base_len_median", s.base_len_median);
  opt_get(j, "base_len_log_sigma", s.base_len_log_sigma);
  opt_get(j, "prompt_len_mean", s.prompt_len_mean);
  opt_get(j, "prompt_len_sigma", s.prompt_len_sigma);
  opt_get(j, "prompt_len_min", s.prompt_len_min);
  if (j.contains("prefix_sharing")) {
    const json& p = j.at("prefix_sharing");
    check_keys(p, {"fraction", "prefix_len", "group_count"}, "prefix_sharing");
    opt_get(p, "fraction", s.prefix_sharing.fraction);
    opt_get(p, "prefix_len", s.prefix_sharing.prefix_len);
    opt_get(p, "group_count", s.prefix_sharing.group_count);
  }
  opt_get(j, "vocab_size", s.vocab_size);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

void RunConfig::validate() const {
  settings.validate();
  if (strategies.empty()) throw ConfigError("no strategies selected");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (use_synthetic)
    synth.validate();
  else if (trace_file.empty())
    throw ConfigError("either a trace file or a synthetic spec is required");
  if (!trace_file.empty() && trace_format != "auto")
    trace_format_from_string(trace_format);
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.strategies = {Strategy::rlhfless, Strategy::static_baseline,
                    Strategy::global_cut_baseline};
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  json j;
  try {
    j = json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  RunConfig cfg = default_run_config();
  try {
    check_keys(j,
               {"settings", "strategies", "trace", "profile", "topology",
                "output_dir"},
               "config");
    if (j.contains("settings")) parse_settings(j.at("settings"), cfg.settings);
    if (j.contains("strategies")) {
      cfg.strategies.clear();
      for (const json& s : j.at("strategies"))
        cfg.strategies.push_back(strategy_from_string(s.get<std::string>()));
    }
    if (j.contains("trace")) {
      const json& t = j.at("trace");
      check_keys(t, {"file", "format", "synthetic"}, "trace");
      if (t.contains("file")) {
        cfg.trace_file = t.at("file").get<std::string>();
        cfg.use_synthetic = false;
        cfg.trace_format = t.contains("format")
                               ? t.at("format").get<std::string>()
                               : "auto";
      }
      if (t.contains("synthetic")) {
        if (t.contains("file"))
          throw ConfigError("trace: give either file or synthetic, not both");
        cfg.use_synthetic = true;
        parse_synth(t.at("synthetic"), cfg.synth);
      }
    }
    opt_get(j, "profile", cfg.profile_file);
    opt_get(j, "topology", cfg.topology_file);
    opt_get(j, "output_dir", cfg.output_dir);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

void resolve_profiles(RunConfig& cfg) {
  cfg.profile = cfg.profile_file.empty() ? default_profile()
                                         : LatencyProfile::load(cfg.profile_file);
  cfg.topology = cfg.topology_file.empty()
                     ? default_topology()
                     : ClusterTopology::load(cfg.topology_file);
  cfg.profile.validate();
  cfg.topology.validate();
}

WorkloadTrace resolve_trace(const RunConfig& cfg) {
  if (!cfg.use_synthetic) {
    TraceFormat fmt = cfg.trace_format == "auto"
                          ? guess_trace_format(cfg.trace_file)
                          : trace_format_from_string(cfg.trace_format);
    return load_trace(cfg.trace_file, fmt);
  }
  return generate_synthetic(cfg.synth, cfg.settings.seed);
}

int cmd_simulate(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  cfg.validate();
  resolve_profiles(cfg);
  WorkloadTrace trace = resolve_trace(cfg);

  std::vector<TrainingResult> results;
  for (Strategy s : cfg.strategies) {
    results.push_back(
        run_training(trace, s, cfg.settings, cfg.profile, cfg.topology));
    const TrainingResult& r = results.back();
    const std::string name = to_string(s);
    write_file_atomic(cfg.output_dir + "/steps_" + name + ".csv",
                      steps_csv(r));
    write_file_atomic(cfg.output_dir + "/events_" + name + ".jsonl",
                      events_jsonl(r));
    write_file_atomic(cfg.output_dir + "/plans_" + name + ".jsonl",
                      plans_jsonl(r));
  }
  write_file_atomic(cfg.output_dir + "/summary.json",
                    summary_json(results).dump(2) + "\n");
  write_file_atomic(cfg.output_dir + "/comparison.csv",
                    comparison_csv(results));
  std::cout << comparison_table(results);
  std::cout << "wrote " << cfg.output_dir << "/summary.json\n";
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg_in, const SweepSpec& sweep) {
  RunConfig cfg = cfg_in;
  cfg.validate();
  if (sweep.param != "tau" && sweep.param != "lambda" &&
      sweep.param != "window")
    throw ConfigError("sweep param must be tau, lambda, or window");
  if (sweep.values.empty()) throw ConfigError("sweep needs at least one value");
  resolve_profiles(cfg);
  WorkloadTrace trace = resolve_trace(cfg);

  std::ostringstream csv;
  csv << "param,value,strategy,mean_step_wall_seconds,mean_generation_seconds,"
         "mean_step_cost,total_cost,total_cuts,total_migrations\n";
  for (double v : sweep.values) {
    RunSettings st = cfg.settings;
    if (sweep.param == "tau")
      st.tau = v;
    else if (sweep.param == "lambda")
      st.lambda = v;
    else
      st.window = static_cast<int>(v);
    st.validate();
    for (Strategy s : cfg.strategies) {
      TrainingResult r = run_training(trace, s, st, cfg.profile, cfg.topology);
      csv << sweep.param << ',' << format_double(v) << ',' << to_string(s)
          << ',' << format_double(r.mean_step_wall_seconds) << ','
          << format_double(r.mean_generation_seconds) << ','
          << format_double(r.mean_step_cost) << ','
          << format_double(r.total_cost) << ',' << r.total_cuts << ','
          << r.total_migrations << '\n';
    }
  }
  const std::string path = cfg.output_dir + "/sweep_" + sweep.param + ".csv";
  write_file_atomic(path, csv.str());
  std::cout << "wrote " << path << "\n";
  return kExitOk;
}

int cmd_plan_bench(const RunConfig& cfg_in, int batch_size, int node_count,
                   int gpus_per_node, int repetitions) {
  if (batch_size < 1 || node_count < 1 || gpus_per_node < 1 || repetitions < 1)
    throw ConfigError("plan-bench arguments must be positive");
  RunConfig cfg = cfg_in;
  resolve_profiles(cfg);

  SynthConfig sc = cfg.synth;
  sc.prompt_count = batch_size;
  sc.step_count = 2;
  sc.validate();
  WorkloadTrace trace = generate_synthetic(sc, cfg.settings.seed);

  ClusterTopology topo = default_topology(node_count, gpus_per_node,
                                          std::min(4, gpus_per_node));
  RunSettings st = cfg.settings;
  st.n_max = std::max(st.n_max,
                      topo.total_gpus() / cfg.profile.gpus_per_actor);
  st.validate();

  LengthHistory history(st.window, st.ewma_alpha,
                        trace.limits.max_response_len);
  const StepRecord& first = trace.steps.front();
  for (const std::string& pid : first.scheduled_prompts)
    history.observe(first.step_idx, pid, first.actual_lengths.at(pid));
  const StepRecord& step = trace.steps.back();

  // Warmup pass, then timed repetitions.
  PlannedStep planned = plan_step(trace, step, history, Strategy::rlhfless, st,
                                  cfg.profile, topo);
  double total_ms = 0, best_ms = 1e300, worst_ms = 0;
  for (int i = 0; i < repetitions; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    PlannedStep p = plan_step(trace, step, history, Strategy::rlhfless, st,
                              cfg.profile, topo);
    auto t1 = std::chrono::steady_clock::now();
    double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    total_ms += ms;
    best_ms = std::min(best_ms, ms);
    worst_ms = std::max(worst_ms, ms);
    if (p.plan.n_actors != planned.plan.n_actors)
      throw Error("plan-bench: nondeterministic plan");
  }
  std::printf(
      "plan-bench: %d prompts, %d nodes x %d GPUs, N in [%d, %d] -> N*=%d\n",
      batch_size, node_count, gpus_per_node, st.n_min, st.n_max,
      planned.plan.n_actors);
  std::printf("planning time over %d reps: mean %.3f ms, min %.3f ms, max %.3f ms\n",
              repetitions, total_ms / repetitions, best_ms, worst_ms);
  return kExitOk;
}

int cmd_gen_trace(const RunConfig& cfg_in, const std::string& out_path,
                  const std::string& format) {
  RunConfig cfg = cfg_in;
  cfg.validate();
  WorkloadTrace trace = resolve_trace(cfg);
  TraceFormat fmt = format == "auto" ? guess_trace_format(out_path)
                                     : trace_format_from_string(format);
  save_trace(trace, out_path, fmt);
  std::cout << "wrote " << out_path << " (" << trace.prompts.size()
            << " prompts, " << trace.steps.size() << " steps, G="
            << trace.responses_per_prompt << ")\n";
  return kExitOk;
}

int cmd_validate(const std::string& trace_path, const std::string& format) {
  TraceFormat fmt = format == "auto" ? guess_trace_format(trace_path)
                                     : trace_format_from_string(format);
  WorkloadTrace trace = load_trace(trace_path, fmt);
  int64_t prompt_tokens = 0;
  for (const Prompt& p : trace.prompts) prompt_tokens += p.prompt_len();
  std::cout << "ok: " << trace.prompts.size() << " prompts, "
            << trace.steps.size() << " steps, G=" << trace.responses_per_prompt
            << ", prompt tokens " << prompt_tokens << "\n";
  return kExitOk;
}

}  // namespace rollsim
