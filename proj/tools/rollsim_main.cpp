// Copyright (c) 2026 rollsim contributors
// SPDX-License-Identifier: Apache-2.0
//
// rollsim: discrete-event simulator and planner for the generation phase of
// synchronous RLHF training. See README.md for the config schema.
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rollsim/cli.hpp"
#include "rollsim/errors.hpp"

namespace {

struct CommonArgs {
  std::string config_file;
  std::string trace_file;
  std::string trace_format = "auto";
  std::string output_dir;
  std::vector<std::string> strategies;
  double tau = -1;
  double lambda = -1;
  long long seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_file,
                  "JSON run config (defaults apply when omitted)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--trace", args.trace_file,
                  "trace file; overrides the config's trace source");
  cmd->add_option("--trace-format", args.trace_format,
                  "csv, jsonl, or auto (by extension)");
  cmd->add_option("-o,--out", args.output_dir, "output directory");
  cmd->add_option("--strategy", args.strategies,
                  "strategies to run (rlhfless, static, global_cut)")
      ->delimiter(',');
  cmd->add_option("--tau", args.tau, "completion fraction that arms cutting");
  cmd->add_option("--lambda", args.lambda,
                  "time/cost weight for actor scaling");
  cmd->add_option("--seed", args.seed, "master RNG seed");
}

rollsim::RunConfig build_config(const CommonArgs& args) {
  rollsim::RunConfig cfg = args.config_file.empty()
                               ? rollsim::default_run_config()
                               : rollsim::load_run_config(args.config_file);
  if (!args.trace_file.empty()) {
    cfg.trace_file = args.trace_file;
    cfg.trace_format = args.trace_format;
    cfg.use_synthetic = false;
  }
  if (!args.output_dir.empty()) cfg.output_dir = args.output_dir;
  if (!args.strategies.empty()) {
    cfg.strategies.clear();
    for (const std::string& s : args.strategies)
      cfg.strategies.push_back(rollsim::strategy_from_string(s));
  }
  if (args.tau >= 0) cfg.settings.tau = args.tau;
  if (args.lambda >= 0) cfg.settings.lambda = args.lambda;
  if (args.seed >= 0) cfg.settings.seed = static_cast<uint64_t>(args.seed);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generation-phase planner and simulator for RLHF training"};
  app.require_subcommand(1);

  CommonArgs sim_args;
  CLI::App* sim = app.add_subcommand(
      "simulate", "run the selected strategies over a trace and compare");
  add_common(sim, sim_args);

  CommonArgs sweep_args;
  std::string sweep_param = "tau";
  std::vector<double> sweep_values;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "rerun the pipeline across values of tau, lambda, or window");
  add_common(sweep, sweep_args);
  sweep->add_option("--param", sweep_param, "tau, lambda, or window")
      ->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")
      ->delimiter(',')
      ->required();

  CommonArgs bench_args;
  int bench_batch = 512, bench_nodes = 20, bench_gpus = 8, bench_reps = 5;
  CLI::App* bench = app.add_subcommand(
      "plan-bench", "time one planning pass on a synthetic batch");
  add_common(bench, bench_args);
  bench->add_option("--batch", bench_batch, "prompts in the planned step");
  bench->add_option("--nodes", bench_nodes, "cluster nodes");
  bench->add_option("--gpus-per-node", bench_gpus, "GPUs per node");
  bench->add_option("--reps", bench_reps, "timed repetitions after warmup");

  CommonArgs gen_args;
  std::string gen_out = "trace.csv";
  std::string gen_format = "auto";
  CLI::App* gen = app.add_subcommand(
      "gen-trace", "write a synthetic workload trace to a file");
  add_common(gen, gen_args);
  gen->add_option("--out-file", gen_out, "destination trace file");
  gen->add_option("--out-format", gen_format, "csv, jsonl, or auto");

  std::string val_trace;
  std::string val_format = "auto";
  CLI::App* val = app.add_subcommand(
      "validate", "parse a trace file and report its shape");
  val->add_option("trace", val_trace, "trace file")->required();
  val->add_option("--trace-format", val_format, "csv, jsonl, or auto");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return rollsim::kExitConfigError;
  }

  try {
    if (sim->parsed()) return rollsim::cmd_simulate(build_config(sim_args));
    if (sweep->parsed()) {
      rollsim::SweepSpec spec{sweep_param, sweep_values};
      return rollsim::cmd_sweep(build_config(sweep_args), spec);
    }
    if (bench->parsed())
      return rollsim::cmd_plan_bench(build_config(bench_args), bench_batch,
                                     bench_nodes, bench_gpus, bench_reps);
    if (gen->parsed())
      return rollsim::cmd_gen_trace(build_config(gen_args), gen_out,
                                    gen_format);
    if (val->parsed()) return rollsim::cmd_validate(val_trace, val_format);
  } catch (const rollsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return rollsim::kExitConfigError;
  } catch (const rollsim::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return rollsim::kExitConfigError;
  } catch (const rollsim::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return rollsim::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return rollsim::kExitRuntimeError;
  }
  return rollsim::kExitConfigError;
}
