/*
 * Copyright 2026 The ciotsim Authors
 * Licensed under the Apache License, Version 2.0 (the "License"); you may not
 * use this file except in compliance with the License.  You may obtain a copy
 * of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
 * WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
 * License for the specific language governing permissions and limitations
 * under the License.
 */

// ciotsim: run scenarios, the slicing benchmark and the oracle sweep.
//
// Exit codes: 0 ok, 1 invalid scenario or arguments, 2 I/O failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ciotsim/bench.hpp"
#include "ciotsim/report.hpp"
#include "ciotsim/scenario_io.hpp"
#include "ciotsim/sim.hpp"

namespace fs = std::filesystem;
using namespace ciotsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitIo = 2;

struct Options {
  std::string scenario;
  std::string out = "results";
  std::optional<std::uint64_t> seed;
  std::string mode;
  bool quiet = false;
  std::string trace;
  std::optional<std::uint32_t> ue;
  std::size_t reps = BenchConfig{}.repetitions;
};

std::size_t thread_cap() {
  const char* v = std::getenv("CIOT_SIM_THREADS");
  if (v == nullptr || *v == '\0') return 0;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  if (*end != '\0') throw Error(ErrorCode::InvalidScenario, "CIOT_SIM_THREADS must be a non-negative integer");
  return n;
}

Scenario load(const Options& o) {
  Scenario sc = load_scenario(o.scenario);
  if (o.seed) sc.seed = *o.seed;
  if (o.mode == "det") sc.mode = ExecMode::Deterministic;
  else if (o.mode == "bench") sc.mode = ExecMode::Threaded;
  if (sc.mode == ExecMode::Threaded && thread_cap() == 1) sc.mode = ExecMode::Deterministic;
  sc.validate();
  return sc;
}

std::string action_text(const DrxParams& p) {
  const auto i = p.indices();
  return "n_c=" + std::to_string(kCycleMultipliers[i.cycle]) + " n_on=" + std::to_string(kOnDurationPeriods[i.on_duration]) +
         " n_in=" + std::to_string(kInactivityPeriods[i.inactivity]) + " n_so=" + std::to_string(int(i.start_offset));
}

void print_summary(const RunReport& r, double seconds) {
  std::printf("windows simulated: %zu   transcript messages: %zu   wall: %.2f s\n", r.metrics.size(),
              r.transcripts.size(), seconds);
  std::printf("%8s %6s %8s %8s %9s  %s\n", "ue", "slice", "windows", "mode", "mean_fED", "converged action");
  constexpr std::size_t kShown = 20;
  for (std::size_t i = 0; i < r.ues.size() && i < kShown; ++i) {
    const auto& u = r.ues[i];
    std::printf("%8u %6u %8zu %8s %9.4f  %s\n", u.ue_id, unsigned(u.slice), u.windows, to_string(u.final_mode),
                u.mean_f_ed, action_text(u.params).c_str());
  }
  if (r.ues.size() > kShown) std::printf("... %zu more UEs in run_meta.json\n", r.ues.size() - kShown);
}

int cmd_validate(const Options& o) {
  const Scenario sc = load(o);
  if (!o.quiet)
    std::printf("%s: ok (%zu slices, %zu ues, %lld ms)\n", o.scenario.c_str(), sc.slices.size(), sc.ues.size(),
                static_cast<long long>(sc.duration));
  return kExitOk;
}

int cmd_run(const Options& o) {
  const Scenario sc = load(o);
  OutputDir out(o.out, {{"command", "run"}, {"scenario_path", o.scenario}, {"seed", sc.seed},
                        {"config", scenario_echo(sc)}});
  const auto t0 = std::chrono::steady_clock::now();
  const RunReport report = run(sc);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_run_outputs(out, report);
  out.finish(run_summary(report));
  if (!o.quiet) print_summary(report, secs);
  return kExitOk;
}

int cmd_benchmark(const Options& o) {
  nlohmann::json meta{{"command", "benchmark"}};
  if (!o.scenario.empty()) {
    const Scenario sc = load(o);
    meta["scenario_path"] = o.scenario;
    meta["config"] = scenario_echo(sc);
  }
  BenchConfig cfg;
  cfg.repetitions = o.reps;
  cfg.threads = thread_cap();
  meta["repetitions"] = cfg.repetitions;
  meta["threads"] = cfg.threads;
  OutputDir out(o.out, meta);
  const BenchResult res = benchmark_slicing(cfg);
  out.put("benchmark.csv", [&](std::ostream& os) { write_benchmark_csv(os, res.rows); });
  out.finish({{"rows", res.rows.size()}, {"transcripts_match", res.transcripts_match}});
  if (!o.quiet) {
    std::printf("%-10s %-20s %-11s %6s %-9s %10s %10s\n", "table", "procedure", "condition", "slices", "rat", "mean_us",
                "stddev_us");
    for (const auto& r : res.rows)
      std::printf("%-10s %-20s %-11s %6d %-9s %10.3f %10.3f\n", r.table.c_str(), r.procedure.c_str(),
                  r.condition.c_str(), r.slices, r.rat.c_str(), r.mean_us, r.stddev_us);
    std::printf("transcripts identical to inline run: %s\n", res.transcripts_match ? "yes" : "no");
  }
  return res.transcripts_match ? kExitOk : kExitInvalid;
}

int cmd_oracle(const Options& o) {
  ControllerConfig cfg;
  TxModel tx;
  PowerProfile power;
  if (!o.scenario.empty()) {
    const Scenario sc = load(o);
    cfg = sc.controller;
    tx = sc.tx;
    power = sc.power;
  }
  std::ifstream in(o.trace);
  if (!in) throw Error(ErrorCode::Io, "cannot open trace " + o.trace);
  const auto rows = read_trace(in);
  if (rows.empty()) throw Error(ErrorCode::InvalidScenario, o.trace + ": trace has no rows");
  const std::uint32_t ue = o.ue.value_or(rows.front().ue_id);
  std::vector<Arrival> trace;
  for (const auto& r : rows)
    if (r.ue_id == ue) trace.push_back({r.arrival_ms, r.size_bytes});
  if (trace.empty()) throw Error(ErrorCode::InvalidScenario, "--ue: trace has no rows for ue " + std::to_string(ue));

  const auto sweep = oracle_sweep(trace, cfg, tx, power);
  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  write_atomically(dir / "oracle.csv", [&](std::ostream& os) {
    os << "rank,idx_c,idx_on,idx_in,n_c,n_on,n_in,feasible,f_ed\n";
    for (std::size_t i = 0; i < sweep.size(); ++i) {
      const auto& a = sweep[i].action;
      os << i + 1 << ',' << int(a.cycle) << ',' << int(a.on_duration) << ',' << int(a.inactivity) << ','
         << kCycleMultipliers[a.cycle] << ',' << kOnDurationPeriods[a.on_duration] << ','
         << kInactivityPeriods[a.inactivity] << ',' << (sweep[i].feasible ? 1 : 0) << ','
         << (sweep[i].feasible ? detail::fmt_double(sweep[i].f_ed) : std::string()) << '\n';
    }
  });
  if (!o.quiet) {
    const auto& b = sweep.front();
    std::printf("ue %u, %zu packets, best f_ED %.6f at n_c=%d n_on=%d n_in=%d\n", ue, trace.size(), b.f_ed,
                kCycleMultipliers[b.action.cycle], kOnDurationPeriods[b.action.on_duration],
                kInactivityPeriods[b.action.inactivity]);
    std::printf("wrote %s\n", (dir / "oracle.csv").string().c_str());
  }
  return kExitOk;
}

int exit_code_for(const Error& e) { return e.code() == ErrorCode::Io ? kExitIo : kExitInvalid; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ciotsim: DRX learning and RAN slicing simulator"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool needs_scenario) {
    auto* s = sub->add_option("--scenario", o.scenario, "scenario file (JSON)")->check(CLI::ExistingFile);
    if (needs_scenario) s->required();
    sub->add_option("--seed", o.seed, "override the scenario seed");
    sub->add_option("--mode", o.mode, "execution mode")->check(CLI::IsMember({"det", "bench"}));
    sub->add_flag("--quiet,-q", o.quiet, "print nothing on success");
  };

  auto* run = app.add_subcommand("run", "simulate a scenario and write the CSV outputs");
  common(run, true);
  run->add_option("--out", o.out, "output directory");

  auto* bench = app.add_subcommand("benchmark", "time RRC procedures under slice lifecycle activity");
  common(bench, false);
  bench->add_option("--out", o.out, "output directory");
  bench->add_option("--reps", o.reps, "repetitions per cell")->check(CLI::Range(std::size_t{30}, std::size_t{1000000}));

  auto* oracle = app.add_subcommand("oracle", "replay a trace under all 672 timer combinations");
  common(oracle, false);
  oracle->add_option("--trace", o.trace, "trace CSV (ue_id,arrival_ms,size_bytes)")->required()->check(CLI::ExistingFile);
  oracle->add_option("--ue", o.ue, "UE whose rows are replayed (default: first row's)");
  oracle->add_option("--out", o.out, "output directory");

  auto* validate = app.add_subcommand("validate", "check a scenario file and exit");
  common(validate, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*run) return cmd_run(o);
    if (*bench) return cmd_benchmark(o);
    if (*oracle) return cmd_oracle(o);
    if (*validate) return cmd_validate(o);
  } catch (const Error& e) {
    std::fprintf(stderr, "ciotsim: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ciotsim: %s\n", e.what());
    return kExitIo;
  }
  return kExitInvalid;
}
