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

/*! \file  report.hpp
 *  \brief CSV emission and the output directory protocol.
 *
 *  run_meta.json is written before anything else and carries
 *  "status": "running". Each CSV is written to <name>.tmp and renamed into
 *  place; run_meta.json is rewritten with "status": "complete" last. A
 *  directory whose meta still says "running" is a crashed run.
 */

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ciotsim/bench.hpp"
#include "ciotsim/sim.hpp"

namespace ciotsim {

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string hex(const Bytes& b) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(b.size() * 2);
  for (auto x : b) {
    s.push_back(digits[x >> 4]);
    s.push_back(digits[x & 15]);
  }
  return s;
}

inline std::string counts_text(const DecisionState& s) {
  return std::to_string(s.counts[0]) + "/" + std::to_string(s.counts[1]) + "/" + std::to_string(s.counts[2]) + "/" +
         std::to_string(s.counts[3]);
}

}  // namespace detail

inline void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << "ue_id,window_index,T_d,alpha,beta,f_ed,n_c,n_on,n_in,n_so,energy_mJ\n";
  for (const auto& r : rows) {
    const auto i = r.params.indices();
    os << r.ue_id << ',' << r.window_index << ',' << r.metrics.t_d << ',' << detail::fmt_double(r.metrics.alpha) << ','
       << detail::fmt_double(r.metrics.beta) << ',' << detail::fmt_double(r.metrics.f_ed) << ','
       << kCycleMultipliers[i.cycle] << ',' << kOnDurationPeriods[i.on_duration] << ','
       << kInactivityPeriods[i.inactivity] << ',' << int(i.start_offset) << ','
       << detail::fmt_double(r.metrics.energy_mj) << '\n';
  }
}

inline void write_decisions_csv(std::ostream& os, const std::vector<DecisionRow>& rows) {
  os << "ue_id,window_index,at_ms,mode,state_counts,idx_c,idx_on,idx_in,n_so,reward,q_value,reconfigured,faded\n";
  for (const auto& r : rows) {
    const auto& o = r.outcome;
    os << r.ue_id << ',' << r.window_index << ',' << r.at << ',' << to_string(o.mode_after) << ','
       << detail::counts_text(o.state) << ',' << int(o.action.cycle) << ',' << int(o.action.on_duration) << ','
       << int(o.action.inactivity) << ',' << o.n_so << ',' << detail::fmt_double(o.reward) << ','
       << detail::fmt_double(o.q_value) << ',' << (o.reconfigure ? 1 : 0) << ',' << (o.faded ? 1 : 0) << '\n';
  }
}

inline void write_transcripts_csv(std::ostream& os, const std::vector<TranscriptRow>& rows) {
  os << "time_ms,slice_id,ue_id,procedure,seq,channel,msg_type,hex\n";
  for (const auto& r : rows) {
    const auto& e = r.entry;
    os << e.time << ',' << r.slice << ',' << e.ue_id << ',' << to_string(e.proc) << ',' << e.seq << ','
       << to_string(e.message.channel) << ',' << to_string(e.message.type) << ','
       << detail::hex(encode_message(e.message)) << '\n';
  }
}

inline void write_benchmark_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "table,procedure,condition,slices,rat,reps,mean_us,stddev_us\n";
  for (const auto& r : rows) {
    os << r.table << ',' << r.procedure << ',' << r.condition << ',' << r.slices << ',' << r.rat << ',' << r.reps
       << ',' << detail::fmt_double(r.mean_us) << ',' << detail::fmt_double(r.stddev_us) << '\n';
  }
}

/// Writes a file through <path>.tmp and a rename.
template <typename Writer>
void write_atomically(const std::filesystem::path& path, Writer&& write) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    write(out);
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

class OutputDir {
 public:
  OutputDir(std::filesystem::path dir, nlohmann::json meta) : dir_(std::move(dir)), meta_(std::move(meta)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + dir_.string() + ": " + ec.message());
    meta_["status"] = "running";
    write_meta();
  }

  const std::filesystem::path& path() const { return dir_; }

  template <typename Writer>
  void put(const std::string& name, Writer&& write) {
    write_atomically(dir_ / name, std::forward<Writer>(write));
  }

  void finish(const nlohmann::json& summary) {
    meta_["status"] = "complete";
    meta_["summary"] = summary;
    write_meta();
  }

 private:
  void write_meta() {
    write_atomically(dir_ / "run_meta.json", [&](std::ostream& os) { os << meta_.dump(2) << '\n'; });
  }

  std::filesystem::path dir_;
  nlohmann::json meta_;
};

/// The four CSVs of a run; benchmark.csv carries only its header unless
/// benchmark rows are given.
inline void write_run_outputs(OutputDir& out, const RunReport& report, const std::vector<BenchRow>& bench = {}) {
  out.put("metrics.csv", [&](std::ostream& os) { write_metrics_csv(os, report.metrics); });
  out.put("decisions.csv", [&](std::ostream& os) { write_decisions_csv(os, report.decisions); });
  out.put("transcripts.csv", [&](std::ostream& os) { write_transcripts_csv(os, report.transcripts); });
  out.put("benchmark.csv", [&](std::ostream& os) { write_benchmark_csv(os, bench); });
}

inline nlohmann::json run_summary(const RunReport& report) {
  nlohmann::json ues = nlohmann::json::array();
  for (const auto& u : report.ues) {
    const auto i = u.params.indices();
    ues.push_back({{"ue_id", u.ue_id},
                   {"slice_id", u.slice},
                   {"windows", u.windows},
                   {"final_mode", to_string(u.final_mode)},
                   {"mean_f_ed", u.mean_f_ed},
                   {"n_c", kCycleMultipliers[i.cycle]},
                   {"n_on", kOnDurationPeriods[i.on_duration]},
                   {"n_in", kInactivityPeriods[i.inactivity]},
                   {"n_so", int(i.start_offset)},
                   {"generated", u.generated},
                   {"delivered", u.delivered},
                   {"pending", u.pending},
                   {"reconfigurations", u.reconfigurations}});
  }
  return {{"windows", report.metrics.size()}, {"transcript_messages", report.transcripts.size()}, {"ues", ues}};
}

}  // namespace ciotsim
