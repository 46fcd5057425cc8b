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

/*! \file  bench.hpp
 *  \brief Wall-clock cost of RRC procedures under slice lifecycle activity.
 *
 *  Two tables:
 *
 *    lifecycle  the five UP-slice procedures (setup, security,
 *               reconfiguration, suspend, resume), each timed alone
 *               ("regular") and with an add, modify or delete of another
 *               slice fired right after the procedure was posted.
 *    scaling    attach on a CP or UP slice while k-1 LTE slices attach at the
 *               same time, k = 1..3.
 *
 *  A sample is the time from posting the procedure to its completion, seen
 *  from the driver thread. Preparing the UE state is not timed. Conditions
 *  are interleaved within each repetition so drift hits all of them alike.
 *
 *  The same script also runs with every slice inline; the transcripts of the
 *  measured slices must match between the two runs.
 */

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ciotsim/slicing.hpp"

namespace ciotsim {

struct BenchRow {
  std::string table;
  std::string procedure;
  std::string condition;
  int slices = 0;
  std::string rat;
  std::size_t reps = 0;
  double mean_us = 0.0;
  double stddev_us = 0.0;
};

struct BenchConfig {
  std::vector<int> slice_counts{1, 2, 3};
  std::size_t repetitions = 2000;
  std::size_t threads = 0;  // 0 = no cap; below 2 every slice runs inline
};

struct BenchResult {
  std::vector<BenchRow> rows;
  bool transcripts_match = false;
  // Measured-slice transcripts per run, keyed by "lifecycle" and "scaling/<rat>".
  std::map<std::string, std::vector<TranscriptEntry>> threaded, inline_run;

  const BenchRow* find(const std::string& table, const std::string& proc, const std::string& cond, int slices = 0,
                       const std::string& rat = "") const {
    for (const auto& r : rows)
      if (r.table == table && r.procedure == proc && r.condition == cond && (slices == 0 || r.slices == slices) &&
          (rat.empty() || r.rat == rat))
        return &r;
    return nullptr;
  }
};

inline constexpr std::array<Procedure, 5> kLifecycleProcedures{Procedure::Attach, Procedure::SecurityEstablish,
                                                               Procedure::Reconfigure, Procedure::Suspend,
                                                               Procedure::Resume};
inline constexpr std::array<const char*, 4> kLifecycleConditions{"regular", "add", "modify", "delete"};

namespace detail {

struct Samples {
  std::vector<double> us;

  void add(double v) { us.push_back(v); }
  double mean() const {
    double s = 0.0;
    for (double v : us) s += v;
    return us.empty() ? 0.0 : s / static_cast<double>(us.size());
  }
  double stddev() const {
    if (us.size() < 2) return 0.0;
    const double m = mean();
    double s = 0.0;
    for (double v : us) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(us.size() - 1));
  }
};

inline double elapsed_us(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double, std::micro>(b - a).count();
}

inline DrxParams alternate_drx(std::size_t k) {
  return DrxParams::from_indices({static_cast<std::uint8_t>(k % 2), 0, 1, 0});
}

class LifecycleBench {
 public:
  LifecycleBench(ExecMode mode, std::size_t reps)
      : reg_({16, mode, 64}), reps_(reps) {
    other_ = reg_.add_slice(RatFlavor::NbIotCpOpt, {}, 0).id;
    measured_ = reg_.add_slice(RatFlavor::NbIotUpOpt, {}, 0).id;
  }

  std::map<std::string, Samples> run() {
    std::map<std::string, Samples> out;
    auto& b = reg_.context(measured_);
    for (std::size_t rep = 0; rep < reps_; ++rep) {
      for (std::size_t p = 0; p < kLifecycleProcedures.size(); ++p) {
        for (std::size_t k = 0; k < kLifecycleConditions.size(); ++k) {
          const std::size_t c = (k + rep) % kLifecycleConditions.size();
          const Procedure proc = kLifecycleProcedures[p];
          const SimTime now = static_cast<SimTime>(rep);
          const std::uint32_t ue = prepare(b, proc, now);
          SliceId scratch = kNoSlice;
          if (c == 3) scratch = reg_.add_slice(RatFlavor::LteLike, {}, now).id;

          ProcedureRequest req{proc, std::nullopt, {}};
          if (proc == Procedure::Reconfigure) req.drx = alternate_drx(rep + 1);

          const auto t0 = std::chrono::steady_clock::now();
          auto fut = b.post(ue, req, now);
          switch (c) {
            case 1: scratch = reg_.add_slice(RatFlavor::LteLike, {}, now).id; break;
            case 2: reg_.modify_slice(other_, {std::nullopt, alternate_drx(rep).indices(), std::nullopt}, now); break;
            case 3: reg_.delete_slice(scratch, now); break;
            default: break;
          }
          fut.get();
          const auto t1 = std::chrono::steady_clock::now();

          if (c == 1) reg_.delete_slice(scratch, now);
          reg_.collect();
          out[std::string(to_string(proc)) + "|" + kLifecycleConditions[c]].add(elapsed_us(t0, t1));
        }
      }
    }
    reg_.collect();
    return out;
  }

  std::vector<TranscriptEntry> transcript() {
    std::vector<TranscriptEntry> t;
    auto& b = reg_.context(measured_);
    b.executor().post([&] { t = b.transcript(); }).get();
    return t;
  }

 private:
  // Untimed: a fresh UE brought to the state the procedure starts from.
  std::uint32_t prepare(SliceContext& b, Procedure proc, SimTime now) {
    const std::uint32_t ue = next_ue_++;
    b.executor()
        .post([&] {
          b.add_ue(ue);
          if (proc == Procedure::Attach) return;
          b.run(ue, {Procedure::Attach, std::nullopt, {}}, now);
          if (proc == Procedure::Resume) b.run(ue, {Procedure::Suspend, std::nullopt, {}}, now);
        })
        .get();
    return ue;
  }

  SliceRegistry reg_;
  std::size_t reps_;
  SliceId other_ = kNoSlice;
  SliceId measured_ = kNoSlice;
  std::uint32_t next_ue_ = 1;
};

class ScalingBench {
 public:
  ScalingBench(ExecMode mode, std::size_t reps) : reg_({16, mode, 64}), reps_(reps) {
    cp_ = reg_.add_slice(RatFlavor::NbIotCpOpt, {}, 0).id;
    up_ = reg_.add_slice(RatFlavor::NbIotUpOpt, {}, 0).id;
    for (int i = 0; i < 2; ++i) lte_.push_back(reg_.add_slice(RatFlavor::LteLike, {}, 0).id);
  }

  /// Key "<rat>|<k>".
  std::map<std::string, Samples> run(const std::vector<int>& counts) {
    std::map<std::string, Samples> out;
    for (std::size_t rep = 0; rep < reps_; ++rep) {
      for (int k : counts) {
        if (k < 1 || k > 1 + static_cast<int>(lte_.size()))
          throw Error(ErrorCode::InvalidScenario, "slice count must lie in 1..3");
        for (int s = 0; s < 2; ++s) {
          const bool cp_first = ((rep + static_cast<std::size_t>(k)) % 2) == 0;
          const SliceId target = (s == 0) == cp_first ? cp_ : up_;
          const SimTime now = static_cast<SimTime>(rep);
          auto& t = reg_.context(target);
          const std::uint32_t ue = next_ue_++;
          t.executor().post([&] { t.add_ue(ue); }).get();
          std::vector<std::future<void>> background;
          for (int i = 0; i + 1 < k; ++i) {
            auto& bg = reg_.context(lte_[static_cast<std::size_t>(i)]);
            bg.executor().post([&bg, ue] { bg.add_ue(ue); }).get();
          }

          const auto t0 = std::chrono::steady_clock::now();
          for (int i = 0; i + 1 < k; ++i)
            background.push_back(reg_.context(lte_[static_cast<std::size_t>(i)]).post(ue, {Procedure::Attach, std::nullopt, {}}, now));
          auto fut = t.post(ue, {Procedure::Attach, std::nullopt, {}}, now);
          fut.get();
          const auto t1 = std::chrono::steady_clock::now();
          for (auto& f : background) f.get();

          out[std::string(to_string(t.descriptor().rat)) + "|" + std::to_string(k)].add(elapsed_us(t0, t1));
        }
      }
    }
    return out;
  }

  std::vector<TranscriptEntry> transcript(RatFlavor rat) {
    auto& c = reg_.context(rat == RatFlavor::NbIotCpOpt ? cp_ : up_);
    std::vector<TranscriptEntry> t;
    c.executor().post([&] { t = c.transcript(); }).get();
    return t;
  }

 private:
  SliceRegistry reg_;
  std::size_t reps_;
  SliceId cp_ = kNoSlice, up_ = kNoSlice;
  std::vector<SliceId> lte_;
  std::uint32_t next_ue_ = 1;
};

}  // namespace detail

inline BenchResult benchmark_slicing(const BenchConfig& cfg = {}) {
  if (cfg.repetitions < 30) throw Error(ErrorCode::InvalidScenario, "benchmark needs at least 30 repetitions");
  const ExecMode timed = cfg.threads == 1 ? ExecMode::Deterministic : ExecMode::Threaded;
  BenchResult res;

  {
    detail::LifecycleBench bench(timed, cfg.repetitions);
    const auto samples = bench.run();
    for (auto proc : kLifecycleProcedures)
      for (const char* cond : kLifecycleConditions) {
        const auto& s = samples.at(std::string(to_string(proc)) + "|" + cond);
        res.rows.push_back({"lifecycle", to_string(proc), cond, 2, to_string(RatFlavor::NbIotUpOpt), s.us.size(),
                            s.mean(), s.stddev()});
      }
    res.threaded["lifecycle"] = bench.transcript();
  }
  {
    detail::ScalingBench bench(timed, cfg.repetitions);
    const auto samples = bench.run(cfg.slice_counts);
    for (int k : cfg.slice_counts)
      for (auto rat : {RatFlavor::NbIotCpOpt, RatFlavor::NbIotUpOpt}) {
        const auto& s = samples.at(std::string(to_string(rat)) + "|" + std::to_string(k));
        res.rows.push_back({"scaling", "attach", "concurrent", k, to_string(rat), s.us.size(), s.mean(), s.stddev()});
      }
    res.threaded["scaling/nbiot_cp"] = bench.transcript(RatFlavor::NbIotCpOpt);
    res.threaded["scaling/nbiot_up"] = bench.transcript(RatFlavor::NbIotUpOpt);
  }

  // Same script, every slice inline.
  {
    detail::LifecycleBench bench(ExecMode::Deterministic, cfg.repetitions);
    bench.run();
    res.inline_run["lifecycle"] = bench.transcript();
  }
  {
    detail::ScalingBench bench(ExecMode::Deterministic, cfg.repetitions);
    bench.run(cfg.slice_counts);
    res.inline_run["scaling/nbiot_cp"] = bench.transcript(RatFlavor::NbIotCpOpt);
    res.inline_run["scaling/nbiot_up"] = bench.transcript(RatFlavor::NbIotUpOpt);
  }
  res.transcripts_match = res.threaded == res.inline_run;
  return res;
}

}  // namespace ciotsim
