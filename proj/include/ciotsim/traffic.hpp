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

/*! \file  traffic.hpp
 *  \brief Downlink Poisson traffic with a piecewise-constant rate schedule.
 *
 *  Generator: std::mt19937_64 seeded through std::seed_seq{seed_lo, seed_hi,
 *  ue_id}; gaps from std::exponential_distribution, sizes from
 *  std::poisson_distribution. Engine output is fixed by the standard, the
 *  distributions are fixed per standard library, so traces meant to be
 *  replayed across toolchains should go through the trace CSV.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ciotsim/drx.hpp"
#include "ciotsim/error.hpp"

namespace ciotsim {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

/// Rates are per millisecond: lambda_idt = 1/1000 means a mean gap of 1 s,
/// lambda_size = 1/600 a mean size of 600 bytes.
struct TrafficProfile {
  double lambda_idt = 1.0 / 1000.0;
  double lambda_size = 1.0 / 600.0;
  SimTime active_from = 0;

  double mean_gap_ms() const { return 1.0 / lambda_idt; }
  double mean_size_bytes() const { return 1.0 / lambda_size; }
};

class TrafficSchedule {
 public:
  TrafficSchedule() = default;
  explicit TrafficSchedule(std::vector<TrafficProfile> profiles) : profiles_(std::move(profiles)) { validate(); }

  void validate() const {
    if (profiles_.empty()) throw Error(ErrorCode::InvalidScenario, "traffic schedule is empty");
    if (profiles_.front().active_from != 0)
      throw Error(ErrorCode::InvalidScenario, "traffic schedule must start at from_ms = 0");
    for (std::size_t i = 0; i < profiles_.size(); ++i) {
      const auto& p = profiles_[i];
      if (!(p.lambda_idt > 0.0) || !std::isfinite(p.lambda_idt))
        throw Error(ErrorCode::InvalidScenario, "lambda_idt must be positive");
      if (!(p.lambda_size > 0.0) || !std::isfinite(p.lambda_size))
        throw Error(ErrorCode::InvalidScenario, "lambda_size must be positive");
      if (i > 0 && p.active_from <= profiles_[i - 1].active_from)
        throw Error(ErrorCode::InvalidScenario, "traffic schedule from_ms must be strictly increasing");
    }
  }

  const std::vector<TrafficProfile>& profiles() const { return profiles_; }

  /// Profile with the greatest active_from <= now.
  const TrafficProfile& at(double now) const {
    std::size_t i = 0;
    while (i + 1 < profiles_.size() && static_cast<double>(profiles_[i + 1].active_from) <= now) ++i;
    return profiles_[i];
  }

  std::optional<SimTime> next_switch_after(double now) const {
    for (const auto& p : profiles_)
      if (static_cast<double>(p.active_from) > now) return p.active_from;
    return std::nullopt;
  }

 private:
  std::vector<TrafficProfile> profiles_;
};

inline TrafficProfile schedule_rate_at(const TrafficSchedule& schedule, SimTime now) {
  return schedule.at(static_cast<double>(now));
}

struct NextArrival {
  double time = 0.0;  // continuous; the simulator floors it to a subframe
  std::uint32_t size = 1;
};

inline std::uint32_t draw_size(Rng& rng, const TrafficProfile& profile) {
  const double extra = profile.mean_size_bytes() - 1.0;
  if (extra <= 0.0) return 1;
  std::poisson_distribution<std::uint32_t> dist(extra);
  return 1 + dist(rng);
}

/// One exponential gap and one size from a single stationary profile.
inline NextArrival next_arrival(Rng& rng, const TrafficProfile& profile, double now) {
  std::exponential_distribution<double> gap(profile.lambda_idt);
  NextArrival out;
  out.time = now + gap(rng);
  out.size = draw_size(rng, profile);
  return out;
}

/// Piecewise Poisson arrivals. A gap that would cross a rate switch is
/// discarded and redrawn from the switch point, which is exact for a
/// memoryless process.
class TrafficGenerator {
 public:
  TrafficGenerator(TrafficSchedule schedule, std::uint64_t seed, std::uint32_t ue_id)
      : schedule_(std::move(schedule)), rng_(make_rng(seed, ue_id)) {
    schedule_.validate();
  }

  Arrival next() {
    for (;;) {
      const TrafficProfile& p = schedule_.at(clock_);
      std::exponential_distribution<double> gap(p.lambda_idt);
      const double t = clock_ + gap(rng_);
      if (auto sw = schedule_.next_switch_after(clock_); sw && t >= static_cast<double>(*sw)) {
        clock_ = static_cast<double>(*sw);
        continue;
      }
      clock_ = t;
      return {static_cast<SimTime>(std::floor(t)), draw_size(rng_, p)};
    }
  }

  const TrafficSchedule& schedule() const { return schedule_; }

 private:
  TrafficSchedule schedule_;
  Rng rng_;
  double clock_ = 0.0;
};

struct TraceRow {
  std::uint32_t ue_id = 0;
  SimTime arrival_ms = 0;
  std::uint32_t size_bytes = 0;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

inline void write_trace(std::ostream& os, const std::vector<TraceRow>& rows) {
  os << "ue_id,arrival_ms,size_bytes\n";
  for (const auto& r : rows) os << r.ue_id << ',' << r.arrival_ms << ',' << r.size_bytes << '\n';
}

inline std::vector<TraceRow> read_trace(std::istream& is) {
  std::vector<TraceRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("ue_id", 0) == 0) continue;
    std::istringstream ls(line);
    TraceRow r;
    char c1 = 0, c2 = 0;
    long long ue = 0, t = 0, sz = 0;
    if (!(ls >> ue >> c1 >> t >> c2 >> sz) || c1 != ',' || c2 != ',' || ue < 0 || t < 0 || sz <= 0)
      throw Error(ErrorCode::InvalidScenario, "trace line " + std::to_string(lineno) + " is not ue_id,arrival_ms,size_bytes");
    r.ue_id = static_cast<std::uint32_t>(ue);
    r.arrival_ms = t;
    r.size_bytes = static_cast<std::uint32_t>(sz);
    if (!rows.empty() && rows.back().ue_id == r.ue_id && r.arrival_ms < rows.back().arrival_ms)
      throw Error(ErrorCode::InvalidScenario, "trace line " + std::to_string(lineno) + " goes back in time");
    rows.push_back(r);
  }
  return rows;
}

/// Draws arrivals until `until` (exclusive).
inline std::vector<TraceRow> generate_trace(const TrafficSchedule& schedule, std::uint64_t seed, std::uint32_t ue_id,
                                            SimTime until) {
  TrafficGenerator gen(schedule, seed, ue_id);
  std::vector<TraceRow> rows;
  for (Arrival a = gen.next(); a.time < until; a = gen.next()) rows.push_back({ue_id, a.time, a.size});
  return rows;
}

}  // namespace ciotsim
