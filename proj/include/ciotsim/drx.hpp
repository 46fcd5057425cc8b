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

/*! \file  drx.hpp
 *  \brief UE discontinuous-reception state machine and window metrics.
 *
 *  Time is counted in subframes (1 subframe == 1 ms) on a non-wrapping 64-bit
 *  clock. A UE occupies one of four phases per subframe:
 *
 *    S0  receiving downlink data
 *    S1  connected, waiting for the inactivity timer to expire
 *    S2  DRX on-duration (monitoring PDCCH)
 *    S3  DRX sleep
 *
 *  Two implementations of the same semantics live here: step(), which walks
 *  exactly one subframe, and DrxMachine, which jumps across whole phases. The
 *  tests hold them equal.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ciotsim/error.hpp"

namespace ciotsim {

using SimTime = std::int64_t;    // milliseconds == subframes
using Subframes = std::int64_t;

inline constexpr Subframes kPdcchPeriod = 16;
inline constexpr Subframes kCycleGroup = 256;

inline constexpr std::array<int, 12> kCycleMultipliers{1, 2, 4, 6, 8, 12, 16, 18, 24, 30, 32, 36};
inline constexpr std::array<int, 7> kOnDurationPeriods{1, 2, 3, 4, 8, 16, 32};
inline constexpr std::array<int, 8> kInactivityPeriods{0, 1, 2, 3, 4, 8, 16, 32};

/// Index encoding of a DRX configuration, as carried on the wire.
struct DrxIndices {
  std::uint8_t cycle = 0;
  std::uint8_t on_duration = 0;
  std::uint8_t inactivity = 0;
  std::uint8_t start_offset = 0;  // n_so, raw 0..255

  friend bool operator==(const DrxIndices&, const DrxIndices&) = default;
};

/// DRX timers in subframes. Only the discrete values of the standard's
/// domains are legal; use validate() or from_indices() to enforce that.
struct DrxParams {
  Subframes cycle = 256;
  Subframes on_duration = 16;
  Subframes inactivity = 16;
  Subframes start_offset = 0;

  static DrxParams from_indices(const DrxIndices& idx);

  DrxIndices indices() const;
  int start_offset_steps() const { return static_cast<int>(start_offset / (cycle / kCycleGroup)); }

  friend bool operator==(const DrxParams&, const DrxParams&) = default;
};

namespace detail {

template <std::size_t N>
std::optional<std::size_t> index_of(const std::array<int, N>& domain, Subframes value, Subframes unit) {
  if (value % unit != 0) return std::nullopt;
  auto it = std::find(domain.begin(), domain.end(), static_cast<int>(value / unit));
  if (it == domain.end()) return std::nullopt;
  return static_cast<std::size_t>(it - domain.begin());
}

}  // namespace detail

/// Returns a description of the first domain violation, or nullopt.
inline std::optional<std::string> drx_violation(const DrxParams& p) {
  if (!detail::index_of(kCycleMultipliers, p.cycle, kCycleGroup))
    return "cycle " + std::to_string(p.cycle) + " not in 256*{1,2,4,6,8,12,16,18,24,30,32,36}";
  if (!detail::index_of(kOnDurationPeriods, p.on_duration, kPdcchPeriod))
    return "on_duration " + std::to_string(p.on_duration) + " not in 16*{1,2,3,4,8,16,32}";
  if (!detail::index_of(kInactivityPeriods, p.inactivity, kPdcchPeriod))
    return "inactivity " + std::to_string(p.inactivity) + " not in 16*{0,1,2,3,4,8,16,32}";
  const Subframes step = p.cycle / kCycleGroup;
  if (p.start_offset < 0 || p.start_offset % step != 0 || p.start_offset / step > 255)
    return "start_offset " + std::to_string(p.start_offset) + " not a multiple n_so*cycle/256";
  if (p.on_duration >= p.cycle)
    return "on_duration " + std::to_string(p.on_duration) + " must be shorter than cycle " +
           std::to_string(p.cycle);
  return std::nullopt;
}

inline void validate(const DrxParams& p) {
  if (auto why = drx_violation(p)) throw Error(ErrorCode::InvalidDrxParams, *why);
}

inline DrxParams DrxParams::from_indices(const DrxIndices& idx) {
  if (idx.cycle >= kCycleMultipliers.size() || idx.on_duration >= kOnDurationPeriods.size() ||
      idx.inactivity >= kInactivityPeriods.size())
    throw Error(ErrorCode::InvalidDrxParams, "DRX index out of range");
  DrxParams p;
  p.cycle = kCycleGroup * kCycleMultipliers[idx.cycle];
  p.on_duration = kPdcchPeriod * kOnDurationPeriods[idx.on_duration];
  p.inactivity = kPdcchPeriod * kInactivityPeriods[idx.inactivity];
  p.start_offset = static_cast<Subframes>(idx.start_offset) * (p.cycle / kCycleGroup);
  validate(p);
  return p;
}

inline DrxIndices DrxParams::indices() const {
  validate(*this);
  DrxIndices idx;
  idx.cycle = static_cast<std::uint8_t>(*detail::index_of(kCycleMultipliers, cycle, kCycleGroup));
  idx.on_duration = static_cast<std::uint8_t>(*detail::index_of(kOnDurationPeriods, on_duration, kPdcchPeriod));
  idx.inactivity = static_cast<std::uint8_t>(*detail::index_of(kInactivityPeriods, inactivity, kPdcchPeriod));
  idx.start_offset = static_cast<std::uint8_t>(start_offset_steps());
  return idx;
}

enum class Phase : std::uint8_t { S0_Receiving = 0, S1_ConnectedWait = 1, S2_DrxActive = 2, S3_DrxSleep = 3 };

constexpr std::size_t index(Phase p) { return static_cast<std::size_t>(p); }

/// One downlink packet as seen by the base station.
struct PacketRecord {
  SimTime arrival = 0;
  std::uint32_t size = 0;
  SimTime delivered = 0;
  Phase state_at_arrival = Phase::S1_ConnectedWait;

  Subframes delay() const { return delivered - arrival; }
  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

struct Arrival {
  SimTime time = 0;
  std::uint32_t size = 0;

  friend bool operator==(const Arrival&, const Arrival&) = default;
};

/// S0 occupancy per packet: ceil(size / bytes_per_subframe), at least one subframe.
struct TxModel {
  std::uint32_t bytes_per_subframe = 1000;

  Subframes duration(std::uint32_t size) const {
    const Subframes n = (static_cast<Subframes>(size) + bytes_per_subframe - 1) / bytes_per_subframe;
    return std::max<Subframes>(n, 1);
  }
};

struct UeDrxState {
  Phase phase = Phase::S1_ConnectedWait;
  Subframes timer_remaining = 0;  // S0: transmission left, S1: inactivity left, S2: on-duration left, S3: sleep left
  SimTime now = 0;                // absolute subframe index about to be processed
  std::deque<Arrival> pending;    // packets waiting for the next on-duration
  std::uint64_t drx_wakeups = 0;  // S3 -> on-duration transitions so far

  std::int64_t frame_number() const { return (now / 10) % 1024; }
  std::int64_t subframe_number() const { return now % 10; }
};

namespace detail {

inline Subframes floor_mod(Subframes a, Subframes m) {
  const Subframes r = a % m;
  return r < 0 ? r + m : r;
}

inline void receive(UeDrxState& s, Subframes tx) {
  if (s.phase == Phase::S0_Receiving) {
    s.timer_remaining += tx;
  } else {
    s.phase = Phase::S0_Receiving;
    s.timer_remaining = tx;
  }
}

// Sets the DRX phase for subframe s.now. A packet held during sleep is
// signalled at the first on-duration subframe and delivered right there.
inline void enter_drx(UeDrxState& s, const DrxParams& p, const TxModel& tx, std::vector<PacketRecord>& out) {
  const bool was_sleeping = s.phase == Phase::S3_DrxSleep;
  const Subframes r = floor_mod(s.now - p.start_offset, p.cycle);
  if (r < p.on_duration) {
    if (was_sleeping) ++s.drx_wakeups;
    s.phase = Phase::S2_DrxActive;
    s.timer_remaining = p.on_duration - r;
    if (!s.pending.empty()) {
      Subframes busy = 0;
      for (const auto& a : s.pending) {
        out.push_back({a.time, a.size, s.now, Phase::S3_DrxSleep});
        busy += tx.duration(a.size);
      }
      s.pending.clear();
      receive(s, busy);
    }
  } else {
    s.phase = Phase::S3_DrxSleep;
    s.timer_remaining = p.cycle - r;
  }
}

inline void leave_connected(UeDrxState& s, const DrxParams& p, const TxModel& tx, std::vector<PacketRecord>& out) {
  if (s.phase == Phase::S0_Receiving && p.inactivity > 0) {
    s.phase = Phase::S1_ConnectedWait;
    s.timer_remaining = p.inactivity;
  } else {
    enter_drx(s, p, tx, out);
  }
}

}  // namespace detail

/// State of a UE that has just become connected at `now`: the inactivity
/// timer runs first, DRX follows when it expires.
inline UeDrxState connected_state(SimTime now, const DrxParams& p, const TxModel& tx = {}) {
  UeDrxState s;
  s.now = now;
  std::vector<PacketRecord> none;
  if (p.inactivity > 0) {
    s.phase = Phase::S1_ConnectedWait;
    s.timer_remaining = p.inactivity;
  } else {
    s.phase = Phase::S1_ConnectedWait;
    detail::enter_drx(s, p, tx, none);
  }
  return s;
}

struct StepResult {
  UeDrxState state;
  Phase occupied = Phase::S1_ConnectedWait;  // phase charged for the processed subframe
  std::vector<PacketRecord> deliveries;
};

/// Advances exactly one subframe. `arrivals` are the packets reaching the
/// base station during subframe state.now.
inline StepResult step(UeDrxState state, const DrxParams& params, std::span<const Arrival> arrivals,
                       const TxModel& tx = {}) {
  StepResult res;
  for (const auto& a : arrivals) {
    if (state.phase == Phase::S3_DrxSleep) {
      state.pending.push_back(a);
    } else {
      res.deliveries.push_back({a.time, a.size, state.now, state.phase});
      detail::receive(state, tx.duration(a.size));
    }
  }
  res.occupied = state.phase;

  ++state.now;
  switch (state.phase) {
    case Phase::S0_Receiving:
    case Phase::S1_ConnectedWait:
      if (--state.timer_remaining == 0) detail::leave_connected(state, params, tx, res.deliveries);
      break;
    case Phase::S2_DrxActive:
    case Phase::S3_DrxSleep:
      detail::enter_drx(state, params, tx, res.deliveries);
      break;
  }
  res.state = std::move(state);
  return res;
}

/// Event-driven DRX machine: same semantics as step(), but advance_to()
/// skips whole phase segments in O(1).
class DrxMachine {
 public:
  DrxMachine(const DrxParams& params, SimTime start, TxModel tx = {})
      : params_(params), tx_(tx), state_(connected_state(start, params, tx)) {
    validate(params_);
  }

  const UeDrxState& state() const { return state_; }
  const DrxParams& params() const { return params_; }
  const TxModel& tx_model() const { return tx_; }
  SimTime now() const { return state_.now; }

  /// Cumulative subframes spent in each phase since construction.
  const std::array<Subframes, 4>& dwell() const { return dwell_; }

  /// Processes subframes [now, t).
  void advance_to(SimTime t) {
    while (state_.now < t) {
      const Subframes d = std::min(state_.timer_remaining, t - state_.now);
      dwell_[index(state_.phase)] += d;
      state_.now += d;
      state_.timer_remaining -= d;
      if (state_.timer_remaining > 0) continue;
      switch (state_.phase) {
        case Phase::S0_Receiving:
        case Phase::S1_ConnectedWait:
          detail::leave_connected(state_, params_, tx_, delivered_);
          break;
        case Phase::S2_DrxActive:
        case Phase::S3_DrxSleep:
          detail::enter_drx(state_, params_, tx_, delivered_);
          break;
      }
    }
  }

  /// Handles a packet arriving during subframe now(). Returns the phase the
  /// packet found the UE in.
  Phase arrive(std::uint32_t size) {
    const Phase at = state_.phase;
    if (at == Phase::S3_DrxSleep) {
      state_.pending.push_back({state_.now, size});
    } else {
      delivered_.push_back({state_.now, size, state_.now, at});
      detail::receive(state_, tx_.duration(size));
    }
    return at;
  }

  /// Delivers an RRC reconfiguration at now(): the new timers take effect,
  /// held packets go out with it, and the inactivity timer restarts.
  void apply_reconfiguration(const DrxParams& next, Subframes message_subframes = 1) {
    validate(next);
    params_ = next;
    Subframes busy = message_subframes;
    for (const auto& a : state_.pending) {
      delivered_.push_back({a.time, a.size, state_.now, Phase::S3_DrxSleep});
      busy += tx_.duration(a.size);
    }
    state_.pending.clear();
    detail::receive(state_, busy);
  }

  /// First on-duration start at or after t under the current timers.
  SimTime next_on_duration_start(SimTime t) const {
    const Subframes r = detail::floor_mod(t - params_.start_offset, params_.cycle);
    return r == 0 ? t : t + (params_.cycle - r);
  }

  /// When the packets held during sleep will go out, if any are held.
  std::optional<SimTime> pending_delivery_time() const {
    if (state_.pending.empty()) return std::nullopt;
    return state_.now + state_.timer_remaining;
  }

  std::size_t pending_count() const { return state_.pending.size(); }

  std::vector<PacketRecord> take_deliveries() { return std::exchange(delivered_, {}); }

 private:
  DrxParams params_;
  TxModel tx_;
  UeDrxState state_;
  std::array<Subframes, 4> dwell_{};
  std::vector<PacketRecord> delivered_;
};

// ---------------------------------------------------------------------------
// Metrics

/// Per-phase power draw in milliwatts. The defaults are placeholders ordered
/// S0 >= S1 >= S2 >= S3 > 0; measured values should replace them.
struct PowerProfile {
  std::array<double, 4> milliwatts{500.0, 100.0, 50.0, 0.015};

  void validate() const {
    for (std::size_t i = 0; i < 4; ++i) {
      if (!(milliwatts[i] > 0.0)) throw Error(ErrorCode::InvalidScenario, "power_mw entries must be positive");
      if (i > 0 && milliwatts[i] > milliwatts[i - 1])
        throw Error(ErrorCode::InvalidScenario, "power_mw must be non-increasing from S0 to S3");
    }
  }
};

/// Sum of P_i * t_i. mW * ms = uJ, reported in mJ.
inline double energy_mj(const std::array<Subframes, 4>& dwell, const PowerProfile& profile) {
  double uj = 0.0;
  for (std::size_t i = 0; i < 4; ++i) uj += profile.milliwatts[i] * static_cast<double>(dwell[i]);
  return uj / 1000.0;
}

struct DwellSegment {
  Phase phase = Phase::S3_DrxSleep;
  Subframes length = 0;
};

inline double sleep_ratio(const std::array<Subframes, 4>& dwell) {
  const Subframes total = std::accumulate(dwell.begin(), dwell.end(), Subframes{0});
  if (total <= 0) throw Error(ErrorCode::EmptyWindow, "sleep ratio over an empty window");
  return static_cast<double>(dwell[index(Phase::S3_DrxSleep)]) / static_cast<double>(total);
}

inline double sleep_ratio(std::span<const DwellSegment> window) {
  std::array<Subframes, 4> dwell{};
  for (const auto& seg : window) dwell[index(seg.phase)] += seg.length;
  return sleep_ratio(dwell);
}

/// Sleep time from the closed form T_offset + N_c * (T_c - T_on).
inline Subframes sleep_time_closed_form(Subframes t_offset, std::int64_t cycles, const DrxParams& p) {
  return t_offset + cycles * (p.cycle - p.on_duration);
}

inline double sleep_ratio_closed_form(Subframes t_offset, std::int64_t cycles, const DrxParams& p, Subframes t_d) {
  if (t_d <= 0) throw Error(ErrorCode::EmptyWindow, "T_d must be positive");
  return static_cast<double>(sleep_time_closed_form(t_offset, cycles, p)) / static_cast<double>(t_d);
}

inline double mean_delay(std::span<const PacketRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptyWindow, "mean delay of zero packets");
  double sum = 0.0;
  for (const auto& r : records) sum += static_cast<double>(r.delay());
  return sum / static_cast<double>(records.size());
}

/// f_ED = lambda * alpha + (1 - lambda) * (1 - beta / T_max). Negative when
/// the mean delay exceeds T_max by enough.
inline double ed_index(double alpha, double beta, double lambda, double t_max) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::InvalidWeight, "lambda must lie in [0,1]");
  if (!(t_max > 0.0)) throw Error(ErrorCode::InvalidWeight, "T_max must be positive");
  return lambda * alpha + (1.0 - lambda) * (1.0 - beta / t_max);
}

struct WindowMetrics {
  Subframes t_d = 0;
  Subframes t_offset = 0;
  std::int64_t cycles = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double f_ed = 0.0;
  std::array<Subframes, 4> t_in_state{};
  double energy_mj = 0.0;
};

}  // namespace ciotsim
