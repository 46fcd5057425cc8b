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

/*! \file  sim.hpp
 *  \brief Discrete-event harness: traffic, DRX machines, windows, controller.
 *
 *  Event order at equal timestamps is fixed:
 *
 *    ReconfigDelivery < PacketArrival < WindowClose < SliceCommandDue < SimEnd
 *
 *  then insertion order. A decision window holds N_d consecutive arrivals of
 *  one UE and spans from the previous window's last arrival to its own last
 *  arrival. It closes once its last packet has been delivered, which for a
 *  packet caught asleep is the next on-duration.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ciotsim/drx.hpp"
#include "ciotsim/error.hpp"
#include "ciotsim/qlearn.hpp"
#include "ciotsim/rrc.hpp"
#include "ciotsim/slicing.hpp"
#include "ciotsim/traffic.hpp"

namespace ciotsim {

// ---------------------------------------------------------------------------
// Scenario

struct SliceSpec {
  RatFlavor rat = RatFlavor::NbIotCpOpt;
  DrxParams default_drx;
};

struct UeSpec {
  std::uint32_t ue_id = 0;
  std::size_t slice = 0;          // index into Scenario::slices
  TrafficSchedule traffic;        // used when trace is empty
  std::vector<Arrival> trace;     // fixed arrivals, replayed as given
};

struct CommandSpec {
  SimTime at = 0;
  CommandOp op = CommandOp::Add;
  SliceId target = kNoSlice;
  std::optional<RatFlavor> rat;
  std::optional<DrxIndices> drx;
};

enum class PolicyKind : std::uint8_t {
  Learn,   // Q-learning controller
  Fixed,   // hold one action, recompute the start offset every window
  Static,  // keep the slice default timers untouched
};

struct Scenario {
  std::uint64_t seed = 1;
  SimTime duration = 0;
  ExecMode mode = ExecMode::Deterministic;
  std::vector<SliceSpec> slices;
  std::vector<UeSpec> ues;
  std::vector<CommandSpec> commands;
  ControllerConfig controller;
  PolicyKind policy = PolicyKind::Learn;
  std::optional<DrxAction> fixed_action;
  TxModel tx;
  PowerProfile power;
  std::size_t slice_capacity = 16;
  std::size_t history_capacity = 1024;

  void validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidScenario, what); };
    if (duration <= 0) bad("duration_ms must be positive");
    if (slices.size() > slice_capacity) bad("more slices than slice_capacity");
    if (slice_capacity == 0 || slice_capacity > 0xFFFF) bad("slice_capacity out of range");
    if (history_capacity == 0) bad("history_capacity must be >= 1");
    if (tx.bytes_per_subframe == 0) bad("bytes_per_subframe must be positive");
    power.validate();
    controller.validate();
    for (std::size_t i = 0; i < slices.size(); ++i) {
      if (auto why = drx_violation(slices[i].default_drx)) bad("slices[" + std::to_string(i) + "].drx: " + *why);
    }
    std::vector<std::uint32_t> seen;
    for (std::size_t i = 0; i < ues.size(); ++i) {
      const auto& u = ues[i];
      const std::string at = "ues[" + std::to_string(i) + "]";
      if (u.slice >= slices.size()) bad(at + ".slice refers to no slice");
      if (std::find(seen.begin(), seen.end(), u.ue_id) != seen.end()) bad(at + ".ue_id repeats");
      seen.push_back(u.ue_id);
      if (u.trace.empty()) {
        try {
          u.traffic.validate();
        } catch (const Error& e) {
          bad(at + ".traffic: " + e.what());
        }
      }
      for (std::size_t k = 1; k < u.trace.size(); ++k)
        if (u.trace[k].time < u.trace[k - 1].time) bad(at + ".trace goes back in time");
      for (const auto& a : u.trace)
        if (a.time < 0 || a.size == 0) bad(at + ".trace has a negative time or empty packet");
    }
    for (std::size_t i = 0; i < commands.size(); ++i) {
      const auto& c = commands[i];
      const std::string at = "commands[" + std::to_string(i) + "]";
      if (c.at < 0 || c.at > duration) bad(at + ".at_ms outside the run");
      if (c.op == CommandOp::Add && !c.rat) bad(at + " add needs rat");
      if (c.op != CommandOp::Add && c.target == kNoSlice) bad(at + " needs a slice id");
      if (c.drx) {
        try {
          DrxParams::from_indices(*c.drx);
        } catch (const Error& e) {
          bad(at + ".drx: " + e.what());
        }
      }
    }
    if (policy == PolicyKind::Fixed) {
      if (!fixed_action) bad("fixed policy needs fixed_action");
      if (!fixed_action->feasible()) bad("fixed_action has on_duration >= cycle");
    }
  }
};

// ---------------------------------------------------------------------------
// Event queue

enum class EventKind : std::uint8_t { ReconfigDelivery = 0, PacketArrival = 1, WindowClose = 2, SliceCommandDue = 3, SimEnd = 4 };

struct Event {
  SimTime time = 0;
  EventKind kind = EventKind::SimEnd;
  std::uint64_t seq = 0;
  std::size_t target = 0;   // UE or command index
  std::uint64_t tag = 0;    // packet size, reconfiguration version
};

class EventQueue {
 public:
  void push(SimTime time, EventKind kind, std::size_t target = 0, std::uint64_t tag = 0) {
    heap_.push({time, kind, next_seq_++, target, tag});
  }

  Event pop() {
    Event e = heap_.top();
    heap_.pop();
    return e;
  }

  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      if (a.kind != b.kind) return a.kind > b.kind;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  std::uint64_t next_seq_ = 0;
};

// ---------------------------------------------------------------------------
// Per-UE window bookkeeping

struct ClosedWindow {
  std::size_t index = 0;
  SimTime start = 0;
  SimTime end = 0;
  std::vector<PacketRecord> records;
  std::vector<SimTime> arrivals;
  WindowMetrics metrics;
};

/// One UE's DRX machine plus the accounting that turns arrivals into
/// decision windows.
class UeSession {
 public:
  UeSession(const DrxParams& initial, std::size_t window_packets, double lambda, double t_max, TxModel tx = {},
            PowerProfile power = {})
      : machine_(initial, 0, tx), n_d_(window_packets), lambda_(lambda), t_max_(t_max), power_(power) {
    boundary_ = snapshot(0);
  }

  const DrxMachine& machine() const { return machine_; }
  SimTime now() const { return machine_.now(); }

  void advance_to(SimTime t) {
    machine_.advance_to(t);
    collect();
  }

  /// Feeds a packet arriving during subframe t. Returns true when it is the
  /// last packet of a window.
  bool arrive(SimTime t, std::uint32_t size) {
    advance_to(t);
    ++generated_;
    bool complete = false;
    current_arrivals_.push_back(t);
    if (current_arrivals_.size() == n_d_) {
      Pending w;
      w.index = next_index_++;
      w.start = boundary_;
      w.end = snapshot(t);
      w.first_packet = generated_ - n_d_;
      w.arrivals = std::move(current_arrivals_);
      current_arrivals_.clear();
      complete_.push_back(std::move(w));
      complete = true;
    }
    machine_.arrive(size);
    collect();
    if (complete) {
      boundary_ = complete_.back().end;
      const auto& st = machine_.state();
      boundary_.sleep_left = st.phase == Phase::S3_DrxSleep ? st.timer_remaining : 0;
    }
    return complete;
  }

  /// When the oldest finished window will have all its packets delivered.
  std::optional<SimTime> next_close_time() const {
    if (complete_.empty()) return std::nullopt;
    if (deliverable(complete_.front())) return machine_.now();
    return machine_.pending_delivery_time();
  }

  std::optional<ClosedWindow> try_close() {
    if (complete_.empty() || !deliverable(complete_.front())) return std::nullopt;
    Pending w = std::move(complete_.front());
    complete_.pop_front();

    ClosedWindow out;
    out.index = w.index;
    out.start = w.start.at;
    out.end = w.end.at;
    out.arrivals = std::move(w.arrivals);
    const std::size_t from = w.first_packet - dropped_;
    out.records.assign(records_.begin() + static_cast<std::ptrdiff_t>(from),
                       records_.begin() + static_cast<std::ptrdiff_t>(from + n_d_));

    auto& m = out.metrics;
    m.t_d = w.end.at - w.start.at;
    for (std::size_t i = 0; i < 4; ++i) m.t_in_state[i] = w.end.dwell[i] - w.start.dwell[i];
    m.cycles = static_cast<std::int64_t>(w.end.wakeups - w.start.wakeups);
    m.t_offset = std::min(w.start.sleep_left, m.t_d);
    m.alpha = m.t_d > 0 ? static_cast<double>(m.t_in_state[3]) / static_cast<double>(m.t_d) : 0.0;
    m.beta = mean_delay(out.records);
    m.f_ed = ed_index(m.alpha, m.beta, lambda_, t_max_);
    m.energy_mj = energy_mj(m.t_in_state, power_);

    // Records before the next unfinished window are no longer needed.
    const std::size_t keep_from = complete_.empty() ? generated_ - current_arrivals_.size() : complete_.front().first_packet;
    const std::size_t keep = std::min(keep_from, delivered_);
    while (dropped_ < keep) {
      records_.pop_front();
      ++dropped_;
    }
    return out;
  }

  void apply_reconfiguration(SimTime t, const DrxParams& next) {
    advance_to(t);
    machine_.apply_reconfiguration(next);
    collect();
  }

  SimTime next_on_duration_start(SimTime t) const { return machine_.next_on_duration_start(t); }

  std::vector<PacketRecord> take_fresh() { return std::exchange(fresh_, {}); }

  std::uint64_t generated() const { return generated_; }
  std::uint64_t delivered() const { return delivered_; }
  std::uint64_t pending() const { return machine_.pending_count(); }

 private:
  struct Boundary {
    SimTime at = 0;
    std::array<Subframes, 4> dwell{};
    std::uint64_t wakeups = 0;
    Subframes sleep_left = 0;  // S3 time left at the boundary, for T_offset
  };
  struct Pending {
    std::size_t index = 0;
    Boundary start, end;
    std::size_t first_packet = 0;
    std::vector<SimTime> arrivals;
  };

  Boundary snapshot(SimTime t) const {
    Boundary b;
    b.at = t;
    b.dwell = machine_.dwell();
    b.wakeups = machine_.state().drx_wakeups;
    return b;
  }

  bool deliverable(const Pending& w) const { return delivered_ >= w.first_packet + n_d_; }

  void collect() {
    for (auto& r : machine_.take_deliveries()) {
      records_.push_back(r);
      fresh_.push_back(r);
      ++delivered_;
    }
  }

  DrxMachine machine_;
  std::size_t n_d_;
  double lambda_;
  double t_max_;
  PowerProfile power_;
  Boundary boundary_;
  std::vector<SimTime> current_arrivals_;
  std::deque<Pending> complete_;
  std::deque<PacketRecord> records_;  // delivered, in arrival order, starting at packet dropped_
  std::vector<PacketRecord> fresh_;
  std::size_t dropped_ = 0;
  std::size_t generated_ = 0;
  std::size_t delivered_ = 0;
  std::size_t next_index_ = 0;
};

// ---------------------------------------------------------------------------
// Policies

/// Holds one action; only the start offset follows the traffic.
class FixedPolicy {
 public:
  FixedPolicy(const DrxAction& action, const DrxParams& initial, const ControllerConfig& cfg)
      : action_(action), params_(initial), cfg_(cfg) {}

  DecisionOutcome decide(std::span<const PacketRecord> window, const WindowMetrics& metrics,
                         std::span<const SimTime> arrivals) {
    const auto obs = observe_window(window, metrics, cfg_.window_packets, cfg_.lambda, cfg_.t_max_ms, cfg_.encoding);
    DecisionOutcome out;
    out.reward = obs.reward;
    out.state = obs.state;
    out.action = action_;
    out.n_so = compute_start_offset(arrivals, action_.cycle_subframes());
    out.params = action_.params(out.n_so);
    out.reconfigure = out.params != params_;
    out.mode_after = Mode::Exploit;
    params_ = out.params;
    return out;
  }

  Mode mode() const { return Mode::Exploit; }
  const DrxAction& action() const { return action_; }
  const DrxParams& params() const { return params_; }

 private:
  DrxAction action_;
  DrxParams params_;
  ControllerConfig cfg_;
};

/// Never touches the timers.
class StaticPolicy {
 public:
  StaticPolicy(const DrxParams& params, const ControllerConfig& cfg) : params_(params), cfg_(cfg) {}

  DecisionOutcome decide(std::span<const PacketRecord> window, const WindowMetrics& metrics,
                         std::span<const SimTime>) {
    const auto obs = observe_window(window, metrics, cfg_.window_packets, cfg_.lambda, cfg_.t_max_ms, cfg_.encoding);
    DecisionOutcome out;
    out.reward = obs.reward;
    out.state = obs.state;
    out.action = DrxAction::from_params(params_);
    out.n_so = params_.start_offset_steps();
    out.params = params_;
    out.mode_after = Mode::Exploit;
    return out;
  }

  Mode mode() const { return Mode::Exploit; }
  DrxAction action() const { return DrxAction::from_params(params_); }
  const DrxParams& params() const { return params_; }

 private:
  DrxParams params_;
  ControllerConfig cfg_;
};

using Policy = std::variant<DrxController, FixedPolicy, StaticPolicy>;

// ---------------------------------------------------------------------------
// Report

struct MetricsRow {
  std::uint32_t ue_id = 0;
  std::size_t window_index = 0;
  SimTime closed_at = 0;
  WindowMetrics metrics;
  DrxParams params;  // timers in force when the window closed
};

struct DecisionRow {
  std::uint32_t ue_id = 0;
  std::size_t window_index = 0;
  SimTime at = 0;
  DecisionOutcome outcome;
};

struct TranscriptRow {
  SliceId slice = kNoSlice;
  TranscriptEntry entry;
};

struct UeSummary {
  std::uint32_t ue_id = 0;
  SliceId slice = kNoSlice;
  std::size_t windows = 0;
  Mode final_mode = Mode::Explore;
  double mean_f_ed = 0.0;
  DrxAction action;
  DrxParams params;
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t pending = 0;
  std::size_t reconfigurations = 0;
};

struct RunReport {
  std::vector<MetricsRow> metrics;
  std::vector<DecisionRow> decisions;
  std::vector<TranscriptRow> transcripts;
  std::vector<UeSummary> ues;
  std::vector<Bytes> command_responses;
  std::vector<QTable> tables;  // one per UE under the learning policy
  SimTime end = 0;
};

// ---------------------------------------------------------------------------
// Simulation

class Simulation {
 public:
  /// with_rrc = false skips slices and signalling entirely: reconfigurations
  /// are applied straight to the DRX machine. Used by the replay oracle.
  explicit Simulation(Scenario scenario, bool with_rrc = true) : sc_(std::move(scenario)), with_rrc_(with_rrc) {
    sc_.validate();
  }

  RunReport run() {
    RunReport report;
    if (with_rrc_) {
      registry_ = std::make_unique<SliceRegistry>(RegistryConfig{sc_.slice_capacity, sc_.mode, sc_.history_capacity});
      for (const auto& s : sc_.slices) {
        SliceCommand add{CommandOp::Add, std::nullopt, {s.rat, s.default_drx.indices(), std::nullopt}};
        const auto resp = decode_response(registry_->dispatch_command(encode_command(add), 0));
        if (!resp.ok()) throw Error(ErrorCode::InvalidScenario, "slice setup was refused");
        slice_ids_.push_back(resp.slice_id);
      }
    }

    ues_.reserve(sc_.ues.size());
    for (std::size_t i = 0; i < sc_.ues.size(); ++i) ues_.push_back(make_runtime(i));
    for (std::size_t i = 0; i < ues_.size(); ++i) schedule_next_arrival(i);
    for (std::size_t i = 0; i < sc_.commands.size(); ++i) q_.push(sc_.commands[i].at, EventKind::SliceCommandDue, i);
    q_.push(sc_.duration, EventKind::SimEnd);

    SimTime clock = 0;
    while (!q_.empty()) {
      const Event e = q_.pop();
      if (e.time < clock) throw Error(ErrorCode::InvalidScenario, "event queue went back in time");
      clock = e.time;
      if (e.kind == EventKind::SimEnd) break;
      switch (e.kind) {
        case EventKind::PacketArrival: on_arrival(e, report); break;
        case EventKind::WindowClose: on_close(e, report); break;
        case EventKind::ReconfigDelivery: on_reconfig(e, report); break;
        case EventKind::SliceCommandDue: on_command(e, report); break;
        case EventKind::SimEnd: break;
      }
    }
    finish(report);
    return report;
  }

 private:
  struct TrafficSource {
    std::optional<TrafficGenerator> gen;
    const std::vector<Arrival>* trace = nullptr;
    std::size_t next = 0;

    std::optional<Arrival> pull() {
      if (gen) return gen->next();
      if (next < trace->size()) return (*trace)[next++];
      return std::nullopt;
    }
  };

  struct UeRuntime {
    std::uint32_t ue_id = 0;
    std::size_t slice_index = 0;
    SliceId slice = kNoSlice;
    bool attached = true;
    UeSession session;
    Policy policy;
    TrafficSource source;
    std::optional<SimTime> close_at;
    std::uint64_t reconfig_version = 0;
    std::optional<DrxParams> bare_pending;  // without RRC: the change waiting for delivery
    std::size_t windows = 0;
    double f_ed_sum = 0.0;
    std::size_t reconfigurations = 0;
  };

  UeRuntime make_runtime(std::size_t i) {
    const auto& spec = sc_.ues[i];
    DrxParams initial = sc_.slices.empty() ? DrxParams{} : sc_.slices[spec.slice].default_drx;
    if (sc_.policy == PolicyKind::Fixed) initial = sc_.fixed_action->params(0);

    SliceId slice = kNoSlice;
    if (with_rrc_) {
      slice = slice_ids_.at(spec.slice);
      auto& ctx = registry_->context(slice);
      on_slice(ctx, [&] {
        ctx.add_ue(spec.ue_id);
        ctx.run(spec.ue_id, {Procedure::Attach, std::nullopt, {}}, 0);
        if (initial != ctx.ue(spec.ue_id).drx) ctx.run(spec.ue_id, {Procedure::Reconfigure, initial, {}}, 0);
      });
    }

    const auto& cc = sc_.controller;
    Policy policy = [&]() -> Policy {
      switch (sc_.policy) {
        case PolicyKind::Learn:
          return DrxController(cc, initial, sc_.seed ^ (0x9E3779B97F4A7C15ull * (spec.ue_id + 1ull)));
        case PolicyKind::Fixed: return FixedPolicy(*sc_.fixed_action, initial, cc);
        case PolicyKind::Static: break;
      }
      return StaticPolicy(initial, cc);
    }();

    UeRuntime rt{spec.ue_id, spec.slice, slice, true,
                 UeSession(initial, cc.window_packets, cc.lambda, cc.t_max_ms, sc_.tx, sc_.power),
                 std::move(policy), {}, std::nullopt, 0, std::nullopt, 0, 0.0, 0};
    if (spec.trace.empty()) {
      rt.source.gen.emplace(spec.traffic, sc_.seed, spec.ue_id);
    } else {
      rt.source.trace = &spec.trace;
    }
    return rt;
  }

  template <typename F>
  void on_slice(SliceContext& ctx, F&& fn) {
    ctx.executor().post(std::forward<F>(fn)).get();
  }

  void schedule_next_arrival(std::size_t i) {
    auto& u = ues_[i];
    if (!u.attached) return;
    auto a = u.source.pull();
    if (!a || a->time >= sc_.duration) return;
    q_.push(a->time, EventKind::PacketArrival, i, a->size);
  }

  void want_close(std::size_t i) {
    auto& u = ues_[i];
    const auto t = u.session.next_close_time();
    if (!t) return;
    if (u.close_at && *u.close_at <= *t) return;
    u.close_at = t;
    q_.push(*t, EventKind::WindowClose, i);
  }

  void on_arrival(const Event& e, RunReport& report) {
    auto& u = ues_[e.target];
    if (!u.attached) return;
    const bool complete = u.session.arrive(e.time, static_cast<std::uint32_t>(e.tag));
    store_history(u);
    if (complete) want_close(e.target);
    schedule_next_arrival(e.target);
    (void)report;
  }

  void on_close(const Event& e, RunReport& report) {
    auto& u = ues_[e.target];
    if (!u.close_at || *u.close_at != e.time) return;  // superseded
    u.close_at.reset();
    u.session.advance_to(e.time);
    store_history(u);
    while (auto w = u.session.try_close()) decide(e.target, *w, e.time, report);
    want_close(e.target);
  }

  void decide(std::size_t i, const ClosedWindow& w, SimTime now, RunReport& report) {
    auto& u = ues_[i];
    const DrxParams in_force = u.session.machine().params();
    report.metrics.push_back({u.ue_id, w.index, now, w.metrics, in_force});
    ++u.windows;
    u.f_ed_sum += w.metrics.f_ed;

    DecisionOutcome out = std::visit([&](auto& p) { return p.decide(w.records, w.metrics, w.arrivals); }, u.policy);
    report.decisions.push_back({u.ue_id, w.index, now, out});
    if (!out.reconfigure || !u.attached) return;

    bool scheduled = false;
    if (with_rrc_) {
      SliceCommand mod{CommandOp::Modify, u.slice, {std::nullopt, out.params.indices(), u.ue_id}};
      const auto resp = decode_response(registry_->dispatch_command(encode_command(mod), now));
      if (!resp.ok()) return;
      auto ctx = registry_->find(u.slice);
      bool pending = false;
      on_slice(*ctx, [&] { pending = ctx->ue(u.ue_id).pending_drx.has_value(); });
      scheduled = pending;
    } else {
      u.bare_pending = out.params != u.session.machine().params() ? std::optional(out.params) : std::nullopt;
      scheduled = u.bare_pending.has_value();
    }
    ++u.reconfig_version;  // any older delivery is now stale
    if (scheduled) {
      const SimTime at = u.session.next_on_duration_start(now + 1);
      if (at < sc_.duration) q_.push(at, EventKind::ReconfigDelivery, i, u.reconfig_version);
    }
  }

  void on_reconfig(const Event& e, RunReport& report) {
    auto& u = ues_[e.target];
    if (e.tag != u.reconfig_version || !u.attached) return;
    u.session.advance_to(e.time);
    std::optional<DrxParams> next;
    if (with_rrc_) {
      auto ctx = registry_->find(u.slice);
      if (!ctx) return;
      on_slice(*ctx, [&] { next = ctx->deliver_reconfiguration(u.ue_id, e.time); });
    } else {
      next = std::exchange(u.bare_pending, std::nullopt);
    }
    if (!next) return;
    u.session.apply_reconfiguration(e.time, *next);
    ++u.reconfigurations;
    store_history(u);
    want_close(e.target);
    (void)report;
  }

  void on_command(const Event& e, RunReport& report) {
    const auto& c = sc_.commands[e.target];
    SliceCommand cmd{c.op, c.op == CommandOp::Add ? std::nullopt : std::optional(c.target), {c.rat, c.drx, std::nullopt}};
    report.command_responses.push_back(registry_ ? registry_->dispatch_command(encode_command(cmd), e.time) : Bytes{});
    if (c.op == CommandOp::Delete && registry_ && !registry_->find(c.target)) {
      for (auto& u : ues_)
        if (u.slice == c.target) u.attached = false;
    }
  }

  void store_history(UeRuntime& u) {
    auto fresh = u.session.take_fresh();
    if (!with_rrc_ || fresh.empty() || !u.attached) return;
    auto ctx = registry_->find(u.slice);
    if (!ctx) return;
    on_slice(*ctx, [&] {
      auto& ue = ctx->ue(u.ue_id);
      for (const auto& r : fresh) store_packet_record(ue, r);
    });
  }

  void finish(RunReport& report) {
    report.end = sc_.duration;
    for (auto& u : ues_) {
      if (u.attached) {
        u.session.advance_to(sc_.duration);
        store_history(u);
      }
      UeSummary s;
      s.ue_id = u.ue_id;
      s.slice = u.slice;
      s.windows = u.windows;
      s.mean_f_ed = u.windows ? u.f_ed_sum / static_cast<double>(u.windows) : 0.0;
      std::visit(
          [&](auto& p) {
            s.final_mode = p.mode();
            s.action = p.action();
            s.params = p.params();
          },
          u.policy);
      s.generated = u.session.generated();
      s.delivered = u.session.delivered();
      s.pending = u.session.pending();
      s.reconfigurations = u.reconfigurations;
      report.ues.push_back(s);
      if (auto* c = std::get_if<DrxController>(&u.policy)) report.tables.push_back(c->table());
    }
    if (!registry_) return;
    // LTE-like sessions end with an explicit release.
    for (auto& u : ues_) {
      if (!u.attached || sc_.slices[u.slice_index].rat != RatFlavor::LteLike) continue;
      auto ctx = registry_->find(u.slice);
      if (!ctx) continue;
      on_slice(*ctx, [&] {
        if (ctx->ue(u.ue_id).rrc_state == RrcState::Connected)
          ctx->run(u.ue_id, {Procedure::Release, std::nullopt, {}}, sc_.duration);
      });
    }
    registry_->collect();
    for (const auto& ctx : registry_->all_contexts()) {
      on_slice_or_direct(*ctx, [&] {
        for (const auto& t : ctx->transcript()) report.transcripts.push_back({ctx->id(), t});
      });
    }
  }

  template <typename F>
  void on_slice_or_direct(SliceContext& ctx, F&& fn) {
    // Deleted slices have stopped their worker; their state is final.
    if (ctx.descriptor().state == SliceState::Deleting) {
      fn();
    } else {
      on_slice(ctx, std::forward<F>(fn));
    }
  }

  Scenario sc_;
  bool with_rrc_;
  std::unique_ptr<SliceRegistry> registry_;
  std::vector<SliceId> slice_ids_;
  std::vector<UeRuntime> ues_;
  EventQueue q_;
};

inline RunReport run(const Scenario& scenario) { return Simulation(scenario).run(); }

// ---------------------------------------------------------------------------
// Replay oracle

/// Longest time a held packet can wait, plus slack for the final window.
inline constexpr SimTime kReplayTail = 36 * kCycleGroup + 1;

/// Mean per-window f_ED of one fixed action over a fixed trace. The start
/// offset follows each window's arrivals, as the controller does.
inline double replay_with_action(const std::vector<Arrival>& trace, const DrxAction& action,
                                 const ControllerConfig& cfg, const TxModel& tx = {}, const PowerProfile& power = {}) {
  if (trace.empty()) throw Error(ErrorCode::EmptyWindow, "replay needs a nonempty trace");
  Scenario sc;
  sc.duration = trace.back().time + kReplayTail;
  sc.slices.push_back({RatFlavor::NbIotUpOpt, {}});
  sc.ues.push_back({1, 0, {}, trace});
  sc.controller = cfg;
  sc.policy = PolicyKind::Fixed;
  sc.fixed_action = action;
  sc.tx = tx;
  sc.power = power;
  const auto report = Simulation(std::move(sc), false).run();
  if (report.ues.front().windows == 0) return 0.0;
  return report.ues.front().mean_f_ed;
}

struct OracleRow {
  DrxAction action;
  bool feasible = true;
  double f_ed = 0.0;
};

/// Every one of the 672 index combinations, best first. Infeasible
/// combinations are listed last without a score.
inline std::vector<OracleRow> oracle_sweep(const std::vector<Arrival>& trace, const ControllerConfig& cfg,
                                           const TxModel& tx = {}, const PowerProfile& power = {}) {
  std::vector<OracleRow> rows;
  rows.reserve(kActionCount);
  for (std::size_t i = 0; i < kActionCount; ++i) {
    const auto a = DrxAction::from_index(i);
    OracleRow r{a, a.feasible(), 0.0};
    if (r.feasible) r.f_ed = replay_with_action(trace, a, cfg, tx, power);
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const OracleRow& x, const OracleRow& y) {
    if (x.feasible != y.feasible) return x.feasible;
    return x.f_ed > y.f_ed;
  });
  return rows;
}

}  // namespace ciotsim
