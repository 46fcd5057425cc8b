// Copyright 2026 The ciotsim Authors. SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <map>

#include "ciotsim/sim.hpp"

using namespace ciotsim;

namespace {

Scenario one_ue(double idt_ms, SimTime duration, std::uint64_t seed = 1) {
  Scenario sc;
  sc.seed = seed;
  sc.duration = duration;
  sc.slices.push_back({RatFlavor::NbIotUpOpt, DrxParams::from_indices({1, 1, 1, 0})});
  sc.ues.push_back({1, 0, TrafficSchedule({{1.0 / idt_ms, 1.0 / 600, 0}}), {}});
  return sc;
}

Scenario two_slices(std::uint64_t seed) {
  Scenario sc;
  sc.seed = seed;
  sc.duration = 600000;
  sc.slices.push_back({RatFlavor::NbIotCpOpt, {}});
  sc.slices.push_back({RatFlavor::LteLike, DrxParams::from_indices({3, 1, 2, 0})});
  sc.ues.push_back({1, 0, TrafficSchedule({{1.0 / 800, 1.0 / 200, 0}}), {}});
  sc.ues.push_back({2, 0, TrafficSchedule({{1.0 / 300, 1.0 / 200, 0}}), {}});
  sc.ues.push_back({3, 1, TrafficSchedule({{1.0 / 2000, 1.0 / 900, 0}}), {}});
  return sc;
}

}  // namespace

TEST(EventQueue, OrdersByTimeKindThenSeq) {
  EventQueue q;
  q.push(10, EventKind::SimEnd);
  q.push(10, EventKind::PacketArrival, 1);
  q.push(10, EventKind::ReconfigDelivery);
  q.push(5, EventKind::SliceCommandDue);
  q.push(10, EventKind::PacketArrival, 2);
  q.push(10, EventKind::WindowClose);
  std::vector<std::pair<EventKind, std::size_t>> got;
  while (!q.empty()) {
    const auto e = q.pop();
    got.emplace_back(e.kind, e.target);
  }
  const std::vector<std::pair<EventKind, std::size_t>> want{
      {EventKind::SliceCommandDue, 0}, {EventKind::ReconfigDelivery, 0}, {EventKind::PacketArrival, 1},
      {EventKind::PacketArrival, 2},   {EventKind::WindowClose, 0},      {EventKind::SimEnd, 0}};
  EXPECT_EQ(got, want);
}

TEST(Simulation, NoUesMeansNoWindows) {
  Scenario sc;
  sc.duration = 1000;
  sc.slices.push_back({RatFlavor::NbIotUpOpt, {}});
  const auto r = run(sc);
  EXPECT_TRUE(r.metrics.empty());
  EXPECT_TRUE(r.decisions.empty());
  EXPECT_TRUE(r.ues.empty());
  EXPECT_EQ(r.end, 1000);
}

TEST(Simulation, PacketsAreConservedAndWindowsAreConsistent) {
  const auto r = run(two_slices(3));
  ASSERT_EQ(r.ues.size(), 3u);
  std::map<std::uint32_t, std::size_t> next_index;
  std::map<std::uint32_t, SimTime> last_close;
  for (const auto& m : r.metrics) {
    EXPECT_EQ(m.window_index, next_index[m.ue_id]++);
    EXPECT_GE(m.closed_at, last_close[m.ue_id]);
    last_close[m.ue_id] = m.closed_at;
    const auto& t = m.metrics.t_in_state;
    EXPECT_EQ(t[0] + t[1] + t[2] + t[3], m.metrics.t_d);
    EXPECT_GE(m.metrics.alpha, 0.0);
    EXPECT_LE(m.metrics.alpha, 1.0);
    EXPECT_GE(m.metrics.beta, 0.0);
    EXPECT_NEAR(m.metrics.f_ed, ed_index(m.metrics.alpha, m.metrics.beta, 0.5, 300), 1e-12);
  }
  for (const auto& u : r.ues) {
    EXPECT_EQ(u.generated, u.delivered + u.pending) << "ue " << u.ue_id;
    EXPECT_EQ(u.windows, next_index[u.ue_id]);
    EXPECT_GE(u.delivered, 10 * u.windows);
  }
  EXPECT_EQ(r.decisions.size(), r.metrics.size());
  EXPECT_EQ(r.tables.size(), 3u);
}

TEST(Simulation, RepeatRunsAreIdentical) {
  const auto a = run(two_slices(7));
  const auto b = run(two_slices(7));
  ASSERT_EQ(a.metrics.size(), b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    EXPECT_EQ(a.metrics[i].metrics.f_ed, b.metrics[i].metrics.f_ed);
    EXPECT_EQ(a.metrics[i].params, b.metrics[i].params);
  }
  ASSERT_EQ(a.transcripts.size(), b.transcripts.size());
  for (std::size_t i = 0; i < a.transcripts.size(); ++i) EXPECT_EQ(a.transcripts[i].entry, b.transcripts[i].entry);
  const auto c = run(two_slices(8));
  auto f_eds = [](const RunReport& r) {
    std::vector<double> v;
    for (const auto& m : r.metrics) v.push_back(m.metrics.f_ed);
    return v;
  };
  EXPECT_NE(f_eds(a), f_eds(c));
}

TEST(Simulation, ThreadedMatchesDeterministic) {
  auto sc = two_slices(5);
  const auto a = run(sc);
  sc.mode = ExecMode::Threaded;
  const auto b = run(sc);
  ASSERT_EQ(a.transcripts.size(), b.transcripts.size());
  for (std::size_t i = 0; i < a.transcripts.size(); ++i) EXPECT_EQ(a.transcripts[i].entry, b.transcripts[i].entry);
  ASSERT_EQ(a.decisions.size(), b.decisions.size());
  for (std::size_t i = 0; i < a.decisions.size(); ++i)
    EXPECT_EQ(a.decisions[i].outcome.action, b.decisions[i].outcome.action);
}

// A reconfiguration reaches the UE at an on-duration start of the timers
// it replaces, after the decision that asked for it.
TEST(Simulation, ReconfigurationLandsOnOnDuration) {
  const auto r = run(two_slices(2));
  std::size_t checked = 0;
  for (const auto& t : r.transcripts) {
    if (t.entry.proc != Procedure::Reconfigure || t.entry.seq != 0) continue;
    const DecisionRow* last = nullptr;
    const MetricsRow* row = nullptr;
    for (std::size_t i = 0; i < r.decisions.size(); ++i) {
      const auto& d = r.decisions[i];
      if (d.ue_id == t.entry.ue_id && d.at < t.entry.time && d.outcome.reconfigure) {
        last = &d;
        row = &r.metrics[i];
      }
    }
    ASSERT_NE(last, nullptr);
    const DrxParams& old = row->params;
    EXPECT_EQ((t.entry.time - old.start_offset) % old.cycle, 0) << "at " << t.entry.time;
    ++checked;
  }
  EXPECT_GT(checked, 0u);
}

TEST(Simulation, StationaryTrafficReachesExploit) {
  for (double idt : {200.0, 1000.0, 6000.0}) {
    const auto sc = one_ue(idt, static_cast<SimTime>(idt * 10 * 140));
    const auto r = run(sc);
    std::optional<std::size_t> first;
    for (std::size_t i = 0; i < r.decisions.size(); ++i)
      if (r.decisions[i].outcome.mode_after == Mode::Exploit) {
        first = i;
        break;
      }
    ASSERT_TRUE(first) << "idt " << idt;
    EXPECT_LE(*first + 1, 100u);
  }
}

TEST(Simulation, DeletedSliceDetachesItsUes) {
  auto sc = two_slices(4);
  sc.commands.push_back({300000, CommandOp::Delete, 2, std::nullopt, std::nullopt});
  const auto r = run(sc);
  ASSERT_EQ(r.command_responses.size(), 1u);
  EXPECT_TRUE(decode_response(r.command_responses[0]).ok());
  for (const auto& t : r.transcripts)
    if (t.slice == 2) EXPECT_LE(t.entry.time, 300000);
}

TEST(Replay, FixedActionIsDeterministicAndBounded) {
  const TrafficSchedule s({{1.0 / 1000, 1.0 / 600, 0}});
  const auto rows = generate_trace(s, 3, 1, 400000);
  std::vector<Arrival> trace;
  for (const auto& r : rows) trace.push_back({r.arrival_ms, r.size_bytes});
  const ControllerConfig cfg;
  const DrxAction a{2, 1, 1};
  const double x = replay_with_action(trace, a, cfg);
  EXPECT_EQ(x, replay_with_action(trace, a, cfg));
  EXPECT_LE(x, 1.0);
  EXPECT_GE(x, 1.0 - 0.5 * (1.0 + 36.0 * 256 / 300.0));
  EXPECT_THROW(replay_with_action({}, a, cfg), Error);
}

TEST(Replay, OracleListsEveryActionBestFirst) {
  const TrafficSchedule s({{1.0 / 500, 1.0 / 600, 0}});
  const auto rows = generate_trace(s, 9, 1, 40000);
  std::vector<Arrival> trace;
  for (const auto& r : rows) trace.push_back({r.arrival_ms, r.size_bytes});
  const auto sweep = oracle_sweep(trace, ControllerConfig{});
  ASSERT_EQ(sweep.size(), kActionCount);
  std::size_t feasible = 0;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    if (sweep[i].feasible) ++feasible;
    if (i > 0 && sweep[i].feasible && sweep[i - 1].feasible) EXPECT_GE(sweep[i - 1].f_ed, sweep[i].f_ed);
    if (i > 0) EXPECT_FALSE(sweep[i].feasible && !sweep[i - 1].feasible);
  }
  EXPECT_EQ(feasible, 648u);
  EXPECT_EQ(sweep.front().f_ed, replay_with_action(trace, sweep.front().action, ControllerConfig{}));
}

TEST(Scenario, ValidationNamesTheProblem) {
  auto expect_bad = [](Scenario sc, const std::string& needle) {
    try {
      sc.validate();
      ADD_FAILURE() << "accepted: " << needle;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidScenario);
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  auto sc = one_ue(1000, 1000);
  sc.ues[0].slice = 3;
  expect_bad(sc, "ues[0].slice");
  sc = one_ue(1000, 1000);
  sc.ues.push_back(sc.ues[0]);
  expect_bad(sc, "ues[1].ue_id");
  sc = one_ue(1000, 0);
  expect_bad(sc, "duration_ms");
  sc = one_ue(1000, 1000);
  sc.policy = PolicyKind::Fixed;
  expect_bad(sc, "fixed_action");
  sc.fixed_action = DrxAction{0, 6, 0};
  expect_bad(sc, "fixed_action");
  sc = one_ue(1000, 1000);
  sc.commands.push_back({2000, CommandOp::Delete, 1, std::nullopt, std::nullopt});
  expect_bad(sc, "commands[0].at_ms");
  sc = one_ue(1000, 1000);
  sc.ues[0].trace = {{5, 1}, {4, 1}};
  expect_bad(sc, "back in time");
}
