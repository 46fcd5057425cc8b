// Copyright 2026 The ciotsim Authors. SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "ciotsim/qlearn.hpp"

using namespace ciotsim;

namespace {

DecisionState counts(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d) {
  DecisionState s;
  s.counts = {a, b, c, d};
  return s;
}

}  // namespace

TEST(Actions, IndexBijection) {
  std::set<std::uint16_t> seen;
  for (std::size_t i = 0; i < kActionCount; ++i) {
    const auto a = DrxAction::from_index(i);
    EXPECT_EQ(a.index(), i);
    seen.insert(a.index());
  }
  EXPECT_EQ(seen.size(), 672u);
  EXPECT_EQ(ActionSpace::all().size(), 672u);
  EXPECT_EQ(ActionSpace::feasible().size(), 648u);
  EXPECT_EQ(ActionSpace::feasible(std::uint8_t{0}, std::uint8_t{0}).size(), 12u);
  EXPECT_FALSE(DrxAction({0, 6, 0}).feasible());  // T_on 512 >= T_c 256
  const auto p = DrxAction{3, 2, 5}.params(10);
  EXPECT_EQ(p, (DrxParams{1536, 48, 128, 60}));
  EXPECT_EQ(DrxAction::from_params(p), (DrxAction{3, 2, 5}));
}

TEST(State, CountsPerPhase) {
  std::vector<PacketRecord> w(10, PacketRecord{0, 1, 5, Phase::S3_DrxSleep});
  EXPECT_EQ(make_state(w).counts, (std::array<std::uint16_t, 4>{0, 0, 0, 10}));
  w[0].state_at_arrival = Phase::S0_Receiving;
  w[1].state_at_arrival = Phase::S2_DrxActive;
  const auto s = make_state(w);
  EXPECT_EQ(s.counts, (std::array<std::uint16_t, 4>{1, 0, 1, 8}));
  EXPECT_EQ(s.total(), 10u);
  EXPECT_EQ(make_state(w, StateEncoding::RawSequence).sequence.size(), 10u);
}

TEST(Observe, RewardFromMetrics) {
  std::vector<PacketRecord> w(10);
  WindowMetrics m;
  m.alpha = 1.0;
  EXPECT_DOUBLE_EQ(observe_window(w, m, 10, 0.5, 300).reward, 1.0);
  m.alpha = 0.6596;
  m.beta = 100;
  EXPECT_NEAR(observe_window(w, m, 10, 0.5, 300).reward, 0.6631, 5e-5);
  EXPECT_THROW(observe_window(std::span(w).first(9), m, 10, 0.5, 300), Error);
}

TEST(QUpdate, Arithmetic) {
  QTable t;
  const auto s = counts(0, 0, 0, 10), s2 = counts(1, 0, 0, 9);
  const DrxAction a{1, 1, 1};
  const auto space = ActionSpace::feasible();
  EXPECT_NEAR(q_update(t, s, a, 0.5, s2, space), 0.05, 1e-15);
  EXPECT_NEAR(t.value(s, a), 0.05, 1e-15);

  QTable u;
  u.set_value(s2, DrxAction{5, 0, 0}, 1.0);
  q_update(u, s, a, 0.0, s2, space);
  EXPECT_NEAR(u.value(s, a), 0.09, 1e-15);

  u.mode = Mode::Exploit;
  EXPECT_THROW(q_update(u, s, a, 0.0, s2, space), Error);
}

TEST(QUpdate, StaysBounded) {
  // |Q| <= R / (1 - gamma) for rewards in [-R, R].
  Hyperparameters h;
  h.learning_rate = 0.3;
  h.discount = 0.8;
  QTable t(h);
  Rng rng = make_rng(12);
  const auto space = ActionSpace::feasible(std::uint8_t{1}, std::nullopt);
  std::uniform_int_distribution<std::uint32_t> k(0, 3);
  std::uniform_real_distribution<double> r(-2.0, 1.0);
  for (int i = 0; i < 20000; ++i) {
    const auto s = counts(k(rng), 0, 0, 1), s2 = counts(k(rng), 0, 0, 1);
    const auto a = DrxAction::from_index(space.indices()[rng() % space.size()]);
    q_update(t, s, a, r(rng), s2, space);
    ASSERT_LE(std::abs(t.value(s, a)), 2.0 / (1 - 0.8) + 1e-9);
  }
}

TEST(Select, GreedyAndTies) {
  QTable t;
  t.hyper.epsilon = 0.0;
  Rng rng = make_rng(1);
  const auto s = counts(0, 0, 0, 10);
  const auto space = ActionSpace::feasible();
  EXPECT_EQ(select_action(t, s, rng, space), (DrxAction{0, 0, 0}));
  t.set_value(s, DrxAction{7, 3, 2}, 0.9);
  t.set_value(s, DrxAction{2, 3, 2}, 0.5);
  EXPECT_EQ(select_action(t, s, rng, space), (DrxAction{7, 3, 2}));
  t.set_value(s, DrxAction{1, 0, 0}, 0.9);
  EXPECT_EQ(t.greedy(s, space), (DrxAction{1, 0, 0}));  // tie: lower index

  // All entries negative: unvisited zero wins, lowest index first.
  QTable n;
  n.set_value(s, DrxAction{0, 0, 0}, -1.0);
  EXPECT_EQ(n.greedy(s, space), (DrxAction{0, 0, 1}));
}

TEST(Select, FullExplorationCoversAllActions) {
  QTable t;
  t.hyper.epsilon = 1.0;
  Rng rng = make_rng(2);
  std::set<std::uint16_t> hit;
  const auto space = ActionSpace::all();
  for (int i = 0; i < 20000; ++i) hit.insert(select_action(t, counts(0, 0, 0, 1), rng, space).index());
  EXPECT_EQ(hit.size(), 672u);
}

TEST(StartOffset, Examples) {
  const std::vector<SimTime> a{300, 556};
  EXPECT_EQ(compute_start_offset(a, 256), 44);
  const std::vector<SimTime> zero{0, 256, 512};
  EXPECT_EQ(compute_start_offset(zero, 256), 0);
  const std::vector<SimTime> half{64, 192};
  EXPECT_EQ(compute_start_offset(half, 256), 128);
  const std::vector<SimTime> big{1000, 3000};  // T_c 2048: mean phase 976/2048
  EXPECT_EQ(compute_start_offset(big, 2048), 122);
  EXPECT_THROW(compute_start_offset({}, 256), Error);
}

TEST(Fading, AgainstExpectedReward) {
  QTable t;
  t.mode = Mode::Exploit;
  const auto s = counts(0, 0, 0, 10);
  const DrxAction a{2, 0, 0};
  EXPECT_EQ(fading_check(t, s, a, -5.0), Mode::Exploit);  // no expectation yet
  t.set_expected_reward(s, a, 0.8, 20);
  EXPECT_EQ(fading_check(t, s, a, 0.78), Mode::Exploit);
  EXPECT_EQ(fading_check(t, s, a, 0.3), Mode::Explore);
  EXPECT_EQ(fading_check(t, s, a, 0.9), Mode::Exploit);
  t.hyper.fading_reference = FadingReference::QValue;
  t.set_value(s, a, 0.8);
  EXPECT_EQ(fading_check(t, s, a, 0.3), Mode::Explore);
  t.mode = Mode::Explore;
  EXPECT_THROW(fading_check(t, s, a, 0.3), Error);
}

TEST(Convergence, Rule) {
  QTable t;
  ExplorationHistory h;
  for (int i = 0; i < 19; ++i) {
    h.push(0.001, 20);
    ++h.windows;
  }
  EXPECT_EQ(maybe_exploit(t, h), Mode::Explore);
  h.push(0.5, 20);  // large delta at window 19
  ++h.windows;
  EXPECT_EQ(maybe_exploit(t, h), Mode::Explore);
  for (int i = 0; i < 20; ++i) {
    h.push(-0.009, 20);
    ++h.windows;
  }
  EXPECT_EQ(maybe_exploit(t, h), Mode::Exploit);

  ExplorationHistory cap;
  cap.windows = 100;
  cap.push(1.0, 20);
  EXPECT_EQ(maybe_exploit(t, cap), Mode::Exploit);
  cap.windows = 99;
  EXPECT_EQ(maybe_exploit(t, cap), Mode::Explore);
}

TEST(QTable, DumpLoadRoundTrip) {
  QTable t;
  t.set_value(counts(1, 2, 3, 4), DrxAction{3, 1, 4}, 0.123456789012345678);
  t.set_value(counts(0, 0, 0, 10), DrxAction{0, 0, 0}, -2.5);
  t.record_reward(counts(0, 0, 0, 10), DrxAction{0, 0, 0}, 0.7);
  t.record_reward(counts(0, 0, 0, 10), DrxAction{0, 0, 0}, 0.5);
  t.mode = Mode::Exploit;
  std::stringstream a;
  t.dump(a);
  const QTable u = QTable::load(a, t.hyper);
  EXPECT_EQ(u.mode, Mode::Exploit);
  EXPECT_EQ(u.value(counts(1, 2, 3, 4), DrxAction{3, 1, 4}), 0.123456789012345678);
  EXPECT_NEAR(u.expected_reward(counts(0, 0, 0, 10), DrxAction{0, 0, 0})->mean, 0.6, 1e-15);
  std::stringstream b;
  u.dump(b);
  EXPECT_EQ(a.str(), b.str());
  std::istringstream junk("Q nonsense\n");
  EXPECT_THROW(QTable::load(junk, t.hyper), Error);
}

TEST(Hyper, Validation) {
  Hyperparameters h;
  EXPECT_NO_THROW(h.validate());
  h.discount = 1.0;
  EXPECT_THROW(h.validate(), Error);
  h = {};
  h.learning_rate = 0.0;
  EXPECT_THROW(h.validate(), Error);
  h = {};
  h.epsilon_floor = 0.5;
  EXPECT_THROW(h.validate(), Error);
}

TEST(Controller, ExploresThenExploitsAndIsSeeded) {
  ControllerConfig cfg;
  auto drive = [&](std::uint64_t seed) {
    DrxController c(cfg, DrxParams{}, seed);
    std::vector<DecisionOutcome> out;
    for (int w = 0; w < 150; ++w) {
      std::vector<PacketRecord> recs(10, PacketRecord{0, 1, 0, Phase::S3_DrxSleep});
      WindowMetrics m;
      m.alpha = 0.9 - 0.01 * c.action().cycle;
      m.beta = 20.0 * c.action().cycle;
      std::vector<SimTime> arr(10, 40 * w);
      out.push_back(c.decide(recs, m, arr));
    }
    return out;
  };
  const auto a = drive(5), b = drive(5);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].action, b[i].action);
    EXPECT_EQ(a[i].reward, b[i].reward);
  }
  std::size_t first_exploit = a.size();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].mode_after == Mode::Exploit) {
      first_exploit = i;
      break;
    }
  EXPECT_LT(first_exploit, 100u);
  for (std::size_t i = first_exploit; i < a.size(); ++i) EXPECT_EQ(a[i].action, a[first_exploit].action);
}

TEST(Controller, FadesWhenRewardDrops) {
  ControllerConfig cfg;
  cfg.convergence.max_windows = 5;
  DrxController c(cfg, DrxParams{}, 1);
  std::vector<PacketRecord> recs(10, PacketRecord{0, 1, 0, Phase::S3_DrxSleep});
  std::vector<SimTime> arr(10, 0);
  WindowMetrics good;
  good.alpha = 0.9;
  for (int i = 0; i < 10; ++i) c.decide(recs, good, arr);
  ASSERT_EQ(c.mode(), Mode::Exploit);
  WindowMetrics bad;
  bad.beta = 600;
  const auto o = c.decide(recs, bad, arr);
  EXPECT_TRUE(o.faded);
  EXPECT_EQ(c.mode(), Mode::Explore);
  EXPECT_DOUBLE_EQ(c.table().hyper.epsilon, cfg.hyper.epsilon_start);
}

TEST(Controller, PinnedDimensionsHold) {
  ControllerConfig cfg;
  cfg.pin_on_duration = 2;
  cfg.pin_inactivity = 0;
  cfg.hyper.epsilon = cfg.hyper.epsilon_start = 1.0;
  DrxController c(cfg, DrxAction{0, 2, 0}.params(0), 3);
  std::vector<PacketRecord> recs(10);
  std::vector<SimTime> arr(10, 0);
  for (int i = 0; i < 50; ++i) {
    const auto o = c.decide(recs, WindowMetrics{}, arr);
    EXPECT_EQ(o.action.on_duration, 2);
    EXPECT_EQ(o.action.inactivity, 0);
  }
}
