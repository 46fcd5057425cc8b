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

/*! \file  qlearn.hpp
 *  \brief Tabular Q-learning controller for per-UE DRX timers.
 *
 *  Every N_d downlink packets the controller observes the window (reward is
 *  the ED index, state is where the packets found the UE), then either
 *  learns and picks new timers (explore) or holds the timers and watches for
 *  a drop in reward (exploit). The start offset is not learned; it is set
 *  from the mean arrival phase of the last window.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ciotsim/drx.hpp"
#include "ciotsim/error.hpp"
#include "ciotsim/traffic.hpp"

namespace ciotsim {

// ---------------------------------------------------------------------------
// States

enum class StateEncoding : std::uint8_t {
  Counts,       // how many window packets met the UE in S0..S3
  RawSequence,  // the ordered phases themselves; only sensible for small N_d
};

struct DecisionState {
  std::array<std::uint16_t, 4> counts{};
  std::vector<std::uint8_t> sequence;  // empty under StateEncoding::Counts

  std::uint32_t total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }

  friend bool operator==(const DecisionState&, const DecisionState&) = default;
};

inline DecisionState make_state(std::span<const PacketRecord> window, StateEncoding enc = StateEncoding::Counts) {
  DecisionState s;
  for (const auto& r : window) {
    ++s.counts[index(r.state_at_arrival)];
    if (enc == StateEncoding::RawSequence) s.sequence.push_back(static_cast<std::uint8_t>(r.state_at_arrival));
  }
  return s;
}

struct DecisionStateHash {
  std::size_t operator()(const DecisionState& s) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) { h = (h ^ v) * 1099511628211ull; };
    for (auto c : s.counts) mix(c);
    for (auto v : s.sequence) mix(v + 16);
    return static_cast<std::size_t>(h);
  }
};

// ---------------------------------------------------------------------------
// Actions

inline constexpr std::size_t kCycleChoices = kCycleMultipliers.size();
inline constexpr std::size_t kOnDurationChoices = kOnDurationPeriods.size();
inline constexpr std::size_t kInactivityChoices = kInactivityPeriods.size();
inline constexpr std::size_t kActionCount = kCycleChoices * kOnDurationChoices * kInactivityChoices;  // 672

struct DrxAction {
  std::uint8_t cycle = 0;
  std::uint8_t on_duration = 0;
  std::uint8_t inactivity = 0;

  /// Lexicographic (cycle, on_duration, inactivity) rank in [0, 672).
  std::uint16_t index() const {
    return static_cast<std::uint16_t>((cycle * kOnDurationChoices + on_duration) * kInactivityChoices + inactivity);
  }

  static DrxAction from_index(std::size_t i) {
    DrxAction a;
    a.inactivity = static_cast<std::uint8_t>(i % kInactivityChoices);
    a.on_duration = static_cast<std::uint8_t>((i / kInactivityChoices) % kOnDurationChoices);
    a.cycle = static_cast<std::uint8_t>(i / (kInactivityChoices * kOnDurationChoices));
    return a;
  }

  static DrxAction from_params(const DrxParams& p) {
    const auto idx = p.indices();
    return {idx.cycle, idx.on_duration, idx.inactivity};
  }

  Subframes cycle_subframes() const { return kCycleGroup * kCycleMultipliers.at(cycle); }
  Subframes on_duration_subframes() const { return kPdcchPeriod * kOnDurationPeriods.at(on_duration); }

  /// On-duration must be shorter than the cycle; three index combinations are not.
  bool feasible() const { return on_duration_subframes() < cycle_subframes(); }

  DrxParams params(int n_so) const {
    return DrxParams::from_indices({cycle, on_duration, inactivity, static_cast<std::uint8_t>(n_so)});
  }

  friend bool operator==(const DrxAction&, const DrxAction&) = default;
};

/// The subset of action indices a controller may choose from, ascending.
class ActionSpace {
 public:
  /// All 672 index combinations, feasible or not.
  static ActionSpace all() {
    ActionSpace s;
    for (std::size_t i = 0; i < kActionCount; ++i) s.allowed_.push_back(static_cast<std::uint16_t>(i));
    return s;
  }

  /// Feasible actions, optionally with some dimensions held fixed.
  static ActionSpace feasible(std::optional<std::uint8_t> pin_on_duration = std::nullopt,
                              std::optional<std::uint8_t> pin_inactivity = std::nullopt) {
    ActionSpace s;
    for (std::size_t i = 0; i < kActionCount; ++i) {
      const auto a = DrxAction::from_index(i);
      if (!a.feasible()) continue;
      if (pin_on_duration && a.on_duration != *pin_on_duration) continue;
      if (pin_inactivity && a.inactivity != *pin_inactivity) continue;
      s.allowed_.push_back(static_cast<std::uint16_t>(i));
    }
    return s;
  }

  std::span<const std::uint16_t> indices() const { return allowed_; }
  std::size_t size() const { return allowed_.size(); }
  bool contains(const DrxAction& a) const {
    return std::binary_search(allowed_.begin(), allowed_.end(), a.index());
  }

 private:
  std::vector<std::uint16_t> allowed_;
};

// ---------------------------------------------------------------------------
// Q-table

enum class Mode : std::uint8_t { Explore, Exploit };

inline const char* to_string(Mode m) { return m == Mode::Explore ? "explore" : "exploit"; }

/// What exploit-mode fading detection compares the fresh reward against.
enum class FadingReference : std::uint8_t {
  ExpectedReward,  // running mean of rewards seen for (s, a)
  QValue,          // Q(s, a) itself; only meaningful when discount is near 0
};

struct Hyperparameters {
  double learning_rate = 0.1;
  double discount = 0.9;
  double epsilon = 0.3;  // current exploration rate
  double epsilon_start = 0.3;
  double epsilon_decay = 0.99;
  double epsilon_floor = 0.05;
  double fading_threshold = 0.1;
  FadingReference fading_reference = FadingReference::ExpectedReward;

  void validate() const {
    auto unit = [](double v) { return v > 0.0 && v <= 1.0; };
    if (!unit(learning_rate)) throw Error(ErrorCode::InvalidScenario, "learning_rate must lie in (0,1]");
    if (!(discount >= 0.0 && discount < 1.0)) throw Error(ErrorCode::InvalidScenario, "discount must lie in [0,1)");
    if (!unit(epsilon_start) || !unit(epsilon))
      throw Error(ErrorCode::InvalidScenario, "epsilon must lie in (0,1]");
    if (!unit(epsilon_decay)) throw Error(ErrorCode::InvalidScenario, "epsilon_decay must lie in (0,1]");
    if (!(epsilon_floor >= 0.0 && epsilon_floor <= epsilon_start))
      throw Error(ErrorCode::InvalidScenario, "epsilon_floor must lie in [0, epsilon_start]");
    if (!(fading_threshold >= 0.0)) throw Error(ErrorCode::InvalidScenario, "fading_threshold must be >= 0");
  }
};

class QTable {
 public:
  struct Reward {
    double mean = 0.0;
    std::uint64_t samples = 0;
  };

  QTable() = default;
  explicit QTable(Hyperparameters hyper) : hyper(hyper) {}

  Hyperparameters hyper;
  Mode mode = Mode::Explore;

  /// Unvisited entries read as 0.
  double value(const DecisionState& s, const DrxAction& a) const {
    auto it = q_.find(s);
    if (it == q_.end()) return 0.0;
    auto jt = it->second.find(a.index());
    return jt == it->second.end() ? 0.0 : jt->second;
  }

  void set_value(const DecisionState& s, const DrxAction& a, double v) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidScenario, "Q values must be finite");
    q_[s][a.index()] = v;
  }

  double max_value(const DecisionState& s, const ActionSpace& space) const {
    auto it = q_.find(s);
    if (it == q_.end() || space.size() == 0) return 0.0;
    double best = -std::numeric_limits<double>::infinity();
    for (auto i : space.indices()) {
      auto jt = it->second.find(i);
      best = std::max(best, jt == it->second.end() ? 0.0 : jt->second);
    }
    return best;
  }

  /// argmax_a Q(s, a) over `space`; ties go to the lowest index.
  DrxAction greedy(const DecisionState& s, const ActionSpace& space) const {
    if (space.size() == 0) throw Error(ErrorCode::InvalidScenario, "empty action space");
    auto it = q_.find(s);
    std::uint16_t best = space.indices().front();
    if (it == q_.end()) return DrxAction::from_index(best);
    double best_v = -std::numeric_limits<double>::infinity();
    for (auto i : space.indices()) {
      auto jt = it->second.find(i);
      const double v = jt == it->second.end() ? 0.0 : jt->second;
      if (v > best_v) {
        best_v = v;
        best = i;
      }
    }
    return DrxAction::from_index(best);
  }

  std::optional<Reward> expected_reward(const DecisionState& s, const DrxAction& a) const {
    auto it = rewards_.find(s);
    if (it == rewards_.end()) return std::nullopt;
    auto jt = it->second.find(a.index());
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
  }

  /// Sample mean until 1/n drops below the learning rate, then an
  /// exponential average, so the estimate keeps tracking slow drift.
  void record_reward(const DecisionState& s, const DrxAction& a, double r) {
    auto& e = rewards_[s][a.index()];
    ++e.samples;
    const double step = std::max(1.0 / static_cast<double>(e.samples), hyper.learning_rate);
    e.mean += step * (r - e.mean);
  }

  void set_expected_reward(const DecisionState& s, const DrxAction& a, double mean, std::uint64_t samples) {
    rewards_[s][a.index()] = {mean, samples};
  }

  std::size_t visited_entries() const {
    std::size_t n = 0;
    for (const auto& [s, row] : q_) n += row.size();
    return n;
  }

  void dump(std::ostream& os) const;
  static QTable load(std::istream& is, Hyperparameters hyper);

  friend bool operator==(const QTable& a, const QTable& b) { return a.q_ == b.q_ && a.mode == b.mode; }

 private:
  using Row = std::unordered_map<std::uint16_t, double>;
  using RewardRow = std::unordered_map<std::uint16_t, Reward>;
  std::unordered_map<DecisionState, Row, DecisionStateHash> q_;
  std::unordered_map<DecisionState, RewardRow, DecisionStateHash> rewards_;
};

namespace detail {

inline std::string state_key(const DecisionState& s) {
  std::ostringstream os;
  if (s.sequence.empty()) {
    os << "c:" << s.counts[0] << ',' << s.counts[1] << ',' << s.counts[2] << ',' << s.counts[3];
  } else {
    os << "s:";
    for (std::size_t i = 0; i < s.sequence.size(); ++i) os << (i ? "," : "") << int(s.sequence[i]);
  }
  return os.str();
}

inline std::vector<long> split_ints(const std::string& text) {
  std::vector<long> out;
  std::istringstream is(text);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    std::size_t pos = 0;
    long v = std::stol(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    out.push_back(v);
  }
  return out;
}

inline DecisionState parse_state_key(const std::string& key) {
  if (key.size() < 2 || key[1] != ':') throw Error(ErrorCode::Io, "bad state key '" + key + "'");
  const auto vals = split_ints(key.substr(2));
  DecisionState s;
  if (key[0] == 'c') {
    if (vals.size() != 4) throw Error(ErrorCode::Io, "count state needs 4 entries");
    for (std::size_t i = 0; i < 4; ++i) s.counts[i] = static_cast<std::uint16_t>(vals[i]);
  } else if (key[0] == 's') {
    for (long v : vals) {
      if (v < 0 || v > 3) throw Error(ErrorCode::Io, "phase out of range in state key");
      s.sequence.push_back(static_cast<std::uint8_t>(v));
      ++s.counts[static_cast<std::size_t>(v)];
    }
  } else {
    throw Error(ErrorCode::Io, "bad state key '" + key + "'");
  }
  return s;
}

}  // namespace detail

/// Flat text: one `Q <state> <action> <value>` line per visited entry, and
/// one `R <state> <action> <mean> <samples>` line per reward estimate.
/// Lines are sorted so equal tables dump to equal bytes.
inline void QTable::dump(std::ostream& os) const {
  std::vector<std::string> lines;
  auto action_key = [](std::uint16_t i) {
    const auto a = DrxAction::from_index(i);
    return std::to_string(a.cycle) + "," + std::to_string(a.on_duration) + "," + std::to_string(a.inactivity);
  };
  char buf[64];
  for (const auto& [s, row] : q_) {
    for (const auto& [i, v] : row) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      lines.push_back("Q " + detail::state_key(s) + " " + action_key(i) + " " + buf);
    }
  }
  for (const auto& [s, row] : rewards_) {
    for (const auto& [i, r] : row) {
      std::snprintf(buf, sizeof buf, "%.17g", r.mean);
      lines.push_back("R " + detail::state_key(s) + " " + action_key(i) + " " + buf + " " + std::to_string(r.samples));
    }
  }
  std::sort(lines.begin(), lines.end());
  os << "# ciotsim q-table v1 mode=" << to_string(mode) << '\n';
  for (const auto& l : lines) os << l << '\n';
}

inline QTable QTable::load(std::istream& is, Hyperparameters hyper) {
  QTable t(hyper);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find("mode=exploit") != std::string::npos) t.mode = Mode::Exploit;
      continue;
    }
    std::istringstream ls(line);
    std::string kind, state, action;
    double v = 0.0;
    if (!(ls >> kind >> state >> action >> v)) throw Error(ErrorCode::Io, "q-table line " + std::to_string(lineno));
    try {
      const auto s = detail::parse_state_key(state);
      const auto av = detail::split_ints(action);
      if (av.size() != 3 || av[0] < 0 || av[0] >= long(kCycleChoices) || av[1] < 0 ||
          av[1] >= long(kOnDurationChoices) || av[2] < 0 || av[2] >= long(kInactivityChoices))
        throw Error(ErrorCode::Io, "bad action");
      const DrxAction a{static_cast<std::uint8_t>(av[0]), static_cast<std::uint8_t>(av[1]),
                        static_cast<std::uint8_t>(av[2])};
      if (kind == "Q") {
        t.set_value(s, a, v);
      } else if (kind == "R") {
        std::uint64_t n = 0;
        if (!(ls >> n)) throw Error(ErrorCode::Io, "missing sample count");
        t.set_expected_reward(s, a, v, n);
      } else {
        throw Error(ErrorCode::Io, "unknown entry kind " + kind);
      }
    } catch (const Error& e) {
      throw Error(ErrorCode::Io, "q-table line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::exception&) {
      throw Error(ErrorCode::Io, "q-table line " + std::to_string(lineno) + " is malformed");
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Algorithm steps

struct Observation {
  double reward = 0.0;
  DecisionState state;
};

inline Observation observe_window(std::span<const PacketRecord> records, const WindowMetrics& metrics,
                                  std::size_t window_packets, double lambda, double t_max,
                                  StateEncoding enc = StateEncoding::Counts) {
  if (records.size() != window_packets || window_packets == 0)
    throw Error(ErrorCode::WindowIncomplete, "window holds " + std::to_string(records.size()) + " of " +
                                                 std::to_string(window_packets) + " packets");
  return {ed_index(metrics.alpha, metrics.beta, lambda, t_max), make_state(records, enc)};
}

/// Q(s,a) <- Q(s,a) + lr * (r + discount * max_a' Q(s',a') - Q(s,a)).
/// Returns the change applied to Q(s,a).
inline double q_update(QTable& table, const DecisionState& s, const DrxAction& a, double r,
                       const DecisionState& s_next, const ActionSpace& space) {
  if (table.mode != Mode::Explore) throw Error(ErrorCode::WrongMode, "Q updates happen only in explore mode");
  const double old = table.value(s, a);
  const double target = r + table.hyper.discount * table.max_value(s_next, space);
  const double updated = old + table.hyper.learning_rate * (target - old);
  table.set_value(s, a, updated);
  return updated - old;
}

/// Epsilon-greedy over `space` using table.hyper.epsilon.
inline DrxAction select_action(const QTable& table, const DecisionState& s, Rng& rng, const ActionSpace& space) {
  if (table.mode != Mode::Explore) throw Error(ErrorCode::WrongMode, "action selection happens only in explore mode");
  if (space.size() == 0) throw Error(ErrorCode::InvalidScenario, "empty action space");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < table.hyper.epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, space.size() - 1);
    return DrxAction::from_index(space.indices()[pick(rng)]);
  }
  return table.greedy(s, space);
}

/// n_so = round(256 * mean_i((t_i mod T_c) / T_c)) mod 256.
inline int compute_start_offset(std::span<const SimTime> arrivals, Subframes next_cycle) {
  if (arrivals.empty()) throw Error(ErrorCode::EmptyWindow, "start offset needs at least one arrival");
  if (next_cycle <= 0) throw Error(ErrorCode::InvalidDrxParams, "cycle must be positive");
  double sum = 0.0;
  for (SimTime t : arrivals)
    sum += static_cast<double>(detail::floor_mod(t, next_cycle)) / static_cast<double>(next_cycle);
  const double mean = sum / static_cast<double>(arrivals.size());
  const auto n = static_cast<long>(std::floor(256.0 * mean + 0.5));
  return static_cast<int>(((n % 256) + 256) % 256);
}

/// Exploit-mode check: a fresh reward that falls more than the threshold
/// below the stored expectation sends the controller back to explore.
inline Mode fading_check(const QTable& table, const DecisionState& s, const DrxAction& a, double r) {
  if (table.mode != Mode::Exploit) throw Error(ErrorCode::WrongMode, "fading detection runs only in exploit mode");
  double expected = 0.0;
  if (table.hyper.fading_reference == FadingReference::QValue) {
    expected = table.value(s, a);
  } else {
    auto e = table.expected_reward(s, a);
    if (!e) return Mode::Exploit;  // nothing to compare against
    expected = e->mean;
  }
  return expected - r > table.hyper.fading_threshold ? Mode::Explore : Mode::Exploit;
}

struct ConvergenceRule {
  std::size_t window = 20;      // W
  double tolerance = 0.01;      // max |dQ| over the last W windows
  std::size_t max_windows = 100;
};

struct ExplorationHistory {
  std::deque<double> deltas;  // |dQ| of recent updates, newest last
  std::size_t windows = 0;    // explore windows since the last switch to explore

  void push(double delta, std::size_t keep) {
    deltas.push_back(std::abs(delta));
    while (deltas.size() > keep) deltas.pop_front();
  }
  void reset() {
    deltas.clear();
    windows = 0;
  }
};

inline Mode maybe_exploit(const QTable& table, const ExplorationHistory& history, const ConvergenceRule& rule = {}) {
  if (table.mode == Mode::Exploit) return Mode::Exploit;
  if (history.windows >= rule.max_windows) return Mode::Exploit;
  if (history.deltas.size() >= rule.window) {
    double worst = 0.0;
    for (std::size_t i = history.deltas.size() - rule.window; i < history.deltas.size(); ++i)
      worst = std::max(worst, history.deltas[i]);
    if (worst < rule.tolerance) return Mode::Exploit;
  }
  return Mode::Explore;
}

// ---------------------------------------------------------------------------
// Controller

struct ControllerConfig {
  std::size_t window_packets = 10;  // N_d
  double lambda = 0.5;
  double t_max_ms = 300.0;
  Hyperparameters hyper;
  ConvergenceRule convergence;
  StateEncoding encoding = StateEncoding::Counts;
  std::optional<std::uint8_t> pin_on_duration;
  std::optional<std::uint8_t> pin_inactivity;

  void validate() const {
    if (window_packets == 0) throw Error(ErrorCode::InvalidScenario, "window_packets must be >= 1");
    if (encoding == StateEncoding::RawSequence && window_packets > 8)
      throw Error(ErrorCode::InvalidScenario, "raw_sequence state encoding needs window_packets <= 8");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::InvalidScenario, "lambda must lie in [0,1]");
    if (!(t_max_ms > 0.0)) throw Error(ErrorCode::InvalidScenario, "t_max_ms must be positive");
    hyper.validate();
    if (convergence.window == 0) throw Error(ErrorCode::InvalidScenario, "convergence window must be >= 1");
    if (convergence.max_windows == 0) throw Error(ErrorCode::InvalidScenario, "explore cap must be >= 1");
    if (pin_on_duration && *pin_on_duration >= kOnDurationChoices)
      throw Error(ErrorCode::InvalidScenario, "pin_on_duration index out of range");
    if (pin_inactivity && *pin_inactivity >= kInactivityChoices)
      throw Error(ErrorCode::InvalidScenario, "pin_inactivity index out of range");
  }

  ActionSpace action_space() const { return ActionSpace::feasible(pin_on_duration, pin_inactivity); }
};

struct DecisionOutcome {
  DrxAction action;
  int n_so = 0;
  DrxParams params;
  bool reconfigure = false;
  double reward = 0.0;
  double q_value = 0.0;
  Mode mode_after = Mode::Explore;
  bool faded = false;
  DecisionState state;
};

/// One controller per UE stream. decide() runs once per closed window.
class DrxController {
 public:
  DrxController(ControllerConfig cfg, const DrxParams& initial, std::uint64_t seed)
      : cfg_(std::move(cfg)), space_(cfg_.action_space()), table_(cfg_.hyper), rng_(make_rng(seed, 0x51ull)),
        params_(initial) {
    cfg_.validate();
    validate(initial);
    table_.hyper.epsilon = table_.hyper.epsilon_start;
    action_ = DrxAction::from_params(initial);
  }

  DecisionOutcome decide(std::span<const PacketRecord> window, const WindowMetrics& metrics,
                         std::span<const SimTime> arrivals) {
    const auto obs = observe_window(window, metrics, cfg_.window_packets, cfg_.lambda, cfg_.t_max_ms, cfg_.encoding);
    DecisionOutcome out;
    out.reward = obs.reward;
    out.state = obs.state;

    if (table_.mode == Mode::Exploit) {
      if (fading_check(table_, state_, action_, obs.reward) == Mode::Explore) {
        table_.mode = Mode::Explore;
        table_.hyper.epsilon = table_.hyper.epsilon_start;
        history_.reset();
        out.faded = true;
      } else {
        table_.record_reward(state_, action_, obs.reward);
      }
      out.action = action_;
      out.params = params_;
      out.n_so = params_.start_offset_steps();
      out.q_value = table_.value(state_, action_);
      out.mode_after = table_.mode;
      return out;
    }

    if (has_previous_) {
      const double delta = q_update(table_, state_, action_, obs.reward, obs.state, space_);
      table_.record_reward(state_, action_, obs.reward);
      history_.push(delta, cfg_.convergence.window);
    }
    state_ = obs.state;
    ++history_.windows;

    const Mode next = maybe_exploit(table_, history_, cfg_.convergence);
    const DrxAction chosen = next == Mode::Exploit ? table_.greedy(state_, space_)
                                                   : select_action(table_, state_, rng_, space_);
    table_.hyper.epsilon = std::max(table_.hyper.epsilon_floor, table_.hyper.epsilon * table_.hyper.epsilon_decay);

    const int n_so = compute_start_offset(arrivals, chosen.cycle_subframes());
    const DrxParams next_params = chosen.params(n_so);
    out.reconfigure = next_params != params_;
    params_ = next_params;
    action_ = chosen;
    has_previous_ = true;
    table_.mode = next;

    out.action = chosen;
    out.n_so = n_so;
    out.params = next_params;
    out.q_value = table_.value(state_, action_);
    out.mode_after = next;
    return out;
  }

  Mode mode() const { return table_.mode; }
  const DrxParams& params() const { return params_; }
  const DrxAction& action() const { return action_; }
  const QTable& table() const { return table_; }
  QTable& table() { return table_; }
  const ActionSpace& space() const { return space_; }
  const ControllerConfig& config() const { return cfg_; }

 private:
  ControllerConfig cfg_;
  ActionSpace space_;
  QTable table_;
  Rng rng_;
  DrxParams params_;
  DrxAction action_;
  DecisionState state_;
  ExplorationHistory history_;
  bool has_previous_ = false;
};

}  // namespace ciotsim
