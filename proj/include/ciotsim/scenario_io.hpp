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

/*! \file  scenario_io.hpp
 *  \brief Scenario files (JSON, schema_version 1) to and from Scenario.
 *
 *  DRX settings are written with the multipliers, not the indices:
 *  {"n_c": 1, "n_on": 1, "n_in": 1, "n_so": 0} is T_c = 256 ms, T_on = 16 ms,
 *  T_in = 16 ms, T_so = 0. Unknown keys are rejected so typos surface.
 *  See README.md for the full schema.
 */

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ciotsim/sim.hpp"

namespace ciotsim {

inline constexpr int kSchemaVersion = 1;

namespace detail {

using nlohmann::json;

[[noreturn]] inline void field_error(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::InvalidScenario, path + ": " + why);
}

inline void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) field_error(path, "expected an object");
  for (const auto& [k, v] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      field_error(path + "." + k, "unknown key");
  }
}

template <typename T>
T get_num(const json& obj, const std::string& path, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) field_error(path + "." + key, "expected a number");
  if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) field_error(path + "." + key, "expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
        field_error(path + "." + key, "must not be negative");
    }
  }
  return v.get<T>();
}

template <typename T>
T need_num(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) field_error(path + "." + key, "is required");
  return get_num<T>(obj, path, key, T{});
}

inline std::string get_str(const json& obj, const std::string& path, const char* key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) field_error(path + "." + key, "expected a string");
  return obj.at(key).get<std::string>();
}

template <std::size_t N>
std::uint8_t domain_index(const std::array<int, N>& domain, int value, const std::string& path) {
  auto it = std::find(domain.begin(), domain.end(), value);
  if (it == domain.end()) {
    std::string allowed;
    for (int d : domain) allowed += (allowed.empty() ? "" : ",") + std::to_string(d);
    field_error(path, std::to_string(value) + " not in {" + allowed + "}");
  }
  return static_cast<std::uint8_t>(it - domain.begin());
}

inline DrxIndices parse_drx(const json& j, const std::string& path) {
  only_keys(j, path, {"n_c", "n_on", "n_in", "n_so"});
  DrxIndices idx;
  idx.cycle = domain_index(kCycleMultipliers, need_num<int>(j, path, "n_c"), path + ".n_c");
  idx.on_duration = domain_index(kOnDurationPeriods, need_num<int>(j, path, "n_on"), path + ".n_on");
  idx.inactivity = domain_index(kInactivityPeriods, need_num<int>(j, path, "n_in"), path + ".n_in");
  const int n_so = get_num<int>(j, path, "n_so", 0);
  if (n_so < 0 || n_so > 255) field_error(path + ".n_so", "must lie in 0..255");
  idx.start_offset = static_cast<std::uint8_t>(n_so);
  try {
    DrxParams::from_indices(idx);
  } catch (const Error& e) {
    field_error(path, e.what());
  }
  return idx;
}

inline json drx_json(const DrxParams& p) {
  const auto i = p.indices();
  return {{"n_c", kCycleMultipliers[i.cycle]},
          {"n_on", kOnDurationPeriods[i.on_duration]},
          {"n_in", kInactivityPeriods[i.inactivity]},
          {"n_so", int(i.start_offset)}};
}

inline RatFlavor parse_rat(const std::string& s, const std::string& path) {
  if (s == "nbiot_cp") return RatFlavor::NbIotCpOpt;
  if (s == "nbiot_up") return RatFlavor::NbIotUpOpt;
  if (s == "lte") return RatFlavor::LteLike;
  field_error(path, "'" + s + "' is not one of nbiot_cp, nbiot_up, lte");
}

inline TrafficSchedule parse_traffic(const json& j, const std::string& path, double rate_scale) {
  if (!j.is_array() || j.empty()) field_error(path, "expected a nonempty array of phases");
  std::vector<TrafficProfile> phases;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = path + "[" + std::to_string(i) + "]";
    only_keys(j[i], at, {"from_ms", "lambda_idt", "lambda_size", "mean_idt_ms", "mean_size_bytes"});
    TrafficProfile p;
    p.active_from = get_num<SimTime>(j[i], at, "from_ms", 0);
    const bool has_rate = j[i].contains("lambda_idt"), has_mean = j[i].contains("mean_idt_ms");
    if (has_rate == has_mean) field_error(at, "give exactly one of lambda_idt, mean_idt_ms");
    if (has_rate) {
      p.lambda_idt = get_num<double>(j[i], at, "lambda_idt", 0.0) / rate_scale;
    } else {
      const double m = get_num<double>(j[i], at, "mean_idt_ms", 0.0);
      if (!(m > 0.0)) field_error(at + ".mean_idt_ms", "must be positive");
      p.lambda_idt = 1.0 / m;
    }
    const bool has_srate = j[i].contains("lambda_size"), has_smean = j[i].contains("mean_size_bytes");
    if (has_srate && has_smean) field_error(at, "give at most one of lambda_size, mean_size_bytes");
    if (has_smean) {
      const double m = get_num<double>(j[i], at, "mean_size_bytes", 0.0);
      if (!(m > 0.0)) field_error(at + ".mean_size_bytes", "must be positive");
      p.lambda_size = 1.0 / m;
    } else {
      p.lambda_size = get_num<double>(j[i], at, "lambda_size", p.lambda_size);
    }
    if (!(p.lambda_idt > 0.0) || !std::isfinite(p.lambda_idt)) field_error(at + ".lambda_idt", "must be positive");
    if (!(p.lambda_size > 0.0) || !std::isfinite(p.lambda_size)) field_error(at + ".lambda_size", "must be positive");
    phases.push_back(p);
  }
  try {
    return TrafficSchedule(std::move(phases));
  } catch (const Error& e) {
    field_error(path, e.what());
  }
}

inline std::vector<Arrival> load_trace_for(const std::filesystem::path& file, std::uint32_t ue_id,
                                           const std::string& path) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::Io, path + ": cannot open trace " + file.string());
  std::vector<Arrival> out;
  for (const auto& r : read_trace(in))
    if (r.ue_id == ue_id) out.push_back({r.arrival_ms, r.size_bytes});
  if (out.empty()) field_error(path, "trace " + file.string() + " has no rows for ue " + std::to_string(ue_id));
  return out;
}

inline void parse_controller(const json& j, Scenario& sc) {
  const std::string path = "controller";
  only_keys(j, path,
            {"policy", "window_packets", "lambda", "t_max_ms", "learning_rate", "discount", "epsilon", "epsilon_decay",
             "epsilon_floor", "fading_threshold", "fading_reference", "state_encoding", "pin_on_duration",
             "pin_inactivity", "convergence_window", "convergence_tolerance", "explore_cap", "fixed_action"});
  auto& c = sc.controller;
  const auto policy = get_str(j, path, "policy", "learn");
  if (policy == "learn") sc.policy = PolicyKind::Learn;
  else if (policy == "fixed") sc.policy = PolicyKind::Fixed;
  else if (policy == "static") sc.policy = PolicyKind::Static;
  else field_error(path + ".policy", "'" + policy + "' is not one of learn, fixed, static");

  c.window_packets = get_num<std::size_t>(j, path, "window_packets", c.window_packets);
  c.lambda = get_num<double>(j, path, "lambda", c.lambda);
  c.t_max_ms = get_num<double>(j, path, "t_max_ms", c.t_max_ms);
  auto& h = c.hyper;
  h.learning_rate = get_num<double>(j, path, "learning_rate", h.learning_rate);
  h.discount = get_num<double>(j, path, "discount", h.discount);
  h.epsilon_start = h.epsilon = get_num<double>(j, path, "epsilon", h.epsilon_start);
  h.epsilon_decay = get_num<double>(j, path, "epsilon_decay", h.epsilon_decay);
  h.epsilon_floor = get_num<double>(j, path, "epsilon_floor", h.epsilon_floor);
  h.fading_threshold = get_num<double>(j, path, "fading_threshold", h.fading_threshold);
  const auto ref = get_str(j, path, "fading_reference", "expected_reward");
  if (ref == "expected_reward") h.fading_reference = FadingReference::ExpectedReward;
  else if (ref == "q_value") h.fading_reference = FadingReference::QValue;
  else field_error(path + ".fading_reference", "'" + ref + "' is not one of expected_reward, q_value");
  const auto enc = get_str(j, path, "state_encoding", "counts");
  if (enc == "counts") c.encoding = StateEncoding::Counts;
  else if (enc == "raw_sequence") c.encoding = StateEncoding::RawSequence;
  else field_error(path + ".state_encoding", "'" + enc + "' is not one of counts, raw_sequence");
  if (j.contains("pin_on_duration") && !j.at("pin_on_duration").is_null())
    c.pin_on_duration = domain_index(kOnDurationPeriods, need_num<int>(j, path, "pin_on_duration"),
                                     path + ".pin_on_duration");
  if (j.contains("pin_inactivity") && !j.at("pin_inactivity").is_null())
    c.pin_inactivity = domain_index(kInactivityPeriods, need_num<int>(j, path, "pin_inactivity"),
                                    path + ".pin_inactivity");
  c.convergence.window = get_num<std::size_t>(j, path, "convergence_window", c.convergence.window);
  c.convergence.tolerance = get_num<double>(j, path, "convergence_tolerance", c.convergence.tolerance);
  c.convergence.max_windows = get_num<std::size_t>(j, path, "explore_cap", c.convergence.max_windows);
  if (j.contains("fixed_action")) {
    const auto idx = parse_drx(j.at("fixed_action"), path + ".fixed_action");
    sc.fixed_action = DrxAction{idx.cycle, idx.on_duration, idx.inactivity};
  }

  // Name the field in the message, not just the rule.
  if (!(c.t_max_ms > 0.0)) field_error(path + ".t_max_ms", "T_max must be positive");
  if (!(c.lambda >= 0.0 && c.lambda <= 1.0)) field_error(path + ".lambda", "must lie in [0,1]");
  if (c.window_packets == 0) field_error(path + ".window_packets", "must be >= 1");
}

}  // namespace detail

/// Builds a Scenario from a parsed document. Relative trace paths resolve
/// against base_dir. Every rule is checked here or in Scenario::validate().
inline Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".") {
  using detail::field_error;
  detail::only_keys(doc, "scenario",
                    {"schema_version", "seed", "duration_ms", "mode", "rate_unit", "slices", "ues", "commands",
                     "controller", "tx_bytes_per_ms", "power_mw", "slice_capacity", "history_capacity", "name"});
  if (!doc.contains("schema_version")) field_error("schema_version", "is required");
  if (detail::need_num<int>(doc, "scenario", "schema_version") != kSchemaVersion)
    field_error("schema_version", "only version " + std::to_string(kSchemaVersion) + " is understood");

  Scenario sc;
  sc.seed = detail::get_num<std::uint64_t>(doc, "scenario", "seed", sc.seed);
  sc.duration = detail::need_num<SimTime>(doc, "scenario", "duration_ms");
  if (sc.duration <= 0) field_error("duration_ms", "must be positive");
  const auto mode = detail::get_str(doc, "scenario", "mode", "det");
  if (mode == "det") sc.mode = ExecMode::Deterministic;
  else if (mode == "bench") sc.mode = ExecMode::Threaded;
  else field_error("mode", "'" + mode + "' is not one of det, bench");
  const auto unit = detail::get_str(doc, "scenario", "rate_unit", "per_ms");
  double rate_scale = 1.0;
  if (unit == "per_s") rate_scale = 1000.0;
  else if (unit != "per_ms") field_error("rate_unit", "'" + unit + "' is not one of per_ms, per_s");

  sc.tx.bytes_per_subframe = detail::get_num<std::uint32_t>(doc, "scenario", "tx_bytes_per_ms", sc.tx.bytes_per_subframe);
  sc.slice_capacity = detail::get_num<std::size_t>(doc, "scenario", "slice_capacity", sc.slice_capacity);
  sc.history_capacity = detail::get_num<std::size_t>(doc, "scenario", "history_capacity", sc.history_capacity);
  if (doc.contains("power_mw")) {
    const auto& p = doc.at("power_mw");
    if (!p.is_array() || p.size() != 4) field_error("power_mw", "expected 4 numbers for S0..S3");
    for (std::size_t i = 0; i < 4; ++i) {
      if (!p[i].is_number()) field_error("power_mw[" + std::to_string(i) + "]", "expected a number");
      sc.power.milliwatts[i] = p[i].get<double>();
    }
  }
  if (doc.contains("controller")) detail::parse_controller(doc.at("controller"), sc);

  if (doc.contains("slices")) {
    const auto& js = doc.at("slices");
    if (!js.is_array()) field_error("slices", "expected an array");
    for (std::size_t i = 0; i < js.size(); ++i) {
      const std::string at = "slices[" + std::to_string(i) + "]";
      detail::only_keys(js[i], at, {"rat", "drx"});
      SliceSpec s;
      s.rat = detail::parse_rat(detail::get_str(js[i], at, "rat", ""), at + ".rat");
      if (js[i].contains("drx")) s.default_drx = DrxParams::from_indices(detail::parse_drx(js[i].at("drx"), at + ".drx"));
      sc.slices.push_back(s);
    }
  }
  if (doc.contains("ues")) {
    const auto& ju = doc.at("ues");
    if (!ju.is_array()) field_error("ues", "expected an array");
    for (std::size_t i = 0; i < ju.size(); ++i) {
      const std::string at = "ues[" + std::to_string(i) + "]";
      detail::only_keys(ju[i], at, {"ue_id", "slice", "traffic", "trace"});
      UeSpec u;
      u.ue_id = detail::need_num<std::uint32_t>(ju[i], at, "ue_id");
      u.slice = detail::get_num<std::size_t>(ju[i], at, "slice", 0);
      const bool has_traffic = ju[i].contains("traffic"), has_trace = ju[i].contains("trace");
      if (has_traffic == has_trace) field_error(at, "give exactly one of traffic, trace");
      if (has_traffic) {
        u.traffic = detail::parse_traffic(ju[i].at("traffic"), at + ".traffic", rate_scale);
      } else {
        const auto rel = detail::get_str(ju[i], at, "trace", "");
        u.trace = detail::load_trace_for(base_dir / rel, u.ue_id, at + ".trace");
      }
      sc.ues.push_back(std::move(u));
    }
  }
  if (doc.contains("commands")) {
    const auto& jc = doc.at("commands");
    if (!jc.is_array()) field_error("commands", "expected an array");
    for (std::size_t i = 0; i < jc.size(); ++i) {
      const std::string at = "commands[" + std::to_string(i) + "]";
      detail::only_keys(jc[i], at, {"at_ms", "op", "slice_id", "rat", "drx"});
      CommandSpec c;
      c.at = detail::need_num<SimTime>(jc[i], at, "at_ms");
      const auto op = detail::get_str(jc[i], at, "op", "");
      if (op == "add") c.op = CommandOp::Add;
      else if (op == "modify") c.op = CommandOp::Modify;
      else if (op == "delete") c.op = CommandOp::Delete;
      else field_error(at + ".op", "'" + op + "' is not one of add, modify, delete");
      c.target = detail::get_num<SliceId>(jc[i], at, "slice_id", kNoSlice);
      if (jc[i].contains("rat")) c.rat = detail::parse_rat(detail::get_str(jc[i], at, "rat", ""), at + ".rat");
      if (jc[i].contains("drx")) c.drx = detail::parse_drx(jc[i].at("drx"), at + ".drx");
      sc.commands.push_back(c);
    }
  }
  sc.validate();
  return sc;
}

inline nlohmann::json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + file.string());
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidScenario, file.string() + ": " + e.what());
  }
}

inline Scenario load_scenario(const std::filesystem::path& file) {
  return parse_scenario(read_json_file(file), file.parent_path());
}

/// Echo of the effective configuration, for run_meta.json.
inline nlohmann::json scenario_echo(const Scenario& sc) {
  using nlohmann::json;
  json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = sc.seed;
  j["duration_ms"] = sc.duration;
  j["mode"] = sc.mode == ExecMode::Deterministic ? "det" : "bench";
  j["tx_bytes_per_ms"] = sc.tx.bytes_per_subframe;
  j["power_mw"] = sc.power.milliwatts;
  j["slice_capacity"] = sc.slice_capacity;
  j["history_capacity"] = sc.history_capacity;
  json slices = json::array();
  for (const auto& s : sc.slices) slices.push_back({{"rat", to_string(s.rat)}, {"drx", detail::drx_json(s.default_drx)}});
  j["slices"] = slices;
  json ues = json::array();
  for (const auto& u : sc.ues) {
    json ju{{"ue_id", u.ue_id}, {"slice", u.slice}};
    if (u.trace.empty()) {
      json ph = json::array();
      for (const auto& p : u.traffic.profiles())
        ph.push_back({{"from_ms", p.active_from}, {"lambda_idt", p.lambda_idt}, {"lambda_size", p.lambda_size}});
      ju["traffic"] = ph;
    } else {
      ju["trace_packets"] = u.trace.size();
    }
    ues.push_back(ju);
  }
  j["ues"] = ues;
  const auto& c = sc.controller;
  const char* policy = sc.policy == PolicyKind::Learn ? "learn" : sc.policy == PolicyKind::Fixed ? "fixed" : "static";
  j["controller"] = {{"policy", policy},
                     {"window_packets", c.window_packets},
                     {"lambda", c.lambda},
                     {"t_max_ms", c.t_max_ms},
                     {"learning_rate", c.hyper.learning_rate},
                     {"discount", c.hyper.discount},
                     {"epsilon", c.hyper.epsilon_start},
                     {"epsilon_decay", c.hyper.epsilon_decay},
                     {"epsilon_floor", c.hyper.epsilon_floor},
                     {"fading_threshold", c.hyper.fading_threshold},
                     {"fading_reference",
                      c.hyper.fading_reference == FadingReference::ExpectedReward ? "expected_reward" : "q_value"},
                     {"state_encoding", c.encoding == StateEncoding::Counts ? "counts" : "raw_sequence"},
                     {"convergence_window", c.convergence.window},
                     {"convergence_tolerance", c.convergence.tolerance},
                     {"explore_cap", c.convergence.max_windows}};
  if (c.pin_on_duration) j["controller"]["pin_on_duration"] = kOnDurationPeriods[*c.pin_on_duration];
  if (c.pin_inactivity) j["controller"]["pin_inactivity"] = kInactivityPeriods[*c.pin_inactivity];
  if (sc.fixed_action)
    j["controller"]["fixed_action"] = detail::drx_json(sc.fixed_action->params(0));
  j["commands"] = sc.commands.size();
  return j;
}

}  // namespace ciotsim
