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

/*! \file  rrc.hpp
 *  \brief Slice-tagged RRC messages, per-UE connection state and procedures.
 *
 *  Frame layout, all integers big-endian:
 *
 *    +----------+---------+----------+--------+---------+
 *    | slice_id | channel | msg_type | length | payload |
 *    |   u16    |   u8    |    u8    |  u16   |  bytes  |
 *    +----------+---------+----------+--------+---------+
 *
 *  Payloads are TLV lists (tag u8, len u8, value). The DRX TLV is shared
 *  with the southbound command protocol.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ciotsim/drx.hpp"
#include "ciotsim/error.hpp"

namespace ciotsim {

using SliceId = std::uint16_t;
inline constexpr SliceId kNoSlice = 0;

enum class RatFlavor : std::uint8_t { NbIotCpOpt = 1, NbIotUpOpt = 2, LteLike = 3 };

inline const char* to_string(RatFlavor r) {
  switch (r) {
    case RatFlavor::NbIotCpOpt: return "nbiot_cp";
    case RatFlavor::NbIotUpOpt: return "nbiot_up";
    case RatFlavor::LteLike: return "lte";
  }
  return "?";
}

inline std::optional<RatFlavor> rat_from_byte(std::uint8_t b) {
  if (b >= 1 && b <= 3) return static_cast<RatFlavor>(b);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// TLVs

namespace tlv {
inline constexpr std::uint8_t kRat = 0x01;
inline constexpr std::uint8_t kDrx = 0x02;
inline constexpr std::uint8_t kUeId = 0x03;
inline constexpr std::uint8_t kNasData = 0x04;
}  // namespace tlv

using Bytes = std::vector<std::uint8_t>;

inline void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint16_t get_u16(std::span<const std::uint8_t> in, std::size_t at) {
  return static_cast<std::uint16_t>((in[at] << 8) | in[at + 1]);
}

inline void put_tlv(Bytes& out, std::uint8_t tag, std::span<const std::uint8_t> value) {
  out.push_back(tag);
  out.push_back(static_cast<std::uint8_t>(value.size()));
  out.insert(out.end(), value.begin(), value.end());
}

inline void put_drx_tlv(Bytes& out, const DrxParams& p) {
  const auto i = p.indices();
  const std::uint8_t v[4] = {i.cycle, i.on_duration, i.inactivity, i.start_offset};
  put_tlv(out, tlv::kDrx, v);
}

inline void put_ue_tlv(Bytes& out, std::uint32_t ue) {
  const std::uint8_t v[4] = {static_cast<std::uint8_t>(ue >> 24), static_cast<std::uint8_t>(ue >> 16),
                             static_cast<std::uint8_t>(ue >> 8), static_cast<std::uint8_t>(ue)};
  put_tlv(out, tlv::kUeId, v);
}

struct Tlv {
  std::uint8_t tag = 0;
  std::span<const std::uint8_t> value;
};

/// Splits a TLV list; nullopt if a length runs past the end.
inline std::optional<std::vector<Tlv>> split_tlvs(std::span<const std::uint8_t> in) {
  std::vector<Tlv> out;
  std::size_t at = 0;
  while (at < in.size()) {
    if (in.size() - at < 2) return std::nullopt;
    const std::size_t len = in[at + 1];
    if (in.size() - at - 2 < len) return std::nullopt;
    out.push_back({in[at], in.subspan(at + 2, len)});
    at += 2 + len;
  }
  return out;
}

inline std::optional<DrxIndices> read_drx_value(std::span<const std::uint8_t> v) {
  if (v.size() != 4) return std::nullopt;
  return DrxIndices{v[0], v[1], v[2], v[3]};
}

inline std::optional<std::uint32_t> read_ue_value(std::span<const std::uint8_t> v) {
  if (v.size() != 4) return std::nullopt;
  return (std::uint32_t{v[0]} << 24) | (std::uint32_t{v[1]} << 16) | (std::uint32_t{v[2]} << 8) | v[3];
}

// ---------------------------------------------------------------------------
// Messages

enum class LogicalChannel : std::uint8_t { CCCH = 0, DCCH = 1, BCCH = 2, PCCH = 3 };

enum class MsgType : std::uint8_t {
  ConnRequest = 1,
  ConnSetup,
  ConnSetupComplete,
  SecurityModeCommand,
  SecurityModeComplete,
  ConnReconfiguration,
  ConnReconfigurationComplete,
  ConnSuspend,
  ConnResumeRequest,
  ConnResume,
  ConnResumeComplete,
  ConnRelease,
  Paging,
  SystemInfo,
};

inline constexpr std::uint8_t kMsgTypeCount = 14;

inline const char* to_string(LogicalChannel c) {
  switch (c) {
    case LogicalChannel::CCCH: return "CCCH";
    case LogicalChannel::DCCH: return "DCCH";
    case LogicalChannel::BCCH: return "BCCH";
    case LogicalChannel::PCCH: return "PCCH";
  }
  return "?";
}

inline const char* to_string(MsgType t) {
  static constexpr const char* names[] = {
      "ConnRequest",   "ConnSetup",         "ConnSetupComplete",  "SecurityModeCommand", "SecurityModeComplete",
      "ConnReconfiguration", "ConnReconfigurationComplete", "ConnSuspend", "ConnResumeRequest", "ConnResume",
      "ConnResumeComplete",  "ConnRelease",       "Paging",             "SystemInfo"};
  const auto i = static_cast<std::size_t>(t);
  return i >= 1 && i <= kMsgTypeCount ? names[i - 1] : "?";
}

/// The one logical channel each message type may travel on.
constexpr LogicalChannel channel_for(MsgType t) {
  switch (t) {
    case MsgType::ConnRequest:
    case MsgType::ConnSetup:
    case MsgType::ConnResumeRequest:
      return LogicalChannel::CCCH;
    case MsgType::Paging: return LogicalChannel::PCCH;
    case MsgType::SystemInfo: return LogicalChannel::BCCH;
    default: return LogicalChannel::DCCH;
  }
}

struct RrcMessage {
  SliceId slice_id = kNoSlice;
  LogicalChannel channel = LogicalChannel::CCCH;
  MsgType type = MsgType::ConnRequest;
  Bytes payload;

  static RrcMessage make(SliceId slice, MsgType type, Bytes payload = {}) {
    return {slice, channel_for(type), type, std::move(payload)};
  }

  friend bool operator==(const RrcMessage&, const RrcMessage&) = default;
};

inline constexpr std::size_t kRrcHeaderBytes = 6;
inline constexpr std::size_t kMaxPayload = 0xFFFF;

inline Bytes encode_message(const RrcMessage& m) {
  if (m.payload.size() > kMaxPayload)
    throw Error(ErrorCode::PayloadTooLarge, std::to_string(m.payload.size()) + " byte payload");
  if (m.slice_id == kNoSlice) throw Error(ErrorCode::MalformedMessage, "slice_id 0 is reserved");
  if (channel_for(m.type) != m.channel)
    throw Error(ErrorCode::MalformedMessage, std::string(to_string(m.type)) + " is not allowed on " + to_string(m.channel));
  Bytes out;
  out.reserve(kRrcHeaderBytes + m.payload.size());
  put_u16(out, m.slice_id);
  out.push_back(static_cast<std::uint8_t>(m.channel));
  out.push_back(static_cast<std::uint8_t>(m.type));
  put_u16(out, static_cast<std::uint16_t>(m.payload.size()));
  out.insert(out.end(), m.payload.begin(), m.payload.end());
  return out;
}

inline RrcMessage decode_message(std::span<const std::uint8_t> in) {
  if (in.size() < kRrcHeaderBytes) throw Error(ErrorCode::MalformedMessage, "frame shorter than header");
  RrcMessage m;
  m.slice_id = get_u16(in, 0);
  if (m.slice_id == kNoSlice) throw Error(ErrorCode::MalformedMessage, "slice_id 0 is reserved");
  if (in[2] > 3) throw Error(ErrorCode::MalformedMessage, "unknown logical channel");
  if (in[3] < 1 || in[3] > kMsgTypeCount) throw Error(ErrorCode::MalformedMessage, "unknown message type");
  m.channel = static_cast<LogicalChannel>(in[2]);
  m.type = static_cast<MsgType>(in[3]);
  if (channel_for(m.type) != m.channel) throw Error(ErrorCode::MalformedMessage, "message on the wrong channel");
  const std::size_t len = get_u16(in, 4);
  if (in.size() != kRrcHeaderBytes + len) throw Error(ErrorCode::MalformedMessage, "length field disagrees with frame");
  m.payload.assign(in.begin() + kRrcHeaderBytes, in.end());
  return m;
}

// ---------------------------------------------------------------------------
// UE context

enum class RrcState : std::uint8_t { Idle, Connected, Suspended };

inline const char* to_string(RrcState s) {
  switch (s) {
    case RrcState::Idle: return "Idle";
    case RrcState::Connected: return "Connected";
    case RrcState::Suspended: return "Suspended";
  }
  return "?";
}

namespace bearer {
inline constexpr std::uint8_t SRB0 = 1;
inline constexpr std::uint8_t SRB1 = 2;
inline constexpr std::uint8_t SRB1bis = 4;
inline constexpr std::uint8_t DRB = 8;
}  // namespace bearer

/// Fixed-capacity FIFO; pushing at capacity drops the oldest entry.
template <typename T>
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity = 1024) : capacity_(capacity) {
    if (capacity_ == 0) throw Error(ErrorCode::InvalidScenario, "ring buffer capacity must be >= 1");
  }

  void push(T v) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(std::move(v));
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  const T& operator[](std::size_t i) const { return items_[i]; }
  const T& front() const { return items_.front(); }
  const T& back() const { return items_.back(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
};

struct ConfigChange {
  SimTime at = 0;
  DrxParams drx;
};

struct UeContext {
  std::uint32_t ue_id = 0;
  SliceId slice_id = kNoSlice;
  RrcState rrc_state = RrcState::Idle;
  DrxParams drx;
  std::uint8_t bearers = bearer::SRB0;
  bool security_active = false;
  RingBuffer<PacketRecord> traffic_history{1024};
  std::vector<ConfigChange> config_history;
  std::optional<ConfigChange> pending_drx;  // decided, waiting for the next on-duration

  UeContext() = default;
  UeContext(std::uint32_t id, SliceId slice, const DrxParams& params, std::size_t history = 1024)
      : ue_id(id), slice_id(slice), drx(params), traffic_history(history) {}
};

inline void store_packet_record(UeContext& ue, const PacketRecord& rec) { ue.traffic_history.push(rec); }

// ---------------------------------------------------------------------------
// Procedures

enum class Procedure : std::uint8_t { Attach, SecurityEstablish, Reconfigure, Suspend, Resume, Release };

inline constexpr std::array<Procedure, 6> kAllProcedures{Procedure::Attach,  Procedure::SecurityEstablish,
                                                         Procedure::Reconfigure, Procedure::Suspend,
                                                         Procedure::Resume,  Procedure::Release};

inline const char* to_string(Procedure p) {
  switch (p) {
    case Procedure::Attach: return "attach";
    case Procedure::SecurityEstablish: return "security";
    case Procedure::Reconfigure: return "reconfigure";
    case Procedure::Suspend: return "suspend";
    case Procedure::Resume: return "resume";
    case Procedure::Release: return "release";
  }
  return "?";
}

/// Message sequence of each procedure. Kept as data so the flows can be
/// changed without touching the state machine.
struct ProcedureCatalog {
  std::vector<MsgType> attach_cp{MsgType::ConnRequest, MsgType::ConnSetup, MsgType::ConnSetupComplete};
  std::vector<MsgType> attach_up{MsgType::ConnRequest,          MsgType::ConnSetup,
                                 MsgType::ConnSetupComplete,    MsgType::SecurityModeCommand,
                                 MsgType::SecurityModeComplete, MsgType::ConnReconfiguration,
                                 MsgType::ConnReconfigurationComplete};
  std::vector<MsgType> security{MsgType::SecurityModeCommand, MsgType::SecurityModeComplete};
  std::vector<MsgType> reconfigure{MsgType::ConnReconfiguration, MsgType::ConnReconfigurationComplete};
  std::vector<MsgType> suspend{MsgType::ConnSuspend};
  std::vector<MsgType> resume{MsgType::ConnResumeRequest, MsgType::ConnResume, MsgType::ConnResumeComplete};
  std::vector<MsgType> release{MsgType::ConnRelease};

  const std::vector<MsgType>& flow(RatFlavor rat, Procedure p) const {
    switch (p) {
      case Procedure::Attach: return rat == RatFlavor::NbIotCpOpt ? attach_cp : attach_up;
      case Procedure::SecurityEstablish: return security;
      case Procedure::Reconfigure: return reconfigure;
      case Procedure::Suspend: return suspend;
      case Procedure::Resume: return resume;
      case Procedure::Release: return release;
    }
    return release;
  }
};

inline bool supported(RatFlavor rat, Procedure p) {
  switch (p) {
    case Procedure::SecurityEstablish: return rat != RatFlavor::NbIotCpOpt;
    case Procedure::Suspend:
    case Procedure::Resume: return rat == RatFlavor::NbIotUpOpt;
    default: return true;
  }
}

/// State a procedure must start from, and the state it leaves behind.
inline std::pair<RrcState, RrcState> transition(Procedure p) {
  switch (p) {
    case Procedure::Attach: return {RrcState::Idle, RrcState::Connected};
    case Procedure::SecurityEstablish: return {RrcState::Connected, RrcState::Connected};
    case Procedure::Reconfigure: return {RrcState::Connected, RrcState::Connected};
    case Procedure::Suspend: return {RrcState::Connected, RrcState::Suspended};
    case Procedure::Resume: return {RrcState::Suspended, RrcState::Connected};
    case Procedure::Release: return {RrcState::Connected, RrcState::Idle};
  }
  return {RrcState::Idle, RrcState::Idle};
}

struct ProcedureRequest {
  Procedure proc = Procedure::Attach;
  std::optional<DrxParams> drx;  // Reconfigure: the new timers
  Bytes nas_data;                // CP attach: user data carried in the NAS container
};

/// Called after each message of a procedure, so a driver can interleave
/// other work between two messages of the same exchange.
using MessageHook = std::function<void(const RrcMessage&, std::size_t seq)>;

struct ProcedureResult {
  UeContext ue;
  std::vector<RrcMessage> transcript;
};

namespace detail {

inline Bytes payload_for(MsgType t, RatFlavor rat, const UeContext& ue, const ProcedureRequest& req) {
  Bytes p;
  switch (t) {
    case MsgType::ConnRequest:
    case MsgType::ConnResumeRequest:
      put_ue_tlv(p, ue.ue_id);
      break;
    case MsgType::ConnSetupComplete:
      if (rat == RatFlavor::NbIotCpOpt && !req.nas_data.empty()) {
        if (req.nas_data.size() > 255) throw Error(ErrorCode::PayloadTooLarge, "NAS container holds at most 255 bytes");
        put_tlv(p, tlv::kNasData, req.nas_data);
      }
      break;
    case MsgType::ConnReconfiguration:
      put_drx_tlv(p, req.drx.value_or(ue.drx));
      break;
    default:
      break;
  }
  return p;
}

}  // namespace detail

/// Runs one procedure to completion. Every message passes through the codec
/// so the transcript holds exactly what a peer would decode.
inline ProcedureResult run_procedure(RatFlavor rat, SliceId slice, UeContext ue, const ProcedureRequest& req,
                                     SimTime now = 0, const MessageHook& hook = {},
                                     const ProcedureCatalog& catalog = {}) {
  if (!supported(rat, req.proc))
    throw Error(ErrorCode::UnsupportedByRat,
                std::string(to_string(req.proc)) + " is not available on " + to_string(rat) + " slices");
  const auto [from, to] = transition(req.proc);
  if (ue.rrc_state != from)
    throw Error(ErrorCode::IllegalProcedure,
                std::string(to_string(req.proc)) + " needs " + to_string(from) + ", UE is " + to_string(ue.rrc_state));
  if (req.proc == Procedure::Reconfigure) {
    if (!req.drx) throw Error(ErrorCode::InvalidDrxParams, "reconfiguration without DRX parameters");
    validate(*req.drx);
  }

  ProcedureResult res;
  const auto& flow = catalog.flow(rat, req.proc);
  for (std::size_t i = 0; i < flow.size(); ++i) {
    auto m = RrcMessage::make(slice, flow[i], detail::payload_for(flow[i], rat, ue, req));
    m = decode_message(encode_message(m));
    res.transcript.push_back(m);
    if (hook) hook(res.transcript.back(), i);
  }

  ue.rrc_state = to;
  switch (req.proc) {
    case Procedure::Attach:
      ue.bearers = rat == RatFlavor::NbIotCpOpt ? (bearer::SRB0 | bearer::SRB1bis)
                                                : (bearer::SRB0 | bearer::SRB1 | bearer::DRB);
      ue.security_active = rat != RatFlavor::NbIotCpOpt;
      break;
    case Procedure::SecurityEstablish:
      ue.security_active = true;
      break;
    case Procedure::Reconfigure:
      ue.drx = *req.drx;
      ue.config_history.push_back({now, *req.drx});
      ue.pending_drx.reset();
      break;
    case Procedure::Suspend:
      ue.bearers = bearer::SRB0;
      break;
    case Procedure::Resume:
      ue.bearers = bearer::SRB0 | bearer::SRB1 | bearer::DRB;
      break;
    case Procedure::Release:
      ue.bearers = bearer::SRB0;
      ue.security_active = false;
      break;
  }
  res.ue = std::move(ue);
  return res;
}

/// Records a DRX change to be delivered at the UE's next on-duration.
/// Returns false, and leaves the context alone, when nothing would change.
inline bool reconfigure_drx(UeContext& ue, const DrxParams& next, SimTime now) {
  validate(next);
  const DrxParams& target = ue.pending_drx ? ue.pending_drx->drx : ue.drx;
  if (next == target) return false;
  if (next == ue.drx) {
    ue.pending_drx.reset();  // the pending change is withdrawn
    return true;
  }
  ue.pending_drx = ConfigChange{now, next};
  return true;
}

}  // namespace ciotsim
