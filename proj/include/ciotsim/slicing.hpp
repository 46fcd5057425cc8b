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

/*! \file  slicing.hpp
 *  \brief Slice registry, per-slice RRC contexts and the southbound protocol.
 *
 *  Southbound command frame, integers big-endian:
 *
 *    C1 07 | version=1 | op (1 add, 2 modify, 3 delete) | slice_id u16 | len u16 | TLVs
 *
 *  Response frame:
 *
 *    C1 07 | version=1 | status (0 ack, else NackCode) | slice_id u16 | len u16 | TLVs
 *
 *  Each slice owns its UE contexts and transcript. In threaded mode each
 *  slice also owns a worker thread and procedures are posted to it; the
 *  registry itself is only ever touched under its command lock.
 */

#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ciotsim/drx.hpp"
#include "ciotsim/error.hpp"
#include "ciotsim/rrc.hpp"

namespace ciotsim {

enum class SliceState : std::uint8_t { Initializing, Running, Deleting };

struct SliceDescriptor {
  SliceId id = kNoSlice;
  RatFlavor rat = RatFlavor::NbIotCpOpt;
  DrxParams default_drx;
  SimTime created_at = 0;
  SliceState state = SliceState::Initializing;

  friend bool operator==(const SliceDescriptor&, const SliceDescriptor&) = default;
};

enum class CommandOp : std::uint8_t { Add = 1, Modify = 2, Delete = 3 };

struct SlicePayload {
  std::optional<RatFlavor> rat;
  std::optional<DrxIndices> drx;  // kept as indices so invalid combinations reach validation
  std::optional<std::uint32_t> ue_id;

  friend bool operator==(const SlicePayload&, const SlicePayload&) = default;
};

struct SliceCommand {
  CommandOp op = CommandOp::Add;
  std::optional<SliceId> target;
  SlicePayload payload;

  friend bool operator==(const SliceCommand&, const SliceCommand&) = default;
};

enum class NackCode : std::uint8_t {
  Ack = 0,
  MalformedCommand = 1,
  UnknownSlice = 2,
  CapacityExceeded = 3,
  InvalidDrxParams = 4,
  UnknownUe = 5,
  SliceNotRunning = 6,
};

inline NackCode nack_for(ErrorCode e) {
  switch (e) {
    case ErrorCode::UnknownSlice: return NackCode::UnknownSlice;
    case ErrorCode::CapacityExceeded: return NackCode::CapacityExceeded;
    case ErrorCode::InvalidDrxParams: return NackCode::InvalidDrxParams;
    case ErrorCode::UnknownUe: return NackCode::UnknownUe;
    case ErrorCode::SliceNotRunning: return NackCode::SliceNotRunning;
    default: return NackCode::MalformedCommand;
  }
}

struct CommandResponse {
  NackCode status = NackCode::Ack;
  SliceId slice_id = kNoSlice;
  Bytes payload;

  bool ok() const { return status == NackCode::Ack; }
  friend bool operator==(const CommandResponse&, const CommandResponse&) = default;
};

inline constexpr std::uint8_t kMagic0 = 0xC1;
inline constexpr std::uint8_t kMagic1 = 0x07;
inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kSouthboundHeaderBytes = 8;

namespace detail {

inline void put_header(Bytes& out, std::uint8_t fourth, SliceId id, std::size_t len) {
  if (len > kMaxPayload) throw Error(ErrorCode::PayloadTooLarge, "southbound payload over 65535 bytes");
  out.insert(out.end(), {kMagic0, kMagic1, kProtocolVersion, fourth});
  put_u16(out, id);
  put_u16(out, static_cast<std::uint16_t>(len));
}

inline void check_header(std::span<const std::uint8_t> in, ErrorCode code) {
  if (in.size() < kSouthboundHeaderBytes) throw Error(code, "frame shorter than header");
  if (in[0] != kMagic0 || in[1] != kMagic1) throw Error(code, "bad magic");
  if (in[2] != kProtocolVersion) throw Error(code, "unsupported version " + std::to_string(in[2]));
  if (in.size() != kSouthboundHeaderBytes + get_u16(in, 6)) throw Error(code, "length field disagrees with frame");
}

}  // namespace detail

inline Bytes encode_command(const SliceCommand& c) {
  Bytes payload;
  if (c.payload.rat) {
    const std::uint8_t v = static_cast<std::uint8_t>(*c.payload.rat);
    put_tlv(payload, tlv::kRat, std::span(&v, 1));
  }
  if (c.payload.drx) {
    const auto& d = *c.payload.drx;
    const std::uint8_t v[4] = {d.cycle, d.on_duration, d.inactivity, d.start_offset};
    put_tlv(payload, tlv::kDrx, v);
  }
  if (c.payload.ue_id) put_ue_tlv(payload, *c.payload.ue_id);
  Bytes out;
  detail::put_header(out, static_cast<std::uint8_t>(c.op), c.target.value_or(kNoSlice), payload.size());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

/// Parses a command frame. Add must carry slice_id 0, Modify and Delete a
/// nonzero one; each TLV tag may appear at most once.
inline SliceCommand decode_command(std::span<const std::uint8_t> in) {
  detail::check_header(in, ErrorCode::MalformedCommand);
  SliceCommand c;
  if (in[3] < 1 || in[3] > 3) throw Error(ErrorCode::MalformedCommand, "unknown op " + std::to_string(in[3]));
  c.op = static_cast<CommandOp>(in[3]);
  const SliceId id = get_u16(in, 4);
  if (c.op == CommandOp::Add) {
    if (id != kNoSlice) throw Error(ErrorCode::MalformedCommand, "add must not name a slice");
  } else {
    if (id == kNoSlice) throw Error(ErrorCode::MalformedCommand, "modify/delete must name a slice");
    c.target = id;
  }
  const auto tlvs = split_tlvs(in.subspan(kSouthboundHeaderBytes));
  if (!tlvs) throw Error(ErrorCode::MalformedCommand, "truncated TLV");
  for (const auto& t : *tlvs) {
    switch (t.tag) {
      case tlv::kRat:
        if (c.payload.rat || t.value.size() != 1) throw Error(ErrorCode::MalformedCommand, "bad rat TLV");
        if (!(c.payload.rat = rat_from_byte(t.value[0]))) throw Error(ErrorCode::MalformedCommand, "unknown rat");
        break;
      case tlv::kDrx:
        if (c.payload.drx || !(c.payload.drx = read_drx_value(t.value)))
          throw Error(ErrorCode::MalformedCommand, "bad drx TLV");
        break;
      case tlv::kUeId:
        if (c.payload.ue_id || !(c.payload.ue_id = read_ue_value(t.value)))
          throw Error(ErrorCode::MalformedCommand, "bad ue_id TLV");
        break;
      default:
        throw Error(ErrorCode::MalformedCommand, "unknown TLV tag " + std::to_string(t.tag));
    }
  }
  if (c.op == CommandOp::Add && !c.payload.rat) throw Error(ErrorCode::MalformedCommand, "add needs a rat TLV");
  if (c.op == CommandOp::Add && c.payload.ue_id) throw Error(ErrorCode::MalformedCommand, "add takes no ue_id");
  if (c.op == CommandOp::Delete && (c.payload.rat || c.payload.drx || c.payload.ue_id))
    throw Error(ErrorCode::MalformedCommand, "delete takes no payload");
  if (c.payload.ue_id && !c.payload.drx) throw Error(ErrorCode::MalformedCommand, "ue override needs a drx TLV");
  return c;
}

inline Bytes encode_response(const CommandResponse& r) {
  Bytes out;
  detail::put_header(out, static_cast<std::uint8_t>(r.status), r.slice_id, r.payload.size());
  out.insert(out.end(), r.payload.begin(), r.payload.end());
  return out;
}

inline CommandResponse decode_response(std::span<const std::uint8_t> in) {
  detail::check_header(in, ErrorCode::MalformedMessage);
  if (in[3] > 6) throw Error(ErrorCode::MalformedMessage, "unknown status");
  return {static_cast<NackCode>(in[3]), get_u16(in, 4), Bytes(in.begin() + kSouthboundHeaderBytes, in.end())};
}

inline Bytes descriptor_payload(const SliceDescriptor& d) {
  Bytes p;
  const std::uint8_t rat = static_cast<std::uint8_t>(d.rat);
  put_tlv(p, tlv::kRat, std::span(&rat, 1));
  put_drx_tlv(p, d.default_drx);
  return p;
}

// ---------------------------------------------------------------------------
// Executors

enum class ExecMode : std::uint8_t { Deterministic, Threaded };

/// Runs posted tasks in order, either on the caller (deterministic) or on
/// one dedicated worker thread.
class Executor {
 public:
  explicit Executor(ExecMode mode) : mode_(mode) {
    if (mode_ == ExecMode::Threaded) worker_ = std::thread([this] { loop(); });
  }
  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;
  ~Executor() { stop(); }

  ExecMode mode() const { return mode_; }

  std::future<void> post(std::function<void()> task) {
    std::packaged_task<void()> job(std::move(task));
    auto fut = job.get_future();
    if (mode_ == ExecMode::Deterministic) {
      job();
      return fut;
    }
    {
      std::lock_guard lock(mu_);
      if (stopping_) throw Error(ErrorCode::SliceNotRunning, "executor is shutting down");
      queue_.push_back(std::move(job));
    }
    cv_.notify_one();
    return fut;
  }

  /// Finishes queued work, then joins the worker.
  void stop() {
    if (mode_ != ExecMode::Threaded) return;
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_one();
    if (worker_.joinable()) worker_.join();
  }

 private:
  void loop() {
    for (;;) {
      std::packaged_task<void()> job;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
        if (queue_.empty()) return;
        job = std::move(queue_.front());
        queue_.pop_front();
      }
      job();
    }
  }

  ExecMode mode_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::packaged_task<void()>> queue_;
  bool stopping_ = false;
  std::thread worker_;
};

// ---------------------------------------------------------------------------
// Slice context

struct TranscriptEntry {
  SimTime time = 0;
  std::uint32_t ue_id = 0;
  Procedure proc = Procedure::Attach;
  std::uint32_t seq = 0;  // message index within the procedure
  RrcMessage message;

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

/// One slice's RRC engine: its UEs, its transcript, its executor. Nothing
/// in here is shared with other slices.
class SliceContext {
 public:
  SliceContext(SliceDescriptor desc, ExecMode mode, std::size_t history_capacity = 1024,
               ProcedureCatalog catalog = {})
      : desc_(std::move(desc)), history_capacity_(history_capacity), catalog_(std::move(catalog)), exec_(mode) {}

  const SliceDescriptor& descriptor() const { return desc_; }
  SliceId id() const { return desc_.id; }
  Executor& executor() { return exec_; }

  void add_ue(std::uint32_t ue_id) {
    if (ues_.count(ue_id)) return;
    ues_.emplace(ue_id, UeContext(ue_id, desc_.id, desc_.default_drx, history_capacity_));
  }

  bool has_ue(std::uint32_t ue_id) const { return ues_.count(ue_id) != 0; }

  UeContext& ue(std::uint32_t ue_id) {
    auto it = ues_.find(ue_id);
    if (it == ues_.end()) throw Error(ErrorCode::UnknownUe, "UE " + std::to_string(ue_id) + " not on slice " +
                                                              std::to_string(desc_.id));
    return it->second;
  }

  const std::map<std::uint32_t, UeContext>& ues() const { return ues_; }

  /// Runs a procedure on the calling thread and logs its messages.
  const UeContext& run(std::uint32_t ue_id, const ProcedureRequest& req, SimTime now, const MessageHook& hook = {}) {
    UeContext& u = ue(ue_id);
    auto res = run_procedure(desc_.rat, desc_.id, u, req, now,
                             [&](const RrcMessage& m, std::size_t seq) {
                               transcript_.push_back({now, ue_id, req.proc, static_cast<std::uint32_t>(seq), m});
                               if (hook) hook(m, seq);
                             },
                             catalog_);
    u = std::move(res.ue);
    return u;
  }

  /// Queues a procedure on this slice's executor.
  std::future<void> post(std::uint32_t ue_id, ProcedureRequest req, SimTime now, MessageHook hook = {}) {
    return exec_.post([this, ue_id, req = std::move(req), now, hook = std::move(hook)] { run(ue_id, req, now, hook); });
  }

  /// Records a per-UE DRX change for delivery at the next on-duration.
  bool request_reconfiguration(std::uint32_t ue_id, const DrxParams& next, SimTime now) {
    return reconfigure_drx(ue(ue_id), next, now);
  }

  /// Sends the pending reconfiguration, if any. Returns the new timers.
  std::optional<DrxParams> deliver_reconfiguration(std::uint32_t ue_id, SimTime now) {
    UeContext& u = ue(ue_id);
    if (!u.pending_drx) return std::nullopt;
    const DrxParams next = u.pending_drx->drx;
    run(ue_id, {Procedure::Reconfigure, next, {}}, now);
    return next;
  }

  void set_default_drx(const DrxParams& p) { desc_.default_drx = p; }
  void set_rat(RatFlavor r) { desc_.rat = r; }
  void set_state(SliceState s) { desc_.state = s; }

  /// Releases connected UEs and forgets the rest.
  void drain(SimTime now) {
    for (auto& [id, u] : ues_)
      if (u.rrc_state == RrcState::Connected) run(id, {Procedure::Release, std::nullopt, {}}, now);
  }

  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }

 private:
  SliceDescriptor desc_;
  std::size_t history_capacity_;
  ProcedureCatalog catalog_;
  std::map<std::uint32_t, UeContext> ues_;
  std::vector<TranscriptEntry> transcript_;
  Executor exec_;
};

// ---------------------------------------------------------------------------
// Registry

struct RegistryConfig {
  std::size_t capacity = 16;
  ExecMode mode = ExecMode::Deterministic;
  std::size_t history_capacity = 1024;
};

class SliceRegistry {
 public:
  explicit SliceRegistry(RegistryConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.capacity == 0 || cfg_.capacity > 0xFFFF) throw Error(ErrorCode::InvalidScenario, "slice capacity out of range");
  }

  ~SliceRegistry() { collect(); }

  const RegistryConfig& config() const { return cfg_; }

  SliceDescriptor add_slice(RatFlavor rat, const DrxParams& default_drx, SimTime now) {
    std::lock_guard lock(mu_);
    if (slices_.size() >= cfg_.capacity)
      throw Error(ErrorCode::CapacityExceeded, "registry holds " + std::to_string(cfg_.capacity) + " slices");
    validate(default_drx);
    if (next_id_ == 0) throw Error(ErrorCode::CapacityExceeded, "slice id space exhausted");
    SliceDescriptor d{next_id_++, rat, default_drx, now, SliceState::Initializing};
    auto ctx = std::make_shared<SliceContext>(d, cfg_.mode, cfg_.history_capacity);
    ctx->set_state(SliceState::Running);
    slices_.emplace(d.id, ctx);
    issued_.push_back(d.id);
    return ctx->descriptor();
  }

  /// Changes the named fields. A per-UE DRX override is scheduled on that
  /// UE and leaves the slice default alone.
  SliceDescriptor modify_slice(SliceId id, const SlicePayload& payload, SimTime now) {
    std::lock_guard lock(mu_);
    auto ctx = running(id);
    std::optional<DrxParams> drx;
    if (payload.drx) drx = DrxParams::from_indices(*payload.drx);
    if (payload.ue_id && !drx) throw Error(ErrorCode::MalformedCommand, "ue override needs DRX parameters");
    // Context state belongs to the slice's executor; wait for it there.
    SliceDescriptor out;
    ctx->executor()
        .post([&] {
          if (payload.ue_id) {
            ctx->request_reconfiguration(*payload.ue_id, *drx, now);
          } else {
            if (payload.rat) ctx->set_rat(*payload.rat);
            if (drx) ctx->set_default_drx(*drx);
          }
          out = ctx->descriptor();
        })
        .get();
    return out;
  }

  /// Removes the slice at once; its context drains on its own executor.
  void delete_slice(SliceId id, SimTime now) {
    std::shared_ptr<SliceContext> ctx;
    {
      std::lock_guard lock(mu_);
      auto it = slices_.find(id);
      if (it == slices_.end()) throw Error(ErrorCode::UnknownSlice, "slice " + std::to_string(id));
      ctx = it->second;
      slices_.erase(it);
      ctx->set_state(SliceState::Deleting);
      retired_.push_back(ctx);
    }
    ctx->executor().post([ctx, now] { ctx->drain(now); });
  }

  Bytes dispatch_command(std::span<const std::uint8_t> raw, SimTime now) {
    CommandResponse resp;
    try {
      const SliceCommand cmd = decode_command(raw);
      resp.slice_id = cmd.target.value_or(kNoSlice);
      switch (cmd.op) {
        case CommandOp::Add: {
          const DrxParams drx = cmd.payload.drx ? DrxParams::from_indices(*cmd.payload.drx) : DrxParams{};
          const auto d = add_slice(*cmd.payload.rat, drx, now);
          resp.slice_id = d.id;
          resp.payload = descriptor_payload(d);
          break;
        }
        case CommandOp::Modify:
          resp.payload = descriptor_payload(modify_slice(*cmd.target, cmd.payload, now));
          break;
        case CommandOp::Delete:
          delete_slice(*cmd.target, now);
          break;
      }
    } catch (const Error& e) {
      resp.status = nack_for(e.code());
      resp.payload.clear();
    }
    return encode_response(resp);
  }

  std::shared_ptr<SliceContext> find(SliceId id) const {
    std::lock_guard lock(mu_);
    auto it = slices_.find(id);
    return it == slices_.end() ? nullptr : it->second;
  }

  SliceContext& context(SliceId id) {
    auto ctx = find(id);
    if (!ctx) throw Error(ErrorCode::UnknownSlice, "slice " + std::to_string(id));
    return *ctx;
  }

  SliceDescriptor descriptor(SliceId id) const {
    auto ctx = find(id);
    if (!ctx) throw Error(ErrorCode::UnknownSlice, "slice " + std::to_string(id));
    return ctx->descriptor();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return slices_.size();
  }

  std::vector<SliceId> ids() const {
    std::lock_guard lock(mu_);
    std::vector<SliceId> out;
    for (const auto& [id, c] : slices_) out.push_back(id);
    return out;
  }

  /// Every id handed out so far, in allocation order.
  const std::vector<SliceId>& issued() const { return issued_; }

  /// Live and deleted contexts, ordered by id, for reporting.
  std::vector<std::shared_ptr<SliceContext>> all_contexts() const {
    std::lock_guard lock(mu_);
    std::vector<std::shared_ptr<SliceContext>> out;
    for (const auto& [id, c] : slices_) out.push_back(c);
    out.insert(out.end(), retired_.begin(), retired_.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a->id() < b->id(); });
    return out;
  }

  /// Waits for deleted slices to finish draining and stops their workers.
  void collect() {
    std::vector<std::shared_ptr<SliceContext>> done;
    {
      std::lock_guard lock(mu_);
      done = retired_;
    }
    for (auto& c : done) c->executor().stop();
  }

 private:
  std::shared_ptr<SliceContext> running(SliceId id) {
    auto it = slices_.find(id);
    if (it == slices_.end()) throw Error(ErrorCode::UnknownSlice, "slice " + std::to_string(id));
    if (it->second->descriptor().state != SliceState::Running)
      throw Error(ErrorCode::SliceNotRunning, "slice " + std::to_string(id));
    return it->second;
  }

  RegistryConfig cfg_;
  mutable std::mutex mu_;
  std::map<SliceId, std::shared_ptr<SliceContext>> slices_;
  std::vector<std::shared_ptr<SliceContext>> retired_;
  std::vector<SliceId> issued_;
  SliceId next_id_ = 1;
};

}  // namespace ciotsim
