// Copyright 2026 The ciotsim Authors. SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <numeric>
#include <thread>

#include "ciotsim/slicing.hpp"

using namespace ciotsim;

namespace {

NackCode dispatch(SliceRegistry& reg, const SliceCommand& c, SimTime now = 0) {
  return decode_response(reg.dispatch_command(encode_command(c), now)).status;
}

SliceCommand add(RatFlavor rat) { return {CommandOp::Add, std::nullopt, {rat, std::nullopt, std::nullopt}}; }

}  // namespace

TEST(Registry, IdsAreMonotoneAndNeverReused) {
  SliceRegistry reg;
  const auto a = reg.add_slice(RatFlavor::NbIotCpOpt, {}, 0);
  const auto b = reg.add_slice(RatFlavor::NbIotUpOpt, {}, 1);
  EXPECT_EQ(a.id, 1);
  EXPECT_EQ(b.id, 2);
  EXPECT_EQ(a.state, SliceState::Running);
  reg.delete_slice(b.id, 2);
  EXPECT_FALSE(reg.find(b.id));
  const auto c = reg.add_slice(RatFlavor::LteLike, {}, 3);
  EXPECT_EQ(c.id, 3);
  EXPECT_EQ(reg.issued(), (std::vector<SliceId>{1, 2, 3}));
  EXPECT_EQ(reg.ids(), (std::vector<SliceId>{1, 3}));
}

TEST(Registry, CapacityAndValidation) {
  SliceRegistry reg({2, ExecMode::Deterministic, 16});
  reg.add_slice(RatFlavor::NbIotCpOpt, {}, 0);
  reg.add_slice(RatFlavor::NbIotCpOpt, {}, 0);
  EXPECT_EQ(dispatch(reg, add(RatFlavor::LteLike)), NackCode::CapacityExceeded);
  EXPECT_EQ(reg.size(), 2u);
  EXPECT_THROW(SliceRegistry({0}), Error);
  SliceRegistry other;
  EXPECT_THROW(other.add_slice(RatFlavor::LteLike, {256, 256, 0, 0}, 0), Error);
  EXPECT_EQ(other.size(), 0u);
}

TEST(Southbound, CommandRoundTrip) {
  const SliceCommand cmds[] = {
      add(RatFlavor::NbIotUpOpt),
      {CommandOp::Add, std::nullopt, {RatFlavor::LteLike, DrxIndices{3, 1, 2, 9}, std::nullopt}},
      {CommandOp::Modify, 7, {std::nullopt, DrxIndices{0, 0, 0, 0}, 0xDEADBEEF}},
      {CommandOp::Modify, 7, {RatFlavor::NbIotCpOpt, std::nullopt, std::nullopt}},
      {CommandOp::Delete, 0xFFFF, {}},
  };
  for (const auto& c : cmds) {
    const Bytes wire = encode_command(c);
    EXPECT_EQ(wire[0], kMagic0);
    EXPECT_EQ(wire[1], kMagic1);
    EXPECT_EQ(wire[2], kProtocolVersion);
    EXPECT_EQ(decode_command(wire), c);
  }
  EXPECT_EQ(encode_command({CommandOp::Delete, 0x0203, {}}), (Bytes{0xC1, 0x07, 0x01, 0x03, 0x02, 0x03, 0x00, 0x00}));
}

TEST(Southbound, MalformedCommandsNack) {
  SliceRegistry reg;
  reg.add_slice(RatFlavor::NbIotUpOpt, {}, 0);
  const Bytes good = encode_command(add(RatFlavor::LteLike));
  auto nack = [&](Bytes b) { return decode_response(reg.dispatch_command(b, 0)).status; };

  Bytes b = good;
  b[0] = 0;
  EXPECT_EQ(nack(b), NackCode::MalformedCommand);
  b = good;
  b[2] = 2;
  EXPECT_EQ(nack(b), NackCode::MalformedCommand);
  b = good;
  b[3] = 4;
  EXPECT_EQ(nack(b), NackCode::MalformedCommand);
  b = good;
  b.push_back(0);
  EXPECT_EQ(nack(b), NackCode::MalformedCommand);
  EXPECT_EQ(nack(Bytes(good.begin(), good.begin() + 5)), NackCode::MalformedCommand);
  b = good;
  b[5] = 1;  // add naming a slice
  EXPECT_EQ(nack(b), NackCode::MalformedCommand);
  EXPECT_EQ(nack(encode_command({CommandOp::Add, std::nullopt, {}})), NackCode::MalformedCommand);
  EXPECT_EQ(nack(encode_command({CommandOp::Delete, 1, {RatFlavor::LteLike, std::nullopt, std::nullopt}})),
            NackCode::MalformedCommand);
  EXPECT_EQ(nack(encode_command({CommandOp::Modify, 1, {std::nullopt, std::nullopt, 5}})), NackCode::MalformedCommand);
  // Modify and delete with slice id 0 on the wire.
  EXPECT_EQ(nack({0xC1, 0x07, 0x01, 0x03, 0x00, 0x00, 0x00, 0x00}), NackCode::MalformedCommand);
  EXPECT_EQ(reg.size(), 1u);
}

TEST(Southbound, NackCodes) {
  SliceRegistry reg;
  EXPECT_EQ(dispatch(reg, add(RatFlavor::NbIotUpOpt)), NackCode::Ack);
  EXPECT_EQ(dispatch(reg, {CommandOp::Delete, 9, {}}), NackCode::UnknownSlice);
  EXPECT_EQ(dispatch(reg, {CommandOp::Modify, 1, {std::nullopt, DrxIndices{0, 6, 0, 0}, std::nullopt}}),
            NackCode::InvalidDrxParams);
  EXPECT_EQ(dispatch(reg, {CommandOp::Modify, 1, {std::nullopt, DrxIndices{11, 0, 0, 0}, 77}}), NackCode::UnknownUe);

  const auto resp = decode_response(reg.dispatch_command(encode_command(add(RatFlavor::LteLike)), 5));
  EXPECT_TRUE(resp.ok());
  EXPECT_EQ(resp.slice_id, 2);
  EXPECT_FALSE(resp.payload.empty());
}

TEST(Southbound, ModifyChangesDefaultOrOneUe) {
  SliceRegistry reg;
  const auto d = reg.add_slice(RatFlavor::NbIotUpOpt, {}, 0);
  auto& ctx = reg.context(d.id);
  ctx.add_ue(4);
  ctx.add_ue(5);
  const DrxIndices next{4, 1, 1, 0};
  EXPECT_EQ(dispatch(reg, {CommandOp::Modify, d.id, {std::nullopt, next, 4}}, 10), NackCode::Ack);
  EXPECT_EQ(reg.descriptor(d.id).default_drx, DrxParams{});
  ASSERT_TRUE(ctx.ue(4).pending_drx);
  EXPECT_EQ(ctx.ue(4).pending_drx->drx, DrxParams::from_indices(next));
  EXPECT_FALSE(ctx.ue(5).pending_drx);

  EXPECT_EQ(dispatch(reg, {CommandOp::Modify, d.id, {RatFlavor::LteLike, next, std::nullopt}}, 11), NackCode::Ack);
  EXPECT_EQ(reg.descriptor(d.id).default_drx, DrxParams::from_indices(next));
  EXPECT_EQ(reg.descriptor(d.id).rat, RatFlavor::LteLike);
}

TEST(Slice, DeleteDrainsConnectedUes) {
  for (ExecMode mode : {ExecMode::Deterministic, ExecMode::Threaded}) {
    SliceRegistry reg({16, mode, 16});
    const auto d = reg.add_slice(RatFlavor::NbIotUpOpt, {}, 0);
    auto ctx = reg.find(d.id);
    ctx->add_ue(1);
    ctx->add_ue(2);
    ctx->post(1, {}, 5).get();
    reg.delete_slice(d.id, 20);
    reg.collect();
    EXPECT_EQ(ctx->descriptor().state, SliceState::Deleting);
    EXPECT_EQ(ctx->ue(1).rrc_state, RrcState::Idle);
    EXPECT_EQ(ctx->ue(2).rrc_state, RrcState::Idle);
    EXPECT_EQ(ctx->transcript().back().proc, Procedure::Release);
    EXPECT_EQ(ctx->transcript().back().time, 20);
    EXPECT_EQ(dispatch(reg, {CommandOp::Modify, d.id, {RatFlavor::LteLike, std::nullopt, std::nullopt}}),
              NackCode::UnknownSlice);
  }
}

TEST(Slice, TranscriptsStayPerSlice) {
  SliceRegistry reg({16, ExecMode::Threaded, 16});
  const auto a = reg.add_slice(RatFlavor::NbIotCpOpt, {}, 0);
  const auto b = reg.add_slice(RatFlavor::NbIotUpOpt, {}, 0);
  reg.context(a.id).add_ue(1);
  reg.context(b.id).add_ue(1);
  auto fa = reg.context(a.id).post(1, {}, 1);
  auto fb = reg.context(b.id).post(1, {}, 1);
  fa.get();
  fb.get();
  EXPECT_EQ(reg.context(a.id).transcript().size(), 3u);
  EXPECT_EQ(reg.context(b.id).transcript().size(), 7u);
  for (const auto& e : reg.context(a.id).transcript()) EXPECT_EQ(e.message.slice_id, a.id);
}

TEST(Executor, RunsInPostOrder) {
  for (ExecMode mode : {ExecMode::Deterministic, ExecMode::Threaded}) {
    Executor ex(mode);
    std::vector<int> seen;
    std::vector<std::future<void>> fs;
    for (int i = 0; i < 50; ++i) fs.push_back(ex.post([&seen, i] { seen.push_back(i); }));
    for (auto& f : fs) f.get();
    std::vector<int> want(50);
    std::iota(want.begin(), want.end(), 0);
    EXPECT_EQ(seen, want);
    ex.stop();
    if (mode == ExecMode::Threaded) EXPECT_THROW(ex.post([] {}), Error);
  }
}

TEST(Executor, PropagatesExceptions) {
  Executor ex(ExecMode::Threaded);
  auto f = ex.post([] { throw Error(ErrorCode::UnknownUe, "x"); });
  EXPECT_THROW(f.get(), Error);
}
