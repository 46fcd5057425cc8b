// Copyright 2026 The ciotsim Authors. SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "ciotsim/rrc.hpp"
#include "ciotsim/traffic.hpp"

using namespace ciotsim;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

UeContext fresh(SliceId slice = 1) { return UeContext(9, slice, DrxParams{}); }

}  // namespace

TEST(Codec, RoundTripsEveryType) {
  Rng rng = make_rng(1);
  for (std::uint8_t t = 1; t <= kMsgTypeCount; ++t) {
    for (std::size_t len : {0u, 1u, 255u, 4096u}) {
      Bytes payload(len);
      for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
      const auto m = RrcMessage::make(static_cast<SliceId>(1 + rng() % 0xFFFE), static_cast<MsgType>(t), payload);
      const Bytes wire = encode_message(m);
      EXPECT_EQ(wire.size(), kRrcHeaderBytes + len);
      EXPECT_EQ(decode_message(wire), m);
    }
  }
}

TEST(Codec, HeaderLayout) {
  const auto m = RrcMessage::make(0x0102, MsgType::ConnRequest, {0xAA});
  EXPECT_EQ(encode_message(m), (Bytes{0x01, 0x02, 0x00, 0x01, 0x00, 0x01, 0xAA}));
  EXPECT_EQ(RrcMessage::make(1, MsgType::Paging).channel, LogicalChannel::PCCH);
  EXPECT_EQ(RrcMessage::make(1, MsgType::SystemInfo).channel, LogicalChannel::BCCH);
  EXPECT_EQ(RrcMessage::make(1, MsgType::ConnResumeRequest).channel, LogicalChannel::CCCH);
  EXPECT_EQ(RrcMessage::make(1, MsgType::ConnRelease).channel, LogicalChannel::DCCH);
}

TEST(Codec, RejectsBadFrames) {
  auto m = RrcMessage::make(3, MsgType::ConnSetup, Bytes(10, 1));
  const Bytes good = encode_message(m);
  EXPECT_EQ(code_of([&] { decode_message(std::span(good).first(5)); }), ErrorCode::MalformedMessage);
  Bytes longer = good;
  longer.push_back(0);
  EXPECT_EQ(code_of([&] { decode_message(longer); }), ErrorCode::MalformedMessage);
  Bytes zero = good;
  zero[0] = zero[1] = 0;
  EXPECT_EQ(code_of([&] { decode_message(zero); }), ErrorCode::MalformedMessage);
  Bytes wrong_channel = good;
  wrong_channel[2] = 1;
  EXPECT_EQ(code_of([&] { decode_message(wrong_channel); }), ErrorCode::MalformedMessage);
  Bytes bad_type = good;
  bad_type[3] = 15;
  EXPECT_EQ(code_of([&] { decode_message(bad_type); }), ErrorCode::MalformedMessage);

  m.payload.assign(kMaxPayload + 1, 0);
  EXPECT_EQ(code_of([&] { encode_message(m); }), ErrorCode::PayloadTooLarge);
  auto on_dcch = RrcMessage::make(3, MsgType::ConnSetup);
  on_dcch.channel = LogicalChannel::DCCH;
  EXPECT_EQ(code_of([&] { encode_message(on_dcch); }), ErrorCode::MalformedMessage);
}

TEST(Procedures, AttachFlowsPerRat) {
  const auto cp = run_procedure(RatFlavor::NbIotCpOpt, 1, fresh(), {Procedure::Attach, std::nullopt, {1, 2, 3}});
  ASSERT_EQ(cp.transcript.size(), 3u);
  EXPECT_EQ(cp.ue.rrc_state, RrcState::Connected);
  EXPECT_FALSE(cp.ue.security_active);
  EXPECT_EQ(cp.ue.bearers, bearer::SRB0 | bearer::SRB1bis);

  const auto up = run_procedure(RatFlavor::NbIotUpOpt, 1, fresh(), {Procedure::Attach, std::nullopt, {}});
  ASSERT_EQ(up.transcript.size(), 7u);
  EXPECT_EQ(up.transcript[3].type, MsgType::SecurityModeCommand);
  EXPECT_TRUE(up.ue.security_active);
  EXPECT_TRUE(up.ue.bearers & bearer::DRB);
  EXPECT_EQ(run_procedure(RatFlavor::LteLike, 1, fresh(), {}).transcript.size(), 7u);
}

TEST(Procedures, SuspendResumeOnUpOnly) {
  auto ue = run_procedure(RatFlavor::NbIotUpOpt, 2, fresh(2), {}).ue;
  ue = run_procedure(RatFlavor::NbIotUpOpt, 2, ue, {Procedure::Suspend, std::nullopt, {}}).ue;
  EXPECT_EQ(ue.rrc_state, RrcState::Suspended);
  EXPECT_EQ(ue.bearers, bearer::SRB0);
  const auto r = run_procedure(RatFlavor::NbIotUpOpt, 2, ue, {Procedure::Resume, std::nullopt, {}});
  EXPECT_EQ(r.transcript.size(), 3u);
  EXPECT_EQ(r.ue.rrc_state, RrcState::Connected);

  auto cp = run_procedure(RatFlavor::NbIotCpOpt, 1, fresh(), {}).ue;
  EXPECT_EQ(code_of([&] { run_procedure(RatFlavor::NbIotCpOpt, 1, cp, {Procedure::Suspend, std::nullopt, {}}); }),
            ErrorCode::UnsupportedByRat);
  EXPECT_EQ(code_of([&] {
              run_procedure(RatFlavor::NbIotCpOpt, 1, cp, {Procedure::SecurityEstablish, std::nullopt, {}});
            }),
            ErrorCode::UnsupportedByRat);
  auto lte = run_procedure(RatFlavor::LteLike, 1, fresh(), {}).ue;
  EXPECT_EQ(code_of([&] { run_procedure(RatFlavor::LteLike, 1, lte, {Procedure::Suspend, std::nullopt, {}}); }),
            ErrorCode::UnsupportedByRat);
}

TEST(Procedures, IllegalFromWrongState) {
  EXPECT_EQ(code_of([&] { run_procedure(RatFlavor::NbIotUpOpt, 1, fresh(), {Procedure::Release, std::nullopt, {}}); }),
            ErrorCode::IllegalProcedure);
  auto ue = run_procedure(RatFlavor::NbIotUpOpt, 1, fresh(), {}).ue;
  EXPECT_EQ(code_of([&] { run_procedure(RatFlavor::NbIotUpOpt, 1, ue, {}); }), ErrorCode::IllegalProcedure);
  EXPECT_EQ(code_of([&] { run_procedure(RatFlavor::NbIotUpOpt, 1, ue, {Procedure::Resume, std::nullopt, {}}); }),
            ErrorCode::IllegalProcedure);
  EXPECT_EQ(code_of([&] { run_procedure(RatFlavor::NbIotUpOpt, 1, ue, {Procedure::Reconfigure, std::nullopt, {}}); }),
            ErrorCode::InvalidDrxParams);
  EXPECT_EQ(code_of([&] {
              run_procedure(RatFlavor::NbIotUpOpt, 1, ue, {Procedure::Reconfigure, DrxParams{300, 16, 16, 0}, {}});
            }),
            ErrorCode::InvalidDrxParams);
}

TEST(Procedures, ReconfigureCarriesTimers) {
  auto ue = run_procedure(RatFlavor::NbIotCpOpt, 4, fresh(4), {}).ue;
  const DrxParams next = DrxParams::from_indices({5, 2, 3, 17});
  ue.pending_drx = ConfigChange{10, next};
  std::vector<std::size_t> seqs;
  const auto r = run_procedure(RatFlavor::NbIotCpOpt, 4, ue, {Procedure::Reconfigure, next, {}}, 55,
                               [&](const RrcMessage&, std::size_t s) { seqs.push_back(s); });
  EXPECT_EQ(seqs, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(r.ue.drx, next);
  EXPECT_FALSE(r.ue.pending_drx);
  ASSERT_EQ(r.ue.config_history.size(), 1u);
  EXPECT_EQ(r.ue.config_history[0].at, 55);
  const auto tlvs = split_tlvs(r.transcript[0].payload);
  ASSERT_TRUE(tlvs);
  bool found = false;
  for (const auto& t : *tlvs)
    if (t.tag == tlv::kDrx) {
      found = true;
      EXPECT_EQ(read_drx_value(t.value), next.indices());
    }
  EXPECT_TRUE(found);
}

TEST(Reconfigure, PendingSemantics) {
  UeContext ue = fresh();
  const DrxParams a = DrxParams::from_indices({2, 0, 1, 0});
  EXPECT_FALSE(reconfigure_drx(ue, ue.drx, 1));
  EXPECT_TRUE(reconfigure_drx(ue, a, 2));
  ASSERT_TRUE(ue.pending_drx);
  EXPECT_EQ(ue.pending_drx->at, 2);
  EXPECT_FALSE(reconfigure_drx(ue, a, 3));
  EXPECT_TRUE(reconfigure_drx(ue, DrxParams{}, 4));  // back to current: withdraw
  EXPECT_FALSE(ue.pending_drx);
  EXPECT_THROW(reconfigure_drx(ue, DrxParams{256, 256, 0, 0}, 5), Error);
}

TEST(History, RingBufferKeepsNewest) {
  RingBuffer<int> r(3);
  for (int i = 0; i < 5; ++i) r.push(i);
  EXPECT_EQ(r.size(), 3u);
  EXPECT_EQ(std::vector<int>(r.begin(), r.end()), (std::vector<int>{2, 3, 4}));
  UeContext ue(1, 1, DrxParams{}, 2);
  store_packet_record(ue, {1, 1, 1});
  store_packet_record(ue, {2, 1, 2});
  store_packet_record(ue, {3, 1, 3});
  EXPECT_EQ(ue.traffic_history.size(), 2u);
}
