#include "doctest.h"

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "support/util.hpp"
#include "vmask/transport.hpp"

using namespace vmask;

namespace {

Message make_msg(MsgKind kind, std::uint64_t party, std::uint64_t tag,
                 std::uint64_t step, std::vector<std::uint8_t> payload) {
  Message m;
  m.kind = kind;
  m.party = party;
  m.tag = tag;
  m.step = step;
  m.payload = std::move(payload);
  return m;
}

void check_transport_semantics(const ChannelPair& pair) {
  // FIFO order and full header fidelity, both directions.
  for (std::uint64_t i = 0; i < 8; ++i)
    pair.a->send(make_msg(MsgKind::Embedding, 1, i, 100 + i,
                          {std::uint8_t(i), std::uint8_t(i + 1)}));
  for (std::uint64_t i = 0; i < 8; ++i) {
    Message m = pair.b->recv();
    CHECK(m.kind == MsgKind::Embedding);
    CHECK(m.party == 1);
    CHECK(m.tag == i);
    CHECK(m.step == 100 + i);
    CHECK(m.payload == std::vector<std::uint8_t>{std::uint8_t(i),
                                                 std::uint8_t(i + 1)});
  }
  pair.b->send(make_msg(MsgKind::EmbeddingGrad, 2, 9, 9, {}));
  CHECK(pair.a->recv().kind == MsgKind::EmbeddingGrad);

  // Large payload integrity.
  std::vector<std::uint8_t> big(1 << 18);
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = std::uint8_t(i * 7);
  pair.a->send(make_msg(MsgKind::InputShare, 1, 0, 0, big));
  CHECK(pair.b->recv().payload == big);

  // Concurrent ping-pong from both ends.
  std::atomic<int> sum{0};
  testutil::run_pair(
      [&] {
        for (int i = 0; i < 50; ++i) {
          pair.a->send(make_msg(MsgKind::Control, 1, std::uint64_t(i), 0, {}));
          sum += int(pair.a->recv().tag);
        }
      },
      [&] {
        for (int i = 0; i < 50; ++i) {
          Message m = pair.b->recv();
          pair.b->send(make_msg(MsgKind::Control, 2, m.tag * 2, 0, {}));
        }
      });
  CHECK(sum.load() == 2 * (49 * 50 / 2));

  // Close semantics: pending recv on the peer throws.
  pair.a->close();
  CHECK_THROWS_AS(pair.b->recv(), std::runtime_error);
}

}  // namespace

TEST_SUITE("transport") {

TEST_CASE("in-process channel semantics") {
  check_transport_semantics(make_inproc_pair());
}

TEST_CASE("tcp loopback channel semantics") {
  check_transport_semantics(make_tcp_pair());
}

TEST_CASE("make_channel_pair dispatches on the transport kind") {
  ChannelPair p = make_channel_pair(TransportKind::InProc);
  p.a->send(make_msg(MsgKind::Control, 1, 0, 0, {1}));
  CHECK(p.b->recv().payload == std::vector<std::uint8_t>{1});
  ChannelPair q = make_channel_pair(TransportKind::Tcp);
  q.a->send(make_msg(MsgKind::Control, 1, 0, 0, {2}));
  CHECK(q.b->recv().payload == std::vector<std::uint8_t>{2});
}

TEST_CASE("frame codec round-trips and rejects corruption") {
  Message m = make_msg(MsgKind::SharedMulOpen, 3, 77, 0x0102030405060708ull,
                       {9, 8, 7, 6, 5});
  std::vector<std::uint8_t> frame = encode_frame(m);
  Message back = decode_frame(frame.data(), frame.size());
  CHECK(back.kind == m.kind);
  CHECK(back.party == m.party);
  CHECK(back.tag == m.tag);
  CHECK(back.step == m.step);
  CHECK(back.payload == m.payload);

  // Any single flipped payload byte must break the checksum.
  std::vector<std::uint8_t> bad = frame;
  bad.back() ^= 0x01;
  CHECK_THROWS_AS(decode_frame(bad.data(), bad.size()), std::runtime_error);

  CHECK_THROWS_AS(decode_frame(frame.data(), frame.size() - 1),
                  std::runtime_error);
}

TEST_CASE("crc32 matches the reference value for a known vector") {
  // Standard IEEE CRC-32 of "123456789".
  const std::string s = "123456789";
  CHECK(crc32(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()) ==
        0xCBF43926u);
}

TEST_CASE("send on a closed channel is an error") {
  ChannelPair p = make_inproc_pair();
  p.b->close();
  CHECK_THROWS_WITH_AS(p.a->send(make_msg(MsgKind::Control, 1, 0, 0, {})),
                       "send on closed channel", std::runtime_error);
  CHECK_THROWS_WITH_AS(p.a->recv(), "recv on closed channel",
                       std::runtime_error);
}

}  // TEST_SUITE
