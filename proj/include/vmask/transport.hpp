#pragma once

#include <cstdint>
#include <memory>
#include <vector>

namespace vmask {

enum class MsgKind : std::uint8_t {
  Control = 0,
  Embedding = 1,
  EmbeddingGrad = 2,
  SharedMulOpen = 3,
  LayerShare = 4,
  LayerReconstruct = 5,
  InputShare = 6,
  ResultShare = 7,
};

struct Message {
  MsgKind kind = MsgKind::Control;
  std::uint64_t party = 0;  // sender's party id
  std::uint64_t tag = 0;    // layer or batch index, kind dependent
  std::uint64_t step = 0;   // protocol step counter inside an exchange
  std::vector<std::uint8_t> payload;
};

// Reliable, in-order, bidirectional message channel between two parties.
// send never blocks on the peer; recv blocks until a message or the peer
// closes (then throws std::runtime_error).
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(const Message& m) = 0;
  virtual Message recv() = 0;
  virtual void close() = 0;
};

struct ChannelPair {
  std::shared_ptr<Channel> a, b;
};

// In-process queue backend (default; deterministic and dependency free).
ChannelPair make_inproc_pair();
// TCP loopback backend with identical framing.
ChannelPair make_tcp_pair();

enum class TransportKind { InProc = 0, Tcp = 1 };
ChannelPair make_channel_pair(TransportKind k);

// Length-prefixed, versioned, checksummed frame codec; both backends use it.
std::vector<std::uint8_t> encode_frame(const Message& m);
Message decode_frame(const std::uint8_t* data, std::size_t size);

std::uint32_t crc32(const std::uint8_t* data, std::size_t size);

}  // namespace vmask
