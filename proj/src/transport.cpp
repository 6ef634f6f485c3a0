#include "vmask/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <stdexcept>

namespace vmask {
namespace {

constexpr std::uint16_t kMagic = 0x564d;  // "VM"
constexpr std::uint8_t kVersion = 1;
// magic(2) version(1) kind(1) party(8) tag(8) step(8) payload_len(4)
constexpr std::size_t kHeaderSize = 32;

std::uint32_t crc_table_entry(std::uint32_t i) {
  std::uint32_t c = i;
  for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
  return c;
}

struct CrcTable {
  std::uint32_t t[256];
  CrcTable() {
    for (std::uint32_t i = 0; i < 256; ++i) t[i] = crc_table_entry(i);
  }
};

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t size) {
  static const CrcTable table;
  std::uint32_t c = 0xffffffffu;
  for (std::size_t i = 0; i < size; ++i) {
    c = table.t[(c ^ data[i]) & 0xffu] ^ (c >> 8);
  }
  return c ^ 0xffffffffu;
}

std::vector<std::uint8_t> encode_frame(const Message& m) {
  std::vector<std::uint8_t> out(kHeaderSize + m.payload.size() + 4);
  std::uint8_t* p = out.data();
  std::memcpy(p, &kMagic, 2);
  p[2] = kVersion;
  p[3] = static_cast<std::uint8_t>(m.kind);
  std::memcpy(p + 4, &m.party, 8);
  std::memcpy(p + 12, &m.tag, 8);
  std::memcpy(p + 20, &m.step, 8);
  const std::uint32_t len = static_cast<std::uint32_t>(m.payload.size());
  std::memcpy(p + 28, &len, 4);
  std::memcpy(p + kHeaderSize, m.payload.data(), m.payload.size());
  const std::uint32_t crc = crc32(p, kHeaderSize + m.payload.size());
  std::memcpy(p + kHeaderSize + m.payload.size(), &crc, 4);
  return out;
}

Message decode_frame(const std::uint8_t* data, std::size_t size) {
  if (size < kHeaderSize + 4) throw std::runtime_error("frame truncated");
  std::uint16_t magic;
  std::memcpy(&magic, data, 2);
  if (magic != kMagic) throw std::runtime_error("frame: bad magic");
  if (data[2] != kVersion) {
    throw std::runtime_error("frame: unsupported version " +
                             std::to_string(int(data[2])));
  }
  std::uint32_t len;
  std::memcpy(&len, data + 28, 4);
  if (size != kHeaderSize + len + 4) {
    throw std::runtime_error("frame: length mismatch");
  }
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, data + kHeaderSize + len, 4);
  if (stored_crc != crc32(data, kHeaderSize + len)) {
    throw std::runtime_error("frame: checksum mismatch");
  }
  Message m;
  m.kind = static_cast<MsgKind>(data[3]);
  std::memcpy(&m.party, data + 4, 8);
  std::memcpy(&m.tag, data + 12, 8);
  std::memcpy(&m.step, data + 20, 8);
  m.payload.assign(data + kHeaderSize, data + kHeaderSize + len);
  return m;
}

namespace {

// ---------------------------------------------------------------- in-proc

struct InProcState {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::vector<std::uint8_t>> q[2];  // q[i]: frames waiting for end i
  bool closed = false;
};

class InProcChannel : public Channel {
 public:
  InProcChannel(std::shared_ptr<InProcState> s, int end) : s_(std::move(s)), end_(end) {}
  ~InProcChannel() override { close(); }

  void send(const Message& m) override {
    auto frame = encode_frame(m);
    std::lock_guard<std::mutex> lk(s_->mu);
    if (s_->closed) throw std::runtime_error("send on closed channel");
    s_->q[1 - end_].push_back(std::move(frame));
    s_->cv.notify_all();
  }

  Message recv() override {
    std::unique_lock<std::mutex> lk(s_->mu);
    s_->cv.wait(lk, [&] { return !s_->q[end_].empty() || s_->closed; });
    if (s_->q[end_].empty()) throw std::runtime_error("recv on closed channel");
    auto frame = std::move(s_->q[end_].front());
    s_->q[end_].pop_front();
    lk.unlock();
    return decode_frame(frame.data(), frame.size());
  }

  void close() override {
    std::lock_guard<std::mutex> lk(s_->mu);
    s_->closed = true;
    s_->cv.notify_all();
  }

 private:
  std::shared_ptr<InProcState> s_;
  int end_;
};

// -------------------------------------------------------------------- tcp

class TcpChannel : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {}
  ~TcpChannel() override { close(); }

  void send(const Message& m) override {
    const auto frame = encode_frame(m);
    std::size_t off = 0;
    while (off < frame.size()) {
      // MSG_NOSIGNAL: a dead peer must surface as an exception, not SIGPIPE.
      const ssize_t n = ::send(fd_, frame.data() + off, frame.size() - off,
                               MSG_NOSIGNAL);
      if (n <= 0) throw std::runtime_error("send on closed channel");
      off += std::size_t(n);
    }
  }

  Message recv() override {
    std::vector<std::uint8_t> frame(kHeaderSize);
    read_exact(frame.data(), kHeaderSize);
    std::uint32_t len;
    std::memcpy(&len, frame.data() + 28, 4);
    frame.resize(kHeaderSize + len + 4);
    read_exact(frame.data() + kHeaderSize, len + 4);
    return decode_frame(frame.data(), frame.size());
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  void read_exact(std::uint8_t* p, std::size_t n) {
    std::size_t off = 0;
    while (off < n) {
      const ssize_t r = ::read(fd_, p + off, n - off);
      if (r <= 0) throw std::runtime_error("recv on closed channel");
      off += std::size_t(r);
    }
  }

  int fd_ = -1;
};

int checked(int rc, const char* what) {
  if (rc < 0) throw std::runtime_error(std::string(what) + " failed");
  return rc;
}

}  // namespace

ChannelPair make_inproc_pair() {
  auto state = std::make_shared<InProcState>();
  ChannelPair p;
  p.a = std::make_shared<InProcChannel>(state, 0);
  p.b = std::make_shared<InProcChannel>(state, 1);
  return p;
}

ChannelPair make_tcp_pair() {
  const int listener = checked(::socket(AF_INET, SOCK_STREAM, 0), "socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  checked(::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)),
          "bind");
  checked(::listen(listener, 1), "listen");
  socklen_t alen = sizeof(addr);
  checked(::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &alen),
          "getsockname");

  const int client = checked(::socket(AF_INET, SOCK_STREAM, 0), "socket");
  checked(::connect(client, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)),
          "connect");
  const int server = checked(::accept(listener, nullptr, nullptr), "accept");
  ::close(listener);
  const int one = 1;
  ::setsockopt(client, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  ::setsockopt(server, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

  ChannelPair p;
  p.a = std::make_shared<TcpChannel>(server);
  p.b = std::make_shared<TcpChannel>(client);
  return p;
}

ChannelPair make_channel_pair(TransportKind k) {
  return k == TransportKind::InProc ? make_inproc_pair() : make_tcp_pair();
}

}  // namespace vmask
