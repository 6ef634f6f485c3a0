#include "vmask/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vmask {
namespace {

constexpr char kMagic[4] = {'V', 'M', 'S', 'K'};
constexpr std::uint32_t kVersion = 1;

void put(std::vector<std::uint8_t>& out, const void* p, std::size_t n) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  out.insert(out.end(), b, b + n);
}

template <typename T>
T take(const std::uint8_t*& p, const std::uint8_t* end) {
  if (p + sizeof(T) > end) throw std::runtime_error("checkpoint truncated");
  T v;
  std::memcpy(&v, p, sizeof(T));
  p += sizeof(T);
  return v;
}

}  // namespace

std::vector<std::uint8_t> model_to_bytes(const Model& m) {
  std::vector<std::uint8_t> out;
  put(out, kMagic, 4);
  put(out, &kVersion, 4);
  const std::uint8_t role = static_cast<std::uint8_t>(m.role);
  const std::uint8_t act = static_cast<std::uint8_t>(m.activation);
  put(out, &role, 1);
  put(out, &act, 1);
  const std::uint32_t depth = static_cast<std::uint32_t>(m.layers.size());
  put(out, &depth, 4);
  for (const LinearLayer& l : m.layers) {
    const std::uint8_t status = static_cast<std::uint8_t>(l.mask_status);
    put(out, &status, 1);
    const std::uint64_t rows = l.weight.rows(), cols = l.weight.cols();
    put(out, &rows, 8);
    put(out, &cols, 8);
    put(out, l.weight.data.data(), l.weight.size() * 8);
    put(out, l.bias.data.data(), l.bias.size() * 8);
  }
  return out;
}

Model model_from_bytes(const std::vector<std::uint8_t>& bytes) {
  const std::uint8_t* p = bytes.data();
  const std::uint8_t* end = p + bytes.size();
  char magic[4];
  if (bytes.size() < 4) throw std::runtime_error("checkpoint truncated");
  std::memcpy(magic, p, 4);
  p += 4;
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  const std::uint32_t version = take<std::uint32_t>(p, end);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version));
  }
  Model m;
  m.role = static_cast<ModelRole>(take<std::uint8_t>(p, end));
  m.activation = static_cast<Activation>(take<std::uint8_t>(p, end));
  const std::uint32_t depth = take<std::uint32_t>(p, end);
  for (std::uint32_t j = 0; j < depth; ++j) {
    LinearLayer l;
    l.mask_status = static_cast<MaskStatus>(take<std::uint8_t>(p, end));
    const std::uint64_t rows = take<std::uint64_t>(p, end);
    const std::uint64_t cols = take<std::uint64_t>(p, end);
    l.weight = Tensor(rows, cols);
    l.bias = Tensor(rows);
    if (p + (l.weight.size() + l.bias.size()) * 8 > end) {
      throw std::runtime_error("checkpoint truncated");
    }
    std::memcpy(l.weight.data.data(), p, l.weight.size() * 8);
    p += l.weight.size() * 8;
    std::memcpy(l.bias.data.data(), p, l.bias.size() * 8);
    p += l.bias.size() * 8;
    m.layers.push_back(std::move(l));
  }
  if (p != end) throw std::runtime_error("checkpoint: trailing bytes");
  return m;
}

void save_model(const std::string& path, const Model& m) {
  const auto bytes = model_to_bytes(m);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          std::streamsize(bytes.size()));
  if (!f) throw std::runtime_error("short write to " + path);
}

Model load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return model_from_bytes(bytes);
}

}  // namespace vmask
