#include "vmask/share.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

namespace vmask {
namespace {

std::size_t count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

void require_ring64(const ShareDomain& d, const char* where) {
  if (d.kind == Domain::Ring && d.modulus_bits != 64) {
    throw std::invalid_argument(std::string(where) + ": unsupported modulus 2^" +
                                std::to_string(d.modulus_bits));
  }
  if (d.kind == Domain::Ring && (d.frac_bits == 0 || d.frac_bits >= 32)) {
    throw std::invalid_argument(std::string(where) + ": frac_bits " +
                                std::to_string(d.frac_bits) +
                                " outside (0, 32)");
  }
}

void require_compatible(const ShareTensor& a, const ShareTensor& b,
                        const char* where) {
  if (!(a.domain == b.domain)) {
    throw std::invalid_argument(std::string(where) + ": domain mismatch");
  }
  if (a.shape != b.shape) {
    throw std::invalid_argument(std::string(where) + ": shape mismatch");
  }
}

ShareTensor empty_like(const ShareDomain& d,
                       const std::vector<std::size_t>& shape) {
  ShareTensor t;
  t.domain = d;
  t.shape = shape;
  if (d.kind == Domain::Float) {
    t.f.assign(count(shape), 0.0);
  } else {
    t.r.assign(count(shape), 0);
  }
  return t;
}

// Ring matmul over Z_{2^64}: (n x k) * (k x m).
std::vector<std::uint64_t> ring_matmul(const std::vector<std::uint64_t>& a,
                                       const std::vector<std::uint64_t>& b,
                                       std::size_t n, std::size_t k,
                                       std::size_t m) {
  std::vector<std::uint64_t> c(n * m, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const std::uint64_t av = a[i * k + l];
      if (av == 0) continue;
      for (std::size_t j = 0; j < m; ++j) c[i * m + j] += av * b[l * m + j];
    }
  }
  return c;
}

Tensor as_tensor(const ShareTensor& t) {
  Tensor x;
  x.shape = t.shape;
  x.data = t.f;
  return x;
}

ShareTensor from_tensor(const Tensor& x, const ShareDomain& d) {
  ShareTensor t;
  t.domain = d;
  t.shape = x.shape;
  t.f = x.data;
  return t;
}

// One Beaver term set for either mode; returns this party's product share
// before any truncation.
ShareTensor beaver_combine(int role, const TripleHalf& t,
                           const ShareTensor& d_pub, const ShareTensor& e_pub) {
  const ShareDomain& dom = t.a.domain;
  const bool mat = t.mode == TripleMode::MatMul;
  if (dom.kind == Domain::Float) {
    Tensor z;
    if (mat) {
      z = add(matmul(as_tensor(d_pub), as_tensor(t.b)),
              matmul(as_tensor(t.a), as_tensor(e_pub)));
      if (role == 0) z = add(z, matmul(as_tensor(d_pub), as_tensor(e_pub)));
    } else {
      z = add(hadamard(as_tensor(d_pub), as_tensor(t.b)),
              hadamard(as_tensor(t.a), as_tensor(e_pub)));
      if (role == 0) z = add(z, hadamard(as_tensor(d_pub), as_tensor(e_pub)));
    }
    z = add(z, as_tensor(t.c));
    return from_tensor(z, dom);
  }
  ShareTensor z;
  z.domain = dom;
  z.shape = t.c.shape;
  if (mat) {
    const std::size_t n = d_pub.rows(), k = d_pub.cols(), m = e_pub.cols();
    z.r = ring_matmul(d_pub.r, t.b.r, n, k, m);
    const auto ae = ring_matmul(t.a.r, e_pub.r, n, k, m);
    for (std::size_t i = 0; i < z.r.size(); ++i) z.r[i] += ae[i];
    if (role == 0) {
      const auto de = ring_matmul(d_pub.r, e_pub.r, n, k, m);
      for (std::size_t i = 0; i < z.r.size(); ++i) z.r[i] += de[i];
    }
  } else {
    z.r.assign(t.c.r.size(), 0);
    for (std::size_t i = 0; i < z.r.size(); ++i) {
      z.r[i] = d_pub.r[i] * t.b.r[i] + t.a.r[i] * e_pub.r[i];
      if (role == 0) z.r[i] += d_pub.r[i] * e_pub.r[i];
    }
  }
  for (std::size_t i = 0; i < z.r.size(); ++i) z.r[i] += t.c.r[i];
  return z;
}

void append_bytes(std::vector<std::uint8_t>& out, const void* p, std::size_t n) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  out.insert(out.end(), b, b + n);
}

template <typename T>
T read_as(const std::uint8_t*& p, const std::uint8_t* end) {
  if (p + sizeof(T) > end) throw std::runtime_error("payload truncated");
  T v;
  std::memcpy(&v, p, sizeof(T));
  p += sizeof(T);
  return v;
}

}  // namespace

std::size_t ShareTensor::size() const {
  return domain.kind == Domain::Float ? f.size() : r.size();
}

std::uint64_t encode_value(double x, const ShareDomain& d) {
  require_ring64(d, "encode_fixed");
  const double limit = std::ldexp(1.0, 63 - int(d.frac_bits));
  if (!std::isfinite(x) || std::fabs(x) >= limit) {
    throw std::invalid_argument("encode_fixed: " + std::to_string(x) +
                                " outside representable range");
  }
  const long long v = std::llround(std::ldexp(x, int(d.frac_bits)));
  return static_cast<std::uint64_t>(v);
}

double decode_value(std::uint64_t v, const ShareDomain& d) {
  require_ring64(d, "decode_fixed");
  return std::ldexp(double(std::bit_cast<std::int64_t>(v)), -int(d.frac_bits));
}

ShareTensor encode_fixed(const Tensor& x, const ShareDomain& d) {
  ShareTensor t;
  t.domain = d;
  t.shape = x.shape;
  t.r.reserve(x.size());
  for (double v : x.data) t.r.push_back(encode_value(v, d));
  return t;
}

Tensor decode_fixed(const ShareTensor& t) {
  if (t.domain.kind != Domain::Ring) {
    throw std::invalid_argument("decode_fixed: not a ring tensor");
  }
  Tensor x;
  x.shape = t.shape;
  x.data.reserve(t.r.size());
  for (std::uint64_t v : t.r) x.data.push_back(decode_value(v, t.domain));
  return x;
}

SharePair share(const Tensor& x, const ShareDomain& d, Rng& rng) {
  SharePair p;
  if (d.kind == Domain::Float) {
    p.share_a.domain = p.share_b.domain = d;
    p.share_a.shape = p.share_b.shape = x.shape;
    p.share_a.f.reserve(x.size());
    p.share_b.f.reserve(x.size());
    for (double v : x.data) {
      const double r = rng.normal(0.0, d.noise_scale);
      p.share_a.f.push_back(r);
      p.share_b.f.push_back(v - r);
    }
  } else {
    const ShareTensor enc = encode_fixed(x, d);
    p.share_a.domain = p.share_b.domain = d;
    p.share_a.shape = p.share_b.shape = x.shape;
    p.share_a.r.reserve(x.size());
    p.share_b.r.reserve(x.size());
    for (std::uint64_t v : enc.r) {
      const std::uint64_t r = rng.bits();
      p.share_a.r.push_back(r);
      p.share_b.r.push_back(v - r);
    }
  }
  return p;
}

Tensor reconstruct(const ShareTensor& a, const ShareTensor& b) {
  require_compatible(a, b, "reconstruct");
  if (a.domain.kind == Domain::Float) {
    Tensor x;
    x.shape = a.shape;
    x.data.resize(a.f.size());
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = a.f[i] + b.f[i];
    return x;
  }
  ShareTensor sum;
  sum.domain = a.domain;
  sum.shape = a.shape;
  sum.r.resize(a.r.size());
  for (std::size_t i = 0; i < sum.r.size(); ++i) sum.r[i] = a.r[i] + b.r[i];
  return decode_fixed(sum);
}

Tensor reconstruct(const SharePair& p) {
  return reconstruct(p.share_a, p.share_b);
}

SharePair add_shared(const SharePair& x, const SharePair& y) {
  SharePair z;
  z.share_a = add_halves(x.share_a, y.share_a);
  z.share_b = add_halves(x.share_b, y.share_b);
  return z;
}

ShareTensor add_halves(const ShareTensor& x, const ShareTensor& y) {
  require_compatible(x, y, "add_halves");
  ShareTensor z = x;
  if (x.domain.kind == Domain::Float) {
    for (std::size_t i = 0; i < z.f.size(); ++i) z.f[i] += y.f[i];
  } else {
    for (std::size_t i = 0; i < z.r.size(); ++i) z.r[i] += y.r[i];
  }
  return z;
}

ShareTensor sub_halves(const ShareTensor& x, const ShareTensor& y) {
  require_compatible(x, y, "sub_halves");
  ShareTensor z = x;
  if (x.domain.kind == Domain::Float) {
    for (std::size_t i = 0; i < z.f.size(); ++i) z.f[i] -= y.f[i];
  } else {
    for (std::size_t i = 0; i < z.r.size(); ++i) z.r[i] -= y.r[i];
  }
  return z;
}

ShareTensor transpose_half(const ShareTensor& x) {
  if (x.shape.size() != 2) {
    throw std::invalid_argument("transpose_half: rank != 2");
  }
  ShareTensor t = empty_like(x.domain, {x.cols(), x.rows()});
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (x.domain.kind == Domain::Float) {
        t.f[j * x.rows() + i] = x.f[i * x.cols() + j];
      } else {
        t.r[j * x.rows() + i] = x.r[i * x.cols() + j];
      }
    }
  }
  return t;
}

ShareTensor colsum_half(const ShareTensor& x) {
  if (x.shape.size() != 2) throw std::invalid_argument("colsum_half: rank != 2");
  ShareTensor s = empty_like(x.domain, {x.cols()});
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (x.domain.kind == Domain::Float) {
        s.f[j] += x.f[i * x.cols() + j];
      } else {
        s.r[j] += x.r[i * x.cols() + j];
      }
    }
  }
  return s;
}

ShareTensor add_rowwise_half(const ShareTensor& x, const ShareTensor& bias) {
  if (x.shape.size() != 2 || bias.shape.size() != 1 || x.cols() != bias.size()) {
    throw std::invalid_argument("add_rowwise_half: shape mismatch");
  }
  ShareTensor z = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (x.domain.kind == Domain::Float) {
        z.f[i * x.cols() + j] += bias.f[j];
      } else {
        z.r[i * x.cols() + j] += bias.r[j];
      }
    }
  }
  return z;
}

void axpy_half(ShareTensor& x, const ShareTensor& g, double coeff, int role) {
  require_compatible(x, g, "axpy_half");
  if (x.domain.kind == Domain::Float) {
    for (std::size_t i = 0; i < x.f.size(); ++i) x.f[i] += coeff * g.f[i];
    return;
  }
  const std::uint64_t enc = encode_value(coeff, x.domain);
  ShareTensor scaled = g;
  for (std::uint64_t& v : scaled.r) v *= enc;
  truncate_share(scaled, role);
  for (std::size_t i = 0; i < x.r.size(); ++i) x.r[i] += scaled.r[i];
}

BeaverTriple gen_beaver_triple(TripleMode mode,
                               const std::vector<std::size_t>& shape_x,
                               const std::vector<std::size_t>& shape_w,
                               const ShareDomain& d, Rng& rng) {
  require_ring64(d, "gen_beaver_triple");
  if (shape_x.size() != 2 || shape_w.size() != 2) {
    throw std::invalid_argument("gen_beaver_triple: rank != 2");
  }
  if (mode == TripleMode::MatMul && shape_x[1] != shape_w[0]) {
    throw std::invalid_argument("gen_beaver_triple: inner dims disagree");
  }
  if (mode == TripleMode::Hadamard && shape_x != shape_w) {
    throw std::invalid_argument("gen_beaver_triple: hadamard shapes disagree");
  }
  const std::vector<std::size_t> shape_c =
      mode == TripleMode::MatMul
          ? std::vector<std::size_t>{shape_x[0], shape_w[1]}
          : shape_x;

  BeaverTriple t;
  t.half0.mode = t.half1.mode = mode;

  if (d.kind == Domain::Float) {
    Tensor a, b;
    a.shape = shape_x;
    a.data.resize(count(shape_x));
    b.shape = shape_w;
    b.data.resize(count(shape_w));
    for (double& v : a.data) v = rng.normal(0.0, 1.0);
    for (double& v : b.data) v = rng.normal(0.0, 1.0);
    const Tensor c = mode == TripleMode::MatMul ? matmul(a, b) : hadamard(a, b);
    SharePair pa = share(a, d, rng), pb = share(b, d, rng), pc = share(c, d, rng);
    t.half0.a = std::move(pa.share_a);
    t.half1.a = std::move(pa.share_b);
    t.half0.b = std::move(pb.share_a);
    t.half1.b = std::move(pb.share_b);
    t.half0.c = std::move(pc.share_a);
    t.half1.c = std::move(pc.share_b);
    return t;
  }

  std::vector<std::uint64_t> a(count(shape_x)), b(count(shape_w));
  for (auto& v : a) v = rng.bits();
  for (auto& v : b) v = rng.bits();
  std::vector<std::uint64_t> c;
  if (mode == TripleMode::MatMul) {
    c = ring_matmul(a, b, shape_x[0], shape_x[1], shape_w[1]);
  } else {
    c.resize(a.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = a[i] * b[i];
  }
  auto share_raw = [&](const std::vector<std::uint64_t>& plain,
                       const std::vector<std::size_t>& shape, ShareTensor& h0,
                       ShareTensor& h1) {
    h0 = empty_like(d, shape);
    h1 = empty_like(d, shape);
    for (std::size_t i = 0; i < plain.size(); ++i) {
      h0.r[i] = rng.bits();
      h1.r[i] = plain[i] - h0.r[i];
    }
  };
  share_raw(a, shape_x, t.half0.a, t.half1.a);
  share_raw(b, shape_w, t.half0.b, t.half1.b);
  share_raw(c, shape_c, t.half0.c, t.half1.c);
  return t;
}

MulOpening mul_open(const ShareTensor& x, const ShareTensor& w,
                    const TripleHalf& t) {
  if (t.consumed) throw std::runtime_error("mul_open: triple already consumed");
  if (x.shape != t.a.shape || w.shape != t.b.shape) {
    throw std::invalid_argument("mul_open: operand/triple shape mismatch");
  }
  return MulOpening{sub_halves(x, t.a), sub_halves(w, t.b)};
}

ShareTensor mul_finish(int role, TripleHalf& t, const ShareTensor& d_pub,
                       const ShareTensor& e_pub) {
  if (role != 0 && role != 1) throw std::invalid_argument("mul_finish: role");
  if (t.consumed) throw std::runtime_error("mul_finish: triple already consumed");
  if (d_pub.shape != t.a.shape || e_pub.shape != t.b.shape) {
    throw std::invalid_argument("mul_finish: opening shape mismatch");
  }
  ShareTensor z = beaver_combine(role, t, d_pub, e_pub);
  if (z.domain.kind == Domain::Ring) truncate_share(z, role);
  t.consumed = true;
  t.a = ShareTensor{};
  t.b = ShareTensor{};
  t.c = ShareTensor{};
  return z;
}

void truncate_share(ShareTensor& x, int role) {
  if (x.domain.kind != Domain::Ring) return;
  const unsigned f = x.domain.frac_bits;
  for (std::uint64_t& v : x.r) {
    if (role == 0) {
      v >>= f;
    } else {
      v = 0 - ((0 - v) >> f);
    }
  }
}

namespace {

SharePair shared_mul(const SharePair& x, const SharePair& w,
                     BeaverTriple& triple, Transcript* tr, TripleMode mode,
                     const char* op) {
  if (triple.half0.mode != mode) {
    throw std::invalid_argument(std::string(op) + ": wrong triple mode");
  }
  const MulOpening o0 = mul_open(x.share_a, w.share_a, triple.half0);
  const MulOpening o1 = mul_open(x.share_b, w.share_b, triple.half1);
  const ShareTensor d_pub = add_halves(o0.d, o1.d);
  const ShareTensor e_pub = add_halves(o0.e, o1.e);
  SharePair z;
  z.share_a = mul_finish(0, triple.half0, d_pub, e_pub);
  z.share_b = mul_finish(1, triple.half1, d_pub, e_pub);
  if (tr) {
    tr->entries.push_back({op, x.share_a.shape, w.share_a.shape});
    tr->opened_values += d_pub.size() + e_pub.size();
  }
  return z;
}

}  // namespace

SharePair matmul_shared(const SharePair& x, const SharePair& w,
                        BeaverTriple& triple, Transcript* tr) {
  return shared_mul(x, w, triple, tr, TripleMode::MatMul, "matmul_shared");
}

SharePair hadamard_shared(const SharePair& x, const SharePair& w,
                          BeaverTriple& triple, Transcript* tr) {
  return shared_mul(x, w, triple, tr, TripleMode::Hadamard, "hadamard_shared");
}

std::vector<std::uint8_t> share_to_bytes(const ShareTensor& t) {
  std::vector<std::uint8_t> out;
  const std::uint8_t kind = static_cast<std::uint8_t>(t.domain.kind);
  append_bytes(out, &kind, 1);
  append_bytes(out, &t.domain.frac_bits, 4);
  append_bytes(out, &t.domain.modulus_bits, 4);
  append_bytes(out, &t.domain.noise_scale, 8);
  const std::uint8_t rank = static_cast<std::uint8_t>(t.shape.size());
  append_bytes(out, &rank, 1);
  for (std::size_t d : t.shape) {
    const std::uint64_t v = d;
    append_bytes(out, &v, 8);
  }
  if (t.domain.kind == Domain::Float) {
    append_bytes(out, t.f.data(), t.f.size() * 8);
  } else {
    append_bytes(out, t.r.data(), t.r.size() * 8);
  }
  return out;
}

ShareTensor share_from_bytes(const std::uint8_t* p, std::size_t n) {
  const std::uint8_t* end = p + n;
  ShareTensor t;
  t.domain.kind = static_cast<Domain>(read_as<std::uint8_t>(p, end));
  t.domain.frac_bits = read_as<std::uint32_t>(p, end);
  t.domain.modulus_bits = read_as<std::uint32_t>(p, end);
  t.domain.noise_scale = read_as<double>(p, end);
  const std::uint8_t rank = read_as<std::uint8_t>(p, end);
  std::size_t total = 1;
  for (std::uint8_t i = 0; i < rank; ++i) {
    t.shape.push_back(read_as<std::uint64_t>(p, end));
    total *= t.shape.back();
  }
  if (rank == 0) total = 0;
  if (std::size_t(end - p) != total * 8) {
    throw std::runtime_error("share_from_bytes: payload size mismatch");
  }
  if (t.domain.kind == Domain::Float) {
    t.f.resize(total);
    std::memcpy(t.f.data(), p, total * 8);
  } else {
    t.r.resize(total);
    std::memcpy(t.r.data(), p, total * 8);
  }
  return t;
}

std::vector<std::uint8_t> tensor_to_bytes(const Tensor& t) {
  std::vector<std::uint8_t> out;
  const std::uint8_t rank = static_cast<std::uint8_t>(t.shape.size());
  append_bytes(out, &rank, 1);
  for (std::size_t d : t.shape) {
    const std::uint64_t v = d;
    append_bytes(out, &v, 8);
  }
  append_bytes(out, t.data.data(), t.data.size() * 8);
  return out;
}

Tensor tensor_from_bytes(const std::uint8_t* p, std::size_t n) {
  const std::uint8_t* end = p + n;
  Tensor t;
  const std::uint8_t rank = read_as<std::uint8_t>(p, end);
  std::size_t total = 1;
  for (std::uint8_t i = 0; i < rank; ++i) {
    t.shape.push_back(read_as<std::uint64_t>(p, end));
    total *= t.shape.back();
  }
  if (rank == 0) total = 0;
  if (std::size_t(end - p) != total * 8) {
    throw std::runtime_error("tensor_from_bytes: payload size mismatch");
  }
  t.data.resize(total);
  std::memcpy(t.data.data(), p, total * 8);
  return t;
}

}  // namespace vmask
