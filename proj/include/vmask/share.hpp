#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vmask/rng.hpp"
#include "vmask/tensor.hpp"

namespace vmask {

enum class Domain : std::uint8_t { Float = 0, Ring = 1 };

struct ShareDomain {
  Domain kind = Domain::Float;
  std::uint32_t frac_bits = 0;     // Ring: fixed-point fractional bits
  std::uint32_t modulus_bits = 0;  // Ring: only 64 is supported
  double noise_scale = 100.0;      // Float: stddev of the random share half

  static ShareDomain floating(double noise_scale = 100.0) {
    return ShareDomain{Domain::Float, 0, 0, noise_scale};
  }
  static ShareDomain ring(std::uint32_t frac_bits = 16) {
    return ShareDomain{Domain::Ring, frac_bits, 64, 0.0};
  }
  bool operator==(const ShareDomain& o) const {
    return kind == o.kind && frac_bits == o.frac_bits &&
           modulus_bits == o.modulus_bits;
  }
};

// One party's half of an additively shared tensor. Exactly one of the two
// payload vectors is populated, matching domain.kind.
struct ShareTensor {
  ShareDomain domain;
  std::vector<std::size_t> shape;
  std::vector<double> f;         // Float payload
  std::vector<std::uint64_t> r;  // Ring payload

  std::size_t size() const;
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }
};

// Both halves of a sharing: share_a stays with the sharing party, share_b
// goes to the counterparty. By convention share_a belongs to protocol role 0
// and share_b to role 1.
struct SharePair {
  ShareTensor share_a;
  ShareTensor share_b;
};

// Fixed-point codec. encode rounds to the nearest multiple of 2^-f and
// represents it two's-complement in Z_{2^64}; values must satisfy
// |x| < 2^(63 - f).
std::uint64_t encode_value(double x, const ShareDomain& d);
double decode_value(std::uint64_t v, const ShareDomain& d);
ShareTensor encode_fixed(const Tensor& x, const ShareDomain& d);
Tensor decode_fixed(const ShareTensor& t);

SharePair share(const Tensor& x, const ShareDomain& d, Rng& rng);
Tensor reconstruct(const SharePair& p);
Tensor reconstruct(const ShareTensor& a, const ShareTensor& b);

SharePair add_shared(const SharePair& x, const SharePair& y);

// Local linear operations on one party's half.
ShareTensor add_halves(const ShareTensor& x, const ShareTensor& y);
ShareTensor sub_halves(const ShareTensor& x, const ShareTensor& y);
ShareTensor transpose_half(const ShareTensor& x);
ShareTensor colsum_half(const ShareTensor& x);
ShareTensor add_rowwise_half(const ShareTensor& x, const ShareTensor& bias);
// this half -= lr * grad_half, with Ring-domain fixed-point rescaling.
void axpy_half(ShareTensor& x, const ShareTensor& g, double coeff, int role);

enum class TripleMode : std::uint8_t { MatMul = 0, Hadamard = 1 };

// One party's share of a Beaver triple (C = A*B or A.*B). Single use:
// the consuming multiplication marks it consumed and reuse throws.
struct TripleHalf {
  TripleMode mode = TripleMode::MatMul;
  ShareTensor a, b, c;
  bool consumed = false;
};

struct BeaverTriple {
  TripleHalf half0, half1;  // role 0 / role 1
};

// Dealer-side generation: a, b drawn N(0,1) (Float) or uniformly from the
// ring (Ring); c is the exact product, all three shared additively.
BeaverTriple gen_beaver_triple(TripleMode mode,
                               const std::vector<std::size_t>& shape_x,
                               const std::vector<std::size_t>& shape_w,
                               const ShareDomain& d, Rng& rng);

// Record of publicly opened values; one entry per Beaver multiplication.
struct Transcript {
  struct Entry {
    std::string op;
    std::vector<std::size_t> shape_x, shape_w;
  };
  std::vector<Entry> entries;
  std::size_t opened_values = 0;
};

// Two-party protocol halves. mul_open yields this party's shares of
// D = X - A and E = W - B; once both parties' openings are summed into
// public D and E, mul_finish computes this party's share of the product:
//   [XW]_i = [C]_i + D*[B]_i + [A]_i*E  (+ D*E for role 0 only)
// Ring-domain results are rescaled by 2^-f via local share truncation
// (role 0 shifts, role 1 negates-shifts-negates), which costs at most one
// ULP plus a 2^-(64 - 2f - 1)-probability wraparound error.
struct MulOpening {
  ShareTensor d, e;
};
MulOpening mul_open(const ShareTensor& x, const ShareTensor& w,
                    const TripleHalf& t);
ShareTensor mul_finish(int role, TripleHalf& t, const ShareTensor& d_pub,
                       const ShareTensor& e_pub);

void truncate_share(ShareTensor& x, int role);

// Value-level multiplications over both halves at once (dealer/test view).
SharePair matmul_shared(const SharePair& x, const SharePair& w,
                        BeaverTriple& triple, Transcript* tr = nullptr);
SharePair hadamard_shared(const SharePair& x, const SharePair& w,
                          BeaverTriple& triple, Transcript* tr = nullptr);

// Byte serialization (little endian, bit exact) for transport payloads.
std::vector<std::uint8_t> share_to_bytes(const ShareTensor& t);
ShareTensor share_from_bytes(const std::uint8_t* p, std::size_t n);
std::vector<std::uint8_t> tensor_to_bytes(const Tensor& t);
Tensor tensor_from_bytes(const std::uint8_t* p, std::size_t n);

}  // namespace vmask
