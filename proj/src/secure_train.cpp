#include "vmask/secure_train.hpp"

#include <cstring>
#include <stdexcept>
#include <string>
#include <utility>

namespace vmask {
namespace {

// step = (batch_tag << 8) | phase, so a stray or reordered frame is caught
// by exact step comparison rather than silently consumed.
enum Phase : std::uint64_t {
  kFwdInput = 1,
  kFwdOpen = 2,
  kFwdResult = 3,
  kBwdInput = 4,
  kBwdOpenGw = 5,
  kBwdOpenGx = 6,
  kBwdResult = 7,
};

std::uint64_t make_step(std::uint64_t batch_tag, Phase phase) {
  return (batch_tag << 8) | static_cast<std::uint64_t>(phase);
}

Message expect_msg(Channel& ch, MsgKind kind, std::uint64_t tag,
                   std::uint64_t step) {
  Message m = ch.recv();
  if (m.kind != kind || m.tag != tag || m.step != step) {
    throw std::runtime_error(
        "protocol violation: expected kind=" +
        std::to_string(static_cast<int>(kind)) + " tag=" + std::to_string(tag) +
        " step=" + std::to_string(step) + ", got kind=" +
        std::to_string(static_cast<int>(m.kind)) + " tag=" +
        std::to_string(m.tag) + " step=" + std::to_string(m.step));
  }
  return m;
}

ShareTensor from_bytes(const std::vector<std::uint8_t>& v) {
  return share_from_bytes(v.data(), v.size());
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  const std::size_t n = out.size();
  out.resize(n + 4);
  std::memcpy(out.data() + n, &v, 4);
}

// Both halves of a multiplication opening travel in one frame:
// [u32 len_d][d bytes][u32 len_e][e bytes].
std::vector<std::uint8_t> pack_opening(const ShareTensor& d,
                                       const ShareTensor& e) {
  const std::vector<std::uint8_t> db = share_to_bytes(d);
  const std::vector<std::uint8_t> eb = share_to_bytes(e);
  std::vector<std::uint8_t> out;
  out.reserve(8 + db.size() + eb.size());
  put_u32(out, static_cast<std::uint32_t>(db.size()));
  out.insert(out.end(), db.begin(), db.end());
  put_u32(out, static_cast<std::uint32_t>(eb.size()));
  out.insert(out.end(), eb.begin(), eb.end());
  return out;
}

std::pair<ShareTensor, ShareTensor> unpack_opening(
    const std::vector<std::uint8_t>& buf) {
  std::size_t off = 0;
  auto take = [&](void) -> std::vector<std::uint8_t> {
    if (off + 4 > buf.size())
      throw std::runtime_error("opening payload truncated");
    std::uint32_t len = 0;
    std::memcpy(&len, buf.data() + off, 4);
    off += 4;
    if (off + len > buf.size())
      throw std::runtime_error("opening payload truncated");
    std::vector<std::uint8_t> part(buf.begin() + static_cast<std::ptrdiff_t>(off),
                                   buf.begin() +
                                       static_cast<std::ptrdiff_t>(off + len));
    off += len;
    return part;
  };
  std::vector<std::uint8_t> db = take();
  std::vector<std::uint8_t> eb = take();
  if (off != buf.size())
    throw std::runtime_error("opening payload has trailing bytes");
  return {from_bytes(db), from_bytes(eb)};
}

// Run one Beaver multiplication interactively: exchange this side's opening
// for the peer's, combine into the public D = X - A, E = W - B, and finish
// locally. Both sides send before receiving, so the exchange cannot
// deadlock, and addition order is fixed (own + peer) — commutative in both
// domains, so the combined openings agree bitwise across the two parties.
ShareTensor interactive_mul(SecureLayerCtx& ctx, int role, std::size_t layer,
                            std::uint64_t step, const ShareTensor& x,
                            const ShareTensor& w, TripleHalf& triple) {
  MulOpening o = mul_open(x, w, triple);
  ctx.ch->send({MsgKind::SharedMulOpen, ctx.party, layer, step,
                pack_opening(o.d, o.e)});
  Message m = expect_msg(*ctx.ch, MsgKind::SharedMulOpen, layer, step);
  auto [pd, pe] = unpack_opening(m.payload);
  ShareTensor d_pub = add_halves(o.d, pd);
  ShareTensor e_pub = add_halves(o.e, pe);
  return mul_finish(role, triple, d_pub, e_pub);
}

LayerShareHalf& layer_params(SecureLayerCtx& ctx, std::size_t layer) {
  auto it = ctx.params->find(layer);
  if (it == ctx.params->end())
    throw std::runtime_error("no parameter shares for layer " +
                             std::to_string(layer));
  return it->second;
}

}  // namespace

void TripleStore::push(std::size_t layer, LayerTripleHalves h) {
  q_.emplace_back(layer, std::move(h));
}

LayerTripleHalves TripleStore::pop(std::size_t layer) {
  if (q_.empty())
    throw std::runtime_error("triple budget exhausted at layer " +
                             std::to_string(layer));
  if (q_.front().first != layer)
    throw std::runtime_error("triple order mismatch: expected layer " +
                             std::to_string(q_.front().first) + ", got " +
                             std::to_string(layer));
  LayerTripleHalves h = std::move(q_.front().second);
  q_.pop_front();
  return h;
}

EpochTriples deal_epoch_triples(const std::vector<std::size_t>& masked,
                                const std::vector<std::size_t>& dims,
                                const std::vector<std::size_t>& batch_sizes,
                                const ShareDomain& d, Rng& rng) {
  EpochTriples out;
  for (std::size_t b : batch_sizes) {
    for (std::size_t j : masked) {
      if (j == 0 || j >= dims.size())
        throw std::invalid_argument("masked layer index out of range");
      const std::size_t n1 = dims[j - 1];
      const std::size_t n2 = dims[j];
      BeaverTriple fwd =
          gen_beaver_triple(TripleMode::MatMul, {b, n1}, {n1, n2}, d, rng);
      BeaverTriple gw =
          gen_beaver_triple(TripleMode::MatMul, {n2, b}, {b, n1}, d, rng);
      BeaverTriple gx =
          gen_beaver_triple(TripleMode::MatMul, {b, n2}, {n2, n1}, d, rng);
      out.passive.push(j, {std::move(fwd.half0), std::move(gw.half0),
                           std::move(gx.half0)});
      out.active.push(j, {std::move(fwd.half1), std::move(gw.half1),
                          std::move(gx.half1)});
    }
  }
  return out;
}

Tensor secure_fc_forward_passive(SecureLayerCtx& ctx, std::size_t layer,
                                 const Tensor& z, SharedCache& cache,
                                 std::uint64_t batch_tag) {
  LayerShareHalf& p = layer_params(ctx, layer);
  SharePair zs = share(z, ctx.domain, *ctx.share_rng);
  ctx.ch->send({MsgKind::InputShare, ctx.party, layer,
                make_step(batch_tag, kFwdInput), share_to_bytes(zs.share_b)});

  LayerTripleHalves triples = ctx.triples->pop(layer);
  // Forward computes z * W^T; the transpose is a share-local relabeling.
  ShareTensor wt = transpose_half(p.weight);
  ShareTensor out = interactive_mul(ctx, 0, layer,
                                    make_step(batch_tag, kFwdOpen), zs.share_a,
                                    wt, triples.fwd);
  out = add_rowwise_half(out, p.bias);

  Message m = expect_msg(*ctx.ch, MsgKind::ResultShare, layer,
                         make_step(batch_tag, kFwdResult));
  Tensor pre = reconstruct(out, from_bytes(m.payload));

  cache[layer] =
      SharedCacheEntry{std::move(zs.share_a), p.weight, std::move(triples)};
  return pre;
}

void secure_fc_forward_active(SecureLayerCtx& ctx, std::size_t layer,
                              SharedCache& cache, std::uint64_t batch_tag) {
  LayerShareHalf& p = layer_params(ctx, layer);
  Message m = expect_msg(*ctx.ch, MsgKind::InputShare, layer,
                         make_step(batch_tag, kFwdInput));
  ShareTensor zb = from_bytes(m.payload);

  LayerTripleHalves triples = ctx.triples->pop(layer);
  ShareTensor wt = transpose_half(p.weight);
  ShareTensor out = interactive_mul(ctx, 1, layer,
                                    make_step(batch_tag, kFwdOpen), zb, wt,
                                    triples.fwd);
  out = add_rowwise_half(out, p.bias);
  ctx.ch->send({MsgKind::ResultShare, ctx.party, layer,
                make_step(batch_tag, kFwdResult), share_to_bytes(out)});

  cache[layer] = SharedCacheEntry{std::move(zb), p.weight, std::move(triples)};
}

Tensor secure_fc_backward_passive(SecureLayerCtx& ctx, std::size_t layer,
                                  const Tensor& grad_out, SharedCache& cache,
                                  std::uint64_t batch_tag) {
  auto it = cache.find(layer);
  if (it == cache.end())
    throw std::runtime_error("backward without cached forward for layer " +
                             std::to_string(layer));
  SharedCacheEntry entry = std::move(it->second);
  cache.erase(it);

  LayerShareHalf& p = layer_params(ctx, layer);
  SharePair gs = share(grad_out, ctx.domain, *ctx.share_rng);
  ctx.ch->send({MsgKind::InputShare, ctx.party, layer,
                make_step(batch_tag, kBwdInput), share_to_bytes(gs.share_b)});

  // grad_W = g^T * z, grad_z = g * W, grad_b = colsum(g).
  ShareTensor gt = transpose_half(gs.share_a);
  ShareTensor gw = interactive_mul(ctx, 0, layer,
                                   make_step(batch_tag, kBwdOpenGw), gt,
                                   entry.z, entry.triples.gw);
  ShareTensor gx = interactive_mul(ctx, 0, layer,
                                   make_step(batch_tag, kBwdOpenGx), gs.share_a,
                                   entry.weight, entry.triples.gx);
  ShareTensor gb = colsum_half(gs.share_a);

  axpy_half(p.weight, gw, -ctx.lr, 0);
  axpy_half(p.bias, gb, -ctx.lr, 0);

  Message m = expect_msg(*ctx.ch, MsgKind::ResultShare, layer,
                         make_step(batch_tag, kBwdResult));
  return reconstruct(gx, from_bytes(m.payload));
}

void secure_fc_backward_active(SecureLayerCtx& ctx, std::size_t layer,
                               SharedCache& cache, std::uint64_t batch_tag) {
  auto it = cache.find(layer);
  if (it == cache.end())
    throw std::runtime_error("backward without cached forward for layer " +
                             std::to_string(layer));
  SharedCacheEntry entry = std::move(it->second);
  cache.erase(it);

  LayerShareHalf& p = layer_params(ctx, layer);
  Message m = expect_msg(*ctx.ch, MsgKind::InputShare, layer,
                         make_step(batch_tag, kBwdInput));
  ShareTensor gb_in = from_bytes(m.payload);

  ShareTensor gt = transpose_half(gb_in);
  ShareTensor gw = interactive_mul(ctx, 1, layer,
                                   make_step(batch_tag, kBwdOpenGw), gt,
                                   entry.z, entry.triples.gw);
  ShareTensor gx = interactive_mul(ctx, 1, layer,
                                   make_step(batch_tag, kBwdOpenGx), gb_in,
                                   entry.weight, entry.triples.gx);
  ShareTensor gbias = colsum_half(gb_in);

  axpy_half(p.weight, gw, -ctx.lr, 1);
  axpy_half(p.bias, gbias, -ctx.lr, 1);

  ctx.ch->send({MsgKind::ResultShare, ctx.party, layer,
                make_step(batch_tag, kBwdResult), share_to_bytes(gx)});
}

}  // namespace vmask
