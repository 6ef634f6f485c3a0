#include "vmask/masking.hpp"

#include <algorithm>
#include <stdexcept>

namespace vmask {
namespace {

Tensor gauss_like(const std::vector<std::size_t>& shape, double sigma,
                  Rng& rng) {
  Tensor t;
  t.shape = shape;
  std::size_t n = shape.empty() ? 0 : 1;
  for (std::size_t d : shape) n *= d;
  t.data.resize(n);
  for (double& v : t.data) v = sigma > 0.0 ? rng.normal(0.0, sigma) : 0.0;
  return t;
}

// half += noise, in the half's own domain.
void fold_noise(ShareTensor& half, const Tensor& noise) {
  if (half.domain.kind == Domain::Float) {
    for (std::size_t i = 0; i < half.f.size(); ++i) half.f[i] += noise.data[i];
  } else {
    const ShareTensor enc = encode_fixed(noise, half.domain);
    for (std::size_t i = 0; i < half.r.size(); ++i) half.r[i] += enc.r[i];
  }
}

Tensor view_of(const ShareTensor& half) {
  if (half.domain.kind == Domain::Float) {
    Tensor t;
    t.shape = half.shape;
    t.data = half.f;
    return t;
  }
  return decode_fixed(half);
}

}  // namespace

std::vector<std::size_t> MaskState::plain() const {
  std::vector<std::size_t> v;
  for (std::size_t j = 1; j <= depth; ++j) {
    if (!is_masked(j)) v.push_back(j);
  }
  return v;
}

bool MaskState::is_masked(std::size_t layer) const {
  return std::binary_search(masked.begin(), masked.end(), layer);
}

void require_valid_mask_set(const std::vector<std::size_t>& u,
                            std::size_t depth, const char* where) {
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < 1 || u[i] > depth) {
      throw std::invalid_argument(std::string(where) + ": layer index " +
                                  std::to_string(u[i]) + " outside 1.." +
                                  std::to_string(depth));
    }
    if (i > 0 && u[i] <= u[i - 1]) {
      throw std::invalid_argument(std::string(where) +
                                  ": mask set not strictly ascending");
    }
  }
}

MaskDelta mask_delta(const MaskState& cur,
                     const std::vector<std::size_t>& u_next) {
  require_valid_mask_set(u_next, cur.depth, "mask_delta");
  MaskDelta d;
  std::set_difference(u_next.begin(), u_next.end(), cur.masked.begin(),
                      cur.masked.end(), std::back_inserter(d.to_mask));
  std::set_difference(cur.masked.begin(), cur.masked.end(), u_next.begin(),
                      u_next.end(), std::back_inserter(d.to_unmask));
  return d;
}

void mask_transition_local(Model& bottom, ShareStore& passive_store,
                           ShareStore& active_store, MaskState& state,
                           const std::vector<std::size_t>& u_next,
                           const MaskingConfig& cfg, Rng& share_rng,
                           Rng& noise_rng) {
  if (state.depth != bottom.depth()) {
    throw std::invalid_argument("mask_transition: state depth mismatch");
  }
  const MaskDelta d = mask_delta(state, u_next);
  // Noise draw order is part of the protocol: weight then bias, layers
  // ascending, to_mask before to_unmask.
  for (std::size_t layer : d.to_mask) {
    LinearLayer& l = bottom.layers[layer - 1];
    SharePair w = share(l.weight, cfg.domain, share_rng);
    SharePair b = share(l.bias, cfg.domain, share_rng);
    fold_noise(w.share_b, gauss_like(l.weight.shape, cfg.sigma, noise_rng));
    fold_noise(b.share_b, gauss_like(l.bias.shape, cfg.sigma, noise_rng));
    passive_store[layer] = LayerShareHalf{w.share_a, b.share_a};
    active_store[layer] = LayerShareHalf{w.share_b, b.share_b};
    l.mask_status = MaskStatus::Masked;
  }
  for (std::size_t layer : d.to_unmask) {
    auto pit = passive_store.find(layer);
    auto ait = active_store.find(layer);
    if (pit == passive_store.end() || ait == active_store.end()) {
      throw std::runtime_error("mask_transition: no shares for layer " +
                               std::to_string(layer));
    }
    LinearLayer& l = bottom.layers[layer - 1];
    fold_noise(ait->second.weight,
               gauss_like(ait->second.weight.shape, cfg.sigma, noise_rng));
    fold_noise(ait->second.bias,
               gauss_like(ait->second.bias.shape, cfg.sigma, noise_rng));
    l.weight = reconstruct(pit->second.weight, ait->second.weight);
    l.bias = reconstruct(pit->second.bias, ait->second.bias);
    l.mask_status = MaskStatus::Plaintext;
    passive_store.erase(pit);
    active_store.erase(ait);
  }
  state.masked = u_next;
  sync_masked_views(bottom, passive_store);
}

void mask_transition_passive(Model& bottom, ShareStore& store, MaskState& state,
                             const std::vector<std::size_t>& u_next,
                             const MaskingConfig& cfg, Rng& share_rng,
                             Channel& ch, std::uint64_t party) {
  if (state.depth != bottom.depth()) {
    throw std::invalid_argument("mask_transition: state depth mismatch");
  }
  const MaskDelta d = mask_delta(state, u_next);
  for (std::size_t layer : d.to_mask) {
    LinearLayer& l = bottom.layers[layer - 1];
    SharePair w = share(l.weight, cfg.domain, share_rng);
    SharePair b = share(l.bias, cfg.domain, share_rng);
    ch.send({MsgKind::LayerShare, party, layer, 0, share_to_bytes(w.share_b)});
    ch.send({MsgKind::LayerShare, party, layer, 1, share_to_bytes(b.share_b)});
    store[layer] = LayerShareHalf{std::move(w.share_a), std::move(b.share_a)};
    l.mask_status = MaskStatus::Masked;
  }
  for (std::size_t layer : d.to_unmask) {
    auto it = store.find(layer);
    if (it == store.end()) {
      throw std::runtime_error("mask_transition: no shares for layer " +
                               std::to_string(layer));
    }
    Message mw = ch.recv();
    Message mb = ch.recv();
    if (mw.kind != MsgKind::LayerReconstruct || mw.tag != layer ||
        mb.kind != MsgKind::LayerReconstruct || mb.tag != layer) {
      throw std::runtime_error("mask_transition: unexpected message");
    }
    const ShareTensor wh = share_from_bytes(mw.payload.data(), mw.payload.size());
    const ShareTensor bh = share_from_bytes(mb.payload.data(), mb.payload.size());
    LinearLayer& l = bottom.layers[layer - 1];
    l.weight = reconstruct(it->second.weight, wh);
    l.bias = reconstruct(it->second.bias, bh);
    l.mask_status = MaskStatus::Plaintext;
    store.erase(it);
  }
  state.masked = u_next;
  sync_masked_views(bottom, store);
}

void mask_transition_active(ShareStore& store, const MaskState& cur,
                            const std::vector<std::size_t>& u_next,
                            const MaskingConfig& cfg, Rng& noise_rng,
                            Channel& ch, std::uint64_t party) {
  const MaskDelta d = mask_delta(cur, u_next);
  for (std::size_t layer : d.to_mask) {
    Message mw = ch.recv();
    Message mb = ch.recv();
    if (mw.kind != MsgKind::LayerShare || mw.tag != layer || mw.party != party ||
        mb.kind != MsgKind::LayerShare || mb.tag != layer) {
      throw std::runtime_error("mask_transition: unexpected message");
    }
    LayerShareHalf h;
    h.weight = share_from_bytes(mw.payload.data(), mw.payload.size());
    h.bias = share_from_bytes(mb.payload.data(), mb.payload.size());
    Tensor wn = gauss_like(h.weight.shape, cfg.sigma, noise_rng);
    Tensor bn = gauss_like(h.bias.shape, cfg.sigma, noise_rng);
    fold_noise(h.weight, wn);
    fold_noise(h.bias, bn);
    store[layer] = std::move(h);
  }
  for (std::size_t layer : d.to_unmask) {
    auto it = store.find(layer);
    if (it == store.end()) {
      throw std::runtime_error("mask_transition: no shares for layer " +
                               std::to_string(layer));
    }
    Tensor wn = gauss_like(it->second.weight.shape, cfg.sigma, noise_rng);
    Tensor bn = gauss_like(it->second.bias.shape, cfg.sigma, noise_rng);
    fold_noise(it->second.weight, wn);
    fold_noise(it->second.bias, bn);
    ch.send({MsgKind::LayerReconstruct, party, layer, 0,
             share_to_bytes(it->second.weight)});
    ch.send({MsgKind::LayerReconstruct, party, layer, 1,
             share_to_bytes(it->second.bias)});
    store.erase(it);
  }
}

void sync_masked_views(Model& bottom, const ShareStore& store) {
  for (const auto& [layer, half] : store) {
    LinearLayer& l = bottom.layers.at(layer - 1);
    l.weight = view_of(half.weight);
    l.bias = view_of(half.bias);
  }
}

Model materialize_effective(const Model& bottom, const ShareStore& passive_store,
                            const ShareStore& active_store) {
  Model m = bottom;
  for (const auto& [layer, ph] : passive_store) {
    auto ait = active_store.find(layer);
    if (ait == active_store.end()) {
      throw std::runtime_error("materialize_effective: store mismatch at layer " +
                               std::to_string(layer));
    }
    LinearLayer& l = m.layers.at(layer - 1);
    l.weight = reconstruct(ph.weight, ait->second.weight);
    l.bias = reconstruct(ph.bias, ait->second.bias);
    l.mask_status = MaskStatus::Plaintext;
  }
  return m;
}

double mask_ratio(const std::vector<std::size_t>& masked_counts,
                  std::size_t depth) {
  if (masked_counts.empty() || depth == 0) return 0.0;
  std::size_t total = 0;
  for (std::size_t c : masked_counts) total += c;
  return double(total) / (double(masked_counts.size()) * double(depth));
}

}  // namespace vmask
