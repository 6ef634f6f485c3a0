#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include "vmask/masking.hpp"
#include "vmask/nn.hpp"
#include "vmask/share.hpp"
#include "vmask/transport.hpp"

namespace vmask {

// Per masked layer and batch, one Beaver triple per multiplication:
// forward z*W^T, weight gradient g^T*z, input gradient g*W.
struct LayerTripleHalves {
  TripleHalf fwd, gw, gx;
};

// One party's per-epoch triple supply. Strict FIFO: pops must replay the
// dealer's push order; an empty queue or an order mismatch is a hard error
// (a triple budget miscount is never papered over by regeneration).
class TripleStore {
 public:
  void push(std::size_t layer, LayerTripleHalves h);
  LayerTripleHalves pop(std::size_t layer);
  std::size_t remaining() const { return q_.size(); }

 private:
  std::deque<std::pair<std::size_t, LayerTripleHalves>> q_;
};

struct EpochTriples {
  TripleStore passive, active;
};

// Trusted-dealer generation for one passive party's epoch: for every batch
// (sizes in epoch order) and masked layer (ascending), the three matmul
// triples sized from the bottom dims {n0, n1, ..., emb}.
EpochTriples deal_epoch_triples(const std::vector<std::size_t>& masked,
                                const std::vector<std::size_t>& dims,
                                const std::vector<std::size_t>& batch_sizes,
                                const ShareDomain& d, Rng& rng);

// Per-batch state retained between a masked layer's forward and backward:
// this side's input share, the parameter share snapshot, and the two
// backward triples popped together with the forward one.
struct SharedCacheEntry {
  ShareTensor z;
  ShareTensor weight;
  LayerTripleHalves triples;  // fwd consumed; gw/gx pending
};
using SharedCache = std::map<std::size_t, SharedCacheEntry>;

struct SecureLayerCtx {
  ShareDomain domain;
  double lr = 0.1;
  std::uint64_t party = 0;  // passive party id carried in message headers
  Channel* ch = nullptr;
  TripleStore* triples = nullptr;
  ShareStore* params = nullptr;  // this side's masked-layer halves
  Rng* share_rng = nullptr;      // passive side only: activation/grad sharing
};

// Secure forward through masked layer `layer` (1-based). The passive party
// holds the plaintext input, both parties hold parameter shares; the linear
// output is computed under sharing and reconstructed at the passive party
// before the (plaintext) activation. The active side serves the mirrored
// half. `batch_tag` sequences the exchange for protocol validation.
Tensor secure_fc_forward_passive(SecureLayerCtx& ctx, std::size_t layer,
                                 const Tensor& z, SharedCache& cache,
                                 std::uint64_t batch_tag);
void secure_fc_forward_active(SecureLayerCtx& ctx, std::size_t layer,
                              SharedCache& cache, std::uint64_t batch_tag);

// Secure backward: shares the incoming gradient, computes parameter and
// input gradients under sharing, applies the SGD update share-locally on
// both sides, and reconstructs the input gradient at the passive party.
Tensor secure_fc_backward_passive(SecureLayerCtx& ctx, std::size_t layer,
                                  const Tensor& grad_out, SharedCache& cache,
                                  std::uint64_t batch_tag);
void secure_fc_backward_active(SecureLayerCtx& ctx, std::size_t layer,
                               SharedCache& cache, std::uint64_t batch_tag);

}  // namespace vmask
