#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "vmask/nn.hpp"
#include "vmask/share.hpp"
#include "vmask/transport.hpp"

namespace vmask {

// Layer indices in masking/selection state are 1-based (layer 1 is the first
// bottom layer); translation to 0-based vector positions happens only at the
// model boundary.

struct MaskState {
  std::size_t depth = 0;             // L
  std::vector<std::size_t> masked;   // U, ascending

  std::vector<std::size_t> plain() const;  // V = {1..L} \ U
  bool is_masked(std::size_t layer) const;
};

// One party's halves of a masked layer's parameters.
struct LayerShareHalf {
  ShareTensor weight;
  ShareTensor bias;
};
// Keyed by 1-based layer index.
using ShareStore = std::map<std::size_t, LayerShareHalf>;

struct MaskingConfig {
  ShareDomain domain;
  double sigma = 0.01;  // stddev of the noise folded in at each transition
};

struct MaskDelta {
  std::vector<std::size_t> to_mask;    // u_next \ u_prev, ascending
  std::vector<std::size_t> to_unmask;  // u_prev \ u_next, ascending
};
MaskDelta mask_delta(const MaskState& cur, const std::vector<std::size_t>& u_next);

// Validates that u_next is a sorted duplicate-free subset of {1..depth}.
void require_valid_mask_set(const std::vector<std::size_t>& u, std::size_t depth,
                            const char* where);

// In-process transition covering both roles at once (unit tests, local
// simulation). Newly masked layers are split into shares, with N(0, sigma^2)
// noise folded into the active party's half; newly unmasked layers get fresh
// noise folded in before reconstruction back into the model. The bottom
// model's weight fields are kept in sync as the passive party's share view.
void mask_transition_local(Model& bottom, ShareStore& passive_store,
                           ShareStore& active_store, MaskState& state,
                           const std::vector<std::size_t>& u_next,
                           const MaskingConfig& cfg, Rng& share_rng,
                           Rng& noise_rng);

// Transport versions of the same transition. The passive party owns the
// model; the active party keeps counterpart halves of each masked layer and
// draws all transition noise. Message order per pair: LayerShare for each
// newly masked layer ascending (weight then bias), then LayerReconstruct for
// each newly unmasked layer ascending.
void mask_transition_passive(Model& bottom, ShareStore& store, MaskState& state,
                             const std::vector<std::size_t>& u_next,
                             const MaskingConfig& cfg, Rng& share_rng,
                             Channel& ch, std::uint64_t party);
void mask_transition_active(ShareStore& store, const MaskState& cur,
                            const std::vector<std::size_t>& u_next,
                            const MaskingConfig& cfg, Rng& noise_rng,
                            Channel& ch, std::uint64_t party);

// Refreshes the plaintext-view weight/bias fields of masked layers from the
// passive party's halves (identity in the Float domain, fixed-point decode in
// the Ring domain).
void sync_masked_views(Model& bottom, const ShareStore& store);

// Reconstructs the effective model (true parameters including transition
// noise) from both stores; harness-side observability only.
Model materialize_effective(const Model& bottom, const ShareStore& passive_store,
                            const ShareStore& active_store);

// Cumulative mask ratio: sum of per-epoch masked counts / (epochs * depth).
double mask_ratio(const std::vector<std::size_t>& masked_counts,
                  std::size_t depth);

}  // namespace vmask
