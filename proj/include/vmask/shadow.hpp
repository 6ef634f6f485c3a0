#pragma once

#include <cstddef>
#include <vector>

#include "vmask/nn.hpp"

namespace vmask {

// Auxiliary data held by the active party: aligned rows, one feature block
// per passive party, labels from the active party's own label set.
struct AuxData {
  std::vector<Tensor> per_party;  // index k-1 -> passive party k's block
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
};

// Seed-matched shadow init: rebuilding a passive party's bottom from the same
// per-party init stream yields bit-identical parameters.
Model init_seed_matched_shadow(std::uint64_t master_seed, std::size_t party,
                               const std::vector<std::size_t>& dims);

struct ShadowUpdateResult {
  double aux_loss = 0.0;  // mean loss over the pass
  // Per passive party, per layer: gradients summed over the aux batches.
  std::vector<std::vector<LayerGrad>> grads;
};

// One pass over the auxiliary data per VFL epoch: aggregate shadow
// embeddings, score through the frozen top model, update every shadow with
// SGD. The top model is read-only here; the active party's own bottom is not
// involved.
ShadowUpdateResult shadow_model_update(std::vector<Model>& shadows,
                                       const Model& frozen_top,
                                       const AuxData& aux,
                                       std::size_t batch_size, double lr,
                                       Rng& batch_rng);

}  // namespace vmask
