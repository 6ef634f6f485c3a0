#include "vmask/shadow.hpp"

#include <stdexcept>

#include "vmask/dataset.hpp"

namespace vmask {

Model init_seed_matched_shadow(std::uint64_t master_seed, std::size_t party,
                               const std::vector<std::size_t>& dims) {
  Rng rng = Rng::derive(master_seed, Stream::Init, {party});
  return init_model(ModelRole::Shadow, dims, rng);
}

ShadowUpdateResult shadow_model_update(std::vector<Model>& shadows,
                                       const Model& frozen_top,
                                       const AuxData& aux,
                                       std::size_t batch_size, double lr,
                                       Rng& batch_rng) {
  if (shadows.empty() || shadows.size() != aux.per_party.size()) {
    throw std::invalid_argument("shadow_model_update: shadow/aux count mismatch");
  }
  for (const Tensor& block : aux.per_party) {
    if (block.rows() != aux.size()) {
      throw std::invalid_argument("shadow_model_update: misaligned aux rows");
    }
  }

  ShadowUpdateResult res;
  res.grads.resize(shadows.size());
  for (std::size_t k = 0; k < shadows.size(); ++k) {
    for (const LinearLayer& l : shadows[k].layers) {
      res.grads[k].push_back(
          {Tensor(l.weight.rows(), l.weight.cols()), Tensor(l.bias.size())});
    }
  }

  const auto batches = make_batches(aux.size(), batch_size, batch_rng);
  double loss_sum = 0.0;
  for (const auto& rows : batches) {
    const std::vector<int> yb = take_at(aux.labels, rows);
    std::vector<ForwardCache> caches(shadows.size());
    Tensor z_sum;
    for (std::size_t k = 0; k < shadows.size(); ++k) {
      caches[k] = model_forward(shadows[k], take_rows(aux.per_party[k], rows));
      z_sum = k == 0 ? caches[k].output : add(z_sum, caches[k].output);
    }
    const ForwardCache top_cache = model_forward(frozen_top, z_sum);
    const CeResult ce = softmax_ce(top_cache.output, yb);
    loss_sum += ce.loss;
    // Frozen top: backpropagate through it for the embedding gradient but
    // never update it.
    const BackwardResult top_back = model_backward(frozen_top, top_cache, ce.grad);
    for (std::size_t k = 0; k < shadows.size(); ++k) {
      const BackwardResult back =
          model_backward(shadows[k], caches[k], top_back.grad_input);
      for (std::size_t j = 0; j < back.grads.size(); ++j) {
        res.grads[k][j].weight = add(res.grads[k][j].weight, back.grads[j].weight);
        res.grads[k][j].bias = add(res.grads[k][j].bias, back.grads[j].bias);
      }
      sgd_step(shadows[k], back.grads, lr);
    }
  }
  res.aux_loss = loss_sum / double(batches.size());
  return res;
}

}  // namespace vmask
