#pragma once

// Single-process plaintext reference trainer. It mirrors the distributed
// pipeline's mathematics exactly — same derived random streams, batch
// schedule, aggregation order, and update rule — but with every bottom model
// held in plaintext and no transport. The secure pipeline is validated
// against this oracle.

#include <vector>

#include "vmask/config.hpp"
#include "vmask/dataset.hpp"
#include "vmask/nn.hpp"
#include "vmask/orchestrator.hpp"
#include "vmask/rng.hpp"

namespace testutil {

struct ReferenceResult {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_train_acc;
  std::vector<double> epoch_test_acc;
  std::vector<vmask::Model> bottoms;  // index party-1; last is the active one
  vmask::Model top;
};

inline ReferenceResult reference_training(const vmask::RunConfig& cfg) {
  using namespace vmask;
  const PreparedData data = prepare_data(cfg);
  const std::size_t K = cfg.parties;
  const std::size_t n_train = data.train_y.size();

  ReferenceResult out;
  for (std::size_t k = 1; k <= K; ++k) {
    Rng init = Rng::derive(cfg.seed, Stream::Init, {k});
    out.bottoms.push_back(init_model(
        ModelRole::Bottom, cfg.bottom_dims(data.vsplit.width[k - 1]), init));
  }
  Rng init_top = Rng::derive(cfg.seed, Stream::InitTop, {});
  std::vector<std::size_t> top_dims{cfg.model.embedding};
  top_dims.insert(top_dims.end(), cfg.model.top_hidden.begin(),
                  cfg.model.top_hidden.end());
  top_dims.push_back(data.num_classes);
  out.top = init_model(ModelRole::Top, top_dims, init_top);

  for (std::size_t t = 1; t <= cfg.train.epochs; ++t) {
    Rng order_rng = Rng::derive(cfg.seed, Stream::BatchOrder, {t});
    const auto batches = make_batches(n_train, cfg.train.batch, order_rng);

    double loss_sum = 0.0, correct_sum = 0.0;
    for (const auto& idx : batches) {
      const std::vector<int> yb = take_at(data.train_y, idx);
      std::vector<ForwardCache> caches(K);
      Tensor z_sum;
      for (std::size_t k = 1; k <= K; ++k) {
        caches[k - 1] = model_forward(out.bottoms[k - 1],
                                      take_rows(data.train_parts[k - 1], idx));
        z_sum = (k == 1) ? caches[0].output
                         : add(z_sum, caches[k - 1].output);
      }
      ForwardCache tc = model_forward(out.top, z_sum);
      CeResult ce = softmax_ce(tc.output, yb);
      loss_sum += ce.loss * double(yb.size());
      correct_sum += accuracy(tc.output, yb) * double(yb.size());

      BackwardResult br = model_backward(out.top, tc, ce.grad);
      sgd_step(out.top, br.grads, cfg.train.lr);
      for (std::size_t k = 1; k <= K; ++k) {
        BackwardResult bb =
            model_backward(out.bottoms[k - 1], caches[k - 1], br.grad_input);
        sgd_step(out.bottoms[k - 1], bb.grads, cfg.train.lr);
      }
    }

    Tensor z_sum;
    for (std::size_t k = 1; k <= K; ++k) {
      Tensor z = model_forward(out.bottoms[k - 1], data.test_parts[k - 1]).output;
      z_sum = (k == 1) ? std::move(z) : add(z_sum, z);
    }
    out.epoch_loss.push_back(loss_sum / double(n_train));
    out.epoch_train_acc.push_back(correct_sum / double(n_train));
    out.epoch_test_acc.push_back(
        accuracy(model_forward(out.top, z_sum).output, data.test_y));
  }
  return out;
}

inline double max_param_diff(const vmask::Model& a, const vmask::Model& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.layers.size(); ++j) {
    m = std::max(m, vmask::max_abs_diff(a.layers[j].weight, b.layers[j].weight));
    m = std::max(m, vmask::max_abs_diff(a.layers[j].bias, b.layers[j].bias));
  }
  return m;
}

}  // namespace testutil
