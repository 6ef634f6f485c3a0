#include "vmask/mc_attack.hpp"

#include "vmask/dataset.hpp"

#include <stdexcept>
#include <string>

namespace vmask {

AttackDataset build_attack_dataset(const Tensor& x, const std::vector<int>& y,
                                   std::size_t num_classes,
                                   std::size_t m_per_class,
                                   double eval_fraction, Rng& rng) {
  require_rank(x, 2, "build_attack_dataset");
  if (x.rows() != y.size()) {
    throw std::invalid_argument("build_attack_dataset: row/label mismatch");
  }
  if (m_per_class == 0) {
    throw std::invalid_argument("build_attack_dataset: m_per_class == 0");
  }
  if (eval_fraction <= 0.0 || eval_fraction > 1.0) {
    throw std::invalid_argument("build_attack_dataset: bad eval_fraction");
  }
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || std::size_t(y[i]) >= num_classes) {
      throw std::invalid_argument("build_attack_dataset: label out of range");
    }
    by_class[std::size_t(y[i])].push_back(i);
  }
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& pool = by_class[c];
    if (pool.size() < m_per_class + 1) {
      throw std::runtime_error("build_attack_dataset: class " +
                               std::to_string(c) + " has " +
                               std::to_string(pool.size()) + " rows, need >= " +
                               std::to_string(m_per_class + 1));
    }
    for (std::size_t i = pool.size(); i > 1; --i) {
      std::swap(pool[i - 1], pool[rng.index(i)]);
    }
    train_idx.insert(train_idx.end(), pool.begin(), pool.begin() + long(m_per_class));
    const std::size_t rest = pool.size() - m_per_class;
    std::size_t n_eval = std::size_t(std::llround(eval_fraction * double(rest)));
    n_eval = std::max<std::size_t>(1, std::min(n_eval, rest));
    test_idx.insert(test_idx.end(), pool.begin() + long(m_per_class),
                    pool.begin() + long(m_per_class + n_eval));
  }
  AttackDataset d;
  d.num_classes = num_classes;
  d.train_x = take_rows(x, train_idx);
  d.test_x = take_rows(x, test_idx);
  d.train_y.reserve(train_idx.size());
  for (std::size_t i : train_idx) d.train_y.push_back(y[i]);
  d.test_y.reserve(test_idx.size());
  for (std::size_t i : test_idx) d.test_y.push_back(y[i]);
  return d;
}

AttackResult mc_attack(const AttackDataset& data, const Model& bottom,
                       const std::vector<std::size_t>& head_hidden,
                       std::size_t epochs, double lr, Rng& rng) {
  if (data.train_y.empty() || data.test_y.empty()) {
    throw std::invalid_argument("mc_attack: empty attack dataset");
  }
  Model ft = materialize_attacker_view(bottom);
  const std::size_t emb = ft.layers.back().out_dim();
  std::vector<std::size_t> head_dims{emb};
  head_dims.insert(head_dims.end(), head_hidden.begin(), head_hidden.end());
  head_dims.push_back(data.num_classes);
  Model head = init_model(ModelRole::InferenceHead, head_dims, rng);

  AttackResult res;
  for (std::size_t e = 0; e < epochs; ++e) {
    ForwardCache bc = model_forward(ft, data.train_x);
    ForwardCache hc = model_forward(head, bc.output);
    const CeResult ce = softmax_ce(hc.output, data.train_y);
    const BackwardResult hb = model_backward(head, hc, ce.grad);
    const BackwardResult bb = model_backward(ft, bc, hb.grad_input);
    sgd_step(head, hb.grads, lr);
    sgd_step(ft, bb.grads, lr);

    const Tensor emb_test = model_forward(ft, data.test_x).output;
    const Tensor logits = model_forward(head, emb_test).output;
    res.per_epoch.push_back(accuracy(logits, data.test_y));
    res.best = std::max(res.best, res.per_epoch.back());
  }
  return res;
}

Model materialize_attacker_view(const Model& bottom) {
  Model view = bottom;
  for (LinearLayer& l : view.layers) l.mask_status = MaskStatus::Plaintext;
  return view;
}

}  // namespace vmask
