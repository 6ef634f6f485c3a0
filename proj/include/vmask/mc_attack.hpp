#pragma once

#include <cstddef>
#include <vector>

#include "vmask/nn.hpp"

namespace vmask {

struct AttackDataset {
  Tensor train_x;
  std::vector<int> train_y;
  Tensor test_x;
  std::vector<int> test_y;
  std::size_t num_classes = 0;
};

// Splits a labeled pool into the adversary's few-shot fine-tuning set
// (m_per_class rows per class, uniformly chosen) and a disjoint evaluation
// set (eval_fraction of the remaining rows per class; 1.0 keeps them all).
// Every class must have at least m_per_class + 1 rows.
AttackDataset build_attack_dataset(const Tensor& x, const std::vector<int>& y,
                                   std::size_t num_classes,
                                   std::size_t m_per_class,
                                   double eval_fraction, Rng& rng);

struct AttackResult {
  double best = 0.0;               // max test accuracy over epochs
  std::vector<double> per_epoch;   // test accuracy after each epoch
};

// Model-completion attack: clone the bottom model, attach a freshly
// initialized inference head (emb -> head_hidden... -> classes), fine-tune
// both full-batch on the few labeled rows, and report the best test accuracy
// reached. epochs == 0 reports 0.
AttackResult mc_attack(const AttackDataset& data, const Model& bottom,
                       const std::vector<std::size_t>& head_hidden,
                       std::size_t epochs, double lr, Rng& rng);

// The adversary's copy of a bottom model: masked layers keep only this
// party's share values, reinterpreted as plaintext parameters.
Model materialize_attacker_view(const Model& bottom);

}  // namespace vmask
