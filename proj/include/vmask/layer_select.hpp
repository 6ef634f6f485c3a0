#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "vmask/mc_attack.hpp"
#include "vmask/nn.hpp"

namespace vmask {

enum class Variant {
  Vanilla = 0,   // no masking at all
  VMask = 1,     // greedy reselection from scratch each epoch
  VMaskAS = 2,   // greedy accumulation on top of the previous mask set
  VMaskRS = 3,   // random set of the same size as the greedy pick
  VMaskALLS = 4, // all layers, no simulation
};

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// g[j-1] += L1(grad of layer j), weights and bias together.
void accumulate_grad_norms(std::vector<double>& g,
                           const std::vector<LayerGrad>& grads);

// Layer ids (1-based) by descending accumulated norm; ties break toward the
// lower index.
std::vector<std::size_t> rank_layers(const std::vector<double>& g);

// Replaces the layers in `u` (1-based) with freshly initialized parameters
// drawn from the standard init distribution.
Model mask_for_simulation(const Model& m, const std::vector<std::size_t>& u,
                          Rng& rng);

// Simulated leakage: model-completion attack against a (possibly masked)
// shadow copy. Exposed separately so tests can exercise the greedy loop with
// a stub estimator.
using LeakageFn = std::function<double(const Model& masked_shadow)>;
double estimate_leakage(const Model& masked_shadow, const AttackDataset& data,
                        const std::vector<std::size_t>& head_hidden,
                        std::size_t attack_epochs, double lr, Rng& rng);

struct SelectConfig {
  double budget = 0.25;
  Variant variant = Variant::VMask;
  std::size_t m_per_class = 4;
  std::size_t attack_epochs = 50;
  double attack_lr = 0.1;
  std::vector<std::size_t> head_hidden{16};
};

struct SelectResult {
  std::vector<std::size_t> u_next, v_next;  // ascending, 1-based
  // Last simulated leakage; NaN when the variant runs no simulation.
  double est_attack_acc = std::numeric_limits<double>::quiet_NaN();
  std::size_t attacks_run = 0;
};

// One epoch of layer selection for one passive party. `aux_x`/`aux_y` is the
// party's auxiliary block with the active party's labels; the attack dataset
// is drawn from it. `g` must already contain this epoch's accumulated norms.
// `sim_rng` drives random layer parameters and the random-selection variant;
// `attack_rng` drives the attack dataset split and head inits.
SelectResult select_layers(const Model& shadow, const Tensor& aux_x,
                           const std::vector<int>& aux_y,
                           std::size_t num_classes,
                           const std::vector<std::size_t>& u_prev,
                           const std::vector<double>& g,
                           const SelectConfig& cfg, Rng& sim_rng,
                           Rng& attack_rng,
                           const LeakageFn& leakage_override = nullptr);

}  // namespace vmask
