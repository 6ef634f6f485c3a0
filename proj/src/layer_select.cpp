#include "vmask/layer_select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace vmask {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Vanilla: return "vanilla";
    case Variant::VMask: return "vmask";
    case Variant::VMaskAS: return "vmask-as";
    case Variant::VMaskRS: return "vmask-rs";
    case Variant::VMaskALLS: return "vmask-alls";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  for (Variant v : {Variant::Vanilla, Variant::VMask, Variant::VMaskAS,
                    Variant::VMaskRS, Variant::VMaskALLS}) {
    if (name == variant_name(v)) return v;
  }
  throw std::invalid_argument("unknown mode '" + name + "'");
}

void accumulate_grad_norms(std::vector<double>& g,
                           const std::vector<LayerGrad>& grads) {
  if (g.size() != grads.size()) {
    throw std::invalid_argument("accumulate_grad_norms: layer count mismatch");
  }
  for (std::size_t j = 0; j < grads.size(); ++j) {
    double l1 = 0.0;
    for (double v : grads[j].weight.data) l1 += std::fabs(v);
    for (double v : grads[j].bias.data) l1 += std::fabs(v);
    g[j] += l1;
  }
}

std::vector<std::size_t> rank_layers(const std::vector<double>& g) {
  std::vector<std::size_t> order(g.size());
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return g[a - 1] > g[b - 1];
  });
  return order;
}

Model mask_for_simulation(const Model& m, const std::vector<std::size_t>& u,
                          Rng& rng) {
  Model out = m;
  for (std::size_t layer : u) {
    if (layer < 1 || layer > out.depth()) {
      throw std::invalid_argument("mask_for_simulation: layer out of range");
    }
    LinearLayer& l = out.layers[layer - 1];
    const double bound = 1.0 / std::sqrt(double(l.in_dim()));
    for (double& v : l.weight.data) v = rng.uniform(-bound, bound);
    for (double& v : l.bias.data) v = rng.uniform(-bound, bound);
  }
  return out;
}

double estimate_leakage(const Model& masked_shadow, const AttackDataset& data,
                        const std::vector<std::size_t>& head_hidden,
                        std::size_t attack_epochs, double lr, Rng& rng) {
  return mc_attack(data, masked_shadow, head_hidden, attack_epochs, lr, rng).best;
}

SelectResult select_layers(const Model& shadow, const Tensor& aux_x,
                           const std::vector<int>& aux_y,
                           std::size_t num_classes,
                           const std::vector<std::size_t>& u_prev,
                           const std::vector<double>& g,
                           const SelectConfig& cfg, Rng& sim_rng,
                           Rng& attack_rng, const LeakageFn& leakage_override) {
  const std::size_t depth = shadow.depth();
  if (g.size() != depth) {
    throw std::invalid_argument("select_layers: norm vector size mismatch");
  }
  if (cfg.budget <= 0.0 || cfg.budget > 1.0) {
    throw std::invalid_argument("select_layers: budget outside (0, 1]");
  }
  for (std::size_t i = 0; i < u_prev.size(); ++i) {
    if (u_prev[i] < 1 || u_prev[i] > depth ||
        (i > 0 && u_prev[i] <= u_prev[i - 1])) {
      throw std::invalid_argument("select_layers: invalid u_prev");
    }
  }

  SelectResult res;
  auto finish = [&](std::vector<std::size_t> u) {
    std::sort(u.begin(), u.end());
    res.u_next = std::move(u);
    for (std::size_t j = 1; j <= depth; ++j) {
      if (!std::binary_search(res.u_next.begin(), res.u_next.end(), j)) {
        res.v_next.push_back(j);
      }
    }
    return res;
  };

  if (cfg.variant == Variant::VMaskALLS) {
    std::vector<std::size_t> all(depth);
    std::iota(all.begin(), all.end(), 1);
    return finish(std::move(all));
  }
  if (cfg.variant == Variant::Vanilla) return finish({});

  LeakageFn leakage = leakage_override;
  AttackDataset data;
  if (!leakage) {
    data = build_attack_dataset(aux_x, aux_y, num_classes, cfg.m_per_class, 1.0,
                                attack_rng);
    leakage = [&](const Model& masked) {
      return estimate_leakage(masked, data, cfg.head_hidden, cfg.attack_epochs,
                              cfg.attack_lr, attack_rng);
    };
  }

  // Candidate queue by descending accumulated norm; the accumulation-style
  // variant keeps the previous mask set and only considers growth.
  std::vector<std::size_t> u =
      cfg.variant == Variant::VMaskAS ? u_prev : std::vector<std::size_t>{};
  std::vector<std::size_t> queue;
  for (std::size_t layer : rank_layers(g)) {
    if (!std::binary_search(u.begin(), u.end(), layer)) queue.push_back(layer);
  }

  double eps = leakage(mask_for_simulation(shadow, u, sim_rng));
  res.attacks_run = 1;
  std::size_t next = 0;
  while (eps > cfg.budget && next < queue.size()) {
    u.push_back(queue[next++]);
    std::sort(u.begin(), u.end());
    eps = leakage(mask_for_simulation(shadow, u, sim_rng));
    ++res.attacks_run;
  }

  if (cfg.variant == Variant::VMaskRS) {
    // Same mask count as the greedy pick, uniformly random members.
    std::vector<std::size_t> all(depth);
    std::iota(all.begin(), all.end(), 1);
    for (std::size_t i = depth; i > 1; --i) {
      std::swap(all[i - 1], all[sim_rng.index(i)]);
    }
    std::vector<std::size_t> rs(all.begin(), all.begin() + long(u.size()));
    std::sort(rs.begin(), rs.end());
    eps = leakage(mask_for_simulation(shadow, rs, sim_rng));
    ++res.attacks_run;
    u = std::move(rs);
  }

  res.est_attack_acc = eps;
  return finish(std::move(u));
}

}  // namespace vmask
