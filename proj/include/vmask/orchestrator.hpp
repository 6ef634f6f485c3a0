#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vmask/config.hpp"
#include "vmask/dataset.hpp"
#include "vmask/layer_select.hpp"
#include "vmask/mc_attack.hpp"
#include "vmask/nn.hpp"
#include "vmask/security_audit.hpp"
#include "vmask/shadow.hpp"

namespace vmask {

// Deterministic data preparation shared by every mode: load, split, per-column
// standardization on train statistics, contiguous vertical partition (active
// party takes the last block), and the active party's auxiliary sample.
struct PreparedData {
  std::vector<Tensor> train_parts, test_parts;  // per party, index party-1
  std::vector<int> train_y, test_y;
  std::size_t num_classes = 0;
  VerticalSplit vsplit;
  AuxData aux;
};
PreparedData prepare_data(const RunConfig& cfg);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  std::vector<std::vector<std::size_t>> u_per_party;  // masked sets, 1-based
  std::vector<double> est_eps;  // last simulated leakage per party (NaN: none)
  double mask_ratio = 0.0;      // cumulative through this epoch
  double wall_seconds = 0.0;    // excluded from metrics.csv (timing.csv only)
};

struct SelectionRow {
  std::size_t epoch = 0;  // epoch the set applies to
  std::size_t party = 0;
  std::string variant;
  std::vector<std::size_t> u;
  std::vector<std::size_t> v;  // plaintext complement, |u| + |v| = L
  double est_eps = 0.0;        // NaN when no simulation ran
  double budget = 0.0;
  std::size_t attacks_run = 0;
};

struct AttackRunInfo {
  std::string mode;  // e.g. "vmask-best", "vanilla-final", "scratch"
  std::size_t party = 0;
  double best = 0.0;
  std::vector<double> per_epoch;
};

struct RunReport {
  std::vector<EpochMetrics> epochs;
  std::vector<SelectionRow> selections;
  std::vector<AuditItem> audit;
  std::size_t best_epoch = 0;  // argmax test accuracy, 1-based
  double best_test_acc = 0.0;
  double final_test_acc = 0.0;
  double mask_ratio = 0.0;  // over the T training epochs
  // Per passive party (index party-1): what the adversary holds at the
  // best-accuracy epoch / after the final transition, and the true
  // (reconstructed) bottoms for checkpointing.
  std::vector<Model> attacker_best, attacker_final;
  std::vector<Model> effective_best, effective_final;
  Model top_best, top_final;
  Model own_bottom_final;  // the active party's local bottom after training
  std::vector<AttackRunInfo> attacks;
  // Aggregated test-set embeddings at the final epoch (optional dump).
  Tensor final_test_embeddings;
  std::vector<int> test_labels;
};

struct RunOptions {
  bool attack_every_epoch = false;
  bool dump_embeddings = false;
};

// Full training run in the configured mode (vanilla or a vmask variant),
// including the final attacker-view attacks on the best checkpoint and the
// final model. Party processes communicate only through the transport.
RunReport run_training(const RunConfig& cfg, const RunOptions& opt = {});

// Scratch baseline: no training, model-completion attack against freshly
// initialized bottoms (the irreducible leakage floor).
RunReport run_scratch_baseline(const RunConfig& cfg);

// Attack against an arbitrary bottom-model checkpoint using party 1's data
// layout from the config.
AttackRunInfo run_attack_on_model(const RunConfig& cfg, const Model& bottom,
                                  const std::string& mode_label,
                                  std::size_t party);

struct SweepRow {
  double budget = 0.0;
  double attack_acc = 0.0;  // final-model attack, party 1
  double main_acc = 0.0;    // best test accuracy
  double mask_ratio = 0.0;
};
// One run per budget on a shared seed; budgets must be strictly descending.
std::vector<SweepRow> sweep_budget(const RunConfig& cfg,
                                   const std::vector<double>& budgets);

// File outputs under cfg.out_dir: metrics.csv, selection.csv, attack.csv,
// timing.csv, resolved config.json, checkpoints, optional embeddings.csv.
void write_report_files(const RunConfig& cfg, const RunReport& report,
                        const RunOptions& opt = {});
void write_sweep_files(const RunConfig& cfg, const std::vector<SweepRow>& rows);

std::string format_index_set(const std::vector<std::size_t>& u);

}  // namespace vmask
