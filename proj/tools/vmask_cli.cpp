// Command-line front end: training runs, attacks, baselines, the security
// audit, and budget sweeps. Flags override values from the config file.
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vmask/checkpoint.hpp"
#include "vmask/config.hpp"
#include "vmask/orchestrator.hpp"

namespace {

struct Overrides {
  std::string mode, out, transport;
  std::uint64_t seed = 0;
  double budget = 0.0;
  std::size_t labels_per_class = 0;
  bool has_mode = false, has_out = false, has_transport = false;
  bool has_seed = false, has_budget = false, has_labels = false;
};

void add_common(CLI::App* cmd, std::string& config_path, Overrides& ov) {
  cmd->add_option("--config", config_path, "JSON run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", ov.seed, "override the run seed")
      ->each([&](const std::string&) { ov.has_seed = true; });
  cmd->add_option("--out", ov.out, "override the output directory")
      ->each([&](const std::string&) { ov.has_out = true; });
}

vmask::RunConfig load_with_overrides(const std::string& path,
                                     const Overrides& ov) {
  vmask::RunConfig cfg = vmask::load_config(path);
  if (ov.has_seed) cfg.seed = ov.seed;
  if (ov.has_out) cfg.out_dir = ov.out;
  if (ov.has_mode) cfg.defense.variant = ov.mode;
  if (ov.has_budget) cfg.defense.budget = ov.budget;
  if (ov.has_labels) cfg.attack.labels_per_class = ov.labels_per_class;
  if (ov.has_transport) {
    if (ov.transport == "threads" || ov.transport == "inproc")
      cfg.transport = vmask::TransportKind::InProc;
    else if (ov.transport == "sockets" || ov.transport == "tcp")
      cfg.transport = vmask::TransportKind::Tcp;
    else
      throw std::invalid_argument("transport must be threads or sockets");
  }
  return cfg;
}

std::vector<double> parse_budget_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

void print_attacks(const vmask::RunReport& report) {
  for (const auto& a : report.attacks)
    std::printf("attack %-16s party %zu  best accuracy %.4f\n",
                a.mode.c_str(), a.party, a.best);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vmask: vertical federated learning with masked layers"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;

  auto* train = app.add_subcommand("train", "run VFL training");
  add_common(train, config_path, ov);
  train->add_option("--mode", ov.mode,
                    "vanilla | vmask | vmask-as | vmask-rs | vmask-alls")
      ->each([&](const std::string&) { ov.has_mode = true; });
  train->add_option("--budget", ov.budget, "privacy budget epsilon")
      ->each([&](const std::string&) { ov.has_budget = true; });
  train->add_option("--transport", ov.transport, "threads | sockets")
      ->each([&](const std::string&) { ov.has_transport = true; });
  bool attack_every_epoch = false, dump_embeddings = false;
  train->add_flag("--attack-every-epoch", attack_every_epoch,
                  "attack every epoch's attacker view");
  train->add_flag("--dump-embeddings", dump_embeddings,
                  "write final test-set embeddings");

  auto* attack = app.add_subcommand("attack", "attack a bottom checkpoint");
  add_common(attack, config_path, ov);
  std::string checkpoint;
  std::size_t attack_party = 1;
  attack->add_option("--checkpoint", checkpoint, "bottom model file")
      ->required()
      ->check(CLI::ExistingFile);
  attack->add_option("--party", attack_party, "passive party the model is from");
  attack->add_option("--labels-per-class", ov.labels_per_class,
                     "adversary's labeled rows per class")
      ->each([&](const std::string&) { ov.has_labels = true; });

  auto* scratch = app.add_subcommand("baseline-scratch",
                                     "attack freshly initialized bottoms");
  add_common(scratch, config_path, ov);

  auto* check = app.add_subcommand("check-security",
                                   "audit layer widths against the batch size");
  add_common(check, config_path, ov);
  bool allow_insecure = false;
  check->add_flag("--allow-insecure", allow_insecure,
                  "exit 0 even when layers are reconstructible");

  auto* sweep = app.add_subcommand("sweep-budget",
                                   "one full run per privacy budget");
  add_common(sweep, config_path, ov);
  std::string budgets_arg;
  sweep->add_option("--budgets", budgets_arg,
                    "descending comma list, e.g. 0.6,0.5,0.4,0.3,0.2")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      vmask::RunConfig cfg = load_with_overrides(config_path, ov);
      vmask::RunOptions opt;
      opt.attack_every_epoch = attack_every_epoch;
      opt.dump_embeddings = dump_embeddings;
      vmask::RunReport report = vmask::run_training(cfg, opt);
      vmask::write_report_files(cfg, report, opt);
      for (const auto& item : report.audit)
        if (item.verdict == vmask::Verdict::Reconstructible)
          std::fprintf(stderr,
                       "warning: party %zu layer %zu (width %zu) is "
                       "reconstructible at batch %zu\n",
                       item.party, item.layer, item.width, item.batch);
      std::printf("best test accuracy %.4f (epoch %zu), final %.4f, "
                  "mask ratio %.4f\n",
                  report.best_test_acc, report.best_epoch,
                  report.final_test_acc, report.mask_ratio);
      print_attacks(report);
      std::printf("outputs written to %s\n", cfg.out_dir.c_str());
    } else if (attack->parsed()) {
      vmask::RunConfig cfg = load_with_overrides(config_path, ov);
      vmask::Model bottom = vmask::load_model(checkpoint);
      vmask::AttackRunInfo info =
          vmask::run_attack_on_model(cfg, bottom, "checkpoint", attack_party);
      std::printf("attack on %s: best accuracy %.4f over %zu epochs\n",
                  checkpoint.c_str(), info.best, info.per_epoch.size());
    } else if (scratch->parsed()) {
      vmask::RunConfig cfg = load_with_overrides(config_path, ov);
      vmask::RunReport report = vmask::run_scratch_baseline(cfg);
      vmask::write_report_files(cfg, report);
      print_attacks(report);
    } else if (check->parsed()) {
      vmask::RunConfig cfg = load_with_overrides(config_path, ov);
      vmask::PreparedData data = vmask::prepare_data(cfg);
      std::vector<std::vector<std::size_t>> widths(cfg.parties - 1);
      for (std::size_t k = 1; k < cfg.parties; ++k) {
        auto dims = cfg.bottom_dims(data.vsplit.width[k - 1]);
        widths[k - 1].assign(dims.begin(), dims.end() - 1);
      }
      auto items = vmask::audit_layers(cfg.train.batch, widths);
      bool any_insecure = false;
      for (const auto& item : items) {
        const bool bad = item.verdict == vmask::Verdict::Reconstructible;
        any_insecure = any_insecure || bad;
        std::printf("party %zu layer %zu: input width %zu, batch %zu -> %s\n",
                    item.party, item.layer, item.width, item.batch,
                    bad ? "RECONSTRUCTIBLE" : "secure");
      }
      if (any_insecure && !allow_insecure) {
        std::fprintf(stderr, "audit failed: reconstructible layers present "
                             "(see above); pass --allow-insecure to proceed\n");
        return 2;
      }
    } else if (sweep->parsed()) {
      vmask::RunConfig cfg = load_with_overrides(config_path, ov);
      std::vector<double> budgets = parse_budget_list(budgets_arg);
      auto rows = vmask::sweep_budget(cfg, budgets);
      vmask::write_sweep_files(cfg, rows);
      for (const auto& r : rows)
        std::printf("budget %.2f: attack %.4f, main %.4f, mask ratio %.4f\n",
                    r.budget, r.attack_acc, r.main_acc, r.mask_ratio);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
