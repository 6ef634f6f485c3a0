#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vmask/share.hpp"
#include "vmask/transport.hpp"

namespace vmask {

enum class DatasetKind { Digits, Csv, Blobs };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::Digits;
  std::string path;          // csv: resolved relative to the config file
  std::string label_column = "label";
  std::size_t blob_samples = 1200;
  std::size_t blob_features = 20;
  std::size_t blob_classes = 4;
  double test_fraction = 0.2;
};

struct ModelConfig {
  std::vector<std::size_t> bottom_hidden = {64, 32};
  std::size_t embedding = 16;
  std::vector<std::size_t> top_hidden = {16};
  std::vector<std::size_t> head_hidden = {16};
};

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch = 32;
  double lr = 0.1;
};

struct DefenseConfig {
  double budget = 0.25;        // label-privacy budget epsilon
  double sigma = 0.01;         // masking-transition noise scale
  std::size_t sim_attack_epochs = 50;
  double aux_ratio = 0.05;
  std::size_t aux_label_classes = 0;  // non-IID ablation: 0 = all classes
  double aux_noise_std = 0.0;         // non-IID ablation: feature noise
  std::string variant = "vmask";  // vanilla | vmask | vmask-as | vmask-rs | vmask-alls
};

struct AttackConfig {
  std::size_t labels_per_class = 4;
  std::size_t epochs = 50;
  double lr = 0.1;
};

struct RunConfig {
  DatasetConfig dataset;
  ModelConfig model;
  TrainConfig train;
  DefenseConfig defense;
  AttackConfig attack;
  ShareDomain domain = ShareDomain::floating();
  std::uint64_t seed = 1;
  std::size_t parties = 2;
  TransportKind transport = TransportKind::InProc;
  std::string out_dir = "out";

  // Bottom dims for one party whose feature slice has width `in`.
  std::vector<std::size_t> bottom_dims(std::size_t in) const;
};

RunConfig parse_config(const std::string& json_text,
                       const std::string& base_dir);
RunConfig load_config(const std::string& path);
std::string config_to_json(const RunConfig& c);

}  // namespace vmask
