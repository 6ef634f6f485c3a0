#include "vmask/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "vmask/layer_select.hpp"

namespace vmask {
namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument("config: " + msg);
}

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key()))
      fail("unknown key \"" + it.key() + "\" in " + where);
  }
}

double get_num(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) fail(std::string(key) + " must be a number");
  return obj[key].get<double>();
}

std::size_t get_count(const json& obj, const char* key, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_unsigned())
    fail(std::string(key) + " must be a non-negative integer");
  return obj[key].get<std::size_t>();
}

std::string get_str(const json& obj, const char* key,
                    const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) fail(std::string(key) + " must be a string");
  return obj[key].get<std::string>();
}

std::vector<std::size_t> get_dims(const json& obj, const char* key,
                                  std::vector<std::size_t> fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_array()) fail(std::string(key) + " must be an array");
  std::vector<std::size_t> out;
  for (const auto& v : obj[key]) {
    if (!v.is_number_unsigned() || v.get<std::size_t>() == 0)
      fail(std::string(key) + " entries must be positive integers");
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

}  // namespace

std::vector<std::size_t> RunConfig::bottom_dims(std::size_t in) const {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), model.bottom_hidden.begin(),
              model.bottom_hidden.end());
  dims.push_back(model.embedding);
  return dims;
}

RunConfig parse_config(const std::string& json_text,
                       const std::string& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) fail("top level must be an object");
  check_keys(root, "top level",
             {"dataset", "model", "train", "defense", "attack", "share",
              "seed", "parties", "transport", "out_dir"});

  RunConfig c;

  if (root.contains("dataset")) {
    const json& d = root["dataset"];
    check_keys(d, "dataset",
               {"kind", "path", "label_column", "blob_samples",
                "blob_features", "blob_classes", "test_fraction"});
    const std::string kind = get_str(d, "kind", "digits");
    if (kind == "digits")
      c.dataset.kind = DatasetKind::Digits;
    else if (kind == "csv")
      c.dataset.kind = DatasetKind::Csv;
    else if (kind == "blobs")
      c.dataset.kind = DatasetKind::Blobs;
    else
      fail("dataset.kind must be digits, csv, or blobs");
    c.dataset.path = get_str(d, "path", "");
    c.dataset.label_column = get_str(d, "label_column", "label");
    c.dataset.blob_samples = get_count(d, "blob_samples", 1200);
    c.dataset.blob_features = get_count(d, "blob_features", 20);
    c.dataset.blob_classes = get_count(d, "blob_classes", 4);
    c.dataset.test_fraction = get_num(d, "test_fraction", 0.2);
  }
  if (c.dataset.kind == DatasetKind::Csv && c.dataset.path.empty())
    fail("dataset.path is required for csv datasets");
  if (!(c.dataset.test_fraction > 0.0 && c.dataset.test_fraction < 1.0))
    fail("dataset.test_fraction must be in (0, 1)");
  if (!c.dataset.path.empty()) {
    std::filesystem::path p(c.dataset.path);
    if (p.is_relative() && !base_dir.empty())
      c.dataset.path = (std::filesystem::path(base_dir) / p).string();
  }

  if (root.contains("model")) {
    const json& m = root["model"];
    check_keys(m, "model",
               {"bottom_hidden", "embedding", "top_hidden", "head_hidden"});
    c.model.bottom_hidden = get_dims(m, "bottom_hidden", {64, 32});
    c.model.embedding = get_count(m, "embedding", 16);
    c.model.top_hidden = get_dims(m, "top_hidden", {16});
    c.model.head_hidden = get_dims(m, "head_hidden", {16});
  }
  if (c.model.embedding == 0) fail("model.embedding must be positive");

  if (root.contains("train")) {
    const json& t = root["train"];
    check_keys(t, "train", {"epochs", "batch", "lr"});
    c.train.epochs = get_count(t, "epochs", 50);
    c.train.batch = get_count(t, "batch", 128);
    c.train.lr = get_num(t, "lr", 0.1);
  }
  if (c.train.batch == 0) fail("train.batch must be positive");
  if (!(c.train.lr >= 0.0)) fail("train.lr must be non-negative");

  if (root.contains("defense")) {
    const json& d = root["defense"];
    check_keys(d, "defense",
               {"budget", "sigma", "sim_attack_epochs", "aux_ratio",
                "aux_label_classes", "aux_noise_std", "variant"});
    c.defense.budget = get_num(d, "budget", 0.25);
    c.defense.sigma = get_num(d, "sigma", 0.01);
    c.defense.sim_attack_epochs = get_count(d, "sim_attack_epochs", 50);
    c.defense.aux_ratio = get_num(d, "aux_ratio", 0.05);
    c.defense.aux_label_classes = get_count(d, "aux_label_classes", 0);
    c.defense.aux_noise_std = get_num(d, "aux_noise_std", 0.0);
    c.defense.variant = get_str(d, "variant", "vmask");
  }
  if (!(c.defense.budget > 0.0 && c.defense.budget <= 1.0))
    fail("defense.budget must be in (0, 1]");
  if (!(c.defense.sigma >= 0.0)) fail("defense.sigma must be non-negative");
  if (!(c.defense.aux_ratio > 0.0 && c.defense.aux_ratio < 1.0))
    fail("defense.aux_ratio must be in (0, 1)");
  if (!(c.defense.aux_noise_std >= 0.0))
    fail("defense.aux_noise_std must be non-negative");
  try {
    variant_from_name(c.defense.variant);
  } catch (const std::exception&) {
    fail("defense.variant must be one of vanilla, vmask, vmask-as, "
         "vmask-rs, vmask-alls");
  }

  if (root.contains("attack")) {
    const json& a = root["attack"];
    check_keys(a, "attack", {"labels_per_class", "epochs", "lr"});
    c.attack.labels_per_class = get_count(a, "labels_per_class", 4);
    c.attack.epochs = get_count(a, "epochs", 50);
    c.attack.lr = get_num(a, "lr", 0.1);
  }
  if (c.attack.labels_per_class == 0)
    fail("attack.labels_per_class must be positive");

  if (root.contains("share")) {
    const json& s = root["share"];
    check_keys(s, "share", {"domain", "noise_scale", "frac_bits"});
    const std::string dom = get_str(s, "domain", "float");
    if (dom == "float") {
      c.domain = ShareDomain::floating(get_num(s, "noise_scale", 100.0));
      if (!(c.domain.noise_scale > 0.0))
        fail("share.noise_scale must be positive");
    } else if (dom == "ring") {
      const std::size_t f = get_count(s, "frac_bits", 16);
      if (f == 0 || f >= 32) fail("share.frac_bits must be in [1, 31]");
      c.domain = ShareDomain::ring(static_cast<std::uint32_t>(f));
    } else {
      fail("share.domain must be float or ring");
    }
  }

  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned())
      fail("seed must be a non-negative integer");
    c.seed = root["seed"].get<std::uint64_t>();
  }
  c.parties = get_count(root, "parties", 2);
  if (c.parties < 2) fail("parties must be at least 2");

  const std::string tr = get_str(root, "transport", "threads");
  if (tr == "threads" || tr == "inproc")
    c.transport = TransportKind::InProc;
  else if (tr == "sockets" || tr == "tcp")
    c.transport = TransportKind::Tcp;
  else
    fail("transport must be threads or sockets");

  c.out_dir = get_str(root, "out_dir", "out");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(),
                      std::filesystem::path(path).parent_path().string());
}

std::string config_to_json(const RunConfig& c) {
  json root;
  json d;
  d["kind"] = c.dataset.kind == DatasetKind::Digits ? "digits"
              : c.dataset.kind == DatasetKind::Csv  ? "csv"
                                                    : "blobs";
  if (!c.dataset.path.empty()) d["path"] = c.dataset.path;
  d["label_column"] = c.dataset.label_column;
  if (c.dataset.kind == DatasetKind::Blobs) {
    d["blob_samples"] = c.dataset.blob_samples;
    d["blob_features"] = c.dataset.blob_features;
    d["blob_classes"] = c.dataset.blob_classes;
  }
  d["test_fraction"] = c.dataset.test_fraction;
  root["dataset"] = d;

  json m;
  m["bottom_hidden"] = c.model.bottom_hidden;
  m["embedding"] = c.model.embedding;
  m["top_hidden"] = c.model.top_hidden;
  m["head_hidden"] = c.model.head_hidden;
  root["model"] = m;

  json t;
  t["epochs"] = c.train.epochs;
  t["batch"] = c.train.batch;
  t["lr"] = c.train.lr;
  root["train"] = t;

  json df;
  df["budget"] = c.defense.budget;
  df["sigma"] = c.defense.sigma;
  df["sim_attack_epochs"] = c.defense.sim_attack_epochs;
  df["aux_ratio"] = c.defense.aux_ratio;
  df["aux_label_classes"] = c.defense.aux_label_classes;
  df["aux_noise_std"] = c.defense.aux_noise_std;
  df["variant"] = c.defense.variant;
  root["defense"] = df;

  json a;
  a["labels_per_class"] = c.attack.labels_per_class;
  a["epochs"] = c.attack.epochs;
  a["lr"] = c.attack.lr;
  root["attack"] = a;

  json s;
  if (c.domain.kind == Domain::Float) {
    s["domain"] = "float";
    s["noise_scale"] = c.domain.noise_scale;
  } else {
    s["domain"] = "ring";
    s["frac_bits"] = c.domain.frac_bits;
  }
  root["share"] = s;

  root["seed"] = c.seed;
  root["parties"] = c.parties;
  root["transport"] =
      c.transport == TransportKind::InProc ? "threads" : "sockets";
  root["out_dir"] = c.out_dir;
  return root.dump(2) + "\n";
}

}  // namespace vmask
