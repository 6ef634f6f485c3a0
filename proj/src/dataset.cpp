#include "vmask/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace vmask {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_cell(const std::string& s, std::size_t row, const std::string& col) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("csv row " + std::to_string(row) +
                             ": non-numeric cell '" + s + "' in column " + col);
  }
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::swap(idx[i - 1], idx[rng.index(i)]);
  }
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open dataset " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_line(line);
  std::size_t label_idx = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) label_idx = i;
  }
  if (label_idx == header.size()) {
    throw std::runtime_error(path + ": missing label column '" + label_column +
                             "'");
  }

  Dataset d;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i != label_idx) d.feature_names.push_back(header[i]);
  }
  std::vector<double> values;
  std::size_t rows = 0;
  int max_label = -1;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("csv row " + std::to_string(rows + 1) +
                               ": expected " + std::to_string(header.size()) +
                               " cells, got " + std::to_string(cells.size()));
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const double v = parse_cell(cells[i], rows + 1, header[i]);
      if (i == label_idx) {
        const int lab = int(std::llround(v));
        if (double(lab) != v || lab < 0) {
          throw std::runtime_error("csv row " + std::to_string(rows + 1) +
                                   ": label '" + cells[i] +
                                   "' is not a non-negative integer");
        }
        d.labels.push_back(lab);
        max_label = std::max(max_label, lab);
      } else {
        values.push_back(v);
      }
    }
    ++rows;
  }
  if (rows == 0) throw std::runtime_error(path + ": no data rows");
  d.features.shape = {rows, header.size() - 1};
  d.features.data = std::move(values);
  d.num_classes = std::size_t(max_label) + 1;
  return d;
}

Dataset make_blobs(std::size_t dim, std::size_t classes, std::size_t samples,
                   Rng& rng) {
  if (dim == 0 || classes == 0 || samples == 0) {
    throw std::invalid_argument("make_blobs: zero dimension");
  }
  Tensor centers(classes, dim);
  for (double& v : centers.data) v = rng.normal(0.0, 2.0);
  Dataset d;
  d.features = Tensor(samples, dim);
  d.labels.resize(samples);
  d.num_classes = classes;
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t c = i % classes;
    d.labels[i] = int(c);
    for (std::size_t j = 0; j < dim; ++j) {
      d.features.at(i, j) = centers.at(c, j) + rng.normal(0.0, 1.0);
    }
  }
  for (std::size_t j = 0; j < dim; ++j) {
    d.feature_names.push_back("x" + std::to_string(j));
  }
  return d;
}

TrainTest split_train_test(const Dataset& d, double test_fraction, Rng& rng) {
  if (test_fraction < 0.0 || test_fraction >= 1.0) {
    throw std::invalid_argument("split_train_test: bad fraction");
  }
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  shuffle_indices(idx, rng);
  const std::size_t n_test = std::size_t(std::llround(test_fraction * double(d.size())));
  if (n_test >= d.size()) throw std::invalid_argument("split: empty train set");
  const std::vector<std::size_t> train_idx(idx.begin(), idx.end() - long(n_test));
  const std::vector<std::size_t> test_idx(idx.end() - long(n_test), idx.end());
  TrainTest tt;
  for (auto [part, rows] : {std::pair{&tt.train, &train_idx},
                            std::pair{&tt.test, &test_idx}}) {
    part->features = take_rows(d.features, *rows);
    part->labels = take_at(d.labels, *rows);
    part->feature_names = d.feature_names;
    part->num_classes = d.num_classes;
  }
  return tt;
}

Standardizer fit_standardizer(const Tensor& x) {
  require_rank(x, 2, "fit_standardizer");
  const std::size_t n = x.rows(), d = x.cols();
  if (n == 0) throw std::invalid_argument("fit_standardizer: empty");
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.std.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += x.at(i, j);
  for (double& m : s.mean) m /= double(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x.at(i, j) - s.mean[j];
      s.std[j] += c * c;
    }
  }
  for (double& v : s.std) v = std::max(std::sqrt(v / double(n)), 1e-12);
  return s;
}

Tensor apply_standardizer(const Standardizer& s, const Tensor& x) {
  require_rank(x, 2, "apply_standardizer");
  if (x.cols() != s.mean.size()) {
    throw std::invalid_argument("apply_standardizer: column count mismatch");
  }
  Tensor y = x;
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j)
      y.at(i, j) = (y.at(i, j) - s.mean[j]) / s.std[j];
  return y;
}

VerticalSplit vertical_split(std::size_t dim, std::size_t parties) {
  if (parties == 0 || parties > dim) {
    throw std::invalid_argument("vertical_split: " + std::to_string(parties) +
                                " parties for " + std::to_string(dim) +
                                " columns");
  }
  const std::size_t wide = (dim + parties - 1) / parties;
  const std::size_t n_wide = dim % parties == 0 ? parties : dim % parties;
  VerticalSplit vs;
  std::size_t off = 0;
  for (std::size_t k = 0; k < parties; ++k) {
    const std::size_t w = k < n_wide ? wide : dim / parties;
    vs.offset.push_back(off);
    vs.width.push_back(w);
    off += w;
  }
  return vs;
}

Tensor slice_cols(const Tensor& x, std::size_t offset, std::size_t width) {
  require_rank(x, 2, "slice_cols");
  if (offset + width > x.cols()) {
    throw std::invalid_argument("slice_cols: out of range");
  }
  Tensor y(x.rows(), width);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < width; ++j) y.at(i, j) = x.at(i, offset + j);
  return y;
}

Tensor take_rows(const Tensor& x, const std::vector<std::size_t>& idx) {
  require_rank(x, 2, "take_rows");
  Tensor y(idx.size(), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= x.rows()) throw std::invalid_argument("take_rows: index");
    for (std::size_t j = 0; j < x.cols(); ++j) y.at(i, j) = x.at(idx[i], j);
  }
  return y;
}

std::vector<std::size_t> stratified_sample(const std::vector<int>& labels,
                                           std::size_t num_classes,
                                           double ratio,
                                           std::size_t min_per_class,
                                           Rng& rng) {
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class.at(std::size_t(labels[i])).push_back(i);
  }
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& pool = by_class[c];
    std::size_t want = std::max<std::size_t>(
        std::size_t(std::llround(ratio * double(pool.size()))), min_per_class);
    if (want > pool.size()) {
      throw std::runtime_error("stratified_sample: class " + std::to_string(c) +
                               " has " + std::to_string(pool.size()) +
                               " rows, need " + std::to_string(want));
    }
    shuffle_indices(pool, rng);
    out.insert(out.end(), pool.begin(), pool.begin() + long(want));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   Rng& rng) {
  if (batch_size == 0) throw std::invalid_argument("make_batches: batch 0");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  shuffle_indices(idx, rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t off = 0; off < n; off += batch_size) {
    const std::size_t take = std::min(batch_size, n - off);
    batches.emplace_back(idx.begin() + long(off), idx.begin() + long(off + take));
  }
  return batches;
}

}  // namespace vmask
