#pragma once

#include <string>
#include <vector>

#include "vmask/rng.hpp"
#include "vmask/tensor.hpp"

namespace vmask {

struct Dataset {
  Tensor features;  // N x d
  std::vector<int> labels;
  std::vector<std::string> feature_names;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.rank() == 2 ? features.cols() : 0; }
};

// CSV with a header row; every column except `label_column` must be numeric.
Dataset load_csv(const std::string& path, const std::string& label_column);

// Gaussian blobs: class centers N(0, 2^2) per coordinate, unit-variance
// samples around them, labels balanced round-robin.
Dataset make_blobs(std::size_t dim, std::size_t classes, std::size_t samples,
                   Rng& rng);

struct TrainTest {
  Dataset train;
  Dataset test;
};
// Shuffles rows and takes the trailing fraction as the test split.
TrainTest split_train_test(const Dataset& d, double test_fraction, Rng& rng);

// Per-column standardization fit on training data. Stddevs are clamped at
// 1e-12 so constant columns map to zero.
struct Standardizer {
  std::vector<double> mean, std;
};
Standardizer fit_standardizer(const Tensor& x);
Tensor apply_standardizer(const Standardizer& s, const Tensor& x);

// Contiguous vertical partition of `dim` columns over `parties` parties; the
// first dim % parties parties get the wider blocks and the active party (the
// last one) gets the final block.
struct VerticalSplit {
  std::vector<std::size_t> offset, width;
};
VerticalSplit vertical_split(std::size_t dim, std::size_t parties);

Tensor slice_cols(const Tensor& x, std::size_t offset, std::size_t width);
Tensor take_rows(const Tensor& x, const std::vector<std::size_t>& idx);
template <typename T>
std::vector<T> take_at(const std::vector<T>& v,
                       const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v.at(i));
  return out;
}

// Balanced subsample: round(ratio * class_count) rows per class, floored at
// min_per_class. Throws if a class cannot supply the floor.
std::vector<std::size_t> stratified_sample(const std::vector<int>& labels,
                                           std::size_t num_classes,
                                           double ratio,
                                           std::size_t min_per_class, Rng& rng);

// Shuffled indices chunked into batches of at most batch_size (the final
// batch may be smaller).
std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   Rng& rng);

}  // namespace vmask
