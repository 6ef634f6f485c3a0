#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace vmask {

// Dense row-major tensor of doubles. Training code only ever needs rank 1
// (bias vectors) and rank 2 (batches, weight matrices), so the helpers below
// are written for those.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : shape{r, c}, data(r * c, 0.0) {}
  explicit Tensor(std::size_t n) : shape{n}, data(n, 0.0) {}

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }

  double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

std::string shape_str(const Tensor& t);

// Throws std::invalid_argument naming `where` if shapes differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* where);
void require_rank(const Tensor& t, std::size_t rank, const char* where);

// c = a * b for 2-D tensors, (n x k) * (k x m) -> (n x m).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// Sum over rows of a 2-D tensor -> rank-1 tensor of length cols.
Tensor colsum(const Tensor& a);
// Adds a rank-1 bias to every row of a 2-D tensor.
Tensor add_rowwise(const Tensor& a, const Tensor& bias);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace vmask
