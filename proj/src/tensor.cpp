#include "vmask/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace vmask {

std::string shape_str(const Tensor& t) {
  std::string s = "(";
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(t.shape[i]);
  }
  return s + ")";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(where) + ": shape mismatch " +
                                shape_str(a) + " vs " + shape_str(b));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* where) {
  if (t.rank() != rank) {
    throw std::invalid_argument(std::string(where) + ": expected rank " +
                                std::to_string(rank) + ", got " + shape_str(t));
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dims " + shape_str(a) + " vs " +
                                shape_str(b));
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor c(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double av = a.at(i, l);
      if (av == 0.0) continue;
      const double* brow = &b.data[l * m];
      double* crow = &c.data[i * m];
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  Tensor t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data[i] += b.data[i];
  return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data[i] *= b.data[i];
  return c;
}

Tensor scale(const Tensor& a, double s) {
  Tensor c = a;
  for (double& v : c.data) v *= s;
  return c;
}

Tensor colsum(const Tensor& a) {
  require_rank(a, 2, "colsum");
  Tensor c(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c[j] += a.at(i, j);
  return c;
}

Tensor add_rowwise(const Tensor& a, const Tensor& bias) {
  require_rank(a, 2, "add_rowwise");
  require_rank(bias, 1, "add_rowwise");
  if (a.cols() != bias.size()) {
    throw std::invalid_argument("add_rowwise: " + shape_str(a) + " vs bias " +
                                shape_str(bias));
  }
  Tensor c = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c.at(i, j) += bias[j];
  return c;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace vmask
