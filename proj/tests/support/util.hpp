#pragma once

// Shared test utilities: repository paths, scratch directories, statistical
// helpers, and finite-difference gradient checking.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "vmask/tensor.hpp"

namespace testutil {

inline std::string source_dir() { return VMASK_SOURCE_DIR; }

inline std::string digits_csv() { return source_dir() + "/data/digits.csv"; }

// Fresh scratch directory under the system temp root; callers may leave it
// behind (the OS temp dir is disposable).
inline std::string scratch_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  std::filesystem::path p =
      std::filesystem::temp_directory_path() /
      ("vmask_test_" + tag + "_" + std::to_string(++counter) + "_" +
       std::to_string(::getpid()));
  std::filesystem::create_directories(p);
  return p.string();
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  f << body;
}

// ------------------------------------------------------------- statistics

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

inline double variance(const std::vector<double>& v) {
  double m = mean(v), s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / double(v.size() - 1);
}

// Chi-square statistic for byte-value uniformity (255 degrees of freedom).
// The 1% critical value for df=255 is 310.457.
inline double chi_square_bytes(const std::vector<std::uint8_t>& bytes) {
  std::vector<double> count(256, 0.0);
  for (std::uint8_t b : bytes) count[b] += 1.0;
  const double expect = double(bytes.size()) / 256.0;
  double chi = 0.0;
  for (double c : count) chi += (c - expect) * (c - expect) / expect;
  return chi;
}
constexpr double kChiSquare255Crit1pc = 310.457;

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::fabs(double(i) / double(a.size()) -
                              double(j) / double(b.size())));
  }
  return d;
}

inline double cosine(const std::vector<double>& a,
                     const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

// ------------------------------------------------- finite-difference check

// Central finite difference of `loss` with respect to one scalar slot.
inline double fd_slot(const std::function<double()>& loss, double& slot,
                      double h = 1e-5) {
  const double keep = slot;
  slot = keep + h;
  const double up = loss();
  slot = keep - h;
  const double down = loss();
  slot = keep;
  return (up - down) / (2.0 * h);
}

// Relative error with a floor so near-zero gradients compare absolutely.
inline double rel_err(double a, double b, double floor = 1e-3) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

// --------------------------------------------------------- thread harness

// Runs two protocol endpoints on separate threads and rethrows the first
// failure (side A preferred) after both finish.
inline void run_pair(const std::function<void()>& side_a,
                     const std::function<void()>& side_b) {
  std::exception_ptr ea, eb;
  std::thread tb([&] {
    try {
      side_b();
    } catch (...) {
      eb = std::current_exception();
    }
  });
  try {
    side_a();
  } catch (...) {
    ea = std::current_exception();
  }
  tb.join();
  if (ea) std::rethrow_exception(ea);
  if (eb) std::rethrow_exception(eb);
}

inline double max_abs(const vmask::Tensor& t) {
  double m = 0.0;
  for (double v : t.data) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace testutil
