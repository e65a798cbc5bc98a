#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dapt/errors.hpp"

namespace dapt {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. Sizes here are tiny (tens of rows),
/// so everything is plain loops over contiguous storage.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

  std::span<double> row_span(int r) { return {row(r), static_cast<size_t>(cols)}; }
  std::span<const double> row_span(int r) const { return {row(r), static_cast<size_t>(cols)}; }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(std::span<double> x, double alpha) {
  for (double& v : x) v *= alpha;
}

/// In-place L2 normalization. Throws if the norm is numerically zero.
inline void normalize(std::span<double> x, double eps = 1e-12) {
  const double n = l2_norm(x);
  if (n < eps) throw DegenerateEmbeddingError("cannot normalize vector with near-zero norm");
  scale(x, 1.0 / n);
}

inline bool all_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na < 1e-12 || nb < 1e-12) {
    throw DegenerateEmbeddingError("cosine undefined for near-zero vector");
  }
  return dot(a, b) / (na * nb);
}

}  // namespace dapt
