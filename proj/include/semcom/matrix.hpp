#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "semcom/errors.hpp"

namespace semcom {

// Dense row-major matrix of doubles. Deliberately minimal: the models here
// are desk scale and the training code wants explicit control over summation
// order so serialized results are reproducible.
class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& at(size_t r, size_t c) { return data_[r * cols_ + c]; }
  double at(size_t r, size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  // First n rows, copied.
  Matrix prefix_rows(size_t n) const {
    if (n > rows_) throw OutOfRangeError("row prefix exceeds matrix height");
    Matrix out(n, cols_);
    std::copy(data_.begin(), data_.begin() + static_cast<long>(n * cols_),
              out.data_.begin());
    return out;
  }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeMismatchError("matmul inner dimensions");
  Matrix out(a.rows(), b.cols());
  for (size_t i = 0; i < a.rows(); ++i)
    for (size_t k = 0; k < a.cols(); ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (size_t j = 0; j < b.cols(); ++j) out.at(i, j) += aik * b.at(k, j);
    }
  return out;
}

// a^T * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeMismatchError("matmul_tn inner dimensions");
  Matrix out(a.cols(), b.cols());
  for (size_t k = 0; k < a.rows(); ++k)
    for (size_t i = 0; i < a.cols(); ++i) {
      const double aki = a.at(k, i);
      if (aki == 0.0) continue;
      for (size_t j = 0; j < b.cols(); ++j) out.at(i, j) += aki * b.at(k, j);
    }
  return out;
}

// a * b^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeMismatchError("matmul_nt inner dimensions");
  Matrix out(a.rows(), b.rows());
  for (size_t i = 0; i < a.rows(); ++i)
    for (size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (size_t k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(j, k);
      out.at(i, j) = s;
    }
  return out;
}

inline void add_scaled(Matrix& dst, const Matrix& src, double scale) {
  if (!dst.same_shape(src)) throw ShapeMismatchError("add_scaled shapes");
  auto& d = dst.values();
  const auto& s = src.values();
  for (size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
}

inline double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace semcom
