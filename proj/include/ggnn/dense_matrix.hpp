#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ggnn/error.hpp"

namespace ggnn {

using Real = double;

/// Row-major dense matrix of Real values.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, Real fill = 0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<Real> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows * cols) throw ShapeError("DenseMatrix: value count does not match shape");
  }
  /// Builds from nested rows; every row must have the same length.
  DenseMatrix(std::initializer_list<std::initializer_list<Real>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    values_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("DenseMatrix: ragged initializer");
      values_.insert(values_.end(), r.begin(), r.end());
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  Real& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
  Real operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

  std::span<Real> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
  std::span<const Real> row(std::size_t r) const noexcept { return {values_.data() + r * cols_, cols_}; }

  std::span<Real> values() noexcept { return values_; }
  std::span<const Real> values() const noexcept { return values_; }

  bool same_shape(const DenseMatrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  void fill(Real v) { std::fill(values_.begin(), values_.end(), v); }
  void set_zero() { fill(0); }

  DenseMatrix& operator+=(const DenseMatrix& o) {
    require_same_shape(o, "+=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  DenseMatrix& operator-=(const DenseMatrix& o) {
    require_same_shape(o, "-=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  DenseMatrix& operator*=(Real s) {
    for (Real& v : values_) v *= s;
    return *this;
  }
  /// this += s * o
  DenseMatrix& add_scaled(const DenseMatrix& o, Real s) {
    require_same_shape(o, "add_scaled");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * o.values_[i];
    return *this;
  }

  friend DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
  friend DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
  friend DenseMatrix operator*(Real s, DenseMatrix a) { return a *= s; }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](Real v) { return std::isfinite(v); });
  }

  Real max_abs() const noexcept {
    Real m = 0;
    for (Real v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  DenseMatrix transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
    return m;
  }

 private:
  void require_same_shape(const DenseMatrix& o, const char* op) const {
    if (!same_shape(o)) throw ShapeError(std::string("DenseMatrix ") + op + ": shape mismatch");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> values_;
};

/// a · b
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions disagree");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const Real aik = a(i, k);
      if (aik == 0) continue;
      auto br = b.row(k);
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += aik * br[j];
    }
  }
  return out;
}

/// aᵀ · b
inline DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row counts disagree");
  DenseMatrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto ar = a.row(k);
    auto br = b.row(k);
    for (std::size_t i = 0; i < ar.size(); ++i) {
      const Real aki = ar[i];
      if (aki == 0) continue;
      auto o = out.row(i);
      for (std::size_t j = 0; j < br.size(); ++j) o[j] += aki * br[j];
    }
  }
  return out;
}

/// a · bᵀ
inline DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: column counts disagree");
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ar = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto br = b.row(j);
      Real s = 0;
      for (std::size_t k = 0; k < ar.size(); ++k) s += ar[k] * br[k];
      out(i, j) = s;
    }
  }
  return out;
}

/// Column-wise concatenation; all inputs must share a row count.
inline DenseMatrix hstack(std::span<const DenseMatrix* const> parts) {
  if (parts.empty()) return {};
  const std::size_t rows = parts.front()->rows();
  std::size_t cols = 0;
  for (const auto* p : parts) {
    if (p->rows() != rows) throw ShapeError("hstack: row counts disagree");
    cols += p->cols();
  }
  DenseMatrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t off = 0;
    for (const auto* p : parts) {
      auto src = p->row(r);
      std::copy(src.begin(), src.end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(off));
      off += p->cols();
    }
  }
  return out;
}

}  // namespace ggnn
