#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "ggnn/dense_matrix.hpp"
#include "ggnn/error.hpp"

namespace ggnn {

struct Triplet {
  std::size_t row;
  std::size_t col;
  Real value;
};

/// Compressed sparse row matrix. Column indices inside a row are sorted and
/// unique; explicit zeros may be stored (dropout keeps the pattern).
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  /// Builds from unordered triplets; entries with the same (row, col) are summed.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries) {
    for (const auto& t : entries)
      if (t.row >= rows || t.col >= cols) throw BoundsError("SparseMatrix: triplet index out of range");
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseMatrix m(rows, cols);
    m.col_idx_.reserve(entries.size());
    m.values_.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size();) {
      std::size_t j = i;
      Real sum = 0;
      while (j < entries.size() && entries[j].row == entries[i].row && entries[j].col == entries[i].col)
        sum += entries[j++].value;
      m.col_idx_.push_back(entries[i].col);
      m.values_.push_back(sum);
      ++m.row_ptr_[entries[i].row + 1];
      i = j;
    }
    std::partial_sum(m.row_ptr_.begin(), m.row_ptr_.end(), m.row_ptr_.begin());
    return m;
  }

  static SparseMatrix identity(std::size_t n) {
    std::vector<Triplet> t;
    t.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1});
    return from_triplets(n, n, std::move(t));
  }

  static SparseMatrix from_dense(const DenseMatrix& d) {
    std::vector<Triplet> t;
    for (std::size_t r = 0; r < d.rows(); ++r)
      for (std::size_t c = 0; c < d.cols(); ++c)
        if (d(r, c) != 0) t.push_back({r, c, d(r, c)});
    return from_triplets(d.rows(), d.cols(), std::move(t));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::size_t> col_idx() const noexcept { return col_idx_; }
  std::span<const Real> values() const noexcept { return values_; }
  std::span<Real> values() noexcept { return values_; }

  std::span<const std::size_t> row_cols(std::size_t r) const noexcept {
    return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const Real> row_values(std::size_t r) const noexcept {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  /// Value at (r, c), 0 when not stored.
  Real at(std::size_t r, std::size_t c) const {
    auto cols = row_cols(r);
    auto it = std::lower_bound(cols.begin(), cols.end(), c);
    if (it == cols.end() || *it != c) return 0;
    return values_[row_ptr_[r] + static_cast<std::size_t>(it - cols.begin())];
  }

  Real row_sum(std::size_t r) const noexcept {
    auto v = row_values(r);
    return std::accumulate(v.begin(), v.end(), Real{0});
  }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> t;
    t.reserve(nnz());
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) t.push_back({r, col_idx_[k], values_[k]});
    return t;
  }

  SparseMatrix transposed() const {
    std::vector<Triplet> t = triplets();
    for (auto& e : t) std::swap(e.row, e.col);
    return from_triplets(cols_, rows_, std::move(t));
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(rows_, cols_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) d(r, col_idx_[k]) += values_[k];
    return d;
  }

  /// Returns a copy with every row scaled by factors[r] and every column by col_factors[c].
  SparseMatrix scaled(std::span<const Real> row_factors, std::span<const Real> col_factors) const {
    SparseMatrix m = *this;
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
        m.values_[k] *= (row_factors.empty() ? 1 : row_factors[r]) * (col_factors.empty() ? 1 : col_factors[col_idx_[k]]);
    return m;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<Real> values_;
};

/// s · d. Backward: ∂L/∂d = sᵀ · ∂L/∂out, see spmm_transposed.
inline DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d) {
  if (s.cols() != d.rows()) throw ShapeError("spmm: inner dimensions disagree");
  DenseMatrix out(s.rows(), d.cols());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto o = out.row(r);
    auto cols = s.row_cols(r);
    auto vals = s.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      auto dr = d.row(cols[k]);
      const Real v = vals[k];
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += v * dr[j];
    }
  }
  return out;
}

/// sᵀ · d without materializing the transpose.
inline DenseMatrix spmm_transposed(const SparseMatrix& s, const DenseMatrix& d) {
  if (s.rows() != d.rows()) throw ShapeError("spmm_transposed: row counts disagree");
  DenseMatrix out(s.cols(), d.cols());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto dr = d.row(r);
    auto cols = s.row_cols(r);
    auto vals = s.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      auto o = out.row(cols[k]);
      const Real v = vals[k];
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += v * dr[j];
    }
  }
  return out;
}

/// Column-wise concatenation of a sparse block followed by dense blocks.
inline SparseMatrix hstack_sparse(const SparseMatrix& head, std::span<const DenseMatrix* const> tail) {
  std::vector<Triplet> t = head.triplets();
  std::size_t col_off = head.cols();
  for (const auto* d : tail) {
    if (d->rows() != head.rows()) throw ShapeError("hstack_sparse: row counts disagree");
    for (std::size_t r = 0; r < d->rows(); ++r)
      for (std::size_t c = 0; c < d->cols(); ++c)
        if ((*d)(r, c) != 0) t.push_back({r, col_off + c, (*d)(r, c)});
    col_off += d->cols();
  }
  return SparseMatrix::from_triplets(head.rows(), col_off, std::move(t));
}

}  // namespace ggnn
