#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <span>
#include <vector>

namespace swift {

using Index = std::int64_t;
using Shape = std::vector<Index>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, Index>;

/// Product of all extents.
Index numel(const Shape& shape);

/// Product of all extents except `mode` (the column count of the mode unfolding).
Index numel_excluding(const Shape& shape, int mode);

struct Entry {
  std::vector<Index> index;
  double value = 0.0;
};

/// N-th order nonnegative tensor in coordinate form.
///
/// Entries are kept sorted by their column-major linear index (mode 0 varies
/// fastest). Explicit zeros are dropped on construction; negative or
/// non-finite values, out-of-range and duplicate coordinates are rejected.
class SparseTensor {
 public:
  SparseTensor() = default;
  SparseTensor(Shape shape, std::vector<Entry> entries);

  /// Builds from a dense column-major buffer, skipping zeros.
  static SparseTensor from_dense(Shape shape, std::span<const double> values);

  const Shape& shape() const { return shape_; }
  int order() const { return static_cast<int>(shape_.size()); }
  Index extent(int mode) const { return shape_.at(static_cast<std::size_t>(mode)); }
  Index nnz() const { return static_cast<Index>(values_.size()); }
  Index numel() const { return swift::numel(shape_); }

  std::span<const Index> index(Index e) const {
    return {coords_.data() + e * order(), static_cast<std::size_t>(order())};
  }
  double value(Index e) const { return values_[static_cast<std::size_t>(e)]; }
  std::span<const double> values() const { return values_; }

  /// Column-major linear index of entry `e`.
  Index linear_index(Index e) const;

  std::vector<double> to_dense() const;
  double max_value() const;
  double sum() const;

  bool operator==(const SparseTensor&) const = default;

 private:
  Shape shape_;
  std::vector<Index> coords_;  // nnz x order, row-major
  std::vector<double> values_;
};

/// Index arithmetic of the mode-n unfolding.
///
/// Entry (i_0..i_{N-1}) lands at row i_n and column
/// j = sum_{k != n} i_k * prod_{m < k, m != n} I_m, which is the row order of
/// the Khatri-Rao product A_{N-1} (.) ... (.) A_0 with A_n left out.
class Unfolding {
 public:
  Unfolding(const Shape& shape, int mode);

  int mode() const { return mode_; }
  Index rows() const { return shape_[static_cast<std::size_t>(mode_)]; }
  Index cols() const { return cols_; }

  /// Column stride of mode k (zero for the unfolded mode).
  Index stride(int k) const { return strides_[static_cast<std::size_t>(k)]; }

  Index column(std::span<const Index> idx) const;

  /// Writes the full index tuple of cell (row, col) into `idx`.
  void decode(Index row, Index col, std::span<Index> idx) const;

 private:
  Shape shape_;
  int mode_;
  Index cols_;
  std::vector<Index> strides_;
};

struct MatricizedView {
  int mode = 0;
  Shape shape;
  SparseMatrix matrix;                  // I_n x I_(-n)
  std::vector<Index> nonzero_columns;   // sorted
  Index nnz_columns() const { return static_cast<Index>(nonzero_columns.size()); }

  /// Dense I_n x nnz_n block holding only the nonzero columns.
  Matrix dense_columns() const;
  /// Dense I_n x |cols| block for an arbitrary sorted column list.
  Matrix dense_columns(std::span<const Index> cols) const;
  Matrix dense() const;
};

MatricizedView matricize(const SparseTensor& tensor, int mode);
SparseTensor tensorize(const MatricizedView& view, const Shape& shape);
/// Folds a dense mode-n unfolding back into a tensor (zeros dropped).
SparseTensor tensorize(const Matrix& unfolded, int mode, const Shape& shape);

/// CP factor matrices A_0..A_{N-1}, each I_n x R and entrywise nonnegative.
struct FactorSet {
  std::vector<Matrix> factors;

  int order() const { return static_cast<int>(factors.size()); }
  Index rank() const { return factors.empty() ? 0 : factors.front().cols(); }
  Shape shape() const;
  Matrix& operator[](int n) { return factors[static_cast<std::size_t>(n)]; }
  const Matrix& operator[](int n) const { return factors[static_cast<std::size_t>(n)]; }

  /// Entries i.i.d. uniform on (0.1, 1.1).
  static FactorSet random(const Shape& shape, Index rank, std::uint64_t seed);
};

/// Column-wise Kronecker product A (.) B.
Matrix khatri_rao(const Matrix& a, const Matrix& b);

/// A_{N-1} (.) ... (.) A_{n+1} (.) A_{n-1} (.) ... (.) A_0, shape I_(-n) x R.
Matrix khatri_rao_excluding(const FactorSet& factors, int mode);

/// Dense X^_(n) = A_n (A_(.)^(-n))^T.
Matrix cp_reconstruct_mode(const FactorSet& factors, int mode);

/// Columns `cols` of X^_(n) only.
Matrix cp_reconstruct_columns(const FactorSet& factors, int mode, std::span<const Index> cols);

/// Sum of all entries of the reconstruction, without materializing it.
double cp_total_mass(const FactorSet& factors);

/// Moves a mode-`from` unfolding of a tensor with `shape` into mode-`to`
/// layout (reshape, swap the two modes, reshape).
Matrix pi_rearrange(const Matrix& m, int from_mode, int to_mode, const Shape& shape);

}  // namespace swift
