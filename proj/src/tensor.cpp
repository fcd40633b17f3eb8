#include "swift/tensor.hpp"

#include "swift/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace swift {

namespace {

void check_shape(const Shape& shape) {
  require(shape.size() >= 2, "tensor order must be at least 2");
  for (Index e : shape) require(e > 0, "tensor extents must be positive");
}

void check_mode(const Shape& shape, int mode) {
  require(mode >= 0 && mode < static_cast<int>(shape.size()),
          "mode " + std::to_string(mode) + " out of range for order " +
              std::to_string(shape.size()));
}

std::string format_index(std::span<const Index> idx) {
  std::string s = "(";
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (k) s += ",";
    s += std::to_string(idx[k]);
  }
  return s + ")";
}

}  // namespace

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

Index numel_excluding(const Shape& shape, int mode) {
  Index n = 1;
  for (std::size_t k = 0; k < shape.size(); ++k)
    if (static_cast<int>(k) != mode) n *= shape[k];
  return n;
}

// ---------------------------------------------------------------------------
// SparseTensor

SparseTensor::SparseTensor(Shape shape, std::vector<Entry> entries) : shape_(std::move(shape)) {
  check_shape(shape_);
  const int n = order();

  std::vector<std::pair<Index, std::size_t>> keyed;
  keyed.reserve(entries.size());
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const Entry& en = entries[e];
    require(static_cast<int>(en.index.size()) == n,
            "entry " + std::to_string(e) + " has " + std::to_string(en.index.size()) +
                " indices, expected " + std::to_string(n));
    Index lin = 0, stride = 1;
    for (int k = 0; k < n; ++k) {
      const Index i = en.index[static_cast<std::size_t>(k)];
      require(i >= 0 && i < shape_[static_cast<std::size_t>(k)],
              "index " + format_index(en.index) + " out of range");
      lin += i * stride;
      stride *= shape_[static_cast<std::size_t>(k)];
    }
    require(std::isfinite(en.value) && en.value >= 0.0,
            "entry " + format_index(en.index) + " must be finite and nonnegative");
    if (en.value == 0.0) continue;
    keyed.emplace_back(lin, e);
  }
  std::sort(keyed.begin(), keyed.end());
  for (std::size_t e = 1; e < keyed.size(); ++e) {
    if (keyed[e].first == keyed[e - 1].first)
      require(false, "duplicate coordinate " + format_index(entries[keyed[e].second].index));
  }

  coords_.reserve(keyed.size() * static_cast<std::size_t>(n));
  values_.reserve(keyed.size());
  for (const auto& [lin, e] : keyed) {
    coords_.insert(coords_.end(), entries[e].index.begin(), entries[e].index.end());
    values_.push_back(entries[e].value);
  }
}

SparseTensor SparseTensor::from_dense(Shape shape, std::span<const double> values) {
  check_shape(shape);
  require(static_cast<Index>(values.size()) == swift::numel(shape),
          "dense buffer size does not match shape");
  std::vector<Entry> entries;
  std::vector<Index> idx(shape.size(), 0);
  for (std::size_t lin = 0; lin < values.size(); ++lin) {
    if (values[lin] != 0.0) entries.push_back({idx, values[lin]});
    for (std::size_t k = 0; k < shape.size(); ++k) {
      if (++idx[k] < shape[k]) break;
      idx[k] = 0;
    }
  }
  return SparseTensor(std::move(shape), std::move(entries));
}

Index SparseTensor::linear_index(Index e) const {
  auto idx = index(e);
  Index lin = 0, stride = 1;
  for (int k = 0; k < order(); ++k) {
    lin += idx[static_cast<std::size_t>(k)] * stride;
    stride *= shape_[static_cast<std::size_t>(k)];
  }
  return lin;
}

std::vector<double> SparseTensor::to_dense() const {
  std::vector<double> dense(static_cast<std::size_t>(numel()), 0.0);
  for (Index e = 0; e < nnz(); ++e) dense[static_cast<std::size_t>(linear_index(e))] = value(e);
  return dense;
}

double SparseTensor::max_value() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

double SparseTensor::sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

// ---------------------------------------------------------------------------
// Unfolding

Unfolding::Unfolding(const Shape& shape, int mode) : shape_(shape), mode_(mode) {
  check_mode(shape, mode);
  strides_.assign(shape.size(), 0);
  Index stride = 1;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (static_cast<int>(k) == mode) continue;
    strides_[k] = stride;
    stride *= shape[k];
  }
  cols_ = stride;
}

Index Unfolding::column(std::span<const Index> idx) const {
  Index j = 0;
  for (std::size_t k = 0; k < strides_.size(); ++k) j += idx[k] * strides_[k];
  return j;
}

void Unfolding::decode(Index row, Index col, std::span<Index> idx) const {
  for (std::size_t k = 0; k < shape_.size(); ++k) {
    if (static_cast<int>(k) == mode_) {
      idx[k] = row;
    } else {
      idx[k] = col % shape_[k];
      col /= shape_[k];
    }
  }
}

// ---------------------------------------------------------------------------
// Matricization

Matrix MatricizedView::dense_columns() const { return dense_columns(nonzero_columns); }

Matrix MatricizedView::dense_columns(std::span<const Index> cols) const {
  Matrix out = Matrix::Zero(matrix.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (SparseMatrix::InnerIterator it(matrix, cols[c]); it; ++it)
      out(it.row(), static_cast<Index>(c)) = it.value();
  return out;
}

Matrix MatricizedView::dense() const { return Matrix(matrix); }

MatricizedView matricize(const SparseTensor& tensor, int mode) {
  const Unfolding layout(tensor.shape(), mode);
  MatricizedView view;
  view.mode = mode;
  view.shape = tensor.shape();

  std::vector<Eigen::Triplet<double, Index>> triplets;
  triplets.reserve(static_cast<std::size_t>(tensor.nnz()));
  for (Index e = 0; e < tensor.nnz(); ++e) {
    auto idx = tensor.index(e);
    triplets.emplace_back(idx[static_cast<std::size_t>(mode)], layout.column(idx), tensor.value(e));
  }
  view.matrix.resize(layout.rows(), layout.cols());
  view.matrix.setFromTriplets(triplets.begin(), triplets.end());
  view.matrix.makeCompressed();

  for (Index j = 0; j < view.matrix.outerSize(); ++j) {
    if (view.matrix.outerIndexPtr()[j + 1] > view.matrix.outerIndexPtr()[j])
      view.nonzero_columns.push_back(j);
  }
  return view;
}

SparseTensor tensorize(const MatricizedView& view, const Shape& shape) {
  require(view.shape == shape, "view shape does not match target shape");
  const Unfolding layout(shape, view.mode);
  require(view.matrix.rows() == layout.rows() && view.matrix.cols() == layout.cols(),
          "unfolded matrix has the wrong dimensions for this shape");
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(view.matrix.nonZeros()));
  std::vector<Index> idx(shape.size());
  for (Index j = 0; j < view.matrix.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(view.matrix, j); it; ++it) {
      layout.decode(it.row(), j, idx);
      entries.push_back({idx, it.value()});
    }
  }
  return SparseTensor(shape, std::move(entries));
}

SparseTensor tensorize(const Matrix& unfolded, int mode, const Shape& shape) {
  const Unfolding layout(shape, mode);
  require(unfolded.rows() == layout.rows() && unfolded.cols() == layout.cols(),
          "unfolded matrix has the wrong dimensions for this shape");
  std::vector<Entry> entries;
  std::vector<Index> idx(shape.size());
  for (Index j = 0; j < unfolded.cols(); ++j) {
    for (Index i = 0; i < unfolded.rows(); ++i) {
      if (unfolded(i, j) == 0.0) continue;
      layout.decode(i, j, idx);
      entries.push_back({idx, unfolded(i, j)});
    }
  }
  return SparseTensor(shape, std::move(entries));
}

// ---------------------------------------------------------------------------
// CP

Shape FactorSet::shape() const {
  Shape s;
  for (const auto& a : factors) s.push_back(a.rows());
  return s;
}

FactorSet FactorSet::random(const Shape& shape, Index rank, std::uint64_t seed) {
  require(rank >= 1, "rank must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.1, 1.1);
  FactorSet fs;
  for (Index extent : shape) {
    Matrix a(extent, rank);
    // fill row by row so the draw order does not depend on storage order
    for (Index i = 0; i < extent; ++i)
      for (Index r = 0; r < rank; ++r) a(i, r) = dist(rng);
    fs.factors.push_back(std::move(a));
  }
  return fs;
}

Matrix khatri_rao(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "Khatri-Rao operands need the same column count");
  Matrix out(a.rows() * b.rows(), a.cols());
  for (Index r = 0; r < a.cols(); ++r)
    for (Index i = 0; i < a.rows(); ++i)
      out.col(r).segment(i * b.rows(), b.rows()) = a(i, r) * b.col(r);
  return out;
}

Matrix khatri_rao_excluding(const FactorSet& factors, int mode) {
  require(factors.order() >= 2, "Khatri-Rao needs at least two factors");
  check_mode(factors.shape(), mode);
  const Index rank = factors.rank();
  Matrix out = Matrix::Ones(1, rank);
  for (int m = 0; m < factors.order(); ++m) {
    if (m == mode) continue;
    require(factors[m].cols() == rank, "factor rank mismatch");
    out = khatri_rao(factors[m], out);
  }
  return out;
}

Matrix cp_reconstruct_mode(const FactorSet& factors, int mode) {
  return factors[mode] * khatri_rao_excluding(factors, mode).transpose();
}

Matrix cp_reconstruct_columns(const FactorSet& factors, int mode, std::span<const Index> cols) {
  const Shape shape = factors.shape();
  const Unfolding layout(shape, mode);
  const Index rank = factors.rank();
  Matrix brows(rank, static_cast<Index>(cols.size()));
  std::vector<Index> idx(shape.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    require(cols[c] >= 0 && cols[c] < layout.cols(),
            "column " + std::to_string(cols[c]) + " out of range for mode " + std::to_string(mode));
    layout.decode(0, cols[c], idx);
    for (Index r = 0; r < rank; ++r) {
      double p = 1.0;
      for (int m = 0; m < factors.order(); ++m)
        if (m != mode) p *= factors[m](idx[static_cast<std::size_t>(m)], r);
      brows(r, static_cast<Index>(c)) = p;
    }
  }
  return factors[mode] * brows;
}

double cp_total_mass(const FactorSet& factors) {
  Eigen::RowVectorXd prod = Eigen::RowVectorXd::Ones(factors.rank());
  for (const auto& a : factors.factors) prod = prod.cwiseProduct(a.colwise().sum());
  return prod.sum();
}

Matrix pi_rearrange(const Matrix& m, int from_mode, int to_mode, const Shape& shape) {
  const Unfolding src(shape, from_mode);
  const Unfolding dst(shape, to_mode);
  require(m.rows() == src.rows() && m.cols() == src.cols(),
          "matrix does not have the mode-" + std::to_string(from_mode) + " unfolding shape");
  if (from_mode == to_mode) return m;

  Matrix out(dst.rows(), dst.cols());
  std::vector<Index> idx(shape.size());
  const Index row_stride = dst.stride(from_mode);
  for (Index j = 0; j < m.cols(); ++j) {
    src.decode(0, j, idx);
    // idx[from_mode] is 0 here, so this is the destination column of row 0
    const Index base = dst.column(idx);
    const Index out_row = idx[static_cast<std::size_t>(to_mode)];
    for (Index r = 0; r < m.rows(); ++r) out(out_row, base + r * row_stride) = m(r, j);
  }
  return out;
}

}  // namespace swift
