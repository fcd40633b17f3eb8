#include "swift/harness/costs.hpp"

#include "swift/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace swift::harness {

Matrix build_cost_cosine(const SparseTensor& tensor, int mode) {
  require(mode >= 0 && mode < tensor.order(), "mode " + std::to_string(mode) + " out of range");
  const MatricizedView view = matricize(tensor, mode);
  const SparseMatrix& m = view.matrix;
  // rows of the unfolding are the flattened slices
  const Matrix gram = Matrix(m * m.transpose());
  const Index dim = gram.rows();
  Matrix cost = Matrix::Zero(dim, dim);
  for (Index i = 0; i < dim; ++i) {
    for (Index j = i + 1; j < dim; ++j) {
      const double ni = std::sqrt(gram(i, i));
      const double nj = std::sqrt(gram(j, j));
      double c = 1.0;
      if (ni > 0.0 && nj > 0.0) c = std::clamp(1.0 - gram(i, j) / (ni * nj), 0.0, 2.0);
      cost(i, j) = cost(j, i) = c;
    }
  }
  return cost;
}

Matrix build_cost_one_identity(Index dim) {
  require(dim > 0, "cost dimension must be positive");
  Matrix cost = Matrix::Ones(dim, dim);
  cost.diagonal().setZero();
  return cost;
}

Matrix build_cost_random(Index dim, std::uint64_t seed) {
  require(dim > 0, "cost dimension must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix cost = Matrix::Zero(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = i + 1; j < dim; ++j)
      cost(i, j) = cost(j, i) = 1.0 - unit(rng);  // (0, 1]
  return metric_closure(std::move(cost));
}

Matrix metric_closure(Matrix cost) {
  require(cost.rows() == cost.cols(), "cost matrix must be square");
  const Index n = cost.rows();
  for (Index k = 0; k < n; ++k)
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        cost(i, j) = std::min(cost(i, j), cost(i, k) + cost(k, j));
  // keep exact symmetry regardless of summation order
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) cost(j, i) = cost(i, j) = std::min(cost(i, j), cost(j, i));
  return cost;
}

}  // namespace swift::harness
