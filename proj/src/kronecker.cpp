#include "swift/kronecker.hpp"

namespace swift {

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

Matrix identity_khatri_rao(const Matrix& a) {
  return khatri_rao(Matrix::Identity(a.cols(), a.cols()), a);
}

Matrix expanded_khatri_rao(const Matrix& a, Index rows_of_x) {
  const Index rank = a.cols();
  const Matrix spread = a * kron(Matrix::Identity(rank, rank), Matrix::Ones(1, rows_of_x));
  return khatri_rao(Matrix::Identity(rows_of_x * rank, rows_of_x * rank), spread);
}

}  // namespace swift
