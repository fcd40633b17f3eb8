#pragma once

#include "swift/tensor.hpp"

namespace swift {

/// Kronecker product A (x) B.
Matrix kron(const Matrix& a, const Matrix& b);

/// Column-major vectorization.
Vector vec(const Matrix& m);

/// I_R (.) A: column r is e_r (x) a_r.
Matrix identity_khatri_rao(const Matrix& a);

/// I_{I R} (.) (A (I_R (x) 1_{1 x I})), the operator mapping vec(X) for an
/// I x R matrix X to vec(X (.) A).
Matrix expanded_khatri_rao(const Matrix& a, Index rows_of_x);

}  // namespace swift
