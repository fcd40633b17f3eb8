#pragma once

#include "swift/tensor.hpp"

namespace swift {

/// E(M) = -sum M log M with 0 log 0 = 0.
double entropy(const Eigen::Ref<const Matrix>& m);

/// Generalized KL divergence sum A log(A/B) - A + B.
/// Throws when some A entry is positive where B is zero.
double generalized_kl(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b);

}  // namespace swift
