#pragma once

#include "swift/tensor.hpp"

#include <cstdint>

namespace swift::harness {

/// Cosine distance between the mode-n slices of `tensor`. Slices with zero
/// norm sit at distance 1 from every other slice.
Matrix build_cost_cosine(const SparseTensor& tensor, int mode);

/// Zero diagonal, ones elsewhere.
Matrix build_cost_one_identity(Index dim);

/// Symmetric uniform (0, 1] off-diagonals, then closed under shortest paths.
Matrix build_cost_random(Index dim, std::uint64_t seed);

/// Floyd-Warshall closure: afterwards C(i,j) <= C(i,k) + C(k,j).
Matrix metric_closure(Matrix cost);

}  // namespace swift::harness
