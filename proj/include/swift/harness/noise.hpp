#pragma once

#include "swift/tensor.hpp"

#include <cstdint>

namespace swift::harness {

struct NoiseReport {
  SparseTensor tensor;
  Index selected = 0;  // zero cells drawn
  Index flipped = 0;   // cells that became nonzero
  /// True when there were fewer zero cells than nonzeros to match.
  bool capped = false;
};

/// Draws min(nnz, #zeros) zero cells uniformly without replacement and flips
/// each to one with probability p. The input must be binary.
NoiseReport inject_noise_bernoulli(const SparseTensor& tensor, double p, std::uint64_t seed);

/// Same selection; a flipped cell gets an integer uniform on [1, max(tensor)].
/// The input must hold nonnegative integer counts.
NoiseReport inject_noise_poisson(const SparseTensor& tensor, double p, std::uint64_t seed);

}  // namespace swift::harness
