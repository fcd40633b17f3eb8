#pragma once

#include "swift/divergence.hpp"
#include "swift/ot.hpp"
#include "swift/tensor.hpp"

#include <span>
#include <string>
#include <vector>

namespace swift {

enum class OtMode { Exact, Entropic };

std::string to_string(OtMode m);
OtMode parse_ot_mode(const std::string& s);

struct DistanceOptions {
  OtMode mode = OtMode::Exact;
  /// Rescale every nonzero column to sum one before comparing.
  bool normalize_columns = false;
  int sinkhorn_iters = 5000;
};

/// Distance between two balanced vectors. Arguments are put in a canonical
/// order first so that swapping them reproduces the value bit for bit.
double wasserstein_vector(const Vector& a, const Vector& b, const CostModel& model,
                          OtMode mode, int sinkhorn_iters = 5000);

/// Sum over columns of the vector distance. Pairs of zero columns contribute
/// nothing; a zero column paired with a nonzero one is an error.
double wasserstein_matrix(const Matrix& a, const Matrix& b, const CostModel& model,
                          const DistanceOptions& options = {});

struct DistanceReport {
  std::vector<double> per_mode;
  double total = 0.0;
  bool regularized = false;
  bool normalized = false;
};

DistanceReport wasserstein_tensor(const SparseTensor& x, const SparseTensor& y,
                                  std::span<const CostModel> costs,
                                  const DistanceOptions& options = {});

/// Scales each nonzero column to unit sum.
Matrix normalize_columns(const Matrix& m);

/// ||X - Xhat||_F / ||X||_F.
double reconstruction_error(const SparseTensor& tensor, const FactorSet& factors);

}  // namespace swift
