#pragma once

#include "swift/solver.hpp"

#include <cstdint>
#include <vector>

namespace swift::harness {

struct SparsityBenchRow {
  double target_density = 0.0;
  std::vector<double> column_density;  // measured, per mode
  Index nnz = 0;
  double drop_seconds = 0.0;      // one sweep, nonzero columns only
  double keep_all_seconds = 0.0;  // one sweep, every column
  double serial_seconds = 0.0;    // dropped path, parallel off
  double drop_speedup = 0.0;      // keep_all / drop
  double parallel_speedup = 0.0;  // serial / drop
  /// Largest entry difference between fits through the drop and keep-all paths.
  double max_factor_difference = 0.0;
};

struct SparsityBenchOptions {
  int repeats = 5;  // each timing is the median of this many sweeps
  int fit_iters = 3;
  std::uint64_t seed = 0;
};

/// Random tensor whose unfoldings have on average `column_density` nonzero
/// columns per mode. Values are uniform on [1, 2).
SparseTensor random_column_sparse(const Shape& shape, double column_density, std::uint64_t seed);

/// Times one transport sweep per density with and without zero-column
/// dropping and with parallelism on and off. Costs are 1 - identity.
std::vector<SparsityBenchRow> benchmark_sparsity(const Shape& shape,
                                                 const std::vector<double>& density_grid,
                                                 const SolverConfig& config,
                                                 const SparsityBenchOptions& options = {});

}  // namespace swift::harness
