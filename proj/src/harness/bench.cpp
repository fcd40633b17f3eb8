#include "swift/harness/bench.hpp"

#include "swift/error.hpp"
#include "swift/harness/costs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace swift::harness {

namespace {

double expected_column_density(const Shape& shape, double cell_density) {
  double total = 0.0;
  for (Index extent : shape) total += 1.0 - std::pow(1.0 - cell_density, static_cast<double>(extent));
  return total / static_cast<double>(shape.size());
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  return xs[xs.size() / 2];
}

double time_sweep(const SparseTensor& tensor, const FactorSet& factors,
                  const std::vector<CostModel>& models, const SolverConfig& config, int repeats) {
  std::vector<double> times;
  for (int r = 0; r < repeats; ++r) {
    auto transports = prepare_transports(tensor, config);
    const auto start = std::chrono::steady_clock::now();
    transport_sweep(transports, factors, models, config);
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  return median(std::move(times));
}

}  // namespace

SparseTensor random_column_sparse(const Shape& shape, double column_density, std::uint64_t seed) {
  require(column_density > 0.0 && column_density <= 1.0, "density must lie in (0, 1]");
  // invert the mean column density for the per-cell probability
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (expected_column_density(shape, mid) < column_density ? lo : hi) = mid;
  }
  const double cell = column_density >= 1.0 ? 1.0 : hi;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(cell);
  std::uniform_real_distribution<double> value(1.0, 2.0);
  std::vector<Entry> entries;
  std::vector<Index> idx(shape.size(), 0);
  const Index total = numel(shape);
  for (Index lin = 0; lin < total; ++lin) {
    Index rest = lin;
    for (std::size_t k = 0; k < shape.size(); ++k) {
      idx[k] = rest % shape[k];
      rest /= shape[k];
    }
    if (keep(rng)) entries.push_back({idx, value(rng)});
  }
  return SparseTensor(shape, std::move(entries));
}

std::vector<SparsityBenchRow> benchmark_sparsity(const Shape& shape,
                                                 const std::vector<double>& density_grid,
                                                 const SolverConfig& config,
                                                 const SparsityBenchOptions& options) {
  config.validate();
  require(options.repeats > 0, "repeats must be positive");
  std::vector<Matrix> costs;
  for (Index extent : shape) costs.push_back(build_cost_one_identity(extent));
  const auto models = build_cost_models(costs, config.rho, config.floor_k);
  const FactorSet factors = FactorSet::random(shape, config.rank, config.seed);

  std::vector<SparsityBenchRow> rows;
  for (std::size_t g = 0; g < density_grid.size(); ++g) {
    SparsityBenchRow row;
    row.target_density = density_grid[g];
    const SparseTensor tensor = random_column_sparse(shape, row.target_density, options.seed + g);
    row.nnz = tensor.nnz();
    for (int n = 0; n < tensor.order(); ++n)
      row.column_density.push_back(static_cast<double>(matricize(tensor, n).nnz_columns()) /
                                   static_cast<double>(numel_excluding(shape, n)));

    SolverConfig drop = config, keep = config, serial = config;
    drop.drop_zero_columns = true;
    keep.drop_zero_columns = false;
    serial.drop_zero_columns = true;
    serial.parallel = false;
    row.drop_seconds = time_sweep(tensor, factors, models, drop, options.repeats);
    row.keep_all_seconds = time_sweep(tensor, factors, models, keep, options.repeats);
    row.serial_seconds = time_sweep(tensor, factors, models, serial, options.repeats);
    row.drop_speedup = row.keep_all_seconds / row.drop_seconds;
    row.parallel_speedup = row.serial_seconds / row.drop_seconds;

    drop.outer_iters = keep.outer_iters = options.fit_iters;
    drop.record_objective = keep.record_objective = false;
    const FitResult a = fit(tensor, models, drop);
    const FitResult b = fit(tensor, models, keep);
    for (int n = 0; n < a.factors.order(); ++n)
      row.max_factor_difference = std::max(
          row.max_factor_difference, (a.factors[n] - b.factors[n]).cwiseAbs().maxCoeff());
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace swift::harness
