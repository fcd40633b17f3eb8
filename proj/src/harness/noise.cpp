#include "swift/harness/noise.hpp"

#include "swift/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace swift::harness {

namespace {

// Reservoir sample of `k` linear indices from the cells not in `taken`
// (sorted). Zeros are walked as gaps between nonzeros, never stored.
std::vector<Index> sample_zero_cells(const std::vector<Index>& taken, Index total, Index k,
                                     std::mt19937_64& rng) {
  std::vector<Index> reservoir;
  reservoir.reserve(static_cast<std::size_t>(k));
  if (k == 0) return reservoir;
  Index seen = 0;
  auto offer = [&](Index cell) {
    if (seen < k) {
      reservoir.push_back(cell);
    } else {
      std::uniform_int_distribution<Index> pick(0, seen);
      const Index slot = pick(rng);
      if (slot < k) reservoir[static_cast<std::size_t>(slot)] = cell;
    }
    ++seen;
  };
  Index next = 0;
  for (Index nz : taken) {
    for (Index c = next; c < nz; ++c) offer(c);
    next = nz + 1;
  }
  for (Index c = next; c < total; ++c) offer(c);
  std::sort(reservoir.begin(), reservoir.end());
  return reservoir;
}

NoiseReport inject(const SparseTensor& tensor, double p, std::uint64_t seed,
                   const std::function<double(std::mt19937_64&)>& draw_value) {
  require(p >= 0.0 && p <= 1.0, "flip probability must lie in [0, 1]");
  const Index total = tensor.numel();
  std::vector<Index> taken(static_cast<std::size_t>(tensor.nnz()));
  for (Index e = 0; e < tensor.nnz(); ++e) taken[static_cast<std::size_t>(e)] = tensor.linear_index(e);

  const Index zeros = total - tensor.nnz();
  NoiseReport report;
  report.capped = tensor.nnz() > zeros;
  report.selected = std::min(tensor.nnz(), zeros);

  std::mt19937_64 rng(seed);
  const auto cells = sample_zero_cells(taken, total, report.selected, rng);

  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(tensor.nnz() + report.selected));
  for (Index e = 0; e < tensor.nnz(); ++e) {
    auto idx = tensor.index(e);
    entries.push_back({{idx.begin(), idx.end()}, tensor.value(e)});
  }
  std::bernoulli_distribution coin(p);
  const Shape& shape = tensor.shape();
  for (Index cell : cells) {
    if (!coin(rng)) continue;
    Entry e;
    e.index.resize(shape.size());
    Index rest = cell;
    for (std::size_t k = 0; k < shape.size(); ++k) {
      e.index[k] = rest % shape[k];
      rest /= shape[k];
    }
    e.value = draw_value(rng);
    entries.push_back(std::move(e));
    ++report.flipped;
  }
  report.tensor = SparseTensor(shape, std::move(entries));
  return report;
}

}  // namespace

NoiseReport inject_noise_bernoulli(const SparseTensor& tensor, double p, std::uint64_t seed) {
  for (double v : tensor.values())
    require(v == 1.0, "bernoulli noise needs a binary tensor");
  return inject(tensor, p, seed, [](std::mt19937_64&) { return 1.0; });
}

NoiseReport inject_noise_poisson(const SparseTensor& tensor, double p, std::uint64_t seed) {
  require(tensor.nnz() > 0, "poisson noise needs a nonempty tensor");
  for (double v : tensor.values())
    require(v == std::floor(v), "poisson noise needs integer counts");
  const auto hi = static_cast<std::int64_t>(tensor.max_value());
  return inject(tensor, p, seed, [hi](std::mt19937_64& rng) {
    std::uniform_int_distribution<std::int64_t> value(1, hi);
    return static_cast<double>(value(rng));
  });
}

}  // namespace swift::harness
