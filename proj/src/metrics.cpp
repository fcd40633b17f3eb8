#include "swift/metrics.hpp"

#include "swift/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace swift {

std::string to_string(OtMode m) { return m == OtMode::Exact ? "exact" : "entropic"; }

OtMode parse_ot_mode(const std::string& s) {
  if (s == "exact") return OtMode::Exact;
  if (s == "entropic") return OtMode::Entropic;
  fail(ErrorKind::InvalidArgument, "unknown distance mode '" + s + "'");
}

double wasserstein_vector(const Vector& a, const Vector& b, const CostModel& model, OtMode mode,
                          int sinkhorn_iters) {
  const bool swap = std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
  const Vector& first = swap ? b : a;
  const Vector& second = swap ? a : b;
  if (mode == OtMode::Exact) return exact_ot(first, second, model.cost).cost;
  return entropic_ot_cost(first, second, model, sinkhorn_iters);
}

double wasserstein_matrix(const Matrix& a, const Matrix& b, const CostModel& model,
                          const DistanceOptions& options) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "matrices differ in shape");
  require(a.rows() == model.dim(), "cost model does not match the matrix rows");
  const Matrix an = options.normalize_columns ? normalize_columns(a) : a;
  const Matrix bn = options.normalize_columns ? normalize_columns(b) : b;
  double total = 0.0;
  for (Index p = 0; p < an.cols(); ++p) {
    const bool za = an.col(p).isZero(0.0);
    const bool zb = bn.col(p).isZero(0.0);
    if (za && zb) continue;
    require(za == zb, "column " + std::to_string(p) + " is zero on one side only");
    total += wasserstein_vector(an.col(p), bn.col(p), model, options.mode, options.sinkhorn_iters);
  }
  return total;
}

DistanceReport wasserstein_tensor(const SparseTensor& x, const SparseTensor& y,
                                  std::span<const CostModel> costs,
                                  const DistanceOptions& options) {
  require(x.shape() == y.shape(), "tensors differ in shape");
  require(costs.size() == x.shape().size(), "need one cost model per mode");
  DistanceReport report;
  report.regularized = options.mode == OtMode::Entropic;
  report.normalized = options.normalize_columns;
  for (int n = 0; n < x.order(); ++n) {
    const double w = wasserstein_matrix(matricize(x, n).dense(), matricize(y, n).dense(),
                                        costs[static_cast<std::size_t>(n)], options);
    report.per_mode.push_back(w);
    report.total += w;
  }
  return report;
}

Matrix normalize_columns(const Matrix& m) {
  Matrix out = m;
  for (Index j = 0; j < out.cols(); ++j) {
    const double s = out.col(j).sum();
    if (s > 0.0) out.col(j) /= s;
  }
  return out;
}

double reconstruction_error(const SparseTensor& tensor, const FactorSet& factors) {
  require(tensor.shape() == factors.shape(), "factors do not match the tensor shape");
  const double norm = std::sqrt(
      std::transform_reduce(tensor.values().begin(), tensor.values().end(), 0.0, std::plus<>(),
                            [](double v) { return v * v; }));
  require(norm > 0.0, "reconstruction error of a zero tensor is undefined");
  // dense residual; zero cells contribute Xhat^2 directly
  Matrix residual = cp_reconstruct_mode(factors, 0);
  const Unfolding layout(tensor.shape(), 0);
  for (Index e = 0; e < tensor.nnz(); ++e) {
    auto idx = tensor.index(e);
    residual(idx[0], layout.column(idx)) -= tensor.value(e);
  }
  return residual.norm() / norm;
}

}  // namespace swift
