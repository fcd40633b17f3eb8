#include "swift/solver.hpp"

#include "swift/divergence.hpp"
#include "swift/error.hpp"
#include "swift/kronecker.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

namespace swift {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_costs(const Shape& shape, std::span<const CostModel> costs) {
  require(costs.size() == shape.size(), "need one cost model per mode (got " +
                                            std::to_string(costs.size()) + " for order " +
                                            std::to_string(shape.size()) + ")");
  for (std::size_t n = 0; n < shape.size(); ++n)
    require(costs[n].dim() == shape[n], "cost model of mode " + std::to_string(n) +
                                            " has dimension " + std::to_string(costs[n].dim()) +
                                            ", expected " + std::to_string(shape[n]));
}

using FactorStep =
    std::function<void(FactorSet& factors, std::span<const Matrix> deltas, Index& floored)>;

// Block coordinate descent: transports of all modes against the sweep-start
// factors, then the factor step.
FitResult run_sweeps(const SparseTensor& tensor, FactorSet factors,
                     std::span<const CostModel> costs, const SolverConfig& config,
                     std::vector<ModeTransport> transports, const FactorStep& factor_step) {
  const Shape& shape = tensor.shape();
  FitResult result;
  for (const auto& t : transports)
    result.trace.nnz_columns.push_back(static_cast<Index>(t.columns.size()));

  std::vector<Matrix> deltas(shape.size());
  for (int it = 0; it < config.outer_iters; ++it) {
    IterationRecord rec;
    rec.iteration = it;

    auto start = Clock::now();
    transport_sweep(transports, factors, costs, config);
    for (int n = 0; n < tensor.order(); ++n)
      deltas[static_cast<std::size_t>(n)] =
          full_delta(transports[static_cast<std::size_t>(n)], costs[static_cast<std::size_t>(n)],
                     shape, n);
    rec.ot_seconds = seconds_since(start);

    start = Clock::now();
    factor_step(factors, deltas, result.trace.floored_denominators);
    for (int n = 0; n < factors.order(); ++n)
      if (!factors[n].allFinite())
        fail(ErrorKind::Numerical, "non-finite factor in mode " + std::to_string(n) +
                                       " at iteration " + std::to_string(it));
    rec.factor_seconds = seconds_since(start);

    if (config.record_objective) {
      start = Clock::now();
      rec.objective = objective_parts(tensor, factors, transports, costs, config);
      rec.objective_seconds = seconds_since(start);
      if (!std::isfinite(rec.objective.total))
        fail(ErrorKind::Numerical, "non-finite objective at iteration " + std::to_string(it));
    }
    result.trace.records.push_back(rec);
  }
  result.factors = std::move(factors);
  result.transports = std::move(transports);
  return result;
}

}  // namespace

std::string to_string(DenominatorScale s) {
  return s == DenominatorScale::Stacked ? "stacked" : "paper";
}

DenominatorScale parse_denominator(const std::string& s) {
  if (s == "stacked") return DenominatorScale::Stacked;
  if (s == "paper") return DenominatorScale::Single;
  fail(ErrorKind::InvalidArgument, "unknown denominator scale '" + s + "'");
}

void SolverConfig::validate() const {
  require(rank >= 1, "rank must be at least 1");
  require(rho > 0.0 && std::isfinite(rho), "rho must be positive");
  require(lambda > 0.0 && std::isfinite(lambda), "lambda must be positive");
  require(outer_iters >= 1, "outer iterations must be at least 1");
  require(sinkhorn_iters >= 1, "sinkhorn iterations must be at least 1");
  require(eps_div > 0.0 && floor_k > 0.0, "numerical floors must be positive");
  require(chunk_size >= 1, "chunk size must be at least 1");
}

ObjectiveParts ObjectiveParts::combine(double transport, double entropy, double reconstruction_kl,
                                       double data_kl, double rho, double lambda) {
  ObjectiveParts p{transport, entropy, reconstruction_kl, data_kl, 0.0};
  p.total = transport - entropy / rho + lambda * (reconstruction_kl + data_kl);
  return p;
}

std::vector<CostModel> build_cost_models(std::span<const Matrix> costs, double rho,
                                         double floor_k) {
  std::vector<CostModel> models;
  models.reserve(costs.size());
  for (const auto& c : costs) models.push_back(build_kernel(c, rho, floor_k));
  return models;
}

std::vector<ModeTransport> prepare_transports(const SparseTensor& tensor,
                                              const SolverConfig& config) {
  std::vector<ModeTransport> transports;
  const double phi = config.phi();
  for (int n = 0; n < tensor.order(); ++n) {
    const MatricizedView view = matricize(tensor, n);
    ModeTransport t;
    if (config.drop_zero_columns) {
      t.columns = view.nonzero_columns;
    } else {
      t.columns.resize(static_cast<std::size_t>(view.matrix.cols()));
      std::iota(t.columns.begin(), t.columns.end(), Index{0});
    }
    t.x_cols = view.dense_columns(t.columns);
    t.scalings = TransportScalings::ones(view.matrix.rows(), static_cast<Index>(t.columns.size()),
                                         phi);
    transports.push_back(std::move(t));
  }
  return transports;
}

void transport_sweep(std::vector<ModeTransport>& transports, const FactorSet& factors,
                     std::span<const CostModel> costs, const SolverConfig& config) {
  for (std::size_t n = 0; n < transports.size(); ++n) {
    ModeTransport& t = transports[n];
    if (t.columns.empty()) continue;
    const Matrix xhat_cols = cp_reconstruct_columns(factors, static_cast<int>(n), t.columns);
    if (!config.warm_start) t.scalings.u.setOnes();
    ScalingOptions opts;
    opts.iterations = config.sinkhorn_iters;
    opts.eps_div = config.eps_div;
    opts.parallel = config.parallel;
    opts.chunk_size = config.chunk_size;
    opts.mode = static_cast<int>(n);
    update_scalings(t.x_cols, xhat_cols, costs[n], t.scalings, opts);
  }
}

Matrix full_delta(const ModeTransport& t, const CostModel& model, const Shape& shape, int mode) {
  Matrix full = Matrix::Zero(shape[static_cast<std::size_t>(mode)], numel_excluding(shape, mode));
  if (t.columns.empty()) return full;
  const Matrix d = delta(t.scalings, model);
  for (std::size_t c = 0; c < t.columns.size(); ++c)
    full.col(t.columns[c]) = d.col(static_cast<Index>(c));
  return full;
}

Matrix multiplicative_factor_update(const FactorSet& factors, int mode,
                                    std::span<const Matrix> deltas, const SolverConfig& config,
                                    Index* floored) {
  const Shape shape = factors.shape();
  require(deltas.size() == shape.size(), "need one Delta per mode");
  const Matrix b = khatri_rao_excluding(factors, mode);
  const Matrix& a = factors[mode];
  const Matrix p = a * b.transpose();

  Matrix stacked = Matrix::Zero(p.rows(), p.cols());
  for (std::size_t i = 0; i < deltas.size(); ++i)
    stacked += pi_rearrange(deltas[i], static_cast<int>(i), mode, shape);

  Index low = 0;
  for (Index j = 0; j < stacked.cols(); ++j)
    for (Index i = 0; i < stacked.rows(); ++i) {
      double& s = stacked(i, j);
      if (s == 0.0) continue;
      if (p(i, j) < config.eps_div) ++low;
      s /= std::max(p(i, j), config.eps_div);
    }
  if (floored) *floored += low;

  const double scale =
      config.denominator == DenominatorScale::Stacked ? static_cast<double>(shape.size()) : 1.0;
  const Matrix numer = stacked * b;
  const Eigen::RowVectorXd denom = scale * b.colwise().sum();

  Matrix updated = a;
  for (Index r = 0; r < a.cols(); ++r)
    for (Index i = 0; i < a.rows(); ++i) {
      const double num = numer(i, r);
      updated(i, r) *= num == 0.0 ? 0.0 : num / std::max(denom(r), config.eps_div);
    }
  return updated;
}

ObjectiveParts objective_parts(const SparseTensor& tensor, const FactorSet& factors,
                               std::span<const ModeTransport> transports,
                               std::span<const CostModel> costs, const SolverConfig& config) {
  require(transports.size() == static_cast<std::size_t>(tensor.order()),
          "need one transport state per mode");
  const double mass = cp_total_mass(factors);
  double transport = 0.0, ent = 0.0, rec_kl = 0.0, data_kl = 0.0;
  for (std::size_t n = 0; n < transports.size(); ++n) {
    const ModeTransport& t = transports[n];
    const CostModel& model = costs[n];
    if (t.columns.empty()) {
      rec_kl += mass;
      continue;
    }
    for (Index c = 0; c < t.scalings.cols(); ++c) {
      const Matrix plan = transport_plan(t.scalings, model, c);
      transport += model.cost.cwiseProduct(plan).sum();
      ent += entropy(plan);
    }
    const Matrix xhat_cols = cp_reconstruct_columns(factors, static_cast<int>(n), t.columns);
    rec_kl += generalized_kl(delta(t.scalings, model), xhat_cols);
    // dropped columns carry zero transport, so KL(0 || Xhat) = sum Xhat there
    const Index all_cols = numel_excluding(tensor.shape(), static_cast<int>(n));
    if (static_cast<Index>(t.columns.size()) < all_cols)
      rec_kl += std::max(0.0, mass - xhat_cols.sum());
    data_kl += generalized_kl(psi(t.scalings, model), t.x_cols);
  }
  return ObjectiveParts::combine(transport, ent, rec_kl, data_kl, config.rho, config.lambda);
}

FitResult fit(const SparseTensor& tensor, std::span<const CostModel> costs,
              const SolverConfig& config) {
  config.validate();
  require(tensor.nnz() > 0, "cannot factorize an empty tensor");
  check_costs(tensor.shape(), costs);

  FactorSet init = FactorSet::random(tensor.shape(), config.rank, config.seed);
  return run_sweeps(tensor, std::move(init), costs, config, prepare_transports(tensor, config),
                    [&](FactorSet& f, std::span<const Matrix> deltas, Index& floored) {
                      for (int n = 0; n < f.order(); ++n)
                        f[n] = multiplicative_factor_update(f, n, deltas, config, &floored);
                    });
}

ProjectionResult project(const SparseTensor& new_tensor, const FactorSet& trained,
                         std::span<const CostModel> costs, const SolverConfig& config) {
  config.validate();
  require(new_tensor.nnz() > 0, "cannot project an empty tensor");
  require(trained.order() == new_tensor.order(), "trained factors have the wrong order");
  for (int n = 1; n < trained.order(); ++n)
    require(trained[n].rows() == new_tensor.extent(n),
            "extent mismatch in mode " + std::to_string(n) + ": tensor has " +
                std::to_string(new_tensor.extent(n)) + ", trained factor has " +
                std::to_string(trained[n].rows()));
  check_costs(new_tensor.shape(), costs);

  FactorSet init = trained;
  init[0] = FactorSet::random({new_tensor.extent(0)}, trained.rank(), config.seed)[0];

  FitResult run = run_sweeps(new_tensor, std::move(init), costs, config,
                             prepare_transports(new_tensor, config),
                             [&](FactorSet& f, std::span<const Matrix> deltas, Index& floored) {
                               f[0] = multiplicative_factor_update(f, 0, deltas, config, &floored);
                             });
  ProjectionResult out;
  out.projected = run.factors[0];
  out.factors = std::move(run.factors);
  out.trace = std::move(run.trace);
  return out;
}

// ---------------------------------------------------------------------------
// Direct third-order formulation

Matrix direct_operator(const FactorSet& factors, int mode) {
  require(factors.order() == 3, "the direct formulation is third-order only");
  require(mode >= 0 && mode < 3, "mode out of range");
  const Matrix& a1 = factors[0];
  const Matrix& a2 = factors[1];
  const Matrix& a3 = factors[2];
  const Index i1 = a1.rows(), i2 = a2.rows(), i3 = a3.rows();
  const Index rank = factors.rank();
  const Index total = i1 * i2 * i3;
  auto eye = [](Index n) { return Matrix::Identity(n, n); };

  Matrix op(3 * total, factors[mode].rows() * rank);
  switch (mode) {
    case 0:
      op.middleRows(0, total) = kron(khatri_rao(a3, a2), eye(i1));
      op.middleRows(total, total) = kron(a2, eye(i3 * i1)) * kron(identity_khatri_rao(a3), eye(i1));
      op.middleRows(2 * total, total) =
          kron(a3, eye(i2 * i1)) * kron(identity_khatri_rao(a2), eye(i1));
      break;
    case 1:
      op.middleRows(0, total) = kron(a1, eye(i2 * i3)) * kron(identity_khatri_rao(a3), eye(i2));
      op.middleRows(total, total) = kron(khatri_rao(a3, a1), eye(i2));
      op.middleRows(2 * total, total) = kron(a3, eye(i1 * i2)) * expanded_khatri_rao(a1, i2);
      break;
    default:
      op.middleRows(0, total) = kron(a1, eye(i3 * i2)) * expanded_khatri_rao(a2, i3);
      op.middleRows(total, total) = kron(a2, eye(i3 * i1)) * expanded_khatri_rao(a1, i3);
      op.middleRows(2 * total, total) = kron(khatri_rao(a2, a1), eye(i3));
      break;
  }
  return op;
}

Vector direct_data(std::span<const Matrix> deltas, int mode) {
  require(deltas.size() == 3, "the direct formulation is third-order only");
  const Index total = deltas[0].size();
  Vector d(3 * total);
  for (int i = 0; i < 3; ++i) {
    const Matrix& m = deltas[static_cast<std::size_t>(i)];
    d.segment(i * total, total) = i == mode ? vec(m) : vec(m.transpose());
  }
  return d;
}

FitResult fit_direct(const SparseTensor& tensor, std::span<const CostModel> costs,
                     const SolverConfig& config) {
  config.validate();
  require(tensor.order() == 3, "the direct solver needs a third-order tensor");
  require(tensor.nnz() > 0, "cannot factorize an empty tensor");
  for (int n = 0; n < 3; ++n)
    require(tensor.extent(n) <= kDirectMaxExtent,
            "extent " + std::to_string(tensor.extent(n)) + " too large for the direct solver (max " +
                std::to_string(kDirectMaxExtent) + ")");
  check_costs(tensor.shape(), costs);

  SolverConfig dense = config;
  dense.drop_zero_columns = false;
  const double scale = config.denominator == DenominatorScale::Stacked ? 1.0 : 1.0 / 3.0;

  FactorSet init = FactorSet::random(tensor.shape(), config.rank, config.seed);
  return run_sweeps(
      tensor, std::move(init), costs, dense, prepare_transports(tensor, dense),
      [&](FactorSet& f, std::span<const Matrix> deltas, Index& floored) {
        for (int n = 0; n < 3; ++n) {
          const Matrix op = direct_operator(f, n);
          const Vector data = direct_data(deltas, n);
          Vector x = vec(f[n]);
          const Vector model = op * x;
          Vector ratio(data.size());
          for (Index k = 0; k < data.size(); ++k) {
            if (data(k) == 0.0) {
              ratio(k) = 0.0;
              continue;
            }
            if (model(k) < config.eps_div) ++floored;
            ratio(k) = data(k) / std::max(model(k), config.eps_div);
          }
          const Vector numer = op.transpose() * ratio;
          const Vector denom = scale * op.transpose() * Vector::Ones(op.rows());
          for (Index k = 0; k < x.size(); ++k)
            x(k) *= numer(k) == 0.0 ? 0.0 : numer(k) / std::max(denom(k), config.eps_div);
          f[n] = Eigen::Map<const Matrix>(x.data(), f[n].rows(), f[n].cols());
        }
      });
}

}  // namespace swift
