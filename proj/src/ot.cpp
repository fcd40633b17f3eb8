#include "swift/ot.hpp"

#include "swift/divergence.hpp"
#include "swift/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace swift {

namespace {

// (num / max(den, eps))^phi with 0/0 := 0.
inline double scaled_ratio(double num, double den, double phi, double eps) {
  if (num == 0.0) return 0.0;
  const double r = num / std::max(den, eps);
  return phi == 1.0 ? r : std::pow(r, phi);
}

using Block = Eigen::Ref<Matrix>;
using ConstBlock = Eigen::Ref<const Matrix>;

void scale_v_block(const ConstBlock& x, const Matrix& kernel, const ConstBlock& u, Block v,
                   Matrix& tmp, double phi, double eps) {
  tmp.noalias() = kernel.transpose() * u;
  for (Index j = 0; j < v.cols(); ++j)
    for (Index i = 0; i < v.rows(); ++i) v(i, j) = scaled_ratio(x(i, j), tmp(i, j), phi, eps);
}

void scale_u_block(const ConstBlock& xhat, const Matrix& kernel, Block u, const ConstBlock& v,
                   Matrix& tmp, double phi, double eps) {
  tmp.noalias() = kernel * v;
  for (Index j = 0; j < u.cols(); ++j)
    for (Index i = 0; i < u.rows(); ++i) {
      const double num = xhat(i, j);
      if (num == 0.0) {
        u(i, j) = 0.0;
      } else if (phi == 1.0) {
        u(i, j) = num / std::max(tmp(i, j), eps);
      } else {
        u(i, j) = std::pow(num, phi) / std::pow(std::max(tmp(i, j), eps), phi);
      }
    }
}

void check_columns(const Matrix& m, Index rows, Index cols, const char* what) {
  require(m.rows() == rows && m.cols() == cols,
          std::string(what) + " has shape " + std::to_string(m.rows()) + "x" +
              std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
              std::to_string(cols));
}

}  // namespace

void validate_cost(const Matrix& cost) {
  require(cost.rows() == cost.cols() && cost.rows() > 0, "cost matrix must be square");
  for (Index i = 0; i < cost.rows(); ++i) {
    require(cost(i, i) == 0.0, "cost matrix diagonal must be zero (row " + std::to_string(i) + ")");
    for (Index j = 0; j < cost.cols(); ++j) {
      require(std::isfinite(cost(i, j)), "cost matrix entries must be finite");
      require(cost(i, j) >= 0.0, "cost matrix entries must be nonnegative");
      require(cost(i, j) == cost(j, i), "cost matrix must be symmetric (" + std::to_string(i) +
                                            "," + std::to_string(j) + ")");
    }
  }
}

CostModel build_kernel(const Matrix& cost, double rho, double floor_k) {
  validate_cost(cost);
  require(rho > 0.0 && std::isfinite(rho), "rho must be positive");
  require(floor_k > 0.0, "kernel floor must be positive");
  CostModel model;
  model.cost = cost;
  model.rho = rho;
  model.kernel = (-rho * cost.array() - 1.0).exp().max(floor_k).matrix();
  return model;
}

double marginal_exponent(double lambda, double rho) {
  require(lambda > 0.0 && rho > 0.0, "lambda and rho must be positive");
  return lambda * rho / (lambda * rho + 1.0);
}

TransportScalings TransportScalings::ones(Index rows, Index cols, double phi) {
  return {Matrix::Ones(rows, cols), Matrix::Ones(rows, cols), phi};
}

void scale_v(const Matrix& x_cols, const CostModel& model, TransportScalings& s, double eps_div) {
  check_columns(x_cols, model.dim(), s.cols(), "data columns");
  Matrix tmp(model.dim(), s.cols());
  scale_v_block(x_cols.middleCols(0, s.cols()), model.kernel, s.u.middleCols(0, s.cols()),
                s.v.middleCols(0, s.cols()), tmp, s.phi, eps_div);
}

void scale_u(const Matrix& xhat_cols, const CostModel& model, TransportScalings& s,
             double eps_div) {
  check_columns(xhat_cols, model.dim(), s.cols(), "reconstruction columns");
  Matrix tmp(model.dim(), s.cols());
  scale_u_block(xhat_cols.middleCols(0, s.cols()), model.kernel, s.u.middleCols(0, s.cols()),
                s.v.middleCols(0, s.cols()), tmp, s.phi, eps_div);
}

void update_scalings(const Matrix& x_cols, const Matrix& xhat_cols, const CostModel& model,
                     TransportScalings& s, const ScalingOptions& options) {
  const Index rows = model.dim();
  const Index cols = s.cols();
  check_columns(s.u, rows, cols, "U");
  check_columns(s.v, rows, cols, "V");
  check_columns(x_cols, rows, cols, "data columns");
  check_columns(xhat_cols, rows, cols, "reconstruction columns");
  require(options.iterations >= 1, "sinkhorn iterations must be at least 1");
  require(s.phi > 0.0 && s.phi <= 1.0, "phi must lie in (0, 1]");
  if (cols == 0) return;

  const Index chunk = std::max<Index>(1, options.chunk_size);
  const Index nchunks = (cols + chunk - 1) / chunk;
  // first failing (column, iteration) per chunk; reduced after the join
  std::vector<std::pair<Index, int>> failures(static_cast<std::size_t>(nchunks), {-1, -1});

#pragma omp parallel for schedule(static) if (options.parallel)
  for (Index c = 0; c < nchunks; ++c) {
    const Index c0 = c * chunk;
    const Index w = std::min(chunk, cols - c0);
    Matrix tmp(rows, w);
    auto x = x_cols.middleCols(c0, w);
    auto xhat = xhat_cols.middleCols(c0, w);
    auto u = s.u.middleCols(c0, w);
    auto v = s.v.middleCols(c0, w);
    for (int it = 0; it < options.iterations; ++it) {
      scale_v_block(x, model.kernel, u, v, tmp, s.phi, options.eps_div);
      scale_u_block(xhat, model.kernel, u, v, tmp, s.phi, options.eps_div);
      if (!u.allFinite() || !v.allFinite()) {
        Index bad = 0;
        while (bad < w && u.col(bad).allFinite() && v.col(bad).allFinite()) ++bad;
        failures[static_cast<std::size_t>(c)] = {c0 + bad, it};
        break;
      }
    }
  }

  for (const auto& [col, it] : failures) {
    if (col < 0) continue;
    fail(ErrorKind::Numerical, "non-finite transport scalings in mode " +
                                   std::to_string(options.mode) + ", column " +
                                   std::to_string(col) + ", iteration " + std::to_string(it));
  }
}

TransportScalings update_scalings(const MatricizedView& view, const Matrix& xhat_cols,
                                  const CostModel& model, TransportScalings scalings,
                                  const ScalingOptions& options) {
  update_scalings(view.dense_columns(), xhat_cols, model, scalings, options);
  return scalings;
}

Matrix delta(const TransportScalings& s, const CostModel& model) {
  return s.u.cwiseProduct(model.kernel * s.v);
}

Matrix psi(const TransportScalings& s, const CostModel& model) {
  return s.v.cwiseProduct(model.kernel.transpose() * s.u);
}

Matrix transport_plan(const TransportScalings& s, const CostModel& model, Index column) {
  return s.u.col(column).asDiagonal() * model.kernel * s.v.col(column).asDiagonal();
}

// ---------------------------------------------------------------------------
// Exact transport: successive shortest augmenting paths on the bipartite
// network. Every augmentation exhausts a supply, a demand or a residual arc,
// so the loop terminates with an optimal plan.

ExplicitTransport exact_ot(const Vector& a, const Vector& b, const Matrix& cost) {
  const Index m = a.size();
  const Index n = b.size();
  require(m > 0 && n > 0, "marginals must be non-empty");
  require(cost.rows() == m && cost.cols() == n, "cost matrix does not match marginals");
  require(m <= kExactOtMaxDim && n <= kExactOtMaxDim,
          "exact transport is limited to dimension " + std::to_string(kExactOtMaxDim));
  require((a.array() >= 0.0).all() && (b.array() >= 0.0).all(), "marginals must be nonnegative");
  const double total = a.sum();
  require(std::abs(total - b.sum()) <= 1e-9, "unbalanced marginals");

  Vector supply = a;
  Vector demand = b;
  Matrix flow = Matrix::Zero(m, n);
  const double tol = 1e-14 * std::max(1.0, total);
  const double inf = std::numeric_limits<double>::infinity();
  // strict improvement margin; rounding must not create negative cycles
  const double slack = 1e-12 * std::max(1.0, cost.maxCoeff());

  // node ids: sources 0..m-1, sinks m..m+n-1
  const Index nodes = m + n;
  std::vector<double> dist(static_cast<std::size_t>(nodes));
  std::vector<Index> pred(static_cast<std::size_t>(nodes));

  for (int guard = 0; guard < 10000; ++guard) {
    if (supply.sum() <= tol || demand.sum() <= tol) break;

    std::fill(dist.begin(), dist.end(), inf);
    std::fill(pred.begin(), pred.end(), -1);
    for (Index i = 0; i < m; ++i)
      if (supply(i) > tol) dist[static_cast<std::size_t>(i)] = 0.0;

    for (Index pass = 0; pass < nodes; ++pass) {
      bool changed = false;
      for (Index i = 0; i < m; ++i)
        for (Index k = 0; k < n; ++k) {
          const auto si = static_cast<std::size_t>(i);
          const auto sk = static_cast<std::size_t>(m + k);
          if (dist[si] + cost(i, k) < dist[sk] - slack) {
            dist[sk] = dist[si] + cost(i, k);
            pred[sk] = i;
            changed = true;
          }
          if (flow(i, k) > tol && dist[sk] - cost(i, k) < dist[si] - slack) {
            dist[si] = dist[sk] - cost(i, k);
            pred[si] = m + k;
            changed = true;
          }
        }
      if (!changed) break;
    }

    Index sink = -1;
    for (Index k = 0; k < n; ++k) {
      if (demand(k) <= tol || dist[static_cast<std::size_t>(m + k)] == inf) continue;
      if (sink < 0 || dist[static_cast<std::size_t>(m + k)] <
                          dist[static_cast<std::size_t>(m + sink)])
        sink = k;
    }
    if (sink < 0) break;

    // walk back to the originating source, collecting the bottleneck
    std::vector<std::pair<Index, Index>> path;  // (from, to) node pairs
    double amount = demand(sink);
    Index node = m + sink;
    for (Index p = pred[static_cast<std::size_t>(node)]; p >= 0;
         p = pred[static_cast<std::size_t>(node)]) {
      path.emplace_back(p, node);
      if (node < m) amount = std::min(amount, flow(node, p - m));  // reverse arc
      node = p;
      require(static_cast<Index>(path.size()) <= nodes, "exact transport: cycle in path");
    }
    const Index source = node;
    amount = std::min(amount, supply(source));
    for (const auto& [from, to] : path) {
      if (to >= m) {
        flow(from, to - m) += amount;
      } else {
        flow(to, from - m) -= amount;
      }
    }
    supply(source) -= amount;
    demand(sink) -= amount;
  }

  ExplicitTransport out;
  out.plan = flow.cwiseMax(0.0);
  out.cost = cost.cwiseProduct(out.plan).sum();
  out.entropy = entropy(out.plan);
  return out;
}

EntropicTransport entropic_ot(const Vector& a, const Vector& b, const CostModel& model,
                              int max_iters, double tol) {
  const Index n = model.dim();
  require(a.size() == n && b.size() == n, "marginals do not match the cost model");
  require((a.array() >= 0.0).all() && (b.array() >= 0.0).all(), "marginals must be nonnegative");
  require(std::abs(a.sum() - b.sum()) <= 1e-9 * std::max(1.0, a.sum()), "unbalanced marginals");
  require(max_iters >= 1, "iteration count must be positive");

  Vector u = Vector::Ones(n);
  Vector v = Vector::Ones(n);
  const Matrix& k = model.kernel;
  EntropicTransport out;
  for (int it = 0; it < max_iters; ++it) {
    const Vector ktu = k.transpose() * u;
    for (Index i = 0; i < n; ++i) v(i) = scaled_ratio(b(i), ktu(i), 1.0, kDefaultDivisionFloor);
    const Vector kv = k * v;
    for (Index i = 0; i < n; ++i) u(i) = scaled_ratio(a(i), kv(i), 1.0, kDefaultDivisionFloor);
    out.iterations = it + 1;
    if (!u.allFinite() || !v.allFinite())
      fail(ErrorKind::Numerical, "Sinkhorn diverged at iteration " + std::to_string(it));
    // rows match exactly after the u update; columns carry the violation
    out.marginal_violation = (v.cwiseProduct(k.transpose() * u) - b).lpNorm<1>();
    if (out.marginal_violation < tol) break;
  }
  out.plan = u.asDiagonal() * k * v.asDiagonal();
  out.transport_cost = model.cost.cwiseProduct(out.plan).sum();
  out.entropy = entropy(out.plan);
  out.value = out.transport_cost - out.entropy / model.rho;
  return out;
}

double entropic_ot_cost(const Vector& a, const Vector& b, const CostModel& model, int iters) {
  return entropic_ot(a, b, model, iters).value;
}

}  // namespace swift
