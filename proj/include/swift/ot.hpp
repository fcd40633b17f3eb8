#pragma once

#include "swift/tensor.hpp"

namespace swift {

inline constexpr double kDefaultKernelFloor = 1e-300;
inline constexpr double kDefaultDivisionFloor = 1e-300;
/// Largest marginal length accepted by the exact transport solver.
inline constexpr Index kExactOtMaxDim = 6;

/// Ground cost of one mode and its Gibbs kernel K = exp(-rho C - 1).
struct CostModel {
  Matrix cost;
  Matrix kernel;
  double rho = 1.0;

  Index dim() const { return cost.rows(); }
};

/// Checks symmetry, zero diagonal and nonnegative off-diagonals.
void validate_cost(const Matrix& cost);

/// Kernel entries below `floor_k` are clamped up to it.
CostModel build_kernel(const Matrix& cost, double rho, double floor_k = kDefaultKernelFloor);

/// Phi = lambda rho / (lambda rho + 1).
double marginal_exponent(double lambda, double rho);

/// Scaling vectors u_j, v_j of every per-column transport
/// T_j = diag(u_j) K diag(v_j), one column per solved OT problem.
struct TransportScalings {
  Matrix u;
  Matrix v;
  double phi = 1.0;

  Index cols() const { return u.cols(); }
  /// All-ones U and V.
  static TransportScalings ones(Index rows, Index cols, double phi);
};

struct ScalingOptions {
  int iterations = 25;
  double eps_div = kDefaultDivisionFloor;
  bool parallel = true;
  /// Columns per task; results do not depend on the thread count.
  Index chunk_size = 64;
  /// Only used to label diagnostics.
  int mode = 0;
};

/// V <- (X ./ K^T U)^Phi.
void scale_v(const Matrix& x_cols, const CostModel& model, TransportScalings& s,
             double eps_div = kDefaultDivisionFloor);
/// U <- Xhat^Phi ./ (K V)^Phi.
void scale_u(const Matrix& xhat_cols, const CostModel& model, TransportScalings& s,
             double eps_div = kDefaultDivisionFloor);

/// Runs `options.iterations` rounds of the V then U update on every column.
/// `x_cols` / `xhat_cols` are the data and reconstruction restricted to the
/// columns being solved. Throws ErrorKind::Numerical on non-finite scalings.
void update_scalings(const Matrix& x_cols, const Matrix& xhat_cols, const CostModel& model,
                     TransportScalings& scalings, const ScalingOptions& options);

TransportScalings update_scalings(const MatricizedView& view, const Matrix& xhat_cols,
                                  const CostModel& model, TransportScalings scalings,
                                  const ScalingOptions& options);

/// Row marginals U .* (K V) of all transports.
Matrix delta(const TransportScalings& s, const CostModel& model);
/// Column marginals V .* (K^T U) of all transports.
Matrix psi(const TransportScalings& s, const CostModel& model);

/// Materializes diag(u_j) K diag(v_j).
Matrix transport_plan(const TransportScalings& s, const CostModel& model, Index column);

struct ExplicitTransport {
  Matrix plan;
  double cost = 0.0;
  double entropy = 0.0;
};

/// Unregularized optimal transport between balanced marginals.
ExplicitTransport exact_ot(const Vector& a, const Vector& b, const Matrix& cost);

struct EntropicTransport {
  Matrix plan;
  double value = 0.0;           // <C,T> - E(T)/rho
  double transport_cost = 0.0;  // <C,T>
  double entropy = 0.0;
  double marginal_violation = 0.0;
  int iterations = 0;
};

/// Balanced Sinkhorn on the model's kernel. Stops after `max_iters` rounds or
/// once the column-marginal L1 violation drops below `tol`.
EntropicTransport entropic_ot(const Vector& a, const Vector& b, const CostModel& model,
                              int max_iters, double tol = 1e-13);

double entropic_ot_cost(const Vector& a, const Vector& b, const CostModel& model, int iters);

}  // namespace swift
