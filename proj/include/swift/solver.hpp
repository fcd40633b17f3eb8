#pragma once

#include "swift/ot.hpp"
#include "swift/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace swift {

/// How the multiplicative factor update normalizes its denominator.
///   Stacked: N * (1 B), the majorizer of the N stacked KL terms.
///   Single:  1 B, one KL term ("paper" on the command line).
enum class DenominatorScale { Stacked, Single };

std::string to_string(DenominatorScale s);
DenominatorScale parse_denominator(const std::string& s);

struct SolverConfig {
  Index rank = 5;
  double rho = 50.0;
  double lambda = 1.0;
  int outer_iters = 50;
  int sinkhorn_iters = 25;
  std::uint64_t seed = 0;
  double eps_div = kDefaultDivisionFloor;
  double floor_k = kDefaultKernelFloor;
  bool warm_start = true;
  bool parallel = true;
  /// Solve transport problems only for nonzero columns of each unfolding.
  bool drop_zero_columns = true;
  /// Evaluate the full objective after every sweep.
  bool record_objective = true;
  Index chunk_size = 64;
  DenominatorScale denominator = DenominatorScale::Stacked;

  double phi() const { return marginal_exponent(lambda, rho); }
  void validate() const;
};

struct ObjectiveParts {
  double transport = 0.0;          // sum_n <C_n, T_n>
  double entropy = 0.0;            // sum_n E(T_n)
  double reconstruction_kl = 0.0;  // sum_n KL(Delta_n || Xhat_(n))
  double data_kl = 0.0;            // sum_n KL(Psi_n || X_(n))
  double total = 0.0;

  static ObjectiveParts combine(double transport, double entropy, double reconstruction_kl,
                                double data_kl, double rho, double lambda);
};

struct IterationRecord {
  int iteration = 0;
  ObjectiveParts objective;
  double ot_seconds = 0.0;
  double factor_seconds = 0.0;
  double objective_seconds = 0.0;
};

struct FitTrace {
  std::vector<IterationRecord> records;
  std::vector<Index> nnz_columns;  // per mode
  Index floored_denominators = 0;
};

/// Scalings of one mode together with the unfolding columns they cover.
struct ModeTransport {
  std::vector<Index> columns;
  Matrix x_cols;
  TransportScalings scalings;
};

struct FitResult {
  FactorSet factors;
  FitTrace trace;
  std::vector<ModeTransport> transports;
};

/// Builds one Gibbs kernel per mode from the given cost matrices.
std::vector<CostModel> build_cost_models(std::span<const Matrix> costs, double rho,
                                         double floor_k = kDefaultKernelFloor);

/// Sets up per-mode transport state (nonzero or all columns, all-ones scalings).
std::vector<ModeTransport> prepare_transports(const SparseTensor& tensor,
                                              const SolverConfig& config);

/// One transport update of every mode against the given factors.
void transport_sweep(std::vector<ModeTransport>& transports, const FactorSet& factors,
                     std::span<const CostModel> costs, const SolverConfig& config);

/// Delta of mode n scattered into a full I_n x I_(-n) matrix (zero elsewhere).
Matrix full_delta(const ModeTransport& t, const CostModel& model, const Shape& shape, int mode);

/// A_n <- A_n * (((sum_i Pi(Delta_i, n) ./ P) B) ./ (s 1 B)), P = A_n B^T.
/// `deltas[i]` is the mode-i unfolding shaped Delta_i. Returns the new A_n.
Matrix multiplicative_factor_update(const FactorSet& factors, int mode,
                                    std::span<const Matrix> deltas, const SolverConfig& config,
                                    Index* floored = nullptr);

/// The four parts of the relaxed Wasserstein CP objective at the current
/// iterate, materializing each per-column transport transiently.
ObjectiveParts objective_parts(const SparseTensor& tensor, const FactorSet& factors,
                               std::span<const ModeTransport> transports,
                               std::span<const CostModel> costs, const SolverConfig& config);

FitResult fit(const SparseTensor& tensor, std::span<const CostModel> costs,
              const SolverConfig& config);

struct ProjectionResult {
  Matrix projected;   // new mode-0 factor
  FactorSet factors;  // projected mode 0 plus the fixed trained modes
  FitTrace trace;
};

/// Learns a mode-0 factor for unseen data against fixed trained factors of
/// modes 1..N-1. `costs[0]` must match the new tensor's mode-0 extent.
ProjectionResult project(const SparseTensor& new_tensor, const FactorSet& trained,
                         std::span<const CostModel> costs, const SolverConfig& config);

/// Largest extent the direct (materialized Kronecker) solver accepts.
inline constexpr Index kDirectMaxExtent = 10;

/// Stacked linear operator of the direct third-order formulation: applied to
/// vec(A_n) it yields the three unfoldings of the reconstruction, each laid
/// out to match direct_data(). Shape (3 I_0 I_1 I_2) x (I_n R).
Matrix direct_operator(const FactorSet& factors, int mode);

/// vec of the three Delta matrices, transposed where the operator needs it.
Vector direct_data(std::span<const Matrix> deltas, int mode);

/// Third-order solver without column dropping whose factor updates run on the
/// materialized Kronecker operators instead of the rearrangement.
FitResult fit_direct(const SparseTensor& tensor, std::span<const CostModel> costs,
                     const SolverConfig& config);

}  // namespace swift
