#include "oracles.hpp"

#include "swift/divergence.hpp"
#include "swift/error.hpp"
#include "swift/ot.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace swift;

namespace {

/// Random positive problem: `cols` columns of length `dim`.
struct Problem {
  CostModel model;
  Matrix x, xhat;
};

Problem random_problem(Index dim, Index cols, double rho, std::mt19937_64& rng) {
  Problem p;
  p.model = build_kernel(oracle::random_cost(dim, rng), rho);
  p.x = oracle::random_matrix(dim, cols, rng, 0.2, 2.0);
  p.xhat = oracle::random_matrix(dim, cols, rng, 0.2, 2.0);
  return p;
}

ScalingOptions iters(int n) {
  ScalingOptions o;
  o.iterations = n;
  return o;
}

}  // namespace

TEST(Kernel, ZeroCostGivesInverseE) {
  const auto m = build_kernel(Matrix::Zero(1, 1), 7.0);
  EXPECT_DOUBLE_EQ(m.kernel(0, 0), std::exp(-1.0));
  EXPECT_NEAR(m.kernel(0, 0), 0.3678794, 1e-7);
}

TEST(Kernel, TwoByTwo) {
  Matrix c(2, 2);
  c << 0, 1, 1, 0;
  const auto m = build_kernel(c, 1.0);
  EXPECT_DOUBLE_EQ(m.kernel(0, 1), std::exp(-2.0));
  EXPECT_NEAR(m.kernel(1, 0), 0.1353353, 1e-7);
  EXPECT_DOUBLE_EQ(m.kernel(0, 0), std::exp(-1.0));
  EXPECT_EQ(m.dim(), 2);
}

TEST(Kernel, ClampsUnderflowToFloor) {
  EXPECT_EQ(std::exp(-1001.0), 0.0);
  Matrix c(2, 2);
  c << 0, 1, 1, 0;
  const auto m = build_kernel(c, 1000.0);
  EXPECT_EQ(m.kernel(0, 1), kDefaultKernelFloor);
  EXPECT_EQ(build_kernel(c, 1000.0, 1e-200).kernel(1, 0), 1e-200);
  EXPECT_GT(m.kernel.minCoeff(), 0.0);
}

TEST(Kernel, SymmetricCostGivesSymmetricKernel) {
  std::mt19937_64 rng(5);
  const auto m = build_kernel(oracle::random_cost(6, rng), 3.0);
  EXPECT_EQ(m.kernel, m.kernel.transpose());
  EXPECT_LE(m.kernel.maxCoeff(), std::exp(-1.0));
}

TEST(Kernel, RejectsInvalidCosts) {
  Matrix asym(2, 2), neg(2, 2), diag(2, 2);
  asym << 0, 1, 2, 0;
  neg << 0, -1, -1, 0;
  diag << 1, 1, 1, 0;
  EXPECT_THROW(build_kernel(asym, 1.0), Error);
  EXPECT_THROW(build_kernel(neg, 1.0), Error);
  EXPECT_THROW(build_kernel(diag, 1.0), Error);
  EXPECT_THROW(build_kernel(Matrix::Zero(2, 3), 1.0), Error);
  EXPECT_THROW(build_kernel(Matrix::Zero(2, 2), 0.0), Error);
}

TEST(Scalings, MarginalExponent) {
  EXPECT_DOUBLE_EQ(marginal_exponent(1.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(marginal_exponent(1.0, 50.0), 50.0 / 51.0);
  EXPECT_THROW(marginal_exponent(0.0, 1.0), Error);
}

TEST(Scalings, BalancedLimitHalfUpdates) {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    auto p = random_problem(5, 7, 2.0, rng);
    auto s = TransportScalings::ones(5, 7, 1.0);
    update_scalings(p.x, p.xhat, p.model, s, iters(3));
    scale_v(p.x, p.model, s);
    const Matrix ps = psi(s, p.model);
    for (Index i = 0; i < ps.size(); ++i)
      EXPECT_NEAR(ps.data()[i], p.x.data()[i], 4e-16 * p.x.data()[i]);
    scale_u(p.xhat, p.model, s);
    const Matrix d = delta(s, p.model);
    for (Index i = 0; i < d.size(); ++i)
      EXPECT_NEAR(d.data()[i], p.xhat.data()[i], 4e-16 * p.xhat.data()[i]);
  }
}

TEST(Scalings, SingleBinFixedPoint) {
  // C = 0, K = 1/e, lambda = rho = 1. Stationarity of
  //   t log t - t + KL(t || 2) + KL(t || 3)  ->  3 log t = log 6 - 1.
  const auto model = build_kernel(Matrix::Zero(1, 1), 1.0);
  Matrix x(1, 1), xhat(1, 1);
  x << 3.0;
  xhat << 2.0;
  auto s = TransportScalings::ones(1, 1, marginal_exponent(1.0, 1.0));
  update_scalings(x, xhat, model, s, iters(200));
  const double t = std::cbrt(6.0 / std::exp(1.0));
  EXPECT_NEAR(delta(s, model)(0, 0), t, 1e-12);
  EXPECT_NEAR(psi(s, model)(0, 0), t, 1e-12);
  // Delta is the scalar u K v in the 1x1 case
  EXPECT_DOUBLE_EQ(delta(s, model)(0, 0), s.u(0, 0) * model.kernel(0, 0) * s.v(0, 0));
}

TEST(Scalings, StationarityOfMaterializedPlans) {
  std::mt19937_64 rng(7);
  const double rho = 2.0, lambda = 1.0;
  for (int rep = 0; rep < 20; ++rep) {
    auto p = random_problem(4, 4, rho, rng);
    auto s = TransportScalings::ones(4, 4, marginal_exponent(lambda, rho));
    update_scalings(p.x, p.xhat, p.model, s, iters(200));
    for (Index j = 0; j < 4; ++j) {
      const Matrix plan = transport_plan(s, p.model, j);
      const Matrix g = oracle::relaxed_gradient(plan, p.model.cost, p.xhat.col(j), p.x.col(j),
                                                rho, lambda);
      EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(Scalings, MarginalsMatchMaterializedPlans) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    const Index dim = 1 + static_cast<Index>(rng() % 6);
    const Index cols = 1 + static_cast<Index>(rng() % 8);
    auto p = random_problem(dim, cols, 5.0, rng);
    auto s = TransportScalings::ones(dim, cols, marginal_exponent(1.0, 5.0));
    update_scalings(p.x, p.xhat, p.model, s, iters(1 + static_cast<int>(rng() % 30)));
    const Matrix d = delta(s, p.model), ps = psi(s, p.model);
    for (Index j = 0; j < cols; ++j) {
      const Matrix plan = transport_plan(s, p.model, j);
      EXPECT_LT((d.col(j) - plan.rowwise().sum()).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_LT((ps.col(j) - plan.colwise().sum().transpose()).cwiseAbs().maxCoeff(), 1e-10);
    }
    EXPECT_GT(d.minCoeff(), 0.0);
  }
}

TEST(Scalings, PsiEqualsDeltaForSymmetricEqualScalings) {
  std::mt19937_64 rng(9);
  const auto model = build_kernel(oracle::random_cost(5, rng), 2.0);
  TransportScalings s;
  s.u = oracle::random_matrix(5, 3, rng);
  s.v = s.u;
  EXPECT_LT((psi(s, model) - delta(s, model)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Scalings, ZeroDataEntriesGiveZeroScaling) {
  std::mt19937_64 rng(10);
  auto p = random_problem(4, 3, 2.0, rng);
  p.x(1, 0) = 0.0;
  p.x(3, 2) = 0.0;
  auto s = TransportScalings::ones(4, 3, 0.5);
  update_scalings(p.x, p.xhat, p.model, s, iters(10));
  EXPECT_EQ(s.v(1, 0), 0.0);
  EXPECT_EQ(s.v(3, 2), 0.0);
  EXPECT_TRUE(s.u.allFinite());
  EXPECT_EQ(psi(s, p.model)(1, 0), 0.0);
}

TEST(Scalings, ColumnPermutationPermutesOutputs) {
  std::mt19937_64 rng(11);
  auto p = random_problem(5, 9, 3.0, rng);
  std::vector<Index> perm = {4, 2, 8, 0, 7, 1, 3, 6, 5};
  auto s = TransportScalings::ones(5, 9, 0.75);
  auto sp = s;
  update_scalings(p.x, p.xhat, p.model, s, iters(25));
  update_scalings(p.x(Eigen::all, perm), p.xhat(Eigen::all, perm), p.model, sp, iters(25));
  for (std::size_t c = 0; c < perm.size(); ++c) {
    EXPECT_EQ(sp.u.col(static_cast<Index>(c)), s.u.col(perm[c]));
    EXPECT_EQ(sp.v.col(static_cast<Index>(c)), s.v.col(perm[c]));
  }
}

TEST(Scalings, ParallelAndSerialAgreeBitwise) {
  std::mt19937_64 rng(12);
  auto p = random_problem(6, 300, 10.0, rng);
  auto a = TransportScalings::ones(6, 300, 0.9);
  auto b = a;
  ScalingOptions on = iters(25), off = iters(25);
  on.chunk_size = off.chunk_size = 16;
  off.parallel = false;
  update_scalings(p.x, p.xhat, p.model, a, on);
  update_scalings(p.x, p.xhat, p.model, b, off);
  EXPECT_EQ(a.u, b.u);
  EXPECT_EQ(a.v, b.v);
}

TEST(Scalings, NonFiniteInputIsReported) {
  std::mt19937_64 rng(13);
  auto p = random_problem(3, 4, 2.0, rng);
  p.x(0, 2) = std::numeric_limits<double>::infinity();
  auto s = TransportScalings::ones(3, 4, 0.5);
  ScalingOptions o = iters(5);
  o.mode = 1;
  try {
    update_scalings(p.x, p.xhat, p.model, s, o);
    FAIL() << "expected a numerical error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Numerical);
    EXPECT_NE(std::string(e.what()).find("mode 1, column 2, iteration 0"), std::string::npos)
        << e.what();
  }
}

TEST(Scalings, ShapeChecks) {
  std::mt19937_64 rng(14);
  auto p = random_problem(3, 4, 2.0, rng);
  auto s = TransportScalings::ones(3, 5, 0.5);
  EXPECT_THROW(update_scalings(p.x, p.xhat, p.model, s, iters(1)), Error);
}

TEST(ExactOt, IdenticalMarginalsStayPut) {
  std::mt19937_64 rng(15);
  Vector a(4);
  a << 0.1, 0.4, 0.3, 0.2;
  const auto r = exact_ot(a, a, oracle::random_cost(4, rng));
  EXPECT_NEAR(r.cost, 0.0, 1e-15);
  EXPECT_LT((r.plan - Matrix(a.asDiagonal())).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ExactOt, SingleMove) {
  Vector a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  Matrix c(2, 2), plan(2, 2);
  c << 0, 1, 1, 0;
  plan << 0, 1, 0, 0;
  const auto r = exact_ot(a, b, c);
  EXPECT_DOUBLE_EQ(r.cost, 1.0);
  EXPECT_EQ(r.plan, plan);
  EXPECT_DOUBLE_EQ(r.entropy, 0.0);
}

TEST(ExactOt, OneIdentityCostIsTotalVariation) {
  Matrix c(2, 2);
  c << 0, 1, 1, 0;
  Vector h(2);
  h << 0.5, 0.5;
  EXPECT_DOUBLE_EQ(exact_ot(h, h, c).cost, 0.0);
}

TEST(ExactOt, MatchesBasisEnumeration) {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 60; ++rep) {
    const Index dim = 2 + rep % 3;
    Vector a(dim), b(dim);
    for (Index i = 0; i < dim; ++i) {
      a(i) = u(rng);
      b(i) = u(rng);
    }
    if (rep % 5 == 0) a(0) = 0.0;  // degenerate marginals
    b *= a.sum() / b.sum();
    const Matrix c = oracle::random_cost(dim, rng);
    const auto r = exact_ot(a, b, c);
    EXPECT_NEAR(r.cost, oracle::enumerate_ot(a, b, c), 1e-9);
    EXPECT_LT((r.plan.rowwise().sum() - a).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((r.plan.colwise().sum().transpose() - b).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GE(r.plan.minCoeff(), 0.0);
    EXPECT_NEAR(r.cost, c.cwiseProduct(r.plan).sum(), 1e-14);
  }
}

TEST(ExactOt, TiedCostsAtFullSize) {
  // 1 - identity costs: the optimum moves exactly the mass that does not overlap
  std::mt19937_64 rng(19);
  Matrix c = Matrix::Ones(6, 6);
  c.diagonal().setZero();
  for (int rep = 0; rep < 200; ++rep) {
    Vector a = oracle::random_matrix(6, 1, rng, 0.0, 1.0).col(0);
    Vector b = oracle::random_matrix(6, 1, rng, 0.0, 1.0).col(0);
    b *= a.sum() / b.sum();
    const auto r = exact_ot(a, b, c);
    EXPECT_NEAR(r.cost, a.sum() - a.cwiseMin(b).sum(), 1e-12);
    EXPECT_LT((r.plan.rowwise().sum() - a).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((r.plan.colwise().sum().transpose() - b).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ExactOt, Errors) {
  Vector a(2), b(2);
  a << 1, 0;
  b << 0, 2;
  EXPECT_THROW(exact_ot(a, b, Matrix::Zero(2, 2)), Error);
  const Vector big = Vector::Ones(7);
  EXPECT_THROW(exact_ot(big, big, Matrix::Zero(7, 7)), Error);
}

TEST(EntropicOt, SingleBin) {
  const auto model = build_kernel(Matrix::Zero(1, 1), 4.0);
  Vector a(1);
  a << 0.7;
  const auto r = entropic_ot(a, a, model, 50);
  EXPECT_NEAR(r.plan(0, 0), 0.7, 1e-15);
  EXPECT_NEAR(r.value, -(-0.7 * std::log(0.7)) / 4.0, 1e-15);
  EXPECT_NEAR(entropic_ot_cost(a, a, model, 50), r.value, 1e-15);
}

TEST(EntropicOt, IdentityBeatsPermutation) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const auto model = build_kernel(oracle::random_cost(4, rng), 20.0);
    Vector a = oracle::random_matrix(4, 1, rng, 0.1, 1.0).col(0);
    a /= a.sum();
    Vector b = a;
    std::swap(b(0), b(3));
    const auto same = entropic_ot(a, a, model, 5000);
    const auto moved = entropic_ot(a, b, model, 5000);
    // the exact optimum is feasible, so its regularized value bounds the minimum
    const auto exact = exact_ot(a, a, model.cost);
    EXPECT_LE(same.value, exact.cost - exact.entropy / model.rho + 1e-9);
    if ((a - b).cwiseAbs().maxCoeff() > 1e-3) EXPECT_LT(same.value, moved.value);
  }
}

TEST(EntropicOt, ApproachesExactCost) {
  Matrix c = Matrix::Ones(3, 3);
  c.diagonal().setZero();
  Vector a(3), b(3);
  a << 0.8, 0.1, 0.1;
  b << 0.1, 0.1, 0.8;
  const double exact = exact_ot(a, b, c).cost;
  double previous_gap = std::numeric_limits<double>::infinity();
  for (double rho : {1.0, 10.0, 100.0}) {
    const auto r = entropic_ot(a, b, build_kernel(c, rho), 20000);
    const double gap = std::abs(r.value - exact);
    EXPECT_LT(gap, previous_gap) << "rho " << rho;
    previous_gap = gap;
  }
  EXPECT_LT(previous_gap / exact, 0.02);
}

TEST(EntropicOt, MarginalViolationShrinks) {
  std::mt19937_64 rng(18);
  const auto model = build_kernel(oracle::random_cost(5, rng), 10.0);
  Vector a = oracle::random_matrix(5, 1, rng).col(0), b = oracle::random_matrix(5, 1, rng).col(0);
  b *= a.sum() / b.sum();
  double previous = std::numeric_limits<double>::infinity();
  for (int it : {1, 5, 25, 125}) {
    const auto r = entropic_ot(a, b, model, it, 0.0);
    EXPECT_LE(r.marginal_violation, previous);
    previous = r.marginal_violation;
  }
  EXPECT_LT(previous, 1e-8);
}

TEST(EntropicOt, Errors) {
  const auto model = build_kernel(Matrix::Zero(2, 2), 1.0);
  Vector a(2), b(2);
  a << 1, 1;
  b << 1, 2;
  EXPECT_THROW(entropic_ot(a, b, model, 10), Error);
  EXPECT_THROW(entropic_ot(a, a, model, 0), Error);
}
