#include "oracles.hpp"

#include "swift/divergence.hpp"
#include "swift/error.hpp"
#include "swift/harness/costs.hpp"
#include "swift/metrics.hpp"
#include "swift/solver.hpp"

#include <gtest/gtest.h>

using namespace swift;

namespace {

std::vector<CostModel> cosine_models(const SparseTensor& t, double rho = 1.0) {
  std::vector<Matrix> costs;
  for (int n = 0; n < t.order(); ++n)
    costs.push_back(harness::metric_closure(harness::build_cost_cosine(t, n)));
  return build_cost_models(costs, rho);
}

}  // namespace

TEST(Entropy, Examples) {
  EXPECT_EQ(entropy(Matrix::Zero(3, 2)), 0.0);
  Matrix one(1, 1);
  one << std::exp(-1.0);
  EXPECT_DOUBLE_EQ(entropy(one), std::exp(-1.0));
  EXPECT_NEAR(entropy(Matrix::Constant(2, 2, 0.25)), std::log(4.0), 1e-15);
  EXPECT_NEAR(entropy(Matrix::Constant(2, 2, 0.25)), 1.386294, 1e-6);
}

TEST(GeneralizedKl, Examples) {
  std::mt19937_64 rng(1);
  const Matrix b = oracle::random_matrix(3, 4, rng);
  EXPECT_EQ(generalized_kl(b, b), 0.0);
  EXPECT_DOUBLE_EQ(generalized_kl(Matrix::Zero(3, 4), b), b.sum());
  Matrix two(1, 1), one(1, 1);
  two << 2.0;
  one << 1.0;
  EXPECT_NEAR(generalized_kl(two, one), 2.0 * std::log(2.0) - 1.0, 1e-15);
  EXPECT_NEAR(generalized_kl(two, one), 0.386294, 1e-6);
}

TEST(GeneralizedKl, NonnegativeAndZeroOnlyAtEquality) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 200; ++rep) {
    const Matrix a = oracle::random_matrix(3, 3, rng, 0.0, 2.0);
    Matrix b = oracle::random_matrix(3, 3, rng, 0.01, 2.0);
    const double d = generalized_kl(a, b);
    EXPECT_GT(d, 0.0);
    EXPECT_NEAR(d, oracle::kl(a, b), 1e-12 * (1.0 + d));
  }
}

TEST(GeneralizedKl, Errors) {
  Matrix a(1, 2), b(1, 2);
  a << 1.0, 0.0;
  b << 0.0, 1.0;
  try {
    generalized_kl(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Numerical);
  }
  EXPECT_THROW(generalized_kl(Matrix::Zero(2, 2), Matrix::Zero(2, 3)), Error);
}

TEST(WassersteinMatrix, IdenticalIsZeroAndSingleColumnReduces) {
  std::mt19937_64 rng(3);
  const auto model = build_kernel(oracle::random_cost(4, rng), 1.0);
  const Matrix a = oracle::random_matrix(4, 3, rng);
  EXPECT_NEAR(wasserstein_matrix(a, a, model), 0.0, 1e-15);

  Vector x = oracle::random_matrix(4, 1, rng).col(0), y = oracle::random_matrix(4, 1, rng).col(0);
  y *= x.sum() / y.sum();
  EXPECT_EQ(wasserstein_matrix(x, y, model), exact_ot(x, y, model.cost).cost);
}

TEST(WassersteinMatrix, SumOfColumnOptima) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const auto model = build_kernel(oracle::random_cost(4, rng), 1.0);
    Matrix a = oracle::random_matrix(4, 3, rng), b = oracle::random_matrix(4, 3, rng);
    for (Index p = 0; p < 3; ++p) b.col(p) *= a.col(p).sum() / b.col(p).sum();
    double expected = 0.0;
    for (Index p = 0; p < 3; ++p) expected += oracle::enumerate_ot(a.col(p), b.col(p), model.cost);
    EXPECT_NEAR(wasserstein_matrix(a, b, model), expected, 1e-9);
  }
}

TEST(WassersteinMatrix, ZeroColumnsAndErrors) {
  std::mt19937_64 rng(5);
  const auto model = build_kernel(oracle::random_cost(3, rng), 1.0);
  Matrix a = oracle::random_matrix(3, 2, rng), b = a;
  a.col(1).setZero();
  b.col(1).setZero();
  EXPECT_NEAR(wasserstein_matrix(a, b, model), 0.0, 1e-15);
  b.col(1).setOnes();
  EXPECT_THROW(wasserstein_matrix(a, b, model), Error);
  Matrix c = oracle::random_matrix(3, 2, rng);
  c.col(0) *= 2.0 * a.col(0).sum() / c.col(0).sum();
  c.col(1).setZero();
  EXPECT_THROW(wasserstein_matrix(a, c, model), Error);  // unbalanced
  DistanceOptions normalized;
  normalized.normalize_columns = true;
  EXPECT_NO_THROW(wasserstein_matrix(a, c, model, normalized));
  EXPECT_THROW(wasserstein_matrix(a, Matrix::Zero(3, 3), model), Error);
}

TEST(WassersteinMatrix, EntropicModeIsNearExactAtLargeRho) {
  Matrix c = Matrix::Ones(3, 3);
  c.diagonal().setZero();
  Matrix a(3, 1), b(3, 1);
  a << 0.8, 0.1, 0.1;
  b << 0.1, 0.1, 0.8;
  const auto model = build_kernel(c, 100.0);
  DistanceOptions entropic;
  entropic.mode = OtMode::Entropic;
  const double exact = wasserstein_matrix(a, b, model);
  EXPECT_NEAR(wasserstein_matrix(a, b, model, entropic), exact, 0.02 * exact);
}

TEST(WassersteinTensor, MetricAxiomsOnNormalizedTensors) {
  DistanceOptions opts;
  opts.normalize_columns = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto x = oracle::random_tensor({3, 3, 3}, 1.0, 3 * seed);
    const auto y = oracle::random_tensor({3, 3, 3}, 1.0, 3 * seed + 1);
    const auto z = oracle::random_tensor({3, 3, 3}, 1.0, 3 * seed + 2);
    const auto models = cosine_models(x);
    const auto xy = wasserstein_tensor(x, y, models, opts);
    EXPECT_NEAR(wasserstein_tensor(x, x, models, opts).total, 0.0, 1e-15);
    EXPECT_EQ(xy.total, wasserstein_tensor(y, x, models, opts).total);
    EXPECT_GT(xy.total, 0.0);
    EXPECT_LE(xy.total, wasserstein_tensor(x, z, models, opts).total +
                            wasserstein_tensor(z, y, models, opts).total + 1e-9);
    double sum = 0.0;
    for (double w : xy.per_mode) sum += w;
    EXPECT_EQ(sum, xy.total);
    EXPECT_EQ(xy.per_mode.size(), 3u);
    EXPECT_TRUE(xy.normalized);
    EXPECT_FALSE(xy.regularized);
  }
}

TEST(WassersteinTensor, ShapeMismatch) {
  const auto x = oracle::random_tensor({3, 3, 2}, 1.0, 1);
  const auto y = oracle::random_tensor({3, 2, 3}, 1.0, 2);
  EXPECT_THROW(wasserstein_tensor(x, y, cosine_models(x)), Error);
  EXPECT_THROW(wasserstein_tensor(x, x, std::vector<CostModel>{}), Error);
}

TEST(WassersteinTensor, ParseMode) {
  EXPECT_EQ(parse_ot_mode("exact"), OtMode::Exact);
  EXPECT_EQ(parse_ot_mode("entropic"), OtMode::Entropic);
  EXPECT_EQ(to_string(OtMode::Entropic), "entropic");
  EXPECT_THROW(parse_ot_mode("sliced"), Error);
}

TEST(ReconstructionError, PlantedZeroAndOracle) {
  const auto f = FactorSet::random({4, 3, 2}, 2, 6);
  const auto t = tensorize(cp_reconstruct_mode(f, 0), 0, f.shape());
  EXPECT_LT(reconstruction_error(t, f), 1e-12);

  FactorSet zero = f;
  for (auto& m : zero.factors) m.setZero();
  EXPECT_DOUBLE_EQ(reconstruction_error(t, zero), 1.0);

  const auto x = oracle::random_tensor({4, 3, 2}, 0.4, 7);
  const auto dense = oracle::densify(x);
  const auto recon = oracle::outer_product_tensor(f.factors);
  double num = 0.0, den = 0.0;
  for (std::size_t c = 0; c < dense.size(); ++c) {
    num += (dense[c] - recon[c]) * (dense[c] - recon[c]);
    den += dense[c] * dense[c];
  }
  EXPECT_NEAR(reconstruction_error(x, f), std::sqrt(num / den), 1e-12);
  EXPECT_THROW(reconstruction_error(SparseTensor({4, 3, 2}, {}), f), Error);
}

TEST(NormalizeColumns, UnitSumsAndZeroColumnsKept) {
  Matrix m(2, 3);
  m << 1, 0, 3, 3, 0, 1;
  const Matrix n = normalize_columns(m);
  EXPECT_DOUBLE_EQ(n.col(0).sum(), 1.0);
  EXPECT_TRUE(n.col(1).isZero(0.0));
  EXPECT_DOUBLE_EQ(n(0, 2), 0.75);
}
