#include "aggmogp/error.hpp"
#include "aggmogp/model.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace aggmogp;

namespace {

DatasetCollection two_points() {
  DatasetCollection c;
  c.domains.push_back(fixtures::line_domain("d", 20, 0.0, 2.0));
  c.attributes = {"a"};
  ObservedPartition p;
  p.partition = {"p", "a", "d", AggregationKind::Average,
                 {{"x", "d", PointSite{{0.5}}}, {"y", "d", PointSite{{1.5}}}}, {}};
  p.values = {1.0, -1.0};
  c.datasets.push_back(p);
  return c;
}

KernelSet kernels(std::initializer_list<double> betas) {
  KernelSet k;
  for (double b : betas)
    k.kernels.push_back(SEKernel::with_scale(b));
  return k;
}

} // namespace

TEST(AssembleC, TwoPointSupports) {
  const auto data = build_aggregated(two_points());
  const Eigen::MatrixXd W = Eigen::MatrixXd::Ones(1, 1);
  const Eigen::VectorXd ls = Eigen::VectorXd::Constant(1, std::log(0.1));
  const Eigen::MatrixXd C = assemble_C(data.domains[0], W, kernels({1.0}), ls);
  EXPECT_NEAR(C(0, 0), 1.1, 1e-12);
  EXPECT_NEAR(C(1, 1), 1.1, 1e-12);
  EXPECT_NEAR(C(0, 1), 0.60653, 1e-5);
  EXPECT_NEAR(C(0, 1), std::exp(-0.5), 1e-12);
}

TEST(AssembleC, ZeroWeightsGiveNoise) {
  const auto data = build_aggregated(fixtures::two_attribute_line());
  const Eigen::Vector2d ls(std::log(0.3), std::log(0.05));
  const Eigen::MatrixXd C =
      assemble_C(data.domains[0], Eigen::MatrixXd::Zero(2, 2), kernels({0.2, 0.1}), ls);
  Eigen::VectorXd expected(12);
  expected << Eigen::VectorXd::Constant(8, 0.3), Eigen::VectorXd::Constant(4, 0.05);
  EXPECT_LT((C - Eigen::MatrixXd(expected.asDiagonal())).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AssembleC, MatchesExplicitGridConstruction) {
  const auto c = fixtures::two_attribute_line();
  const auto data = build_aggregated(c, IntegrationMode::Grid);
  Eigen::MatrixXd W(2, 2);
  W << 0.9, -0.4, 0.3, 1.2;
  const std::vector<double> betas{0.15, 0.05};
  const Eigen::Vector2d ls(std::log(0.2), std::log(0.07));
  const Eigen::MatrixXd C = assemble_C(data.domains[0], W, kernels({0.15, 0.05}), ls);

  const Eigen::VectorXd x = fixtures::grid_points(c.domains[0]);
  const Eigen::Index G = x.size();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(12, 2 * G);
  for (Eigen::Index n = 0; n < 8; ++n)
    A.block(n, 0, 1, G) = oracle::interval_average(x, n / 8.0, (n + 1) / 8.0);
  for (Eigen::Index n = 0; n < 4; ++n) {
    const auto &cells = std::get<CellSet>(c.datasets[1].partition.supports[static_cast<std::size_t>(n)].body).cells;
    A.block(8 + n, G, 1, G) = oracle::cell_average(G, cells);
  }
  Eigen::VectorXd noise(12);
  noise << Eigen::VectorXd::Constant(8, 0.2), Eigen::VectorXd::Constant(4, 0.07);
  const Eigen::MatrixXd expected =
      A * oracle::lmc_gram(x, W, betas) * A.transpose() + Eigen::MatrixXd(noise.asDiagonal());
  EXPECT_LT((C - expected).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(AssembleC, ExactlySymmetric) {
  const auto data = build_aggregated(fixtures::two_attribute_line());
  Eigen::MatrixXd W(2, 2);
  W << 0.9, -0.4, 0.3, 1.2;
  const Eigen::MatrixXd C = assemble_C(data.domains[0], W, kernels({0.15, 0.05}),
                                       Eigen::Vector2d(-1.0, -2.0));
  EXPECT_EQ((C - C.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(AssembleC, ShapeMismatch) {
  const auto data = build_aggregated(fixtures::two_attribute_line());
  try {
    assemble_C(data.domains[0], Eigen::MatrixXd::Ones(3, 2), kernels({0.1, 0.2}),
               Eigen::Vector2d(0, 0));
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
  EXPECT_THROW(assemble_C(data.domains[0], Eigen::MatrixXd::Ones(2, 2), kernels({0.1, 0.2}),
                          Eigen::VectorXd::Zero(12)),
               Error);
}

TEST(LogLikelihood, ClosedForms) {
  // The 1e-8 relative jitter moves these by about 1e-8.
  const double tol = 1e-7;
  EXPECT_NEAR(log_likelihood(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)),
              -0.9189385332, tol);
  EXPECT_NEAR(log_likelihood(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Identity(1, 1)),
              -1.4189385332, tol);
  EXPECT_NEAR(log_likelihood(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)),
              -1.8378770664, tol);
}

TEST(LogLikelihood, MatchesDenseGaussian) {
  Eigen::MatrixXd C(3, 3);
  C << 2.0, 0.5, 0.1, 0.5, 1.5, -0.2, 0.1, -0.2, 1.0;
  const Eigen::Vector3d y(0.3, -1.2, 0.8);
  Eigen::MatrixXd Cj = C;
  Cj.diagonal().array() += oracle::first_jitter(C);
  EXPECT_NEAR(log_likelihood(y, C), oracle::gaussian_logpdf(y, Cj), 1e-12);
}

TEST(Factorize, JitterEscalatesOnSingularInput) {
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(4, 4);
  const auto chol = factorize(ones);
  EXPECT_GE(chol.relative_jitter, 1e-8);
  EXPECT_LE(chol.relative_jitter, 1e-4 * (1 + 1e-9));
  const auto ok = factorize(Eigen::MatrixXd::Identity(3, 3));
  EXPECT_DOUBLE_EQ(ok.relative_jitter, 1e-8);
  EXPECT_DOUBLE_EQ(ok.jitter, 1e-8);
}

TEST(Factorize, IndefiniteFails) {
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(3, 3);
  C(2, 2) = -1.0;
  try {
    factorize(C);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::CholeskyFailure);
  }
}

TEST(KL, ClosedForms) {
  EXPECT_NEAR(kl_normal(1.0, 1.0, 0.0, 1.0), 0.5, 1e-12);
  EXPECT_NEAR(kl_normal(0.0, 2.0, 0.0, 1.0), 0.1534264097, 1e-10);
  EXPECT_EQ(kl_normal(0.3, 0.7, 0.3, 0.7), 0.0);
}

TEST(KL, IdenticalDistributionsGiveZero) {
  WeightPrior p{Eigen::MatrixXd::Random(2, 3), Eigen::MatrixXd::Random(2, 3)};
  VariationalWeights q;
  q.w_bar = {p.w_bar, p.w_bar.topRows(1)};
  q.log_eta2 = {p.log_eta2, p.log_eta2.topRows(1)};
  EXPECT_NEAR(kl_weights(q, p, {{0, 1}, {0}}), 0.0, 1e-15);
}

TEST(KL, SumsPresentAttributesOnly) {
  WeightPrior p{Eigen::MatrixXd::Zero(2, 1), Eigen::MatrixXd::Zero(2, 1)};
  VariationalWeights q;
  q.w_bar = {Eigen::MatrixXd::Ones(1, 1)};
  q.log_eta2 = {Eigen::MatrixXd::Zero(1, 1)};
  EXPECT_NEAR(kl_weights(q, p, {{1}}), 0.5, 1e-12);
}

TEST(SampleWeights, Reparameterization) {
  VariationalWeights q;
  q.w_bar = {Eigen::MatrixXd::Constant(1, 1, 0.5)};
  q.log_eta2 = {Eigen::MatrixXd::Constant(1, 1, std::log(0.04))};
  EXPECT_NEAR(sample_weights(q, 0, Eigen::MatrixXd::Ones(1, 1))(0, 0), 0.7, 1e-12);
  EXPECT_EQ(sample_weights(q, 0, Eigen::MatrixXd::Zero(1, 1))(0, 0), 0.5);
  q.log_eta2[0](0, 0) = -1e300;
  EXPECT_NEAR(sample_weights(q, 0, Eigen::MatrixXd::Constant(1, 1, 3.0))(0, 0), 0.5, 1e-5);
}

TEST(Variance, Floor) {
  EXPECT_EQ(floored_variance(-1000.0), kVarianceFloor);
  EXPECT_TRUE(variance_clamped(-1000.0));
  EXPECT_FALSE(variance_clamped(0.0));
  EXPECT_DOUBLE_EQ(floored_variance(std::log(0.5)), 0.5);
}

TEST(InitialState, ShapesAndSharedDraws) {
  const auto data = build_aggregated(fixtures::two_domain_line());
  const auto s = initial_state(data, 3, 9);
  EXPECT_NO_THROW(check_consistent(s, data));
  ASSERT_EQ(s.kernels.size(), 3u);
  EXPECT_NEAR(s.kernels[1].beta(), 0.2, 1e-12);
  EXPECT_NEAR(s.kernels[0].beta(), 0.18, 1e-12);
  EXPECT_NEAR(s.kernels[2].beta(), 0.22, 1e-12);
  EXPECT_EQ(s.prior.w_bar, Eigen::MatrixXd::Zero(2, 3));
  EXPECT_EQ(s.q.w_bar[0].rows(), 2);
  EXPECT_EQ(s.q.w_bar[1].rows(), 1);
  EXPECT_EQ(s.q.w_bar[1].row(0), s.q.w_bar[0].row(0));
  EXPECT_DOUBLE_EQ(std::exp(s.q.log_eta2[0](1, 2)), 0.01);
  EXPECT_DOUBLE_EQ(std::exp(s.noise.log_sigma2[1][0]), 0.1);
  EXPECT_EQ(initial_state(data, 3, 9), s);
  EXPECT_NE(initial_state(data, 3, 10), s);
}

TEST(InitialState, InconsistentShapes) {
  const auto data = build_aggregated(fixtures::two_domain_line());
  auto s = initial_state(data, 2, 1);
  s.q.w_bar[1] = Eigen::MatrixXd::Zero(2, 2);
  EXPECT_THROW(check_consistent(s, data), Error);
  EXPECT_THROW(initial_state(data, 0, 1), Error);
}
