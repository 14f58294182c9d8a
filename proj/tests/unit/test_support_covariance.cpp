#include "aggmogp/support_covariance.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>

using namespace aggmogp;

namespace {

struct Mixed {
  Domain domain = fixtures::line_domain("d", 40);
  std::vector<ResolvedSupport> supports;

  explicit Mixed(IntegrationMode mode) {
    const std::vector<Support> raw = {
        {"i0", "d", Interval{0.0, 0.25}},
        {"i1", "d", Interval{0.3, 0.7}},
        {"c0", "d", CellSet{{1, 5, 9, 30}}},
        {"c1", "d", CellSet{{20, 21, 22}}},
        {"p0", "d", PointSite{{0.41}}},
    };
    for (const auto &s : raw)
      supports.push_back(resolve_support(s, domain.grid, AggregationRule::average(), mode));
  }

  Eigen::MatrixXd members(const ResolvedSupport &s) const {
    Eigen::MatrixXd p(static_cast<Eigen::Index>(s.cells.size()), 1);
    for (std::size_t k = 0; k < s.cells.size(); ++k)
      p(static_cast<Eigen::Index>(k), 0) = domain.grid.coordinate(0, s.cells[k]);
    return p;
  }
};

double direct(const SEKernel &k, const Mixed &m, const ResolvedSupport &a,
              const ResolvedSupport &b) {
  using K = ResolvedSupport::Kind;
  if (a.kind == K::Interval && b.kind == K::Interval)
    return double_integral_interval(k, a.lo, a.hi, b.lo, b.hi) /
           ((a.hi - a.lo) * (b.hi - b.lo));
  if (a.kind == K::Point && b.kind == K::Interval)
    return integral_point_interval(k, a.point[0], b.lo, b.hi) / (b.hi - b.lo);
  if (a.kind == K::Interval && b.kind == K::Point)
    return direct(k, m, b, a);
  if (a.kind == K::Point && b.kind == K::Point)
    return eval(k, a.point, b.point);
  Eigen::MatrixXd pa, pb;
  std::vector<double> wa, wb;
  if (a.kind == K::Point) {
    pa = Eigen::MatrixXd::Constant(1, 1, a.point[0]);
    wa = {1.0};
  } else {
    pa = m.members(a);
    wa = a.weights;
  }
  if (b.kind == K::Point) {
    pb = Eigen::MatrixXd::Constant(1, 1, b.point[0]);
    wb = {1.0};
  } else {
    pb = m.members(b);
    wb = b.weights;
  }
  return support_cov_grid(k, wa, pa, wb, pb);
}

} // namespace

TEST(Plan, SymmetricMatchesDirectIntegrals) {
  const Mixed m(IntegrationMode::Auto);
  const auto plan = SupportCovariancePlan::symmetric(m.domain.grid, m.supports);
  const SEKernel k = SEKernel::with_scale(0.15);
  const Eigen::MatrixXd B = plan.evaluate(k);
  ASSERT_EQ(B.rows(), 5);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) {
      EXPECT_NEAR(B(i, j),
                  direct(k, m, m.supports[static_cast<std::size_t>(i)],
                         m.supports[static_cast<std::size_t>(j)]),
                  1e-12)
          << i << "," << j;
      EXPECT_EQ(B(i, j), B(j, i));
    }
}

TEST(Plan, GridModeUsesMemberPoints) {
  const Mixed m(IntegrationMode::Grid);
  for (const auto &s : m.supports)
    EXPECT_EQ(s.kind, ResolvedSupport::Kind::Cells);
  const auto plan = SupportCovariancePlan::symmetric(m.domain.grid, m.supports);
  const SEKernel k = SEKernel::with_scale(0.15);
  const Eigen::MatrixXd B = plan.evaluate(k);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 5; ++j)
      EXPECT_NEAR(B(i, j),
                  direct(k, m, m.supports[static_cast<std::size_t>(i)],
                         m.supports[static_cast<std::size_t>(j)]),
                  1e-12);
}

TEST(Plan, CrossAndDiagonalAgreeWithSymmetric) {
  const Mixed m(IntegrationMode::Auto);
  const SEKernel k = SEKernel::with_scale(0.4);
  const Eigen::MatrixXd B =
      SupportCovariancePlan::symmetric(m.domain.grid, m.supports).evaluate(k);
  const std::vector<ResolvedSupport> rows(m.supports.begin(), m.supports.begin() + 2);
  const Eigen::MatrixXd X =
      SupportCovariancePlan::cross(m.domain.grid, rows, m.supports).evaluate(k);
  EXPECT_LT((X - B.topRows(2)).cwiseAbs().maxCoeff(), 1e-14);
  const Eigen::MatrixXd D =
      SupportCovariancePlan::diagonal(m.domain.grid, m.supports).evaluate(k);
  ASSERT_EQ(D.rows(), B.rows());
  ASSERT_EQ(D.cols(), B.cols());
  EXPECT_LT((D.diagonal() - B.diagonal()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ((D - Eigen::MatrixXd(D.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Plan, ScaleDerivativeMatchesFiniteDifference) {
  const Mixed m(IntegrationMode::Auto);
  const auto plan = SupportCovariancePlan::symmetric(m.domain.grid, m.supports);
  const double lb = std::log(0.2), h = 1e-5;
  Eigen::MatrixXd value, grad;
  plan.evaluate(SEKernel(lb), value, &grad);
  const Eigen::MatrixXd fd =
      (plan.evaluate(SEKernel(lb + h)) - plan.evaluate(SEKernel(lb - h))) / (2 * h);
  EXPECT_LT((grad - fd).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Plan, TwoDimensionalBlocks) {
  const Domain d = fixtures::square_domain("d", 8, 8);
  std::vector<ResolvedSupport> s;
  for (const auto &sup : regular_blocks(d, 2, 2, "r"))
    s.push_back(resolve_support(sup, d.grid, AggregationRule::average(), IntegrationMode::Auto));
  const SEKernel k = SEKernel::with_scale(0.3);
  const Eigen::MatrixXd B = SupportCovariancePlan::symmetric(d.grid, s).evaluate(k);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      double acc = 0.0;
      for (auto a : s[i].cells)
        for (auto b : s[j].cells) {
          const auto pa = d.grid.point(a), pb = d.grid.point(b);
          acc += eval(k, pa, pb);
        }
      acc /= static_cast<double>(s[i].cells.size() * s[j].cells.size());
      EXPECT_NEAR(B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), acc, 1e-13);
    }
}

TEST(Mode, Names) {
  EXPECT_EQ(integration_mode_from_string("grid"), IntegrationMode::Grid);
  EXPECT_EQ(integration_mode_from_string(to_string(IntegrationMode::Auto)),
            IntegrationMode::Auto);
}
