#include "aggmogp/error.hpp"
#include "aggmogp/inference.hpp"
#include "aggmogp/synth.hpp"

#include "fixtures.hpp"
#include "gradient_check.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace aggmogp;

namespace {

DatasetCollection symmetric_points() {
  DatasetCollection c;
  c.domains.push_back(fixtures::line_domain("d", 90));
  c.attributes = {"a"};
  ObservedPartition p;
  p.partition = {"p", "a", "d", AggregationKind::Average, {}, {}};
  for (int i = 0; i < 9; ++i) {
    const double x = 0.1 + 0.1 * i;
    p.partition.supports.push_back({"s" + std::to_string(i), "d", PointSite{{x}}});
    p.values.push_back(std::cos(2 * std::numbers::pi * x));
  }
  c.datasets.push_back(p);
  return c;
}

EpsDraws zero_eps(const AggregatedDataset &data, std::size_t L) {
  auto eps = draw_eps(data, L, 1, 0, streams::kTrain);
  for (auto &m : eps[0])
    m.setZero();
  return eps;
}

} // namespace

TEST(Gradient, MatchesCentralDifferences) {
  const auto data = build_aggregated(fixtures::two_domain_line());
  for (std::uint64_t seed : {1u, 2u}) {
    const auto state = oracle::perturbed_state(data, 2, seed);
    const auto eps = draw_eps(data, 2, 2, seed, streams::kTrain);
    for (const auto &[group, err] : oracle::gradient_errors(data, state, eps))
      EXPECT_LT(err, 1e-4) << group << " seed " << seed;
  }
}

TEST(Gradient, PriorMeanGradientIsKLDerivative) {
  const auto data = build_aggregated(fixtures::two_domain_line());
  const auto state = oracle::perturbed_state(data, 2, 4);
  const auto eps = draw_eps(data, 2, 1, 4, streams::kTrain);
  const auto layout = ParameterLayout::of(state);
  const Eigen::VectorXd g = grad_elbo(data, state, eps).gradient;
  const auto map = data.attribute_map();
  for (Eigen::Index l = 0; l < 2; ++l)
    for (Eigen::Index s = 0; s < 2; ++s) {
      double expected = 0.0;
      for (std::size_t v = 0; v < map.size(); ++v)
        for (std::size_t k = 0; k < map[v].size(); ++k)
          if (map[v][k] == static_cast<std::size_t>(s))
            expected += state.q.w_bar[v](static_cast<Eigen::Index>(k), l) - state.prior.w_bar(s, l);
      expected /= std::exp(state.prior.log_eta2(s, l));
      const auto i = static_cast<Eigen::Index>(layout.prior_w_bar.offset) + l * 2 + s;
      EXPECT_NEAR(g[i], expected, 1e-10 * std::max(1.0, std::abs(expected)));
    }
}

TEST(Elbo, DuplicateSamplesAverageToOne) {
  const auto data = build_aggregated(fixtures::two_domain_line());
  const auto state = oracle::perturbed_state(data, 2, 3);
  const auto one = draw_eps(data, 2, 1, 8, streams::kTrain);
  EpsDraws two = {one[0], one[0]};
  EXPECT_NEAR(estimate_elbo(data, state, one), estimate_elbo(data, state, two), 1e-12);
  const auto g1 = grad_elbo(data, state, one).gradient;
  const auto g2 = grad_elbo(data, state, two).gradient;
  EXPECT_LT((g1 - g2).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Elbo, CollapsedPosteriorIsLogLikelihood) {
  const auto data = build_aggregated(fixtures::two_domain_line());
  auto state = oracle::perturbed_state(data, 2, 5);
  const double floor_log = std::log(kVarianceFloor);
  state.prior.log_eta2.setConstant(floor_log);
  const auto map = data.attribute_map();
  for (std::size_t v = 0; v < data.domains.size(); ++v) {
    state.q.log_eta2[v].setConstant(floor_log);
    for (std::size_t k = 0; k < map[v].size(); ++k)
      state.q.w_bar[v].row(static_cast<Eigen::Index>(k)) =
          state.prior.w_bar.row(static_cast<Eigen::Index>(map[v][k]));
  }
  double expected = 0.0;
  for (std::size_t v = 0; v < data.domains.size(); ++v)
    expected += log_likelihood(data.domains[v].y,
                               assemble_C(data.domains[v], state.q.w_bar[v], state.kernels,
                                          state.noise.log_sigma2[v]));
  EXPECT_NEAR(estimate_elbo(data, state, zero_eps(data, 2)), expected, 1e-9);
  EXPECT_NEAR(kl_weights(state.q, state.prior, map), 0.0, 1e-12);
}

TEST(Elbo, BelowGaussHermiteEvidence) {
  DatasetCollection c;
  c.domains.push_back(fixtures::line_domain("d", 30));
  c.attributes = {"a"};
  ObservedPartition p;
  p.partition = {"p", "a", "d", AggregationKind::Average,
                 {{"x", "d", PointSite{{0.2}}}, {"y", "d", PointSite{{0.45}}},
                  {"z", "d", PointSite{{0.9}}}},
                 {}};
  p.values = {1.0, 0.4, -0.8};
  c.datasets.push_back(p);
  const auto data = build_aggregated(c);
  auto state = initial_state(data, 1, 0);
  state.kernels[0] = SEKernel::with_scale(0.3);
  state.prior.w_bar(0, 0) = 0.6;
  state.prior.log_eta2(0, 0) = std::log(0.5);
  state.q.w_bar[0](0, 0) = 0.9;
  state.q.log_eta2[0](0, 0) = std::log(0.1);
  state.noise.log_sigma2[0][0] = std::log(0.2);

  const Eigen::VectorXd y = data.domains[0].y;
  const Eigen::Vector3d x(0.2, 0.45, 0.9);
  Eigen::Matrix3d B;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      B(i, j) = oracle::se(x[i] - x[j], 0.3);
  auto log_lik = [&](double w) {
    Eigen::MatrixXd C = w * w * B + 0.2 * Eigen::Matrix3d::Identity();
    C.diagonal().array() += oracle::first_jitter(C);
    return oracle::gaussian_logpdf(y, C);
  };
  const auto [nodes, weights] = oracle::gauss_hermite(64);
  double top = -INFINITY;
  std::vector<double> terms;
  for (Eigen::Index i = 0; i < nodes.size(); ++i) {
    terms.push_back(std::log(weights[i] / std::sqrt(std::numbers::pi)) +
                    log_lik(0.6 + std::sqrt(2 * 0.5) * nodes[i]));
    top = std::max(top, terms.back());
  }
  double acc = 0.0;
  for (double t : terms)
    acc += std::exp(t - top);
  const double log_evidence = top + std::log(acc);

  std::vector<double> est;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    est.push_back(estimate_elbo(data, state, draw_eps(data, 1, 1, seed, streams::kTrain)));
  double mean = 0.0;
  for (double e : est)
    mean += e / 20;
  double var = 0.0;
  for (double e : est)
    var += (e - mean) * (e - mean) / 19;
  EXPECT_LE(mean, log_evidence + 3 * std::sqrt(var / 20));
}

TEST(Gradient, VanishesAtGoldenSectionOptimum) {
  const auto data = build_aggregated(symmetric_points());
  auto state = initial_state(data, 1, 0);
  state.q.w_bar[0](0, 0) = 1.0;
  state.q.log_eta2[0](0, 0) = std::log(kVarianceFloor);
  state.prior.w_bar(0, 0) = 1.0;
  state.noise.log_sigma2[0][0] = std::log(0.05);
  const auto eps = zero_eps(data, 1);
  auto f = [&](double lb) {
    auto s = state;
    s.kernels[0] = SEKernel(lb);
    return estimate_elbo(data, s, eps);
  };
  double a = std::log(0.02), b = std::log(2.0);
  const double r = (std::sqrt(5.0) - 1) / 2;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  const double opt = 0.5 * (a + b);
  ASSERT_GT(opt, std::log(0.03));
  ASSERT_LT(opt, std::log(1.5));
  state.kernels[0] = SEKernel(opt);
  EXPECT_NEAR(grad_elbo(data, state, eps).gradient[0], 0.0, 1e-6);
}

TEST(Layout, PackUnpackRoundTrip) {
  const auto data = build_aggregated(fixtures::two_domain_line());
  const auto s = oracle::perturbed_state(data, 3, 1);
  const auto layout = ParameterLayout::of(s);
  EXPECT_EQ(layout.total, 3u + 3u + 6u + 6u + 9u + 9u);
  auto copy = initial_state(data, 3, 2);
  layout.unpack(layout.pack(s), copy);
  EXPECT_EQ(copy, s);
  EXPECT_EQ(layout.groups().size(), 6u);
}

TEST(Fit, ZeroIterationsReturnsInit) {
  const auto data = build_aggregated(fixtures::two_domain_line());
  const auto init = initial_state(data, 2, 0);
  TrainConfig cfg;
  cfg.max_iters = 0;
  const auto r = fit(data, cfg, init);
  EXPECT_EQ(r.state, init);
  EXPECT_TRUE(r.trace.entries.empty());
}

TEST(Fit, Deterministic) {
  const auto data = build_aggregated(fixtures::two_domain_line());
  const auto init = initial_state(data, 2, 3);
  TrainConfig cfg;
  cfg.max_iters = 200;
  cfg.learning_rate = 0.02;
  cfg.seed = 3;
  const auto a = fit(data, cfg, init), b = fit(data, cfg, init);
  EXPECT_EQ(a.state, b.state);
  ASSERT_EQ(a.trace.entries.size(), b.trace.entries.size());
  for (std::size_t i = 0; i < a.trace.entries.size(); ++i)
    EXPECT_EQ(a.trace.entries[i].elbo, b.trace.entries[i].elbo);
}

TEST(Fit, ImprovesTheElbo) {
  const auto data = build_aggregated(fixtures::two_domain_line());
  const auto init = initial_state(data, 2, 3);
  TrainConfig cfg;
  cfg.max_iters = 600;
  cfg.learning_rate = 0.02;
  const auto r = fit(data, cfg, init);
  EXPECT_GT(reestimate_elbo(data, r.state, 256, 1), reestimate_elbo(data, init, 256, 1));
  EXPECT_GT(r.trace.best_window_elbo, r.trace.entries.front().elbo);
}

TEST(Fit, FixedDrawsAscendOverWindows) {
  const auto data = build_aggregated(fixtures::two_domain_line());
  TrainConfig cfg;
  cfg.max_iters = 800;
  cfg.learning_rate = 0.005;
  cfg.fixed_eps = true;
  cfg.convergence_tol = 0.0;
  const auto r = fit(data, cfg, initial_state(data, 2, 1));
  ASSERT_EQ(r.trace.backoffs, 0u);
  const auto &e = r.trace.entries;
  for (std::size_t i = 0; i + 100 < e.size(); ++i)
    EXPECT_GE(e[i + 100].elbo, e[i].elbo - 1e-9) << i;
}

TEST(Fit, RecoversKernelScale) {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig sc;
    sc.attributes = {"a"};
    sc.beta = {0.3};
    sc.prior_w_bar = Eigen::MatrixXd::Ones(1, 1);
    sc.prior_eta2 = Eigen::MatrixXd::Constant(1, 1, 0.01);
    sc.offsets = {5.0};
    sc.seed = seed;
    for (int k = 0; k < 4; ++k) {
      SynthDomain d;
      d.id = "d" + std::to_string(k);
      d.extent = {{0.0}, {1.0}};
      d.shape = {200};
      d.noise_var = {1e-3};
      d.weights = Eigen::MatrixXd::Ones(1, 1);
      d.partitions.push_back({"p" + std::to_string(k), "a", {50}, true, true});
      sc.domains.push_back(d);
    }
    const auto data = build_aggregated(synth_generate(sc).collection);
    TrainConfig cfg;
    cfg.max_iters = 1500;
    cfg.learning_rate = 0.02;
    cfg.seed = seed;
    const auto r = fit(data, cfg, initial_state(data, 1, seed));
    const double beta = r.state.kernels[0].beta();
    hits += beta >= 0.24 && beta <= 0.36;
  }
  EXPECT_GE(hits, 8);
}

TEST(SignAlignment, FlipsColumnsThatDisagreeWithThePrior) {
  const auto data = build_aggregated(fixtures::two_domain_line());
  auto s = initial_state(data, 2, 0);
  s.prior.w_bar << 1.0, 0.5, 0.8, -0.2;
  s.q.w_bar[0] << 1.0, 0.5, 0.7, -0.3;
  s.q.w_bar[1] << -1.1, 0.4;
  const auto flips = align_latent_signs(s, data);
  ASSERT_EQ(flips.size(), 1u);
  EXPECT_EQ(flips[0], (std::pair<std::size_t, std::size_t>{1, 0}));
  EXPECT_DOUBLE_EQ(s.q.w_bar[1](0, 0), 1.1);
  EXPECT_TRUE(align_latent_signs(s, data).empty());
}

TEST(Config, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.mc_samples = 0;
  EXPECT_THROW(c.validate(), Error);
}
