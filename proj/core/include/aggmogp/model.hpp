#pragma once

#include "aggmogp/dataset.hpp"
#include "aggmogp/kernels.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace aggmogp {

/// Lower bound applied to every variance parameter (eta^2, eta'^2, sigma^2).
inline constexpr double kVarianceFloor = 1e-12;

/// exp(log_var) with the exponent clamped at log(kVarianceFloor).
double floored_variance(double log_var) noexcept;
/// True when the clamp is active, i.e. the variance has zero gradient.
bool variance_clamped(double log_var) noexcept;

/// Shared weight prior N(w_bar_sl, eta2_sl), rows = attributes, cols = latents.
struct WeightPrior {
  Eigen::MatrixXd w_bar;
  Eigen::MatrixXd log_eta2;
  bool operator==(const WeightPrior &) const;
};

/// Factorized Gaussian q(W_v); one |S_v| x |L| slice per domain.
struct VariationalWeights {
  std::vector<Eigen::MatrixXd> w_bar;
  std::vector<Eigen::MatrixXd> log_eta2;
  bool operator==(const VariationalWeights &) const;
};

struct NoiseModel {
  std::vector<Eigen::VectorXd> log_sigma2; // per domain, per local attribute
  bool operator==(const NoiseModel &) const;
};

/// Everything the ELBO ascent optimizes.
struct ModelState {
  KernelSet kernels;
  WeightPrior prior;
  VariationalWeights q;
  NoiseModel noise;

  std::size_t num_latents() const noexcept { return kernels.size(); }
  bool operator==(const ModelState &) const = default;
};

/// Throws InvalidArgument unless the state's shapes match the dataset.
void check_consistent(const ModelState &state, const AggregatedDataset &data);

/// Initialization used throughout: beta at 0.2 x the largest domain extent
/// staggered by +-10% across latents, w_bar = 0, eta^2 = 1, q means drawn
/// from N(0, 0.1^2) once per (attribute, latent) and shared by all domains,
/// eta'^2 = 0.01, sigma^2 = 0.1.
ModelState initial_state(const AggregatedDataset &data, std::size_t num_latents,
                         std::uint64_t seed);

/// Support-to-support kernel integrals of every latent for one domain.
struct LatentCovariances {
  std::vector<Eigen::MatrixXd> value;
  std::vector<Eigen::MatrixXd> d_log_beta; // empty unless requested
};

LatentCovariances latent_covariances(const DomainData &domain,
                                     const KernelSet &kernels, bool with_grad);

/// C_v = sum_l diag(u_l) B_l diag(u_l) + Sigma_v, where u_l repeats the
/// weight w_{s l} over the rows of attribute s. Exactly symmetric.
Eigen::MatrixXd assemble_C(const DomainData &domain, const Eigen::MatrixXd &W,
                           const LatentCovariances &latent,
                           const Eigen::VectorXd &log_sigma2);
Eigen::MatrixXd assemble_C(const DomainData &domain, const Eigen::MatrixXd &W,
                           const KernelSet &kernels,
                           const Eigen::VectorXd &log_sigma2);

/// Cholesky factor of C + jitter * I. The jitter starts at 1e-8 x mean(diag)
/// and grows by 10x up to 1e-4 x mean(diag); beyond that CholeskyFailure.
struct JitteredCholesky {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
  double relative_jitter = 0.0; // jitter / mean(diag C)

  double log_det() const;
};

JitteredCholesky factorize(const Eigen::MatrixXd &C);

/// log N(y | 0, C) through the jittered Cholesky factor.
double log_likelihood(const Eigen::VectorXd &y, const Eigen::MatrixXd &C);
double log_likelihood(const Eigen::VectorXd &y, const JitteredCholesky &chol);

/// KL(N(m, s2) || N(mu, t2)) for scalars.
double kl_normal(double m, double s2, double mu, double t2) noexcept;

/// Sum over domains, present attributes and latents of the univariate KLs.
double kl_weights(const VariationalWeights &q, const WeightPrior &p,
                  const std::vector<std::vector<std::size_t>> &attribute_map);

/// Reparameterized draw w_bar' + eps * sqrt(eta'^2) for domain v.
Eigen::MatrixXd sample_weights(const VariationalWeights &q, std::size_t v,
                               const Eigen::MatrixXd &eps);

} // namespace aggmogp
