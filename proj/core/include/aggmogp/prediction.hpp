#pragma once

#include "aggmogp/dataset.hpp"
#include "aggmogp/model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace aggmogp {

/// One predicted quantity: a support (or point) carrying a local attribute.
struct PredictionTarget {
  std::size_t block = 0; // local attribute index inside the domain
  ResolvedSupport support;
};

/// Targets for every (attribute, query point) pair with column index
/// s * |Q| + q. Query points are rows of `query`.
std::vector<PredictionTarget> point_targets(const Domain &domain,
                                            const Eigen::MatrixXd &query,
                                            std::size_t num_blocks);

struct ConditionalPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // full covariance when requested, else empty
  Eigen::VectorXd var;  // always filled; raw values, not clamped
};

/// Caches every latent covariance block that does not depend on W, so that
/// many weight samples can be conditioned cheaply.
class TargetPredictor {
public:
  TargetPredictor(const DomainData &domain, const KernelSet &kernels,
                  std::vector<PredictionTarget> targets, bool full_cov);

  std::size_t size() const noexcept { return targets_.size(); }

  /// H(i, j): covariance of training row i with target j under weights W.
  Eigen::MatrixXd cross(const Eigen::MatrixXd &W) const;
  /// Prior covariance of the targets (full or diagonal as configured).
  Eigen::MatrixXd prior(const Eigen::MatrixXd &W) const;
  Eigen::VectorXd prior_diagonal(const Eigen::MatrixXd &W) const;

  ConditionalPosterior condition(const Eigen::MatrixXd &W,
                                 const Eigen::VectorXd &log_sigma2) const;

private:
  const DomainData *domain_;
  std::vector<PredictionTarget> targets_;
  bool full_cov_;
  LatentCovariances train_;
  std::vector<Eigen::MatrixXd> cross_;  // per latent, N x M
  std::vector<Eigen::MatrixXd> target_; // per latent, M x M (full only)
  std::vector<Eigen::VectorXd> target_diag_;
};

/// N_v x (|Q| |S_v|) point-to-support covariances.
Eigen::MatrixXd cross_cov_H(const Eigen::MatrixXd &query,
                            const DomainData &domain, const Eigen::MatrixXd &W,
                            const KernelSet &kernels);

/// Mean H^T C^-1 y and covariance K - H^T C^-1 H at the query points for a
/// fixed weight sample; outputs are indexed s * |Q| + q.
ConditionalPosterior conditional_posterior(const Eigen::MatrixXd &query,
                                           const Eigen::MatrixXd &W,
                                           const ModelState &state,
                                           const DomainData &domain,
                                           std::size_t v);

/// T_p weight samples of domain v from q, drawn attribute, latent, sample.
std::vector<Eigen::MatrixXd> draw_weight_samples(const ModelState &state,
                                                 std::size_t v, std::size_t tp,
                                                 std::uint64_t seed);

struct PredictiveMixture {
  std::vector<ConditionalPosterior> components;
  Eigen::VectorXd pooled_mean;
  Eigen::MatrixXd pooled_cov; // empty unless full covariance requested
  Eigen::VectorXd pooled_var; // clamped at 0
  std::size_t clamped = 0;    // number of negative variances clamped
};

/// Mixture of conditional posteriors over T_p draws of W_v with moment
/// pooling. Any failing component fails the whole call.
PredictiveMixture mixture(const TargetPredictor &predictor,
                          const ModelState &state, std::size_t v,
                          std::size_t tp, std::uint64_t seed,
                          bool keep_components = false);

PredictiveMixture predictive_mixture(const Eigen::MatrixXd &query,
                                     const ModelState &state,
                                     const AggregatedDataset &data,
                                     std::size_t v, std::size_t tp,
                                     std::uint64_t seed);

/// Denormalized support-level predictions for a partition of a domain that
/// carries training data.
struct SupportPrediction {
  std::string partition_id;
  std::vector<std::string> support_ids;
  std::vector<double> values;
  std::vector<double> variances;
  std::size_t clamped = 0;
};

SupportPrediction predict_supports(const Partition &target,
                                   const ModelState &state,
                                   const AggregatedDataset &data,
                                   std::size_t tp, std::uint64_t seed);

/// Denormalized pointwise predictions of one attribute at every grid point.
struct GridPrediction {
  Eigen::MatrixXd points; // rows are grid points
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  std::size_t clamped = 0;
};

GridPrediction predict_grid(const std::string &domain_id,
                            const std::string &attribute_id,
                            const ModelState &state,
                            const AggregatedDataset &data, std::size_t tp,
                            std::uint64_t seed);

} // namespace aggmogp
