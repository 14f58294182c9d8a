#include "aggmogp/prediction.hpp"

#include "aggmogp/error.hpp"
#include "aggmogp/parallel.hpp"
#include "aggmogp/rng.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace aggmogp {

namespace {

std::vector<ResolvedSupport>
supports_of(const std::vector<PredictionTarget> &targets) {
  std::vector<ResolvedSupport> out;
  out.reserve(targets.size());
  for (const auto &t : targets)
    out.push_back(t.support);
  return out;
}

bool all_points(const std::vector<PredictionTarget> &targets) {
  for (const auto &t : targets)
    if (t.support.kind != ResolvedSupport::Kind::Point)
      return false;
  return true;
}

} // namespace

std::vector<PredictionTarget> point_targets(const Domain &domain,
                                            const Eigen::MatrixXd &query,
                                            std::size_t num_blocks) {
  if (query.cols() != static_cast<Eigen::Index>(domain.dimension))
    throw Error(ErrorCode::DimensionMismatch, "query dimension", {domain.id});
  std::vector<PredictionTarget> out;
  out.reserve(static_cast<std::size_t>(query.rows()) * num_blocks);
  for (std::size_t s = 0; s < num_blocks; ++s)
    for (Eigen::Index q = 0; q < query.rows(); ++q) {
      PredictionTarget t;
      t.block = s;
      t.support.kind = ResolvedSupport::Kind::Point;
      t.support.id = "q" + std::to_string(q);
      t.support.point.resize(static_cast<std::size_t>(query.cols()));
      for (Eigen::Index d = 0; d < query.cols(); ++d)
        t.support.point[static_cast<std::size_t>(d)] = query(q, d);
      if (!domain.contains(t.support.point))
        throw Error(ErrorCode::OutOfBounds, "query point outside the domain",
                    {domain.id, std::to_string(q)});
      out.push_back(std::move(t));
    }
  return out;
}

TargetPredictor::TargetPredictor(const DomainData &domain,
                                 const KernelSet &kernels,
                                 std::vector<PredictionTarget> targets,
                                 bool full_cov)
    : domain_(&domain), targets_(std::move(targets)), full_cov_(full_cov) {
  for (const auto &t : targets_)
    if (t.block >= domain.num_attributes())
      throw Error(ErrorCode::InvalidArgument,
                  "target attribute has no slice in this domain",
                  {domain.domain.id, t.support.id});
  const GridSpec &grid = domain.domain.grid;
  const auto supports = supports_of(targets_);
  const std::size_t L = kernels.size();
  if (domain.size() > 0) {
    train_ = latent_covariances(domain, kernels, false);
    const auto plan =
        SupportCovariancePlan::cross(grid, domain.all_resolved(), supports);
    cross_.resize(L);
    for (std::size_t l = 0; l < L; ++l)
      plan.evaluate(kernels[l], cross_[l]);
  }
  const auto M = static_cast<Eigen::Index>(targets_.size());
  if (full_cov_) {
    const auto plan = SupportCovariancePlan::symmetric(grid, supports);
    target_.resize(L);
    for (std::size_t l = 0; l < L; ++l)
      plan.evaluate(kernels[l], target_[l]);
  } else if (all_points(targets_)) {
    target_diag_.assign(L, Eigen::VectorXd::Ones(M));
  } else {
    const auto plan = SupportCovariancePlan::diagonal(grid, supports);
    Eigen::MatrixXd value;
    for (std::size_t l = 0; l < L; ++l) {
      plan.evaluate(kernels[l], value);
      target_diag_.push_back(value.diagonal());
    }
  }
}

Eigen::MatrixXd TargetPredictor::cross(const Eigen::MatrixXd &W) const {
  const DomainData &d = *domain_;
  const auto N = static_cast<Eigen::Index>(d.size());
  const auto M = static_cast<Eigen::Index>(targets_.size());
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, M);
  Eigen::VectorXd a(N), b(M);
  for (std::size_t l = 0; l < cross_.size(); ++l) {
    const auto li = static_cast<Eigen::Index>(l);
    for (Eigen::Index i = 0; i < N; ++i)
      a[i] = W(static_cast<Eigen::Index>(d.row_block[static_cast<std::size_t>(i)]), li);
    for (Eigen::Index j = 0; j < M; ++j)
      b[j] = W(static_cast<Eigen::Index>(targets_[static_cast<std::size_t>(j)].block), li);
    H.noalias() += a.asDiagonal() * cross_[l] * b.asDiagonal();
  }
  return H;
}

Eigen::MatrixXd TargetPredictor::prior(const Eigen::MatrixXd &W) const {
  if (!full_cov_)
    return prior_diagonal(W).asDiagonal();
  const auto M = static_cast<Eigen::Index>(targets_.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(M, M);
  Eigen::VectorXd b(M);
  for (std::size_t l = 0; l < target_.size(); ++l) {
    for (Eigen::Index j = 0; j < M; ++j)
      b[j] = W(static_cast<Eigen::Index>(targets_[static_cast<std::size_t>(j)].block),
               static_cast<Eigen::Index>(l));
    K.noalias() += b.asDiagonal() * target_[l] * b.asDiagonal();
  }
  return 0.5 * (K + K.transpose());
}

Eigen::VectorXd TargetPredictor::prior_diagonal(const Eigen::MatrixXd &W) const {
  if (full_cov_)
    return prior(W).diagonal();
  const auto M = static_cast<Eigen::Index>(targets_.size());
  Eigen::VectorXd k = Eigen::VectorXd::Zero(M);
  for (std::size_t l = 0; l < target_diag_.size(); ++l)
    for (Eigen::Index j = 0; j < M; ++j) {
      const double w =
          W(static_cast<Eigen::Index>(targets_[static_cast<std::size_t>(j)].block),
            static_cast<Eigen::Index>(l));
      k[j] += w * w * target_diag_[l][j];
    }
  return k;
}

ConditionalPosterior TargetPredictor::condition(const Eigen::MatrixXd &W,
                                                const Eigen::VectorXd &log_sigma2) const {
  const DomainData &d = *domain_;
  const auto M = static_cast<Eigen::Index>(targets_.size());
  ConditionalPosterior out;
  if (d.size() == 0) {
    out.mean = Eigen::VectorXd::Zero(M);
    if (full_cov_) {
      out.cov = prior(W);
      out.var = out.cov.diagonal();
    } else {
      out.var = prior_diagonal(W);
    }
    return out;
  }
  const Eigen::MatrixXd C = assemble_C(d, W, train_, log_sigma2);
  const JitteredCholesky chol = factorize(C);
  const Eigen::MatrixXd H = cross(W);
  out.mean = H.transpose() * chol.llt.solve(d.y);
  const Eigen::MatrixXd V = chol.llt.matrixL().solve(H);
  if (full_cov_) {
    Eigen::MatrixXd cov = prior(W);
    cov.noalias() -= V.transpose() * V;
    out.cov = 0.5 * (cov + cov.transpose());
    out.var = out.cov.diagonal();
  } else {
    out.var = prior_diagonal(W) - V.colwise().squaredNorm().transpose();
  }
  return out;
}

Eigen::MatrixXd cross_cov_H(const Eigen::MatrixXd &query,
                            const DomainData &domain, const Eigen::MatrixXd &W,
                            const KernelSet &kernels) {
  TargetPredictor p(domain, kernels,
                    point_targets(domain.domain, query, domain.num_attributes()),
                    false);
  return p.cross(W);
}

ConditionalPosterior conditional_posterior(const Eigen::MatrixXd &query,
                                           const Eigen::MatrixXd &W,
                                           const ModelState &state,
                                           const DomainData &domain,
                                           std::size_t v) {
  TargetPredictor p(domain, state.kernels,
                    point_targets(domain.domain, query, domain.num_attributes()),
                    true);
  return p.condition(W, state.noise.log_sigma2.at(v));
}

std::vector<Eigen::MatrixXd> draw_weight_samples(const ModelState &state,
                                                 std::size_t v, std::size_t tp,
                                                 std::uint64_t seed) {
  const auto &mean = state.q.w_bar.at(v);
  std::vector<Eigen::MatrixXd> eps(tp, Eigen::MatrixXd(mean.rows(), mean.cols()));
  CounterRng rng(seed, streams::kPredict + v);
  for (Eigen::Index s = 0; s < mean.rows(); ++s)
    for (Eigen::Index l = 0; l < mean.cols(); ++l)
      for (std::size_t t = 0; t < tp; ++t)
        eps[t](s, l) = rng.normal();
  std::vector<Eigen::MatrixXd> out;
  out.reserve(tp);
  for (const auto &e : eps)
    out.push_back(sample_weights(state.q, v, e));
  return out;
}

PredictiveMixture mixture(const TargetPredictor &predictor,
                          const ModelState &state, std::size_t v,
                          std::size_t tp, std::uint64_t seed,
                          bool keep_components) {
  if (tp < 1)
    throw Error(ErrorCode::InvalidArgument, "T_p must be at least 1");
  const auto weights = draw_weight_samples(state, v, tp, seed);
  std::vector<ConditionalPosterior> parts(tp);
  parallel_for(tp, [&](std::size_t t) {
    parts[t] = predictor.condition(weights[t], state.noise.log_sigma2.at(v));
  });

  const auto M = static_cast<Eigen::Index>(predictor.size());
  const double inv = 1.0 / static_cast<double>(tp);
  const bool full = parts.front().cov.size() > 0;
  PredictiveMixture out;
  out.pooled_mean = Eigen::VectorXd::Zero(M);
  for (const auto &p : parts)
    out.pooled_mean += inv * p.mean;
  // Spread of the component means around the pooled mean, accumulated in a
  // second pass so a single component reproduces its own moments exactly.
  out.pooled_var = Eigen::VectorXd::Zero(M);
  if (full)
    out.pooled_cov = Eigen::MatrixXd::Zero(M, M);
  for (const auto &p : parts) {
    const Eigen::VectorXd d = p.mean - out.pooled_mean;
    if (full)
      out.pooled_cov += inv * (p.cov + d * d.transpose());
    else
      out.pooled_var += inv * (p.var + d.cwiseAbs2());
  }
  if (full) {
    out.pooled_cov = 0.5 * (out.pooled_cov + out.pooled_cov.transpose());
    out.pooled_var = out.pooled_cov.diagonal();
  }
  for (Eigen::Index j = 0; j < M; ++j)
    if (out.pooled_var[j] < 0.0) {
      out.pooled_var[j] = 0.0;
      ++out.clamped;
    }
  if (keep_components)
    out.components = std::move(parts);
  return out;
}

PredictiveMixture predictive_mixture(const Eigen::MatrixXd &query,
                                     const ModelState &state,
                                     const AggregatedDataset &data,
                                     std::size_t v, std::size_t tp,
                                     std::uint64_t seed) {
  check_consistent(state, data);
  const DomainData &domain = data.domains.at(v);
  TargetPredictor p(domain, state.kernels,
                    point_targets(domain.domain, query, domain.num_attributes()),
                    true);
  return mixture(p, state, v, tp, seed, true);
}

SupportPrediction predict_supports(const Partition &target,
                                   const ModelState &state,
                                   const AggregatedDataset &data,
                                   std::size_t tp, std::uint64_t seed) {
  check_consistent(state, data);
  const std::size_t v = data.domain_position(target.domain_id);
  const DomainData &domain = data.domains[v];
  validate(domain.domain, std::span<const Partition>(&target, 1));
  std::size_t attribute = data.num_attributes();
  for (std::size_t s = 0; s < data.attributes.size(); ++s)
    if (data.attributes[s] == target.attribute_id)
      attribute = s;
  const auto block = domain.local_index(attribute);
  if (!block)
    throw Error(ErrorCode::InvalidArgument,
                "attribute has no training data in this domain",
                {target.id, target.attribute_id});

  const auto resolved =
      resolve_partition(target, domain.domain.grid, data.mode);
  std::vector<PredictionTarget> targets;
  for (const auto &r : resolved)
    targets.push_back({*block, r});
  TargetPredictor predictor(domain, state.kernels, std::move(targets), false);
  const PredictiveMixture mix = mixture(predictor, state, v, tp, seed);

  const Normalization &tr = domain.blocks[*block].transform;
  SupportPrediction out;
  out.partition_id = target.id;
  out.clamped = mix.clamped;
  for (std::size_t n = 0; n < resolved.size(); ++n) {
    const double wt =
        weight_total(target.supports[n], domain.domain.grid, target.rule_for(n));
    const auto j = static_cast<Eigen::Index>(n);
    out.support_ids.push_back(target.supports[n].id);
    out.values.push_back(tr.denormalize(mix.pooled_mean[j], wt));
    out.variances.push_back(tr.scale * tr.scale * mix.pooled_var[j]);
  }
  return out;
}

GridPrediction predict_grid(const std::string &domain_id,
                            const std::string &attribute_id,
                            const ModelState &state,
                            const AggregatedDataset &data, std::size_t tp,
                            std::uint64_t seed) {
  check_consistent(state, data);
  const std::size_t v = data.domain_position(domain_id);
  const DomainData &domain = data.domains[v];
  std::size_t attribute = data.num_attributes();
  for (std::size_t s = 0; s < data.attributes.size(); ++s)
    if (data.attributes[s] == attribute_id)
      attribute = s;
  const auto block = domain.local_index(attribute);
  if (!block)
    throw Error(ErrorCode::InvalidArgument,
                "attribute has no training data in this domain",
                {domain_id, attribute_id});
  const GridSpec &grid = domain.domain.grid;
  GridPrediction out;
  out.points.resize(static_cast<Eigen::Index>(grid.size()),
                    static_cast<Eigen::Index>(grid.dimension()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto p = grid.point(i);
    for (std::size_t d = 0; d < p.size(); ++d)
      out.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = p[d];
  }
  auto targets = point_targets(domain.domain, out.points, 1);
  for (auto &t : targets)
    t.block = *block;
  TargetPredictor predictor(domain, state.kernels, std::move(targets), false);
  const PredictiveMixture mix = mixture(predictor, state, v, tp, seed);
  const Normalization &tr = domain.blocks[*block].transform;
  out.mean = mix.pooled_mean.unaryExpr([&](double m) { return tr.denormalize(m); });
  out.variance = tr.scale * tr.scale * mix.pooled_var;
  out.clamped = mix.clamped;
  return out;
}

} // namespace aggmogp
