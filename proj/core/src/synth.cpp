#include "aggmogp/synth.hpp"

#include "aggmogp/error.hpp"
#include "aggmogp/kernels.hpp"
#include "aggmogp/model.hpp"
#include "aggmogp/rng.hpp"

#include <cmath>
#include <set>

namespace aggmogp {

void SynthConfig::validate() const {
  const auto S = static_cast<Eigen::Index>(attributes.size());
  const auto L = static_cast<Eigen::Index>(beta.size());
  if (S < 1 || L < 1)
    throw Error(ErrorCode::InvalidArgument, "need attributes and latents");
  for (double b : beta)
    if (!(b > 0.0) || !std::isfinite(b))
      throw Error(ErrorCode::InvalidArgument, "beta must be positive");
  if (prior_w_bar.rows() != S || prior_w_bar.cols() != L ||
      prior_eta2.rows() != S || prior_eta2.cols() != L)
    throw Error(ErrorCode::DimensionMismatch, "prior shape must be |S| x |L|");
  if ((prior_eta2.array() < 0.0).any())
    throw Error(ErrorCode::InvalidArgument, "prior variances must be >= 0");
  if (!offsets.empty() && offsets.size() != attributes.size())
    throw Error(ErrorCode::LengthMismatch, "one offset per attribute");
  for (const auto &d : domains) {
    if (d.noise_var.size() != attributes.size())
      throw Error(ErrorCode::LengthMismatch, "one noise variance per attribute",
                  {d.id});
    for (double s2 : d.noise_var)
      if (!(s2 >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "noise variance must be >= 0",
                    {d.id});
    if (d.weights && (d.weights->rows() != S || d.weights->cols() != L))
      throw Error(ErrorCode::DimensionMismatch, "weights must be |S| x |L|",
                  {d.id});
    if (d.shape.size() != d.extent.lo.size() ||
        d.extent.lo.size() != d.extent.hi.size())
      throw Error(ErrorCode::InvalidGeometry, "shape and extent disagree",
                  {d.id});
  }
}

namespace {

std::size_t catalogue_index(const std::vector<std::string> &attributes,
                            const std::string &id) {
  for (std::size_t s = 0; s < attributes.size(); ++s)
    if (attributes[s] == id)
      return s;
  throw Error(ErrorCode::InvalidArgument, "unknown attribute", {id});
}

Eigen::MatrixXd grid_points(const GridSpec &grid) {
  Eigen::MatrixXd p(static_cast<Eigen::Index>(grid.size()),
                    static_cast<Eigen::Index>(grid.dimension()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto x = grid.point(i);
    for (std::size_t d = 0; d < x.size(); ++d)
      p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = x[d];
  }
  return p;
}

} // namespace

SynthResult synth_generate(const SynthConfig &config) {
  config.validate();
  const std::size_t S = config.attributes.size();
  const std::size_t L = config.beta.size();
  SynthResult out;
  out.collection.attributes = config.attributes;

  CounterRng weight_rng(config.seed, streams::kSynth + 0);
  CounterRng field_rng(config.seed, streams::kSynth + 1);
  CounterRng noise_rng(config.seed, streams::kSynth + 2);

  for (const SynthDomain &sd : config.domains) {
    Domain domain;
    domain.id = sd.id;
    domain.dimension = sd.shape.size();
    domain.extent = sd.extent;
    domain.grid = GridSpec::covering(sd.extent.lo, sd.extent.hi, sd.shape);
    domain.validate();

    Eigen::MatrixXd W(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(L));
    for (Eigen::Index s = 0; s < W.rows(); ++s)
      for (Eigen::Index l = 0; l < W.cols(); ++l) {
        const double z = weight_rng.normal();
        W(s, l) = config.prior_w_bar(s, l) + std::sqrt(config.prior_eta2(s, l)) * z;
      }
    if (sd.weights)
      W = *sd.weights;

    const Eigen::MatrixXd points = grid_points(domain.grid);
    const auto G = points.rows();
    Eigen::MatrixXd latent(G, static_cast<Eigen::Index>(L));
    for (std::size_t l = 0; l < L; ++l) {
      const SEKernel k = SEKernel::with_scale(config.beta[l]);
      Eigen::MatrixXd K(G, G);
      for (Eigen::Index i = 0; i < G; ++i)
        for (Eigen::Index j = 0; j <= i; ++j)
          K(i, j) = K(j, i) =
              k.from_sq_dist((points.row(i) - points.row(j)).squaredNorm());
      const JitteredCholesky chol = factorize(K);
      Eigen::VectorXd z(G);
      for (Eigen::Index i = 0; i < G; ++i)
        z[i] = field_rng.normal();
      latent.col(static_cast<Eigen::Index>(l)) = chol.llt.matrixL() * z;
    }
    Eigen::MatrixXd field = latent * W.transpose();
    for (std::size_t s = 0; s < S && !config.offsets.empty(); ++s)
      field.col(static_cast<Eigen::Index>(s)).array() += config.offsets[s];

    std::set<std::string> trained;
    for (const SynthPartition &sp : sd.partitions) {
      const std::size_t s = catalogue_index(config.attributes, sp.attribute);
      Partition p;
      p.id = sp.id;
      p.attribute_id = sp.attribute;
      p.domain_id = sd.id;
      p.aggregation = AggregationKind::Average;
      if (domain.dimension == 1 && sp.bins.size() == 1)
        p.supports = regular_intervals(domain, sp.bins[0], sp.id + "_");
      else if (domain.dimension == 2 && sp.bins.size() == 2)
        p.supports = regular_blocks(domain, sp.bins[0], sp.bins[1], sp.id + "_");
      else
        throw Error(ErrorCode::InvalidArgument,
                    "bins must give one count per axis", {sp.id});

      std::vector<double> truth, noisy;
      const double sd_noise = std::sqrt(sd.noise_var[s]);
      for (std::size_t n = 0; n < p.supports.size(); ++n) {
        const auto cells = membership(p.supports[n], domain.grid);
        const auto w = weight_vector(p.supports[n], domain.grid, p.rule_for(n));
        double value = 0.0;
        for (std::size_t k = 0; k < cells.size(); ++k)
          value += w[k] * field(static_cast<Eigen::Index>(cells[k]),
                                static_cast<Eigen::Index>(s));
        truth.push_back(value);
        if (sp.observed)
          noisy.push_back(value + sd_noise * noise_rng.normal());
      }
      out.truth[sp.id] = truth;
      ObservedPartition op{std::move(p), std::move(noisy)};
      if (sp.observed && sp.training) {
        if (!trained.insert(sp.attribute).second)
          throw Error(ErrorCode::InvalidArgument,
                      "two training partitions for one attribute",
                      {sd.id, sp.attribute});
        out.collection.datasets.push_back(std::move(op));
      } else {
        out.collection.targets.push_back(std::move(op));
      }
    }
    out.collection.domains.push_back(std::move(domain));
    out.weights.push_back(W);
    out.fields.push_back(std::move(field));
  }
  out.collection.validate();
  return out;
}

} // namespace aggmogp
