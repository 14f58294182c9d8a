#include "aggmogp/model.hpp"

#include "aggmogp/error.hpp"
#include "aggmogp/rng.hpp"

#include <cmath>
#include <numbers>

namespace aggmogp {

namespace {

const double kLogFloor = std::log(kVarianceFloor);

bool same(const Eigen::MatrixXd &a, const Eigen::MatrixXd &b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

template <typename M>
bool same_list(const std::vector<M> &a, const std::vector<M> &b) {
  if (a.size() != b.size())
    return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols() ||
        !(a[i] == b[i]))
      return false;
  return true;
}

} // namespace

double floored_variance(double log_var) noexcept {
  return log_var <= kLogFloor ? kVarianceFloor : std::exp(log_var);
}

bool variance_clamped(double log_var) noexcept { return log_var < kLogFloor; }

bool WeightPrior::operator==(const WeightPrior &o) const {
  return same(w_bar, o.w_bar) && same(log_eta2, o.log_eta2);
}

bool VariationalWeights::operator==(const VariationalWeights &o) const {
  return same_list(w_bar, o.w_bar) && same_list(log_eta2, o.log_eta2);
}

bool NoiseModel::operator==(const NoiseModel &o) const {
  return same_list(log_sigma2, o.log_sigma2);
}

void check_consistent(const ModelState &state, const AggregatedDataset &data) {
  const auto L = static_cast<Eigen::Index>(state.num_latents());
  const auto S = static_cast<Eigen::Index>(data.num_attributes());
  auto fail = [](const std::string &what) {
    throw Error(ErrorCode::InvalidArgument,
                "model state does not match the dataset: " + what);
  };
  if (L < 1)
    fail("no latent processes");
  if (state.prior.w_bar.rows() != S || state.prior.w_bar.cols() != L ||
      state.prior.log_eta2.rows() != S || state.prior.log_eta2.cols() != L)
    fail("prior shape");
  const std::size_t V = data.domains.size();
  if (state.q.w_bar.size() != V || state.q.log_eta2.size() != V ||
      state.noise.log_sigma2.size() != V)
    fail("domain count");
  for (std::size_t v = 0; v < V; ++v) {
    const auto Sv = static_cast<Eigen::Index>(data.domains[v].num_attributes());
    if (state.q.w_bar[v].rows() != Sv || state.q.w_bar[v].cols() != L ||
        state.q.log_eta2[v].rows() != Sv || state.q.log_eta2[v].cols() != L ||
        state.noise.log_sigma2[v].size() != Sv)
      fail("slice shape for domain " + data.domains[v].domain.id);
  }
}

ModelState initial_state(const AggregatedDataset &data, std::size_t num_latents,
                         std::uint64_t seed) {
  if (num_latents == 0)
    throw Error(ErrorCode::InvalidArgument, "need at least one latent process");
  double extent = 0.0;
  for (const auto &d : data.domains)
    extent = std::max(extent, d.domain.largest_extent());

  ModelState state;
  for (std::size_t l = 0; l < num_latents; ++l) {
    const double stagger =
        num_latents == 1
            ? 1.0
            : 1.0 + 0.1 * (2.0 * static_cast<double>(l) /
                               static_cast<double>(num_latents - 1) -
                           1.0);
    state.kernels.kernels.push_back(SEKernel::with_scale(0.2 * extent * stagger));
  }
  const auto S = static_cast<Eigen::Index>(data.num_attributes());
  const auto L = static_cast<Eigen::Index>(num_latents);
  state.prior.w_bar = Eigen::MatrixXd::Zero(S, L);
  state.prior.log_eta2 = Eigen::MatrixXd::Zero(S, L);

  // One draw per (attribute, latent), shared by every domain. A latent's
  // sign is not identified within a domain, so independent draws let
  // domains settle on opposite signs and the shared prior cannot align them.
  CounterRng rng(seed, streams::kInit);
  Eigen::MatrixXd shared(S, L);
  for (Eigen::Index s = 0; s < S; ++s)
    for (Eigen::Index l = 0; l < L; ++l)
      shared(s, l) = 0.1 * rng.normal();
  for (const auto &d : data.domains) {
    const auto Sv = static_cast<Eigen::Index>(d.num_attributes());
    Eigen::MatrixXd mean(Sv, L);
    for (Eigen::Index s = 0; s < Sv; ++s)
      mean.row(s) = shared.row(static_cast<Eigen::Index>(d.blocks[static_cast<std::size_t>(s)].attribute));
    state.q.w_bar.push_back(mean);
    state.q.log_eta2.push_back(
        Eigen::MatrixXd::Constant(Sv, L, std::log(0.01)));
    state.noise.log_sigma2.push_back(
        Eigen::VectorXd::Constant(Sv, std::log(0.1)));
  }
  return state;
}

LatentCovariances latent_covariances(const DomainData &domain,
                                     const KernelSet &kernels, bool with_grad) {
  LatentCovariances out;
  out.value.resize(kernels.size());
  if (with_grad)
    out.d_log_beta.resize(kernels.size());
  for (std::size_t l = 0; l < kernels.size(); ++l)
    domain.plan->evaluate(kernels[l], out.value[l],
                          with_grad ? &out.d_log_beta[l] : nullptr);
  return out;
}

Eigen::MatrixXd assemble_C(const DomainData &domain, const Eigen::MatrixXd &W,
                           const LatentCovariances &latent,
                           const Eigen::VectorXd &log_sigma2) {
  const auto N = static_cast<Eigen::Index>(domain.size());
  if (W.rows() != static_cast<Eigen::Index>(domain.num_attributes()) ||
      W.cols() != static_cast<Eigen::Index>(latent.value.size()))
    throw Error(ErrorCode::DimensionMismatch, "weight matrix shape");
  if (log_sigma2.size() != W.rows())
    throw Error(ErrorCode::DimensionMismatch, "one noise variance per attribute");
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(N, N);
  Eigen::VectorXd u(N);
  for (std::size_t l = 0; l < latent.value.size(); ++l) {
    for (Eigen::Index i = 0; i < N; ++i)
      u[i] = W(static_cast<Eigen::Index>(domain.row_block[i]),
               static_cast<Eigen::Index>(l));
    C.noalias() += (u.asDiagonal() * latent.value[l] * u.asDiagonal());
  }
  for (Eigen::Index i = 0; i < N; ++i)
    C(i, i) += floored_variance(log_sigma2[static_cast<Eigen::Index>(
        domain.row_block[static_cast<std::size_t>(i)])]);
  Eigen::MatrixXd sym = 0.5 * (C + C.transpose());
  return sym;
}

Eigen::MatrixXd assemble_C(const DomainData &domain, const Eigen::MatrixXd &W,
                           const KernelSet &kernels,
                           const Eigen::VectorXd &log_sigma2) {
  return assemble_C(domain, W, latent_covariances(domain, kernels, false),
                    log_sigma2);
}

double JitteredCholesky::log_det() const {
  const auto &L = llt.matrixLLT();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i)
    sum += std::log(L(i, i));
  return 2.0 * sum;
}

JitteredCholesky factorize(const Eigen::MatrixXd &C) {
  const auto N = C.rows();
  JitteredCholesky out;
  if (N == 0)
    return out;
  if (!C.allFinite())
    throw Error(ErrorCode::CholeskyFailure, "covariance has non-finite entries");
  const double mean_diag = C.diagonal().mean();
  for (double rel = 1e-8; rel <= 1e-4 * (1.0 + 1e-9); rel *= 10.0) {
    Eigen::MatrixXd jittered = C;
    const double jitter = rel * mean_diag;
    jittered.diagonal().array() += jitter;
    out.llt.compute(jittered);
    if (out.llt.info() == Eigen::Success &&
        out.llt.matrixLLT().diagonal().minCoeff() > 0.0) {
      out.jitter = jitter;
      out.relative_jitter = rel;
      return out;
    }
  }
  throw Error(ErrorCode::CholeskyFailure,
              "covariance not positive definite with maximal jitter");
}

double log_likelihood(const Eigen::VectorXd &y, const JitteredCholesky &chol) {
  const auto N = y.size();
  if (N == 0)
    return 0.0;
  const Eigen::VectorXd z = chol.llt.matrixL().solve(y);
  return -0.5 * z.squaredNorm() - 0.5 * chol.log_det() -
         0.5 * static_cast<double>(N) * std::log(2.0 * std::numbers::pi);
}

double log_likelihood(const Eigen::VectorXd &y, const Eigen::MatrixXd &C) {
  if (C.rows() != y.size() || C.cols() != y.size())
    throw Error(ErrorCode::DimensionMismatch, "y and C disagree");
  return log_likelihood(y, factorize(C));
}

double kl_normal(double m, double s2, double mu, double t2) noexcept {
  const double d = m - mu;
  return 0.5 * (std::log(t2 / s2) + (s2 + d * d) / t2 - 1.0);
}

double kl_weights(const VariationalWeights &q, const WeightPrior &p,
                  const std::vector<std::vector<std::size_t>> &attribute_map) {
  double total = 0.0;
  for (std::size_t v = 0; v < q.w_bar.size(); ++v) {
    const auto &mean = q.w_bar[v];
    const auto &log_var = q.log_eta2[v];
    for (Eigen::Index s = 0; s < mean.rows(); ++s) {
      const auto gs = static_cast<Eigen::Index>(
          attribute_map[v][static_cast<std::size_t>(s)]);
      for (Eigen::Index l = 0; l < mean.cols(); ++l)
        total += kl_normal(mean(s, l), floored_variance(log_var(s, l)),
                           p.w_bar(gs, l), floored_variance(p.log_eta2(gs, l)));
    }
  }
  return total;
}

Eigen::MatrixXd sample_weights(const VariationalWeights &q, std::size_t v,
                               const Eigen::MatrixXd &eps) {
  const auto &mean = q.w_bar.at(v);
  if (eps.rows() != mean.rows() || eps.cols() != mean.cols())
    throw Error(ErrorCode::DimensionMismatch, "eps shape");
  Eigen::MatrixXd W(mean.rows(), mean.cols());
  for (Eigen::Index s = 0; s < mean.rows(); ++s)
    for (Eigen::Index l = 0; l < mean.cols(); ++l)
      W(s, l) = mean(s, l) +
                eps(s, l) * std::sqrt(floored_variance(q.log_eta2[v](s, l)));
  return W;
}

} // namespace aggmogp
