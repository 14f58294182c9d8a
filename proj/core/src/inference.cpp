#include "aggmogp/inference.hpp"

#include "aggmogp/error.hpp"
#include "aggmogp/parallel.hpp"
#include "aggmogp/rng.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <limits>

namespace aggmogp {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw Error(ErrorCode::InvalidArgument, "learning_rate must be positive");
  if (mc_samples < 1)
    throw Error(ErrorCode::InvalidArgument, "T_e must be at least 1");
  if (window < 1)
    throw Error(ErrorCode::InvalidArgument, "window must be at least 1");
  if (!(convergence_tol >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "convergence_tol must be >= 0");
}

EpsDraws draw_eps(const AggregatedDataset &data, std::size_t num_latents,
                  std::size_t samples, std::uint64_t seed,
                  std::uint64_t stream) {
  EpsDraws eps(samples);
  for (auto &per_t : eps)
    per_t.resize(data.domains.size());
  CounterRng rng(seed, stream);
  const auto L = static_cast<Eigen::Index>(num_latents);
  for (std::size_t v = 0; v < data.domains.size(); ++v) {
    const auto Sv = static_cast<Eigen::Index>(data.domains[v].num_attributes());
    for (auto &per_t : eps)
      per_t[v].resize(Sv, L);
    for (Eigen::Index s = 0; s < Sv; ++s)
      for (Eigen::Index l = 0; l < L; ++l)
        for (std::size_t t = 0; t < samples; ++t)
          eps[t][v](s, l) = rng.normal();
  }
  return eps;
}

namespace {

using Range = ParameterLayout::Range;

void copy_out(const Eigen::MatrixXd &m, Eigen::VectorXd &x, std::size_t &at) {
  x.segment(static_cast<Eigen::Index>(at), m.size()) =
      Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
  at += static_cast<std::size_t>(m.size());
}

void copy_in(const Eigen::VectorXd &x, Eigen::MatrixXd &m, std::size_t &at) {
  Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) =
      x.segment(static_cast<Eigen::Index>(at), m.size());
  at += static_cast<std::size_t>(m.size());
}

template <typename M> std::size_t total_size(const std::vector<M> &list) {
  std::size_t n = 0;
  for (const auto &m : list)
    n += static_cast<std::size_t>(m.size());
  return n;
}

struct DomainTerm {
  double loglik = 0.0;
  Eigen::VectorXd d_log_beta;
  Eigen::MatrixXd d_w_bar;       // |S_v| x |L|
  Eigen::MatrixXd d_log_eta2;    // |S_v| x |L|
  Eigen::VectorXd d_log_sigma2;  // |S_v|
};

DomainTerm domain_term(const DomainData &domain, const ModelState &state,
                       std::size_t v, const EpsDraws &eps, bool with_grad) {
  const std::size_t L = state.num_latents();
  const auto Sv = static_cast<Eigen::Index>(domain.num_attributes());
  const auto N = static_cast<Eigen::Index>(domain.size());
  const auto T = static_cast<double>(eps.size());
  const LatentCovariances latent =
      latent_covariances(domain, state.kernels, with_grad);
  const Eigen::VectorXd &log_sigma2 = state.noise.log_sigma2[v];

  DomainTerm out;
  if (with_grad) {
    out.d_log_beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(L));
    out.d_w_bar = Eigen::MatrixXd::Zero(Sv, static_cast<Eigen::Index>(L));
    out.d_log_eta2 = Eigen::MatrixXd::Zero(Sv, static_cast<Eigen::Index>(L));
    out.d_log_sigma2 = Eigen::VectorXd::Zero(Sv);
  }
  Eigen::VectorXd u(N);
  for (const auto &draw : eps) {
    const Eigen::MatrixXd &e = draw[v];
    const Eigen::MatrixXd W = sample_weights(state.q, v, e);
    const Eigen::MatrixXd C = assemble_C(domain, W, latent, log_sigma2);
    const JitteredCholesky chol = factorize(C);
    out.loglik += log_likelihood(domain.y, chol) / T;
    if (!with_grad)
      continue;

    // d logL / dC for the jittered matrix, pushed back through the jitter
    // term rel * mean(diag C).
    const Eigen::VectorXd alpha = chol.llt.solve(domain.y);
    Eigen::MatrixXd G = chol.llt.solve(Eigen::MatrixXd::Identity(N, N));
    G = 0.5 * (alpha * alpha.transpose() - G);
    G.diagonal().array() +=
        chol.relative_jitter * G.trace() / static_cast<double>(N);

    Eigen::MatrixXd dW = Eigen::MatrixXd::Zero(Sv, static_cast<Eigen::Index>(L));
    for (std::size_t l = 0; l < L; ++l) {
      const auto li = static_cast<Eigen::Index>(l);
      for (Eigen::Index i = 0; i < N; ++i)
        u[i] = W(static_cast<Eigen::Index>(
                     domain.row_block[static_cast<std::size_t>(i)]),
                 li);
      const Eigen::VectorXd gbu = G.cwiseProduct(latent.value[l]) * u;
      for (Eigen::Index i = 0; i < N; ++i)
        dW(static_cast<Eigen::Index>(
               domain.row_block[static_cast<std::size_t>(i)]),
           li) += 2.0 * gbu[i];
      out.d_log_beta[li] +=
          u.dot(G.cwiseProduct(latent.d_log_beta[l]) * u) / T;
    }
    for (Eigen::Index s = 0; s < Sv; ++s)
      for (Eigen::Index l = 0; l < static_cast<Eigen::Index>(L); ++l) {
        out.d_w_bar(s, l) += dW(s, l) / T;
        const double lv = state.q.log_eta2[v](s, l);
        if (!variance_clamped(lv))
          out.d_log_eta2(s, l) +=
              dW(s, l) * e(s, l) * 0.5 * std::sqrt(floored_variance(lv)) / T;
      }
    for (Eigen::Index i = 0; i < N; ++i) {
      const auto s = static_cast<Eigen::Index>(
          domain.row_block[static_cast<std::size_t>(i)]);
      if (!variance_clamped(log_sigma2[s]))
        out.d_log_sigma2[s] += floored_variance(log_sigma2[s]) * G(i, i) / T;
    }
  }
  return out;
}

std::vector<DomainTerm> domain_terms(const AggregatedDataset &data,
                                     const ModelState &state,
                                     const EpsDraws &eps, bool with_grad) {
  check_consistent(state, data);
  if (eps.empty())
    throw Error(ErrorCode::InvalidArgument, "need at least one eps draw");
  for (const auto &draw : eps)
    if (draw.size() != data.domains.size())
      throw Error(ErrorCode::DimensionMismatch, "eps draws per domain");
  std::vector<DomainTerm> terms(data.domains.size());
  parallel_for(data.domains.size(), [&](std::size_t v) {
    terms[v] = domain_term(data.domains[v], state, v, eps, with_grad);
  });
  return terms;
}

} // namespace

ParameterLayout ParameterLayout::of(const ModelState &state) {
  ParameterLayout p;
  std::size_t at = 0;
  auto take = [&at](std::size_t n) {
    Range r{at, n};
    at += n;
    return r;
  };
  p.log_beta = take(state.kernels.size());
  p.log_sigma2 = take(total_size(state.noise.log_sigma2));
  p.prior_w_bar = take(static_cast<std::size_t>(state.prior.w_bar.size()));
  p.prior_log_eta2 = take(static_cast<std::size_t>(state.prior.log_eta2.size()));
  p.q_w_bar = take(total_size(state.q.w_bar));
  p.q_log_eta2 = take(total_size(state.q.log_eta2));
  p.total = at;
  return p;
}

Eigen::VectorXd ParameterLayout::pack(const ModelState &state) const {
  Eigen::VectorXd x(static_cast<Eigen::Index>(total));
  std::size_t at = 0;
  for (const auto &k : state.kernels.kernels)
    x[static_cast<Eigen::Index>(at++)] = k.log_beta();
  for (const auto &s : state.noise.log_sigma2)
    copy_out(s, x, at);
  copy_out(state.prior.w_bar, x, at);
  copy_out(state.prior.log_eta2, x, at);
  for (const auto &m : state.q.w_bar)
    copy_out(m, x, at);
  for (const auto &m : state.q.log_eta2)
    copy_out(m, x, at);
  if (at != total)
    throw Error(ErrorCode::DimensionMismatch, "state does not fit the layout");
  return x;
}

void ParameterLayout::unpack(const Eigen::VectorXd &x, ModelState &state) const {
  if (static_cast<std::size_t>(x.size()) != total)
    throw Error(ErrorCode::DimensionMismatch, "parameter vector length");
  std::size_t at = 0;
  for (auto &k : state.kernels.kernels)
    k = SEKernel(x[static_cast<Eigen::Index>(at++)]);
  for (auto &s : state.noise.log_sigma2) {
    Eigen::MatrixXd m = s;
    copy_in(x, m, at);
    s = m;
  }
  copy_in(x, state.prior.w_bar, at);
  copy_in(x, state.prior.log_eta2, at);
  for (auto &m : state.q.w_bar)
    copy_in(x, m, at);
  for (auto &m : state.q.log_eta2)
    copy_in(x, m, at);
}

std::vector<std::pair<std::string, ParameterLayout::Range>>
ParameterLayout::groups() const {
  return {{"log_beta", log_beta},         {"log_sigma2", log_sigma2},
          {"prior_w_bar", prior_w_bar},   {"prior_log_eta2", prior_log_eta2},
          {"q_w_bar", q_w_bar},           {"q_log_eta2", q_log_eta2}};
}

double estimate_elbo(const AggregatedDataset &data, const ModelState &state,
                     const EpsDraws &eps) {
  const auto terms = domain_terms(data, state, eps, false);
  double total = 0.0;
  for (const auto &t : terms)
    total += t.loglik;
  return total - kl_weights(state.q, state.prior, data.attribute_map());
}

ElboGradient grad_elbo(const AggregatedDataset &data, const ModelState &state,
                       const EpsDraws &eps) {
  const auto terms = domain_terms(data, state, eps, true);
  const ParameterLayout layout = ParameterLayout::of(state);
  const auto amap = data.attribute_map();
  ElboGradient out;
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.total));
  Eigen::VectorXd &g = out.gradient;
  const auto L = static_cast<Eigen::Index>(state.num_latents());
  const auto S = static_cast<Eigen::Index>(data.num_attributes());

  // Views into the flat gradient, same flattening as pack().
  auto at = [&](const Range &r, std::size_t k) -> double & {
    return g[static_cast<Eigen::Index>(r.offset + k)];
  };
  std::size_t sigma_at = 0, q_at = 0;
  for (std::size_t v = 0; v < terms.size(); ++v) {
    const DomainTerm &t = terms[v];
    out.elbo += t.loglik;
    for (Eigen::Index l = 0; l < L; ++l)
      at(layout.log_beta, static_cast<std::size_t>(l)) += t.d_log_beta[l];
    for (Eigen::Index s = 0; s < t.d_log_sigma2.size(); ++s)
      at(layout.log_sigma2, sigma_at++) = t.d_log_sigma2[s];

    const auto &mean = state.q.w_bar[v];
    const auto &log_var = state.q.log_eta2[v];
    const auto Sv = mean.rows();
    for (Eigen::Index l = 0; l < L; ++l)
      for (Eigen::Index s = 0; s < Sv; ++s) {
        const auto gs = static_cast<Eigen::Index>(amap[v][static_cast<std::size_t>(s)]);
        const std::size_t k = q_at + static_cast<std::size_t>(l * Sv + s);
        const std::size_t pk = static_cast<std::size_t>(l * S + gs);
        const double m = mean(s, l), mu = state.prior.w_bar(gs, l);
        const double s2 = floored_variance(log_var(s, l));
        const double t2 = floored_variance(state.prior.log_eta2(gs, l));
        const double d = m - mu;
        at(layout.q_w_bar, k) += t.d_w_bar(s, l) - d / t2;
        at(layout.prior_w_bar, pk) += d / t2;
        double gq = t.d_log_eta2(s, l);
        if (!variance_clamped(log_var(s, l)))
          gq -= 0.5 * (s2 / t2 - 1.0);
        at(layout.q_log_eta2, k) += gq;
        if (!variance_clamped(state.prior.log_eta2(gs, l)))
          at(layout.prior_log_eta2, pk) -= 0.5 * (1.0 - (s2 + d * d) / t2);
      }
    q_at += static_cast<std::size_t>(mean.size());
  }
  out.elbo -= kl_weights(state.q, state.prior, amap);
  return out;
}

double reestimate_elbo(const AggregatedDataset &data, const ModelState &state,
                       std::size_t samples, std::uint64_t seed) {
  return estimate_elbo(data, state,
                       draw_eps(data, state.num_latents(), samples, seed,
                                streams::kElboCheck));
}

namespace {

bool is_numeric_failure(const Error &e) {
  return e.code() == ErrorCode::CholeskyFailure ||
         e.code() == ErrorCode::NonFiniteElbo;
}

} // namespace

std::vector<std::pair<std::size_t, std::size_t>>
align_latent_signs(ModelState &state, const AggregatedDataset &data) {
  std::vector<std::pair<std::size_t, std::size_t>> flipped;
  const auto map = data.attribute_map();
  for (std::size_t v = 0; v < state.q.w_bar.size(); ++v) {
    Eigen::MatrixXd &m = state.q.w_bar[v];
    for (Eigen::Index l = 0; l < m.cols(); ++l) {
      double agreement = 0.0;
      for (Eigen::Index s = 0; s < m.rows(); ++s) {
        const auto g = static_cast<Eigen::Index>(map[v][static_cast<std::size_t>(s)]);
        agreement += m(s, l) * state.prior.w_bar(g, l) /
                     floored_variance(state.prior.log_eta2(g, l));
      }
      if (agreement < 0.0) {
        m.col(l) *= -1.0;
        flipped.emplace_back(v, static_cast<std::size_t>(l));
      }
    }
  }
  return flipped;
}

FitResult fit(const AggregatedDataset &data, const TrainConfig &config,
              const ModelState &init) {
  config.validate();
  check_consistent(init, data);
  const auto start = std::chrono::steady_clock::now();
  FitResult result{init, {}};
  TrainTrace &trace = result.trace;
  if (config.max_iters == 0)
    return result;

  const ParameterLayout layout = ParameterLayout::of(init);
  const auto P = static_cast<Eigen::Index>(layout.total);
  Eigen::VectorXd x = layout.pack(init);
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(P), m2 = Eigen::VectorXd::Zero(P);
  Eigen::VectorXd good_x = x, good_m1 = m1, good_m2 = m2;
  std::size_t good_steps = 0, steps = 0;
  constexpr double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  double lr = config.learning_rate;

  ModelState current = init;
  const std::size_t window = std::min(config.window, config.max_iters);
  std::deque<double> recent;
  double recent_sum = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  double prev_window_avg = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> q_offsets;
  for (std::size_t v = 0, off = layout.q_w_bar.offset; v < init.q.w_bar.size(); ++v) {
    q_offsets.push_back(off);
    off += static_cast<std::size_t>(init.q.w_bar[v].size());
  }
  const EpsDraws fixed =
      config.fixed_eps ? draw_eps(data, init.num_latents(), config.mc_samples,
                                  config.seed, streams::kTrain)
                       : EpsDraws{};

  for (std::size_t it = 0; it < config.max_iters; ++it) {
    layout.unpack(x, current);
    ElboGradient eg;
    bool ok = true;
    try {
      eg = grad_elbo(data, current,
                     config.fixed_eps
                         ? fixed
                         : draw_eps(data, init.num_latents(), config.mc_samples,
                                    config.seed, streams::kTrain + it));
      ok = std::isfinite(eg.elbo) && eg.gradient.allFinite();
    } catch (const Error &e) {
      if (!is_numeric_failure(e))
        throw;
      ok = false;
    }
    if (!ok) {
      if (trace.backoffs >= config.max_backoffs)
        throw Error(ErrorCode::NonFiniteElbo,
                    "ELBO or gradient not finite after learning-rate backoff",
                    {std::to_string(it)});
      ++trace.backoffs;
      lr *= 0.5;
      x = good_x;
      m1 = good_m1;
      m2 = good_m2;
      steps = good_steps;
      trace.entries.push_back({it, std::numeric_limits<double>::quiet_NaN(), lr});
      continue;
    }
    good_x = x;
    good_m1 = m1;
    good_m2 = m2;
    good_steps = steps;
    trace.entries.push_back({it, eg.elbo, lr});

    recent.push_back(eg.elbo);
    recent_sum += eg.elbo;
    if (recent.size() > window) {
      recent_sum -= recent.front();
      recent.pop_front();
    }
    if (recent.size() == window) {
      const double avg = recent_sum / static_cast<double>(window);
      if (avg > best) {
        best = avg;
        result.state = current;
        trace.best_iteration = it;
        trace.best_window_elbo = avg;
      }
      const bool boundary = (it + 1) % window == 0;
      if (boundary) {
        if (std::isfinite(prev_window_avg) &&
            std::abs(avg - prev_window_avg) <=
                config.convergence_tol * std::max(std::abs(prev_window_avg), 1e-12)) {
          trace.converged = true;
          break;
        }
        prev_window_avg = avg;
      }
    }

    ++steps;
    m1 = b1 * m1 + (1.0 - b1) * eg.gradient;
    m2 = b2 * m2 + (1.0 - b2) * eg.gradient.cwiseAbs2();
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps));
    x.array() += lr * (m1.array() / c1) / ((m2.array() / c2).sqrt() + adam_eps);

    layout.unpack(x, current);
    const auto flips = align_latent_signs(current, data);
    if (!flips.empty()) {
      for (const auto &[v, l] : flips) {
        const auto rows = current.q.w_bar[v].rows();
        const auto first = static_cast<Eigen::Index>(q_offsets[v]) +
                           static_cast<Eigen::Index>(l) * rows;
        m1.segment(first, rows) *= -1.0;
      }
      x = layout.pack(current);
    }
  }
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return result;
}

} // namespace aggmogp
