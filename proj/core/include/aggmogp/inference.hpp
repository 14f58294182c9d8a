#pragma once

#include "aggmogp/dataset.hpp"
#include "aggmogp/model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace aggmogp {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t max_iters = 5000;
  std::size_t mc_samples = 1; // T_e
  std::uint64_t seed = 0;
  double convergence_tol = 1e-6;
  std::size_t window = 50;
  /// Debug mode: reuse the iteration-0 draws every iteration, which turns
  /// the ascent deterministic in the objective.
  bool fixed_eps = false;
  std::size_t max_backoffs = 5;

  void validate() const;
  bool operator==(const TrainConfig &) const = default;
};

struct TraceEntry {
  std::size_t iteration = 0;
  double elbo = 0.0;
  double learning_rate = 0.0;
};

struct TrainTrace {
  std::vector<TraceEntry> entries;
  std::size_t best_iteration = 0;
  double best_window_elbo = 0.0;
  std::size_t backoffs = 0;
  bool converged = false;
  double wall_seconds = 0.0;
};

/// eps[t][v] is an |S_v| x |L| standard-normal matrix.
using EpsDraws = std::vector<std::vector<Eigen::MatrixXd>>;

/// Draws in the order domain, attribute, latent, sample from the given
/// (seed, stream) pair.
EpsDraws draw_eps(const AggregatedDataset &data, std::size_t num_latents,
                  std::size_t samples, std::uint64_t seed,
                  std::uint64_t stream);

/// Flat vector view of every optimized parameter, group by group:
/// log beta, log sigma^2, prior means, prior log variances, variational
/// means, variational log variances. Matrices are flattened column-major,
/// per-domain blocks concatenated in domain order.
struct ParameterLayout {
  struct Range {
    std::size_t offset = 0;
    std::size_t size = 0;
  };
  Range log_beta, log_sigma2, prior_w_bar, prior_log_eta2, q_w_bar, q_log_eta2;
  std::size_t total = 0;

  static ParameterLayout of(const ModelState &state);
  Eigen::VectorXd pack(const ModelState &state) const;
  /// Overwrites the parameters of `state`, which must have this layout.
  void unpack(const Eigen::VectorXd &x, ModelState &state) const;
  std::vector<std::pair<std::string, Range>> groups() const;
};

double estimate_elbo(const AggregatedDataset &data, const ModelState &state,
                     const EpsDraws &eps);

struct ElboGradient {
  double elbo = 0.0;
  Eigen::VectorXd gradient; // ParameterLayout::of(state) order
};

/// ELBO estimate and its exact gradient at fixed eps.
ElboGradient grad_elbo(const AggregatedDataset &data, const ModelState &state,
                       const EpsDraws &eps);

/// ELBO averaged over `samples` fresh draws from a dedicated stream; used to
/// compare snapshots independently of the training noise.
double reestimate_elbo(const AggregatedDataset &data, const ModelState &state,
                       std::size_t samples, std::uint64_t seed);

/// Flipping the sign of one latent column of q(W_v) leaves the likelihood
/// unchanged and only moves the KL to the shared prior. Flips every column
/// whose KL decreases by doing so and returns the (domain, latent) pairs.
std::vector<std::pair<std::size_t, std::size_t>>
align_latent_signs(ModelState &state, const AggregatedDataset &data);

struct FitResult {
  ModelState state;
  TrainTrace trace;
};

/// Adam ascent on the ELBO with fresh draws every iteration, followed by
/// align_latent_signs after each step. Returns the snapshot with the best
/// moving-window ELBO.
FitResult fit(const AggregatedDataset &data, const TrainConfig &config,
              const ModelState &init);

} // namespace aggmogp
