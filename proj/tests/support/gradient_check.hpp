#pragma once

#include "aggmogp/inference.hpp"
#include "aggmogp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace oracle {

/// Worst |analytic - central difference| / max(|central difference|, floor)
/// per parameter group, at fixed draws.
inline std::map<std::string, double>
gradient_errors(const aggmogp::AggregatedDataset &data, const aggmogp::ModelState &state,
                const aggmogp::EpsDraws &eps, double h = 1e-4, double floor = 1e-2) {
  using namespace aggmogp;
  const auto layout = ParameterLayout::of(state);
  const Eigen::VectorXd g = grad_elbo(data, state, eps).gradient;
  const Eigen::VectorXd x = layout.pack(state);
  std::map<std::string, double> worst;
  ModelState probe = state;
  for (const auto &[name, range] : layout.groups()) {
    double w = 0.0;
    for (std::size_t k = range.offset; k < range.offset + range.size; ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      Eigen::VectorXd xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      layout.unpack(xp, probe);
      const double fp = estimate_elbo(data, probe, eps);
      layout.unpack(xm, probe);
      const double fm = estimate_elbo(data, probe, eps);
      const double fd = (fp - fm) / (2 * h);
      w = std::max(w, std::abs(g[i] - fd) / std::max(std::abs(fd), floor));
    }
    worst[name] = w;
  }
  return worst;
}

/// A seeded, generic parameter point: every group moved away from the
/// standard initialization so no symmetry hides an error.
inline aggmogp::ModelState perturbed_state(const aggmogp::AggregatedDataset &data,
                                           std::size_t latents, std::uint64_t seed) {
  using namespace aggmogp;
  ModelState s = initial_state(data, latents, seed);
  const auto layout = ParameterLayout::of(s);
  Eigen::VectorXd x = layout.pack(s);
  CounterRng rng(seed, 99);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x[i] += 0.3 * rng.normal();
  for (std::size_t k = 0; k < layout.q_w_bar.size; ++k)
    x[static_cast<Eigen::Index>(layout.q_w_bar.offset + k)] += 0.5 * rng.normal();
  for (std::size_t k = 0; k < layout.prior_w_bar.size; ++k)
    x[static_cast<Eigen::Index>(layout.prior_w_bar.offset + k)] += 0.5 * rng.normal();
  layout.unpack(x, s);
  return s;
}

} // namespace oracle
