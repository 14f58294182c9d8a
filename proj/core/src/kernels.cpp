#include "aggmogp/kernels.hpp"

#include "aggmogp/error.hpp"

#include <algorithm>
#include <bit>
#include <numbers>

namespace aggmogp {

namespace {

constexpr double kSqrtHalfPi = 1.2533141373155002512; // sqrt(pi/2)

// erf(p) - erf(q) without cancellation when both arguments sit in the same
// tail.
double erf_diff(double p, double q) {
  if (p > 0.0 && q > 0.0)
    return std::erfc(q) - std::erfc(p);
  if (p < 0.0 && q < 0.0)
    return std::erfc(-p) - std::erfc(-q);
  return std::erf(p) - std::erf(q);
}

void require_interval(double a, double b) {
  if (!(b > a))
    throw Error(ErrorCode::DegenerateInterval,
                "interval must satisfy lo < hi");
}

} // namespace

SEKernel::SEKernel(double log_beta) : log_beta_(log_beta) {
  if (!std::isfinite(log_beta))
    throw Error(ErrorCode::InvalidArgument, "kernel scale must be finite");
}

SEKernel SEKernel::with_scale(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw Error(ErrorCode::InvalidArgument,
                "kernel scale must be finite and positive");
  return SEKernel(std::log(beta));
}

double eval(const SEKernel &kernel, std::span<const double> x,
            std::span<const double> y) {
  if (x.size() != y.size())
    throw Error(ErrorCode::DimensionMismatch,
                "kernel arguments differ in dimension");
  double sq = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double diff = x[d] - y[d];
    sq += diff * diff;
  }
  return kernel.from_sq_dist(sq);
}

ScaleGrad integral_point_interval_grad(const SEKernel &kernel, double x,
                                       double a, double b) {
  require_interval(a, b);
  const double beta = kernel.beta();
  const double scale = std::numbers::sqrt2 * beta;
  const double value =
      beta * kSqrtHalfPi * erf_diff((b - x) / scale, (a - x) / scale);
  const auto edge = [&](double u) {
    return u * std::exp(-u * u / (2.0 * beta * beta));
  };
  return {value, value - (edge(b - x) - edge(a - x))};
}

double integral_point_interval(const SEKernel &kernel, double x, double a,
                               double b) {
  return integral_point_interval_grad(kernel, x, a, b).value;
}

ScaleGrad interval_lag_potential(double beta, double u) {
  const double z = u / (std::numbers::sqrt2 * beta);
  const double tail = beta * beta * std::expm1(-u * u / (2.0 * beta * beta));
  const double psi = beta * kSqrtHalfPi * u * std::erf(z) + tail;
  return {psi, psi + tail};
}

ScaleGrad double_integral_interval_grad(const SEKernel &kernel, double a,
                                        double b, double c, double d) {
  require_interval(a, b);
  require_interval(c, d);
  const double beta = kernel.beta();
  const ScaleGrad p1 = interval_lag_potential(beta, b - c);
  const ScaleGrad p2 = interval_lag_potential(beta, a - c);
  const ScaleGrad p3 = interval_lag_potential(beta, b - d);
  const ScaleGrad p4 = interval_lag_potential(beta, a - d);
  return {(p1.value + p4.value) - (p2.value + p3.value),
          (p1.d_log_beta + p4.d_log_beta) - (p2.d_log_beta + p3.d_log_beta)};
}

double double_integral_interval(const SEKernel &kernel, double a, double b,
                                double c, double d) {
  return double_integral_interval_grad(kernel, a, b, c, d).value;
}

double support_cov_grid(const SEKernel &kernel,
                        std::span<const double> weights_n,
                        const Eigen::MatrixXd &points_n,
                        std::span<const double> weights_m,
                        const Eigen::MatrixXd &points_m) {
  if (weights_n.size() != static_cast<std::size_t>(points_n.rows()) ||
      weights_m.size() != static_cast<std::size_t>(points_m.rows()) ||
      weights_n.empty() || weights_m.empty())
    throw Error(ErrorCode::LengthMismatch,
                "weights and points must be aligned and non-empty");
  if (points_n.cols() != points_m.cols())
    throw Error(ErrorCode::DimensionMismatch, "point sets differ in dimension");
  double total = 0.0;
  for (Eigen::Index i = 0; i < points_n.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < points_m.rows(); ++j) {
      const double sq = (points_n.row(i) - points_m.row(j)).squaredNorm();
      row += weights_m[j] * kernel.from_sq_dist(sq);
    }
    total += weights_n[i] * row;
  }
  return total;
}

GridView::GridView(std::vector<double> cell_size,
                   std::vector<std::size_t> shape)
    : cell_size_(std::move(cell_size)), shape_(std::move(shape)) {
  if (cell_size_.size() != shape_.size() || shape_.empty())
    throw Error(ErrorCode::DimensionMismatch, "grid view axes disagree");
}

void GridView::unravel(std::size_t flat, std::span<std::size_t> out) const {
  for (std::size_t d = shape_.size(); d-- > 0;) {
    out[d] = flat % shape_[d];
    flat /= shape_[d];
  }
}

namespace {

// Accumulates a per-offset quantity over all pairs, then collapses offsets
// into distinct squared distances (exact bit equality).
template <typename Mass, typename PairMass>
std::vector<std::pair<double, Mass>>
offset_accumulate(const GridView &grid, std::span<const std::size_t> cells_n,
                  std::span<const std::size_t> cells_m, PairMass pair_mass) {
  const std::size_t dim = grid.dimension();
  const auto &shape = grid.shape();
  std::size_t offsets = 1;
  for (std::size_t s : shape)
    offsets *= s;

  std::vector<std::size_t> idx_n(cells_n.size() * dim);
  std::vector<std::size_t> idx_m(cells_m.size() * dim);
  for (std::size_t i = 0; i < cells_n.size(); ++i)
    grid.unravel(cells_n[i], {idx_n.data() + i * dim, dim});
  for (std::size_t j = 0; j < cells_m.size(); ++j)
    grid.unravel(cells_m[j], {idx_m.data() + j * dim, dim});

  std::vector<Mass> acc(offsets, Mass{});
  std::vector<char> touched(offsets, 0);
  for (std::size_t i = 0; i < cells_n.size(); ++i) {
    const std::size_t *a = idx_n.data() + i * dim;
    for (std::size_t j = 0; j < cells_m.size(); ++j) {
      const std::size_t *b = idx_m.data() + j * dim;
      std::size_t flat = 0;
      for (std::size_t d = 0; d < dim; ++d) {
        const std::size_t off = a[d] > b[d] ? a[d] - b[d] : b[d] - a[d];
        flat = flat * shape[d] + off;
      }
      acc[flat] += pair_mass(i, j);
      touched[flat] = 1;
    }
  }

  std::vector<std::pair<double, Mass>> out;
  std::vector<std::size_t> off(dim);
  for (std::size_t flat = 0; flat < offsets; ++flat) {
    if (!touched[flat])
      continue;
    grid.unravel(flat, off);
    double sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double delta = static_cast<double>(off[d]) * grid.cell_size()[d];
      sq += delta * delta;
    }
    out.emplace_back(sq, acc[flat]);
  }
  std::sort(out.begin(), out.end(), [](const auto &x, const auto &y) {
    return x.first < y.first;
  });
  std::vector<std::pair<double, Mass>> merged;
  for (const auto &entry : out) {
    if (!merged.empty() && std::bit_cast<std::uint64_t>(merged.back().first) ==
                               std::bit_cast<std::uint64_t>(entry.first))
      merged.back().second += entry.second;
    else
      merged.push_back(entry);
  }
  return merged;
}

} // namespace

DistanceHistogram::DistanceHistogram(std::vector<Entry> entries,
                                     std::uint64_t expected_pairs)
    : entries_(std::move(entries)) {
  for (const auto &e : entries_)
    total_ += e.count;
  if (total_ != expected_pairs)
    throw Error(ErrorCode::InvariantViolation,
                "histogram counts sum to " + std::to_string(total_) +
                    ", expected " + std::to_string(expected_pairs));
}

DistanceHistogram DistanceHistogram::build(const GridView &grid,
                                           std::span<const std::size_t> cells_n,
                                           std::span<const std::size_t> cells_m) {
  const auto merged = offset_accumulate<std::uint64_t>(
      grid, cells_n, cells_m, [](std::size_t, std::size_t) { return 1u; });
  std::vector<Entry> entries;
  entries.reserve(merged.size());
  for (const auto &[sq, count] : merged)
    entries.push_back({sq, count});
  return DistanceHistogram(std::move(entries),
                           static_cast<std::uint64_t>(cells_n.size()) *
                               cells_m.size());
}

double support_cov_bucketed(const SEKernel &kernel,
                            const DistanceHistogram &histogram, double norm_n,
                            double norm_m) {
  double total = 0.0;
  for (const auto &e : histogram.entries())
    total += static_cast<double>(e.count) * kernel.from_sq_dist(e.sq_dist);
  return total * norm_n * norm_m;
}

ScaleGrad DistanceTable::evaluate(const SEKernel &kernel) const noexcept {
  const double beta = kernel.beta();
  const double inv = 1.0 / (2.0 * beta * beta);
  const double inv_b2 = 1.0 / (beta * beta);
  ScaleGrad out;
  for (std::size_t e = 0; e < sq_dist.size(); ++e) {
    const double k = mass[e] * std::exp(-sq_dist[e] * inv);
    out.value += k;
    out.d_log_beta += k * sq_dist[e] * inv_b2;
  }
  return out;
}

DistanceTable weighted_distance_table(const GridView &grid,
                                      std::span<const std::size_t> cells_n,
                                      std::span<const double> weights_n,
                                      std::span<const std::size_t> cells_m,
                                      std::span<const double> weights_m) {
  if (cells_n.size() != weights_n.size() || cells_m.size() != weights_m.size())
    throw Error(ErrorCode::LengthMismatch, "cells and weights misaligned");
  const auto merged = offset_accumulate<double>(
      grid, cells_n, cells_m,
      [&](std::size_t i, std::size_t j) { return weights_n[i] * weights_m[j]; });
  DistanceTable table;
  table.sq_dist.reserve(merged.size());
  table.mass.reserve(merged.size());
  for (const auto &[sq, mass] : merged) {
    table.sq_dist.push_back(sq);
    table.mass.push_back(mass);
  }
  return table;
}

} // namespace aggmogp
