#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace aggmogp {

/// Squared-exponential covariance exp(-|x - x'|^2 / (2 beta^2)) with unit
/// signal variance; the weights carry the scale. Parameterized by log(beta).
class SEKernel {
public:
  static constexpr double kAlpha2 = 1.0;

  SEKernel() = default;
  explicit SEKernel(double log_beta);
  static SEKernel with_scale(double beta);

  double log_beta() const noexcept { return log_beta_; }
  double beta() const noexcept { return std::exp(log_beta_); }

  double from_sq_dist(double sq_dist) const noexcept {
    const double b = beta();
    return std::exp(-sq_dist / (2.0 * b * b));
  }

  bool operator==(const SEKernel &) const = default;

private:
  double log_beta_ = 0.0;
};

struct KernelSet {
  std::vector<SEKernel> kernels;

  std::size_t size() const noexcept { return kernels.size(); }
  const SEKernel &operator[](std::size_t l) const { return kernels[l]; }
  SEKernel &operator[](std::size_t l) { return kernels[l]; }
  bool operator==(const KernelSet &) const = default;
};

/// A value together with its derivative with respect to log(beta).
struct ScaleGrad {
  double value = 0.0;
  double d_log_beta = 0.0;
};

double eval(const SEKernel &kernel, std::span<const double> x,
            std::span<const double> y);

/// Integral of the kernel over x' in [a, b] for a fixed point x.
double integral_point_interval(const SEKernel &kernel, double x, double a,
                               double b);
ScaleGrad integral_point_interval_grad(const SEKernel &kernel, double x,
                                       double a, double b);

/// Double integral of the kernel over [a, b] x [c, d].
double double_integral_interval(const SEKernel &kernel, double a, double b,
                                double c, double d);
ScaleGrad double_integral_interval_grad(const SEKernel &kernel, double a,
                                        double b, double c, double d);

/// Second antiderivative of the kernel in the lag u, shifted so that it
/// vanishes at u = 0:
///   beta*sqrt(pi/2)*u*erf(u/(sqrt(2)*beta)) + beta^2*expm1(-u^2/(2 beta^2)).
/// The rectangle integral is psi(b-c) - psi(a-c) - psi(b-d) + psi(a-d).
ScaleGrad interval_lag_potential(double beta, double u);

/// Weighted grid sum sum_i sum_j w_i w'_j k(p_i, p'_j). Points are rows.
double support_cov_grid(const SEKernel &kernel,
                        std::span<const double> weights_n,
                        const Eigen::MatrixXd &points_n,
                        std::span<const double> weights_m,
                        const Eigen::MatrixXd &points_m);

/// Minimal view of a regular grid used by the kernel layer.
class GridView {
public:
  GridView(std::vector<double> cell_size, std::vector<std::size_t> shape);

  std::size_t dimension() const noexcept { return shape_.size(); }
  const std::vector<double> &cell_size() const noexcept { return cell_size_; }
  const std::vector<std::size_t> &shape() const noexcept { return shape_; }
  /// Per-axis index of a flat (row-major) cell index.
  void unravel(std::size_t flat, std::span<std::size_t> out) const;

private:
  std::vector<double> cell_size_;
  std::vector<std::size_t> shape_;
};

/// Pair counts per distinct squared distance between two member-point sets.
/// Keys are compared by exact bit pattern; on a regular grid equal offsets
/// always produce identical keys.
class DistanceHistogram {
public:
  struct Entry {
    double sq_dist;
    std::uint64_t count;
  };

  DistanceHistogram() = default;
  /// Throws InvariantViolation unless the counts sum to `expected_pairs`.
  DistanceHistogram(std::vector<Entry> entries, std::uint64_t expected_pairs);

  /// Histogram for two cell sets of the same grid, built from per-axis index
  /// offsets so the cost is |n| * |m| integer increments.
  static DistanceHistogram build(const GridView &grid,
                                 std::span<const std::size_t> cells_n,
                                 std::span<const std::size_t> cells_m);

  const std::vector<Entry> &entries() const noexcept { return entries_; }
  std::uint64_t total() const noexcept { return total_; }

private:
  std::vector<Entry> entries_;
  std::uint64_t total_ = 0;
};

/// sum_e count_e k(e) * norm_n * norm_m.
double support_cov_bucketed(const SEKernel &kernel,
                            const DistanceHistogram &histogram, double norm_n,
                            double norm_m);

/// Masses attached to distinct squared distances; the generalization of the
/// histogram to arbitrary aggregation weights (mass = sum of w_i w_j).
struct DistanceTable {
  std::vector<double> sq_dist;
  std::vector<double> mass;

  ScaleGrad evaluate(const SEKernel &kernel) const noexcept;
};

DistanceTable weighted_distance_table(const GridView &grid,
                                      std::span<const std::size_t> cells_n,
                                      std::span<const double> weights_n,
                                      std::span<const std::size_t> cells_m,
                                      std::span<const double> weights_m);

} // namespace aggmogp
