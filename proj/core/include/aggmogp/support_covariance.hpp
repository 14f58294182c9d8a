#pragma once

#include "aggmogp/geometry.hpp"
#include "aggmogp/kernels.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <unordered_map>
#include <vector>

namespace aggmogp {

/// How support integrals are evaluated. Auto uses the erf closed forms for
/// averaged 1-D intervals and the grid everywhere else; Grid forces the grid
/// sum for every support.
enum class IntegrationMode { Auto, Grid };

const char *to_string(IntegrationMode mode);
IntegrationMode integration_mode_from_string(const std::string &name);

/// A support reduced to what the kernel layer integrates over.
struct ResolvedSupport {
  enum class Kind { Interval, Point, Cells };

  Kind kind = Kind::Cells;
  std::string id;
  double lo = 0.0; // Interval
  double hi = 0.0;
  std::vector<double> point;       // Point
  std::vector<std::size_t> cells;  // Cells, and interval members if any
  std::vector<double> weights;     // aligned with cells
  bool has_members = false;
};

ResolvedSupport resolve_support(const Support &support, const GridSpec &grid,
                                const AggregationRule &rule,
                                IntegrationMode mode);

std::vector<ResolvedSupport> resolve_partition(const Partition &partition,
                                               const GridSpec &grid,
                                               IntegrationMode mode);

/// Precomputed geometry for evaluating support-to-support kernel integrals
/// for many kernel scales. Everything that does not depend on beta (distance
/// buckets, interval lags) is built once here.
class SupportCovariancePlan {
public:
  SupportCovariancePlan() = default;

  /// All pairs (n, m) with n <= m of one support list; evaluation mirrors.
  static SupportCovariancePlan symmetric(const GridSpec &grid,
                                         const std::vector<ResolvedSupport> &supports);
  /// Rectangular rows x cols block.
  static SupportCovariancePlan cross(const GridSpec &grid,
                                     const std::vector<ResolvedSupport> &rows,
                                     const std::vector<ResolvedSupport> &cols);
  /// Only the self-covariance of every support, returned as a square matrix
  /// with zeros off the diagonal.
  static SupportCovariancePlan diagonal(const GridSpec &grid,
                                        const std::vector<ResolvedSupport> &supports);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  /// Fills value (rows x cols) and, when non-null, d value / d log(beta).
  void evaluate(const SEKernel &kernel, Eigen::MatrixXd &value,
                Eigen::MatrixXd *d_log_beta = nullptr) const;
  Eigen::MatrixXd evaluate(const SEKernel &kernel) const;

private:
  enum class PairKind : std::uint8_t { Lag, PointInterval, Table };

  struct Pair {
    std::uint32_t row;
    std::uint32_t col;
    PairKind kind;
    std::uint32_t index; // into lag_terms_, point_interval_, or tables_
  };
  struct LagTerm {
    std::uint32_t lag[4]; // +, -, -, + contributions
    double norm;
  };
  struct PointIntervalTerm {
    double x, lo, hi, norm;
  };

  void add_pair(const GridSpec &grid, const GridView &view,
                const ResolvedSupport &a, const ResolvedSupport &b,
                std::uint32_t row, std::uint32_t col);
  std::uint32_t intern_lag(double lag);

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  bool symmetric_ = false;
  std::vector<Pair> pairs_;
  std::vector<double> lags_;
  std::unordered_map<std::uint64_t, std::uint32_t> lag_index_;
  std::vector<LagTerm> lag_terms_;
  std::vector<PointIntervalTerm> point_interval_;
  std::vector<DistanceTable> tables_;
};

} // namespace aggmogp
