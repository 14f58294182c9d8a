#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace aggmogp {

/// Regular discretization grid. Grid points are cell centers: `origin` is the
/// coordinate of the first cell center and point i along axis d sits at
/// origin[d] + i * cell_size[d]. Flat indices are row-major (last axis
/// fastest).
struct GridSpec {
  std::vector<double> origin;
  std::vector<double> cell_size;
  std::vector<std::size_t> shape;

  std::size_t dimension() const noexcept { return shape.size(); }
  std::size_t size() const noexcept;

  std::vector<std::size_t> unravel(std::size_t flat) const;
  std::size_t ravel(std::span<const std::size_t> index) const;
  std::vector<double> point(std::size_t flat) const;
  double coordinate(std::size_t axis, std::size_t i) const noexcept {
    return origin[axis] + static_cast<double>(i) * cell_size[axis];
  }

  /// Grid of `shape` cells tiling [lo, hi] exactly on every axis.
  static GridSpec covering(std::span<const double> lo,
                           std::span<const double> hi,
                           std::span<const std::size_t> shape);
};

/// Axis-aligned bounding box.
struct Extent {
  std::vector<double> lo;
  std::vector<double> hi;
};

struct Domain {
  std::string id;
  std::size_t dimension = 1;
  Extent extent;
  GridSpec grid;

  /// Throws InvalidGeometry unless D >= 1, the extent is non-degenerate,
  /// and the grid cells tile the extent.
  void validate() const;
  bool contains(std::span<const double> x) const;
  double largest_extent() const;
};

/// Half-open time bin or axis segment [lo, hi); one-dimensional domains only.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Set of flat grid-cell indices; sorted and duplicate-free once validated.
struct CellSet {
  std::vector<std::size_t> cells;
};

/// A support collapsed to a single location. Used by the point-referenced
/// baseline, which places each aggregate at its support centroid.
struct PointSite {
  std::vector<double> x;
};

struct Support {
  std::string id;
  std::string domain_id;
  std::variant<Interval, CellSet, PointSite> body;

  bool is_interval() const { return std::holds_alternative<Interval>(body); }
  bool is_cells() const { return std::holds_alternative<CellSet>(body); }
  bool is_point() const { return std::holds_alternative<PointSite>(body); }
};

enum class AggregationKind { Average, Sum, Custom };

const char *to_string(AggregationKind kind);
AggregationKind aggregation_from_string(const std::string &name);

struct AggregationRule {
  AggregationKind kind = AggregationKind::Average;
  std::vector<double> weights; // Custom only, one per member point

  static AggregationRule average() { return {}; }
  static AggregationRule sum() { return {AggregationKind::Sum, {}}; }
  static AggregationRule custom(std::vector<double> w) {
    return {AggregationKind::Custom, std::move(w)};
  }
};

/// Disjoint supports carrying one attribute in one domain.
struct Partition {
  std::string id;
  std::string attribute_id;
  std::string domain_id;
  AggregationKind aggregation = AggregationKind::Average;
  std::vector<Support> supports;
  /// Per-support weights when aggregation is Custom.
  std::vector<std::vector<double>> custom_weights;

  AggregationRule rule_for(std::size_t n) const;
};

/// Grid points covered by a support, strictly increasing. Intervals take
/// the points with lo <= x < hi; a PointSite maps to the cell containing it.
std::vector<std::size_t> membership(const Support &support,
                                    const GridSpec &grid);

/// Discretized aggregation weights for the member points of `support`.
std::vector<double> weight_vector(const Support &support, const GridSpec &grid,
                                  const AggregationRule &rule);

/// Checks every Support and Partition invariant against `domain`.
void validate(const Domain &domain, std::span<const Partition> partitions);

std::vector<double> centroid(const Support &support, const GridSpec &grid);

/// Sum of the aggregation weights of a support (1 for Average).
double weight_total(const Support &support, const GridSpec &grid,
                    const AggregationRule &rule);

/// Regular 1-D partition of [lo, hi) into `count` equal bins with ids
/// "<prefix><k>".
std::vector<Support> regular_intervals(const Domain &domain, std::size_t count,
                                       const std::string &prefix);

/// Regular 2-D partition of the grid into bx by by rectangular cell blocks.
std::vector<Support> regular_blocks(const Domain &domain, std::size_t bx,
                                    std::size_t by, const std::string &prefix);

} // namespace aggmogp
