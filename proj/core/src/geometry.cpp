#include "aggmogp/geometry.hpp"

#include "aggmogp/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace aggmogp {

namespace {

// Coordinates are compared with a tolerance relative to the cell size so
// that bin edges computed in floating point land on the intended side.
constexpr double kRelTol = 1e-9;

double axis_tol(const GridSpec &grid, std::size_t axis) {
  return kRelTol * grid.cell_size[axis];
}

bool point_in_extent(const Extent &extent, std::span<const double> x,
                     double tol) {
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (x[d] < extent.lo[d] - tol || x[d] > extent.hi[d] + tol)
      return false;
  }
  return true;
}

} // namespace

std::size_t GridSpec::size() const noexcept {
  if (shape.empty())
    return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::vector<std::size_t> GridSpec::unravel(std::size_t flat) const {
  std::vector<std::size_t> index(shape.size());
  for (std::size_t d = shape.size(); d-- > 0;) {
    index[d] = flat % shape[d];
    flat /= shape[d];
  }
  return index;
}

std::size_t GridSpec::ravel(std::span<const std::size_t> index) const {
  std::size_t flat = 0;
  for (std::size_t d = 0; d < shape.size(); ++d)
    flat = flat * shape[d] + index[d];
  return flat;
}

std::vector<double> GridSpec::point(std::size_t flat) const {
  const auto index = unravel(flat);
  std::vector<double> x(shape.size());
  for (std::size_t d = 0; d < shape.size(); ++d)
    x[d] = coordinate(d, index[d]);
  return x;
}

GridSpec GridSpec::covering(std::span<const double> lo,
                            std::span<const double> hi,
                            std::span<const std::size_t> shape) {
  if (lo.size() != hi.size() || lo.size() != shape.size())
    throw Error(ErrorCode::DimensionMismatch, "grid axes disagree");
  GridSpec grid;
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (shape[d] == 0 || !(hi[d] > lo[d]))
      throw Error(ErrorCode::InvalidGeometry, "degenerate grid axis");
    const double cs = (hi[d] - lo[d]) / static_cast<double>(shape[d]);
    grid.cell_size.push_back(cs);
    grid.origin.push_back(lo[d] + 0.5 * cs);
    grid.shape.push_back(shape[d]);
  }
  return grid;
}

void Domain::validate() const {
  if (dimension < 1)
    throw Error(ErrorCode::InvalidGeometry, "domain dimension must be >= 1",
                {id});
  if (extent.lo.size() != dimension || extent.hi.size() != dimension ||
      grid.origin.size() != dimension || grid.cell_size.size() != dimension ||
      grid.shape.size() != dimension)
    throw Error(ErrorCode::DimensionMismatch,
                "extent/grid dimensions disagree with the domain", {id});
  for (std::size_t d = 0; d < dimension; ++d) {
    if (!(extent.hi[d] > extent.lo[d]) || !std::isfinite(extent.lo[d]) ||
        !std::isfinite(extent.hi[d]))
      throw Error(ErrorCode::InvalidGeometry, "degenerate domain extent",
                  {id});
    if (grid.shape[d] == 0 || !(grid.cell_size[d] > 0.0))
      throw Error(ErrorCode::InvalidGeometry, "empty grid axis", {id});
    const double tol = 1e-6 * grid.cell_size[d];
    const double first_edge = grid.origin[d] - 0.5 * grid.cell_size[d];
    const double last_edge =
        grid.coordinate(d, grid.shape[d] - 1) + 0.5 * grid.cell_size[d];
    if (std::abs(first_edge - extent.lo[d]) > tol ||
        std::abs(last_edge - extent.hi[d]) > tol)
      throw Error(ErrorCode::InvalidGeometry,
                  "grid cells must tile the domain extent", {id});
  }
}

bool Domain::contains(std::span<const double> x) const {
  if (x.size() != dimension)
    return false;
  double tol = 0.0;
  for (double cs : grid.cell_size)
    tol = std::max(tol, kRelTol * cs);
  return point_in_extent(extent, x, tol);
}

double Domain::largest_extent() const {
  double best = 0.0;
  for (std::size_t d = 0; d < dimension; ++d)
    best = std::max(best, extent.hi[d] - extent.lo[d]);
  return best;
}

const char *to_string(AggregationKind kind) {
  switch (kind) {
  case AggregationKind::Average: return "average";
  case AggregationKind::Sum: return "sum";
  case AggregationKind::Custom: return "custom";
  }
  return "average";
}

AggregationKind aggregation_from_string(const std::string &name) {
  if (name == "average")
    return AggregationKind::Average;
  if (name == "sum")
    return AggregationKind::Sum;
  if (name == "custom")
    return AggregationKind::Custom;
  throw Error(ErrorCode::InvalidArgument, "unknown aggregation kind", {name});
}

AggregationRule Partition::rule_for(std::size_t n) const {
  switch (aggregation) {
  case AggregationKind::Average: return AggregationRule::average();
  case AggregationKind::Sum: return AggregationRule::sum();
  case AggregationKind::Custom:
    if (n >= custom_weights.size())
      throw Error(ErrorCode::LengthMismatch,
                  "custom aggregation needs one weight list per support",
                  {id});
    return AggregationRule::custom(custom_weights[n]);
  }
  return {};
}

std::vector<std::size_t> membership(const Support &support,
                                    const GridSpec &grid) {
  if (const auto *interval = std::get_if<Interval>(&support.body)) {
    if (grid.dimension() != 1)
      throw Error(ErrorCode::DimensionMismatch,
                  "interval supports need a 1-D grid", {support.id});
    const double tol = axis_tol(grid, 0);
    std::vector<std::size_t> members;
    // Candidate range from the closed form, then exact filtering.
    const double first =
        std::ceil((interval->lo - tol - grid.origin[0]) / grid.cell_size[0]);
    const std::size_t start =
        first <= 0.0 ? 0 : static_cast<std::size_t>(first);
    for (std::size_t i = start > 0 ? start - 1 : 0; i < grid.shape[0]; ++i) {
      const double x = grid.coordinate(0, i);
      if (x >= interval->hi - tol)
        break;
      if (x >= interval->lo - tol)
        members.push_back(i);
    }
    if (members.empty())
      throw Error(ErrorCode::EmptySupport,
                  "no grid point falls inside the interval (grid too coarse)",
                  {support.id});
    return members;
  }
  if (const auto *cells = std::get_if<CellSet>(&support.body)) {
    if (cells->cells.empty())
      throw Error(ErrorCode::EmptySupport, "empty cell set", {support.id});
    return cells->cells;
  }
  const auto &site = std::get<PointSite>(support.body);
  if (site.x.size() != grid.dimension())
    throw Error(ErrorCode::DimensionMismatch, "point dimension", {support.id});
  std::vector<std::size_t> index(grid.dimension());
  for (std::size_t d = 0; d < grid.dimension(); ++d) {
    const double edge = grid.origin[d] - 0.5 * grid.cell_size[d];
    const double raw = std::floor((site.x[d] - edge) / grid.cell_size[d]);
    const double clamped =
        std::clamp(raw, 0.0, static_cast<double>(grid.shape[d] - 1));
    index[d] = static_cast<std::size_t>(clamped);
  }
  return {grid.ravel(index)};
}

std::vector<double> weight_vector(const Support &support, const GridSpec &grid,
                                  const AggregationRule &rule) {
  const std::size_t count = membership(support, grid).size();
  switch (rule.kind) {
  case AggregationKind::Average:
    return std::vector<double>(count, 1.0 / static_cast<double>(count));
  case AggregationKind::Sum:
    return std::vector<double>(count, 1.0);
  case AggregationKind::Custom:
    if (rule.weights.size() != count)
      throw Error(ErrorCode::LengthMismatch,
                  "custom weights must match the member-point count (" +
                      std::to_string(count) + ")",
                  {support.id});
    for (double w : rule.weights)
      if (!std::isfinite(w))
        throw Error(ErrorCode::InvalidArgument, "non-finite custom weight",
                    {support.id});
    return rule.weights;
  }
  return {};
}

double weight_total(const Support &support, const GridSpec &grid,
                    const AggregationRule &rule) {
  if (rule.kind == AggregationKind::Average)
    return 1.0;
  const auto w = weight_vector(support, grid, rule);
  return std::accumulate(w.begin(), w.end(), 0.0);
}

std::vector<double> centroid(const Support &support, const GridSpec &grid) {
  if (const auto *interval = std::get_if<Interval>(&support.body)) {
    if (!(interval->hi > interval->lo))
      throw Error(ErrorCode::EmptySupport, "degenerate interval", {support.id});
    return {0.5 * (interval->lo + interval->hi)};
  }
  if (const auto *site = std::get_if<PointSite>(&support.body))
    return site->x;
  const auto &cells = std::get<CellSet>(support.body).cells;
  if (cells.empty())
    throw Error(ErrorCode::EmptySupport, "empty cell set", {support.id});
  std::vector<double> mean(grid.dimension(), 0.0);
  for (std::size_t c : cells) {
    const auto x = grid.point(c);
    for (std::size_t d = 0; d < mean.size(); ++d)
      mean[d] += x[d];
  }
  for (double &m : mean)
    m /= static_cast<double>(cells.size());
  return mean;
}

namespace {

void validate_support(const Domain &domain, const Partition &partition,
                      const Support &support) {
  if (!support.domain_id.empty() && support.domain_id != domain.id)
    throw Error(ErrorCode::InvalidGeometry,
                "support belongs to another domain", {support.id});
  const GridSpec &grid = domain.grid;
  if (const auto *interval = std::get_if<Interval>(&support.body)) {
    if (domain.dimension != 1)
      throw Error(ErrorCode::DimensionMismatch,
                  "interval supports require a 1-D domain", {support.id});
    if (!std::isfinite(interval->lo) || !std::isfinite(interval->hi) ||
        !(interval->hi > interval->lo))
      throw Error(ErrorCode::InvalidGeometry, "interval needs hi > lo",
                  {support.id});
    const double tol = axis_tol(grid, 0);
    if (interval->lo < domain.extent.lo[0] - tol ||
        interval->hi > domain.extent.hi[0] + tol)
      throw Error(ErrorCode::OutOfBounds, "interval leaves the domain extent",
                  {support.id});
  } else if (const auto *cells = std::get_if<CellSet>(&support.body)) {
    if (cells->cells.empty())
      throw Error(ErrorCode::EmptySupport, "empty cell set", {support.id});
    for (std::size_t k = 0; k < cells->cells.size(); ++k) {
      if (cells->cells[k] >= grid.size())
        throw Error(ErrorCode::OutOfBounds, "cell index outside the grid",
                    {support.id, std::to_string(cells->cells[k])});
      if (k > 0 && cells->cells[k] <= cells->cells[k - 1])
        throw Error(ErrorCode::InvalidGeometry,
                    "cell indices must be strictly increasing", {support.id});
    }
  } else {
    const auto &site = std::get<PointSite>(support.body);
    if (site.x.size() != domain.dimension)
      throw Error(ErrorCode::DimensionMismatch, "point dimension",
                  {support.id});
    if (!domain.contains(site.x))
      throw Error(ErrorCode::OutOfBounds, "point outside the domain",
                  {support.id});
  }
  (void)partition;
}

} // namespace

void validate(const Domain &domain, std::span<const Partition> partitions) {
  domain.validate();
  for (const Partition &partition : partitions) {
    if (!partition.domain_id.empty() && partition.domain_id != domain.id)
      throw Error(ErrorCode::InvalidGeometry,
                  "partition belongs to another domain", {partition.id});
    if (partition.supports.empty())
      throw Error(ErrorCode::EmptyPartition, "partition has no supports",
                  {partition.id});
    std::set<std::string> ids;
    for (const Support &support : partition.supports) {
      if (!ids.insert(support.id).second)
        throw Error(ErrorCode::InvalidGeometry, "duplicate support id",
                    {partition.id, support.id});
      validate_support(domain, partition, support);
    }
    if (partition.aggregation == AggregationKind::Custom) {
      if (partition.custom_weights.size() != partition.supports.size())
        throw Error(ErrorCode::LengthMismatch,
                    "custom aggregation needs one weight list per support",
                    {partition.id});
      for (std::size_t n = 0; n < partition.supports.size(); ++n)
        weight_vector(partition.supports[n], domain.grid,
                      partition.rule_for(n));
    }

    const auto &supports = partition.supports;
    const bool all_intervals =
        std::all_of(supports.begin(), supports.end(),
                    [](const Support &s) { return s.is_interval(); });
    const bool all_points =
        std::all_of(supports.begin(), supports.end(),
                    [](const Support &s) { return s.is_point(); });
    if (all_intervals) {
      std::vector<std::size_t> order(supports.size());
      std::iota(order.begin(), order.end(), 0);
      auto lo = [&](std::size_t k) {
        return std::get<Interval>(supports[k].body).lo;
      };
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return lo(a) < lo(b); });
      const double tol = axis_tol(domain.grid, 0);
      for (std::size_t k = 1; k < order.size(); ++k) {
        const auto &prev = std::get<Interval>(supports[order[k - 1]].body);
        const auto &cur = std::get<Interval>(supports[order[k]].body);
        if (cur.lo < prev.hi - tol)
          throw Error(ErrorCode::OverlapError, "supports overlap",
                      {supports[order[k - 1]].id, supports[order[k]].id});
      }
    } else if (all_points) {
      for (std::size_t a = 0; a < supports.size(); ++a)
        for (std::size_t b = a + 1; b < supports.size(); ++b)
          if (std::get<PointSite>(supports[a].body).x ==
              std::get<PointSite>(supports[b].body).x)
            throw Error(ErrorCode::OverlapError, "supports coincide",
                        {supports[a].id, supports[b].id});
    } else {
      std::vector<std::size_t> owner(domain.grid.size(), supports.size());
      for (std::size_t k = 0; k < supports.size(); ++k) {
        if (supports[k].is_point())
          continue;
        for (std::size_t cell : membership(supports[k], domain.grid)) {
          if (owner[cell] != supports.size())
            throw Error(ErrorCode::OverlapError, "supports share grid cells",
                        {supports[owner[cell]].id, supports[k].id});
          owner[cell] = k;
        }
      }
    }
  }
}

std::vector<Support> regular_intervals(const Domain &domain, std::size_t count,
                                       const std::string &prefix) {
  if (domain.dimension != 1 || count == 0)
    throw Error(ErrorCode::InvalidArgument,
                "regular intervals need a 1-D domain and count >= 1",
                {domain.id});
  const double lo = domain.extent.lo[0];
  const double width = domain.extent.hi[0] - lo;
  std::vector<Support> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double a = lo + width * static_cast<double>(k) / count;
    const double b = k + 1 == count
                         ? domain.extent.hi[0]
                         : lo + width * static_cast<double>(k + 1) / count;
    out.push_back({prefix + std::to_string(k), domain.id, Interval{a, b}});
  }
  return out;
}

std::vector<Support> regular_blocks(const Domain &domain, std::size_t bx,
                                    std::size_t by, const std::string &prefix) {
  const GridSpec &grid = domain.grid;
  if (domain.dimension == 1)
    by = 1;
  if (domain.dimension > 2 || bx == 0 || by == 0 || bx > grid.shape[0] ||
      (domain.dimension == 2 && by > grid.shape[1]))
    throw Error(ErrorCode::InvalidArgument, "invalid block partition",
                {domain.id});
  auto edges = [](std::size_t n, std::size_t parts) {
    std::vector<std::size_t> e(parts + 1);
    for (std::size_t k = 0; k <= parts; ++k)
      e[k] = k * n / parts;
    return e;
  };
  const auto ex = edges(grid.shape[0], bx);
  const auto ey = domain.dimension == 2 ? edges(grid.shape[1], by)
                                        : std::vector<std::size_t>{0, 1};
  std::vector<Support> out;
  for (std::size_t i = 0; i < bx; ++i) {
    for (std::size_t j = 0; j < by; ++j) {
      CellSet cells;
      for (std::size_t a = ex[i]; a < ex[i + 1]; ++a)
        for (std::size_t b = ey[j]; b < ey[j + 1]; ++b) {
          if (domain.dimension == 2) {
            const std::size_t idx[2] = {a, b};
            cells.cells.push_back(grid.ravel(idx));
          } else {
            cells.cells.push_back(a);
          }
        }
      std::sort(cells.cells.begin(), cells.cells.end());
      out.push_back({prefix + std::to_string(i * by + j), domain.id,
                     std::move(cells)});
    }
  }
  return out;
}

} // namespace aggmogp
