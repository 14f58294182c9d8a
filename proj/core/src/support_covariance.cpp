#include "aggmogp/support_covariance.hpp"

#include "aggmogp/error.hpp"

#include <algorithm>
#include <bit>
#include <unordered_map>

namespace aggmogp {

const char *to_string(IntegrationMode mode) {
  return mode == IntegrationMode::Grid ? "grid" : "auto";
}

IntegrationMode integration_mode_from_string(const std::string &name) {
  if (name == "auto")
    return IntegrationMode::Auto;
  if (name == "grid")
    return IntegrationMode::Grid;
  throw Error(ErrorCode::InvalidArgument, "unknown integration mode", {name});
}

ResolvedSupport resolve_support(const Support &support, const GridSpec &grid,
                                const AggregationRule &rule,
                                IntegrationMode mode) {
  ResolvedSupport out;
  out.id = support.id;
  if (const auto *site = std::get_if<PointSite>(&support.body)) {
    if (mode == IntegrationMode::Auto) {
      out.kind = ResolvedSupport::Kind::Point;
      out.point = site->x;
      if (rule.kind == AggregationKind::Custom && rule.weights.size() != 1)
        throw Error(ErrorCode::LengthMismatch,
                    "a point support takes exactly one weight", {support.id});
      return out;
    }
  }
  const auto *interval = std::get_if<Interval>(&support.body);
  if (interval && mode == IntegrationMode::Auto &&
      rule.kind == AggregationKind::Average) {
    out.kind = ResolvedSupport::Kind::Interval;
    out.lo = interval->lo;
    out.hi = interval->hi;
    // Members are only needed when this interval meets a cell set.
    try {
      out.cells = membership(support, grid);
      out.weights = weight_vector(support, grid, rule);
      out.has_members = true;
    } catch (const Error &e) {
      if (e.code() != ErrorCode::EmptySupport)
        throw;
    }
    return out;
  }
  out.kind = ResolvedSupport::Kind::Cells;
  out.cells = membership(support, grid);
  out.weights = weight_vector(support, grid, rule);
  out.has_members = true;
  return out;
}

std::vector<ResolvedSupport> resolve_partition(const Partition &partition,
                                               const GridSpec &grid,
                                               IntegrationMode mode) {
  std::vector<ResolvedSupport> out;
  out.reserve(partition.supports.size());
  for (std::size_t n = 0; n < partition.supports.size(); ++n)
    out.push_back(resolve_support(partition.supports[n], grid,
                                  partition.rule_for(n), mode));
  return out;
}

namespace {

using Kind = ResolvedSupport::Kind;

GridView make_view(const GridSpec &grid) {
  return GridView(grid.cell_size, grid.shape);
}

DistanceTable point_table(const GridSpec &grid, const std::vector<double> &x,
                          const ResolvedSupport &cells) {
  std::vector<std::pair<double, double>> raw;
  raw.reserve(cells.cells.size());
  for (std::size_t i = 0; i < cells.cells.size(); ++i) {
    const auto p = grid.point(cells.cells[i]);
    double sq = 0.0;
    for (std::size_t d = 0; d < p.size(); ++d)
      sq += (p[d] - x[d]) * (p[d] - x[d]);
    raw.emplace_back(sq, cells.weights[i]);
  }
  std::sort(raw.begin(), raw.end());
  DistanceTable table;
  for (const auto &[sq, w] : raw) {
    if (!table.sq_dist.empty() &&
        std::bit_cast<std::uint64_t>(table.sq_dist.back()) ==
            std::bit_cast<std::uint64_t>(sq)) {
      table.mass.back() += w;
    } else {
      table.sq_dist.push_back(sq);
      table.mass.push_back(w);
    }
  }
  return table;
}

void require_members(const ResolvedSupport &s) {
  if (!s.has_members)
    throw Error(ErrorCode::EmptySupport,
                "support has no grid points but is paired with a cell set",
                {s.id});
}

} // namespace

std::uint32_t SupportCovariancePlan::intern_lag(double lag) {
  if (lag == 0.0)
    lag = 0.0; // fold -0.0 onto +0.0
  const auto [it, inserted] = lag_index_.try_emplace(
      std::bit_cast<std::uint64_t>(lag),
      static_cast<std::uint32_t>(lags_.size()));
  if (inserted)
    lags_.push_back(lag);
  return it->second;
}

void SupportCovariancePlan::add_pair(const GridSpec &grid, const GridView &view,
                                     const ResolvedSupport &a,
                                     const ResolvedSupport &b,
                                     std::uint32_t row, std::uint32_t col) {
  Pair pair{row, col, PairKind::Table, 0};
  if (a.kind == Kind::Interval && b.kind == Kind::Interval) {
    LagTerm term{};
    term.lag[0] = intern_lag(a.hi - b.lo);
    term.lag[1] = intern_lag(a.lo - b.lo);
    term.lag[2] = intern_lag(a.hi - b.hi);
    term.lag[3] = intern_lag(a.lo - b.hi);
    term.norm = 1.0 / ((a.hi - a.lo) * (b.hi - b.lo));
    pair.kind = PairKind::Lag;
    pair.index = static_cast<std::uint32_t>(lag_terms_.size());
    lag_terms_.push_back(term);
  } else if ((a.kind == Kind::Point && b.kind == Kind::Interval) ||
             (a.kind == Kind::Interval && b.kind == Kind::Point)) {
    const auto &p = a.kind == Kind::Point ? a : b;
    const auto &i = a.kind == Kind::Point ? b : a;
    pair.kind = PairKind::PointInterval;
    pair.index = static_cast<std::uint32_t>(point_interval_.size());
    point_interval_.push_back({p.point[0], i.lo, i.hi, 1.0 / (i.hi - i.lo)});
  } else if (a.kind == Kind::Point && b.kind == Kind::Point) {
    double sq = 0.0;
    for (std::size_t d = 0; d < a.point.size(); ++d)
      sq += (a.point[d] - b.point[d]) * (a.point[d] - b.point[d]);
    pair.index = static_cast<std::uint32_t>(tables_.size());
    tables_.push_back({{sq}, {1.0}});
  } else if (a.kind == Kind::Point || b.kind == Kind::Point) {
    const auto &p = a.kind == Kind::Point ? a : b;
    const auto &c = a.kind == Kind::Point ? b : a;
    require_members(c);
    pair.index = static_cast<std::uint32_t>(tables_.size());
    tables_.push_back(point_table(grid, p.point, c));
  } else {
    require_members(a);
    require_members(b);
    pair.index = static_cast<std::uint32_t>(tables_.size());
    tables_.push_back(
        weighted_distance_table(view, a.cells, a.weights, b.cells, b.weights));
  }
  pairs_.push_back(pair);
}

SupportCovariancePlan
SupportCovariancePlan::symmetric(const GridSpec &grid,
                                 const std::vector<ResolvedSupport> &supports) {
  SupportCovariancePlan plan;
  plan.rows_ = plan.cols_ = supports.size();
  plan.symmetric_ = true;
  const GridView view = make_view(grid);
  for (std::size_t n = 0; n < supports.size(); ++n)
    for (std::size_t m = n; m < supports.size(); ++m)
      plan.add_pair(grid, view, supports[n], supports[m],
                    static_cast<std::uint32_t>(n),
                    static_cast<std::uint32_t>(m));
  return plan;
}

SupportCovariancePlan
SupportCovariancePlan::cross(const GridSpec &grid,
                             const std::vector<ResolvedSupport> &rows,
                             const std::vector<ResolvedSupport> &cols) {
  SupportCovariancePlan plan;
  plan.rows_ = rows.size();
  plan.cols_ = cols.size();
  const GridView view = make_view(grid);
  for (std::size_t n = 0; n < rows.size(); ++n)
    for (std::size_t m = 0; m < cols.size(); ++m)
      plan.add_pair(grid, view, rows[n], cols[m], static_cast<std::uint32_t>(n),
                    static_cast<std::uint32_t>(m));
  return plan;
}

SupportCovariancePlan
SupportCovariancePlan::diagonal(const GridSpec &grid,
                                const std::vector<ResolvedSupport> &supports) {
  SupportCovariancePlan plan;
  plan.rows_ = plan.cols_ = supports.size();
  const GridView view = make_view(grid);
  for (std::size_t n = 0; n < supports.size(); ++n)
    plan.add_pair(grid, view, supports[n], supports[n],
                  static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n));
  return plan;
}

void SupportCovariancePlan::evaluate(const SEKernel &kernel,
                                     Eigen::MatrixXd &value,
                                     Eigen::MatrixXd *d_log_beta) const {
  value.setZero(static_cast<Eigen::Index>(rows_),
                static_cast<Eigen::Index>(cols_));
  if (d_log_beta)
    d_log_beta->setZero(static_cast<Eigen::Index>(rows_),
                        static_cast<Eigen::Index>(cols_));

  const double beta = kernel.beta();
  std::vector<ScaleGrad> potentials(lags_.size());
  for (std::size_t k = 0; k < lags_.size(); ++k)
    potentials[k] = interval_lag_potential(beta, lags_[k]);

  for (const Pair &pair : pairs_) {
    ScaleGrad g;
    switch (pair.kind) {
    case PairKind::Lag: {
      const LagTerm &t = lag_terms_[pair.index];
      const ScaleGrad &p0 = potentials[t.lag[0]];
      const ScaleGrad &p1 = potentials[t.lag[1]];
      const ScaleGrad &p2 = potentials[t.lag[2]];
      const ScaleGrad &p3 = potentials[t.lag[3]];
      g.value = ((p0.value + p3.value) - (p1.value + p2.value)) * t.norm;
      g.d_log_beta =
          ((p0.d_log_beta + p3.d_log_beta) - (p1.d_log_beta + p2.d_log_beta)) *
          t.norm;
      break;
    }
    case PairKind::PointInterval: {
      const PointIntervalTerm &t = point_interval_[pair.index];
      g = integral_point_interval_grad(kernel, t.x, t.lo, t.hi);
      g.value *= t.norm;
      g.d_log_beta *= t.norm;
      break;
    }
    case PairKind::Table:
      g = tables_[pair.index].evaluate(kernel);
      break;
    }
    value(pair.row, pair.col) = g.value;
    if (d_log_beta)
      (*d_log_beta)(pair.row, pair.col) = g.d_log_beta;
    if (symmetric_ && pair.row != pair.col) {
      value(pair.col, pair.row) = g.value;
      if (d_log_beta)
        (*d_log_beta)(pair.col, pair.row) = g.d_log_beta;
    }
  }
}

Eigen::MatrixXd SupportCovariancePlan::evaluate(const SEKernel &kernel) const {
  Eigen::MatrixXd value;
  evaluate(kernel, value, nullptr);
  return value;
}

} // namespace aggmogp
