#pragma once

#include "aggmogp/dataset.hpp"
#include "aggmogp/geometry.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace fixtures {

inline aggmogp::Domain line_domain(const std::string &id, std::size_t cells,
                                   double lo = 0.0, double hi = 1.0) {
  aggmogp::Domain d;
  d.id = id;
  d.dimension = 1;
  d.extent = {{lo}, {hi}};
  const std::array<double, 1> l{lo}, h{hi};
  const std::array<std::size_t, 1> s{cells};
  d.grid = aggmogp::GridSpec::covering(l, h, s);
  return d;
}

inline aggmogp::Domain square_domain(const std::string &id, std::size_t nx,
                                     std::size_t ny) {
  aggmogp::Domain d;
  d.id = id;
  d.dimension = 2;
  d.extent = {{0.0, 0.0}, {1.0, 1.0}};
  const std::array<double, 2> l{0.0, 0.0}, h{1.0, 1.0};
  const std::array<std::size_t, 2> s{nx, ny};
  d.grid = aggmogp::GridSpec::covering(l, h, s);
  return d;
}

inline aggmogp::ObservedPartition
interval_dataset(const aggmogp::Domain &domain, const std::string &id,
                 const std::string &attribute, std::size_t count,
                 std::vector<double> values) {
  aggmogp::ObservedPartition p;
  p.partition.id = id;
  p.partition.attribute_id = attribute;
  p.partition.domain_id = domain.id;
  p.partition.supports = aggmogp::regular_intervals(domain, count, id + "_");
  p.values = std::move(values);
  return p;
}

inline aggmogp::ObservedPartition
cell_dataset(const aggmogp::Domain &domain, const std::string &id,
             const std::string &attribute,
             const std::vector<std::vector<std::size_t>> &cells,
             std::vector<double> values) {
  aggmogp::ObservedPartition p;
  p.partition.id = id;
  p.partition.attribute_id = attribute;
  p.partition.domain_id = domain.id;
  for (std::size_t k = 0; k < cells.size(); ++k)
    p.partition.supports.push_back(
        {id + "_" + std::to_string(k), domain.id, aggmogp::CellSet{cells[k]}});
  p.values = std::move(values);
  return p;
}

inline std::vector<double> wave(std::size_t n, double phase = 0.0,
                                double offset = 0.0) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = offset + std::sin(0.9 * static_cast<double>(i) + phase) +
           0.3 * std::cos(2.3 * static_cast<double>(i));
  return v;
}

/// One domain on [0, 1] with 64 grid points, attribute "a" averaged over 8
/// equal intervals and attribute "b" over 4 interleaved cell sets.
inline aggmogp::DatasetCollection two_attribute_line() {
  aggmogp::DatasetCollection c;
  c.domains.push_back(line_domain("d0", 64));
  c.attributes = {"a", "b"};
  c.datasets.push_back(interval_dataset(c.domains[0], "pa", "a", 8, wave(8)));
  std::vector<std::vector<std::size_t>> cells(4);
  for (std::size_t i = 0; i < 64; ++i)
    cells[(i / 4) % 4].push_back(i);
  c.datasets.push_back(cell_dataset(c.domains[0], "pb", "b", cells, wave(4, 1.0)));
  return c;
}

/// Two domains sharing attribute "a"; "b" only exists in the first.
inline aggmogp::DatasetCollection two_domain_line() {
  aggmogp::DatasetCollection c;
  c.domains.push_back(line_domain("d0", 24));
  c.domains.push_back(line_domain("d1", 24));
  c.attributes = {"a", "b"};
  c.datasets.push_back(interval_dataset(c.domains[0], "d0a", "a", 4, wave(4)));
  c.datasets.push_back(interval_dataset(c.domains[0], "d0b", "b", 3, wave(3, 0.5)));
  c.datasets.push_back(interval_dataset(c.domains[1], "d1a", "a", 5, wave(5, 2.0)));
  return c;
}

inline Eigen::VectorXd grid_points(const aggmogp::Domain &domain) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(domain.grid.size()));
  for (std::size_t i = 0; i < domain.grid.size(); ++i)
    x[static_cast<Eigen::Index>(i)] = domain.grid.coordinate(0, i);
  return x;
}

} // namespace fixtures
