#pragma once

#include "aggmogp/geometry.hpp"
#include "aggmogp/support_covariance.hpp"

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace aggmogp {

/// A partition together with its support-level values. Training datasets
/// always carry values; prediction targets may carry ground truth or none.
struct ObservedPartition {
  Partition partition;
  std::vector<double> values;
};

/// In-memory form of a dataset file: geometry, the attribute catalogue,
/// training datasets, and extra named partitions for prediction.
struct DatasetCollection {
  std::vector<Domain> domains;
  std::vector<std::string> attributes;
  std::vector<ObservedPartition> datasets;
  std::vector<ObservedPartition> targets;

  const Domain &domain(const std::string &id) const;
  std::size_t domain_index(const std::string &id) const;
  std::size_t attribute_index(const std::string &id) const;
  /// Looks up a partition id among datasets first, then targets.
  const ObservedPartition &find_partition(const std::string &id) const;
  const ObservedPartition *find_dataset(const std::string &domain_id,
                                        const std::string &attribute_id) const;

  /// Geometry plus cross-reference checks: unique ids, known domains and
  /// attributes, at most one training dataset per (domain, attribute),
  /// finite values of matching length.
  void validate() const;
};

/// Affine map between raw and normalized units. For a support with
/// aggregation weight total W the raw value is mean * W + scale * normalized,
/// which for averaging reduces to the usual mean/scale standardization.
struct Normalization {
  double mean = 0.0;
  double scale = 1.0;

  double normalize(double raw, double weight_total = 1.0) const {
    return (raw - mean * weight_total) / scale;
  }
  double denormalize(double value, double weight_total = 1.0) const {
    return mean * weight_total + scale * value;
  }
  bool operator==(const Normalization &) const = default;
};

/// Fits the transform so the averaged values have zero mean and unit
/// (population) variance. A single observation or zero spread keeps scale 1.
Normalization fit_normalization(const std::vector<double> &values,
                                const std::vector<double> &weight_totals);

/// Training observations of one attribute inside one domain.
struct AttributeBlock {
  std::size_t attribute = 0; // global catalogue index
  std::string dataset_id;
  Partition partition;
  Eigen::VectorXd y; // normalized
  Normalization transform;
  std::vector<double> weight_totals;
  std::vector<ResolvedSupport> resolved;
  std::size_t offset = 0; // first row inside the domain vector
};

struct DomainData {
  Domain domain;
  std::vector<AttributeBlock> blocks; // catalogue order
  Eigen::VectorXd y;                  // stacked normalized observations
  std::vector<std::size_t> row_block; // block index of every row
  std::shared_ptr<const SupportCovariancePlan> plan;

  std::size_t size() const noexcept { return static_cast<std::size_t>(y.size()); }
  std::size_t num_attributes() const noexcept { return blocks.size(); }
  /// Local block index of a global attribute, if present.
  std::optional<std::size_t> local_index(std::size_t attribute) const;
  std::vector<ResolvedSupport> all_resolved() const;
};

/// Normalized training data ready for inference; domains without training
/// datasets are dropped, the rest keep catalogue order.
struct AggregatedDataset {
  std::vector<std::string> attributes;
  std::vector<DomainData> domains;
  IntegrationMode mode = IntegrationMode::Auto;

  std::size_t num_attributes() const noexcept { return attributes.size(); }
  std::size_t domain_position(const std::string &domain_id) const;
  /// Per domain, the global attribute index of every local block.
  std::vector<std::vector<std::size_t>> attribute_map() const;
};

AggregatedDataset build_aggregated(const DatasetCollection &collection,
                                   IntegrationMode mode = IntegrationMode::Auto);

} // namespace aggmogp
