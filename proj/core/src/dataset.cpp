#include "aggmogp/dataset.hpp"

#include "aggmogp/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace aggmogp {

const Domain &DatasetCollection::domain(const std::string &id) const {
  return domains[domain_index(id)];
}

std::size_t DatasetCollection::domain_index(const std::string &id) const {
  for (std::size_t v = 0; v < domains.size(); ++v)
    if (domains[v].id == id)
      return v;
  throw Error(ErrorCode::InvalidArgument, "unknown domain", {id});
}

std::size_t DatasetCollection::attribute_index(const std::string &id) const {
  const auto it = std::find(attributes.begin(), attributes.end(), id);
  if (it == attributes.end())
    throw Error(ErrorCode::InvalidArgument, "unknown attribute", {id});
  return static_cast<std::size_t>(it - attributes.begin());
}

const ObservedPartition &
DatasetCollection::find_partition(const std::string &id) const {
  for (const auto &d : datasets)
    if (d.partition.id == id)
      return d;
  for (const auto &t : targets)
    if (t.partition.id == id)
      return t;
  throw Error(ErrorCode::InvalidArgument, "unknown partition", {id});
}

const ObservedPartition *
DatasetCollection::find_dataset(const std::string &domain_id,
                                const std::string &attribute_id) const {
  for (const auto &d : datasets)
    if (d.partition.domain_id == domain_id &&
        d.partition.attribute_id == attribute_id)
      return &d;
  return nullptr;
}

void DatasetCollection::validate() const {
  std::set<std::string> ids;
  for (const Domain &d : domains) {
    if (!ids.insert("domain:" + d.id).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate domain id", {d.id});
    d.validate();
  }
  std::set<std::string> attr(attributes.begin(), attributes.end());
  if (attr.size() != attributes.size())
    throw Error(ErrorCode::InvalidArgument, "duplicate attribute id");

  std::set<std::pair<std::string, std::string>> trained;
  auto check = [&](const ObservedPartition &op, bool training) {
    const Partition &p = op.partition;
    if (!ids.insert("partition:" + p.id).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate partition id", {p.id});
    if (!attr.count(p.attribute_id))
      throw Error(ErrorCode::InvalidArgument,
                  "attribute missing from the catalogue", {p.id, p.attribute_id});
    const Domain &dom = domain(p.domain_id);
    aggmogp::validate(dom, std::span<const Partition>(&p, 1));
    if (training) {
      if (!trained.emplace(p.domain_id, p.attribute_id).second)
        throw Error(ErrorCode::InvalidArgument,
                    "more than one training dataset for a (domain, attribute)",
                    {p.domain_id, p.attribute_id});
      if (op.values.size() != p.supports.size())
        throw Error(ErrorCode::LengthMismatch,
                    "values must have one entry per support", {p.id});
    } else if (!op.values.empty() && op.values.size() != p.supports.size()) {
      throw Error(ErrorCode::LengthMismatch,
                  "values must have one entry per support", {p.id});
    }
    for (double y : op.values)
      if (!std::isfinite(y))
        throw Error(ErrorCode::InvalidArgument, "non-finite value", {p.id});
  };
  for (const auto &d : datasets)
    check(d, true);
  for (const auto &t : targets)
    check(t, false);
}

Normalization fit_normalization(const std::vector<double> &values,
                                const std::vector<double> &weight_totals) {
  Normalization t;
  if (values.empty())
    return t;
  double sum = 0.0, wsum = 0.0;
  for (std::size_t n = 0; n < values.size(); ++n) {
    sum += values[n];
    wsum += weight_totals[n];
  }
  t.mean = wsum != 0.0 ? sum / wsum : 0.0;
  if (values.size() > 1) {
    double ss = 0.0;
    for (std::size_t n = 0; n < values.size(); ++n) {
      const double r = values[n] - t.mean * weight_totals[n];
      ss += r * r;
    }
    const double sd = std::sqrt(ss / static_cast<double>(values.size()));
    if (sd > 0.0 && std::isfinite(sd))
      t.scale = sd;
  }
  return t;
}

std::optional<std::size_t> DomainData::local_index(std::size_t attribute) const {
  for (std::size_t b = 0; b < blocks.size(); ++b)
    if (blocks[b].attribute == attribute)
      return b;
  return std::nullopt;
}

std::vector<ResolvedSupport> DomainData::all_resolved() const {
  std::vector<ResolvedSupport> all;
  for (const auto &b : blocks)
    all.insert(all.end(), b.resolved.begin(), b.resolved.end());
  return all;
}

std::size_t AggregatedDataset::domain_position(const std::string &domain_id) const {
  for (std::size_t v = 0; v < domains.size(); ++v)
    if (domains[v].domain.id == domain_id)
      return v;
  throw Error(ErrorCode::InvalidArgument, "domain has no training data",
              {domain_id});
}

std::vector<std::vector<std::size_t>> AggregatedDataset::attribute_map() const {
  std::vector<std::vector<std::size_t>> map;
  for (const auto &d : domains) {
    std::vector<std::size_t> m;
    for (const auto &b : d.blocks)
      m.push_back(b.attribute);
    map.push_back(std::move(m));
  }
  return map;
}

AggregatedDataset build_aggregated(const DatasetCollection &collection,
                                   IntegrationMode mode) {
  collection.validate();
  AggregatedDataset out;
  out.attributes = collection.attributes;
  out.mode = mode;
  for (const Domain &domain : collection.domains) {
    DomainData dd;
    dd.domain = domain;
    for (std::size_t s = 0; s < collection.attributes.size(); ++s) {
      const ObservedPartition *op =
          collection.find_dataset(domain.id, collection.attributes[s]);
      if (!op)
        continue;
      AttributeBlock block;
      block.attribute = s;
      block.dataset_id = op->partition.id;
      block.partition = op->partition;
      const std::size_t n = op->values.size();
      for (std::size_t k = 0; k < n; ++k)
        block.weight_totals.push_back(weight_total(
            op->partition.supports[k], domain.grid, op->partition.rule_for(k)));
      block.transform = fit_normalization(op->values, block.weight_totals);
      block.y.resize(static_cast<Eigen::Index>(n));
      for (std::size_t k = 0; k < n; ++k)
        block.y[static_cast<Eigen::Index>(k)] =
            block.transform.normalize(op->values[k], block.weight_totals[k]);
      block.resolved = resolve_partition(op->partition, domain.grid, mode);
      dd.blocks.push_back(std::move(block));
    }
    if (dd.blocks.empty())
      continue;
    std::size_t total = 0;
    for (auto &b : dd.blocks) {
      b.offset = total;
      total += static_cast<std::size_t>(b.y.size());
    }
    dd.y.resize(static_cast<Eigen::Index>(total));
    dd.row_block.resize(total);
    for (std::size_t b = 0; b < dd.blocks.size(); ++b) {
      const auto &blk = dd.blocks[b];
      dd.y.segment(static_cast<Eigen::Index>(blk.offset), blk.y.size()) = blk.y;
      std::fill_n(dd.row_block.begin() + static_cast<std::ptrdiff_t>(blk.offset),
                  blk.y.size(), b);
    }
    dd.plan = std::make_shared<const SupportCovariancePlan>(
        SupportCovariancePlan::symmetric(domain.grid, dd.all_resolved()));
    out.domains.push_back(std::move(dd));
  }
  if (out.domains.empty())
    throw Error(ErrorCode::InvalidArgument, "no training datasets");
  return out;
}

} // namespace aggmogp
