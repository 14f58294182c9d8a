#include "aggmogp/baselines.hpp"

#include "aggmogp/error.hpp"

#include <algorithm>
#include <set>

namespace aggmogp {

const char *to_string(Method method) {
  switch (method) {
  case Method::Agp:
    return "agp";
  case Method::Slfm:
    return "slfm";
  case Method::Amogp:
    return "amogp";
  case Method::AmogpTrans:
    return "amogp-trans";
  }
  return "?";
}

Method method_from_string(const std::string &name) {
  for (Method m : {Method::Agp, Method::Slfm, Method::Amogp, Method::AmogpTrans})
    if (name == to_string(m))
      return m;
  throw Error(ErrorCode::InvalidArgument, "unknown method", {name});
}

DatasetCollection restrict_collection(Method method,
                                      const DatasetCollection &collection,
                                      const TargetRef &target) {
  collection.domain_index(target.domain_id);
  collection.attribute_index(target.attribute_id);
  DatasetCollection out;
  auto keep = [&](const Partition &p) {
    switch (method) {
    case Method::Agp:
      return p.domain_id == target.domain_id &&
             p.attribute_id == target.attribute_id;
    case Method::Slfm:
    case Method::Amogp:
      return p.domain_id == target.domain_id;
    case Method::AmogpTrans:
      return true;
    }
    return false;
  };
  std::set<std::string> domains, attributes;
  for (const auto &d : collection.datasets)
    if (keep(d.partition)) {
      out.datasets.push_back(d);
      domains.insert(d.partition.domain_id);
      attributes.insert(d.partition.attribute_id);
    }
  if (!collection.find_dataset(target.domain_id, target.attribute_id))
    throw Error(ErrorCode::InvalidArgument, "target has no training dataset",
                {target.domain_id, target.attribute_id});
  for (const auto &d : collection.domains)
    if (domains.count(d.id))
      out.domains.push_back(d);
  for (const auto &a : collection.attributes)
    if (attributes.count(a))
      out.attributes.push_back(a);
  for (const auto &t : collection.targets)
    if (domains.count(t.partition.domain_id) &&
        attributes.count(t.partition.attribute_id))
      out.targets.push_back(t);
  return out;
}

namespace {

Partition centroid_partition(const Partition &p, const Domain &domain) {
  Partition out = p;
  out.aggregation = AggregationKind::Average;
  out.custom_weights.clear();
  for (auto &s : out.supports)
    s.body = PointSite{centroid(s, domain.grid)};
  return out;
}

void require_single_domain(const DatasetCollection &c, const char *what) {
  std::set<std::string> ids;
  for (const auto &d : c.datasets)
    ids.insert(d.partition.domain_id);
  if (ids.size() != 1)
    throw Error(ErrorCode::InvalidArgument,
                std::string(what) + " needs training data in exactly one domain");
}

} // namespace

DatasetCollection centroid_collection(const DatasetCollection &collection) {
  DatasetCollection out = collection;
  for (auto &d : out.datasets)
    d.partition = centroid_partition(
        d.partition, collection.domain(d.partition.domain_id));
  for (auto &t : out.targets)
    t.partition = centroid_partition(
        t.partition, collection.domain(t.partition.domain_id));
  return out;
}

FittedModel fit_amogp(const DatasetCollection &collection,
                      std::size_t num_latents, const TrainConfig &config,
                      IntegrationMode mode) {
  FittedModel m;
  m.method = Method::AmogpTrans;
  m.collection = collection;
  m.data = build_aggregated(collection, mode);
  const ModelState init = initial_state(m.data, num_latents, config.seed);
  FitResult r = fit(m.data, config, init);
  m.state = std::move(r.state);
  m.trace = std::move(r.trace);
  return m;
}

FittedModel fit_agp(const DatasetCollection &collection,
                    const TrainConfig &config, IntegrationMode mode) {
  if (collection.datasets.size() != 1)
    throw Error(ErrorCode::InvalidArgument,
                "agp needs exactly one training dataset",
                {std::to_string(collection.datasets.size())});
  FittedModel m = fit_amogp(collection, 1, config, mode);
  m.method = Method::Agp;
  return m;
}

FittedModel fit_slfm(const DatasetCollection &collection,
                     std::size_t num_latents, const TrainConfig &config,
                     IntegrationMode mode) {
  require_single_domain(collection, "slfm");
  FittedModel m = fit_amogp(centroid_collection(collection), num_latents,
                            config, mode);
  m.method = Method::Slfm;
  return m;
}

FittedModel fit_method(Method method, const DatasetCollection &collection,
                       const TargetRef &target, std::size_t num_latents,
                       const TrainConfig &config, IntegrationMode mode) {
  const DatasetCollection restricted =
      restrict_collection(method, collection, target);
  FittedModel m;
  switch (method) {
  case Method::Agp:
    return fit_agp(restricted, config, mode);
  case Method::Slfm:
    return fit_slfm(restricted, num_latents, config, mode);
  case Method::Amogp:
    m = fit_amogp(restricted, num_latents, config, mode);
    m.method = Method::Amogp;
    return m;
  case Method::AmogpTrans:
    return fit_amogp(restricted, num_latents, config, mode);
  }
  return m;
}

Partition prediction_partition(const FittedModel &model,
                               const Partition &partition) {
  if (model.method != Method::Slfm)
    return partition;
  bool points = std::all_of(partition.supports.begin(), partition.supports.end(),
                            [](const Support &s) { return s.is_point(); });
  if (points)
    return partition;
  return centroid_partition(partition,
                            model.collection.domain(partition.domain_id));
}

} // namespace aggmogp
