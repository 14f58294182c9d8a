#pragma once

#include "aggmogp/dataset.hpp"
#include "aggmogp/inference.hpp"
#include "aggmogp/model.hpp"

#include <string>

namespace aggmogp {

/// agp: single-output aggregated GP on the target dataset alone.
/// slfm: multi-output GP on the target domain with every support collapsed
/// to its centroid. amogp: the full model on the target domain only.
/// amogp-trans: the full model on every domain, sharing the weight prior.
enum class Method { Agp, Slfm, Amogp, AmogpTrans };

const char *to_string(Method method);
Method method_from_string(const std::string &name);

/// Identifies the (domain, attribute) pair whose refinement is evaluated.
struct TargetRef {
  std::string domain_id;
  std::string attribute_id;
  bool operator==(const TargetRef &) const = default;
};

/// Keeps only the datasets a method is allowed to see; the attribute
/// catalogue shrinks to the attributes that still have training data and
/// prediction targets of dropped domains are removed.
DatasetCollection restrict_collection(Method method,
                                      const DatasetCollection &collection,
                                      const TargetRef &target);

/// Copy of a single-domain collection where every support (training and
/// target) is replaced by a point at its centroid.
DatasetCollection centroid_collection(const DatasetCollection &collection);

struct FittedModel {
  Method method = Method::AmogpTrans;
  DatasetCollection collection; // what the model was trained on
  AggregatedDataset data;
  ModelState state;
  TrainTrace trace;
};

/// Exactly one training dataset; one latent, standard initialization.
FittedModel fit_agp(const DatasetCollection &collection,
                    const TrainConfig &config,
                    IntegrationMode mode = IntegrationMode::Auto);

/// Single domain; supports collapsed to centroids before fitting.
FittedModel fit_slfm(const DatasetCollection &collection,
                     std::size_t num_latents, const TrainConfig &config,
                     IntegrationMode mode = IntegrationMode::Auto);

/// The full model on whatever the collection holds.
FittedModel fit_amogp(const DatasetCollection &collection,
                      std::size_t num_latents, const TrainConfig &config,
                      IntegrationMode mode = IntegrationMode::Auto);

/// Restricts the collection for `method`, then dispatches to the fitters.
/// The latent count is ignored for agp.
FittedModel fit_method(Method method, const DatasetCollection &collection,
                       const TargetRef &target, std::size_t num_latents,
                       const TrainConfig &config,
                       IntegrationMode mode = IntegrationMode::Auto);

/// Partition to predict for a fitted model: for slfm the centroid version.
Partition prediction_partition(const FittedModel &model,
                               const Partition &partition);

} // namespace aggmogp
