#pragma once

#include "aggmogp/baselines.hpp"
#include "aggmogp/dataset.hpp"
#include "aggmogp/inference.hpp"

#include <Eigen/Core>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aggmogp {

/// Mean absolute percentage error; throws ZeroTruth naming every zero entry.
double mape(std::span<const double> y_true, std::span<const double> y_pred);

struct CvConfig {
  TrainConfig train;
  std::size_t tp = 100;
  IntegrationMode mode = IntegrationMode::Auto;
  /// Refit every fold from scratch instead of warm-starting from the
  /// full-data fit with a fifth of the iterations.
  bool exact_refits = false;
};

struct CvResult {
  std::size_t chosen = 0;
  std::vector<std::size_t> candidates;
  std::vector<double> errors; // mean absolute percentage error per candidate
};

/// Leave-one-out selection of the latent count over the held-out
/// observations of the target dataset. Only training datasets are read.
CvResult cv_select_L(Method method, const DatasetCollection &collection,
                     const TargetRef &target,
                     const std::vector<std::size_t> &candidates,
                     const CvConfig &config);

/// Picks the minimum error; ties go to the earliest (smallest) candidate.
std::size_t argmin_candidate(const std::vector<std::size_t> &candidates,
                             const std::vector<double> &errors);

struct ExperimentSpec {
  TargetRef target;
  /// Observed coarse versions of the target dataset, one per coarseness
  /// level; each replaces the target's training dataset in turn. Empty means
  /// use the training dataset as is.
  std::vector<std::string> coarse_partitions;
  std::string fine_partition;
  std::vector<Method> methods;
  std::optional<std::size_t> latents; // nullopt: choose by cross-validation
  std::vector<std::uint64_t> seeds;
  TrainConfig train;
  std::size_t tp = 100;
  IntegrationMode mode = IntegrationMode::Auto;
  bool exact_refits = false;
};

struct CoregionalizationMatrix {
  std::string domain_id;
  std::vector<std::string> attributes;
  Eigen::MatrixXd value; // |W' W'^T| elementwise
};

struct MethodResult {
  Method method = Method::AmogpTrans;
  std::string coarse_partition;
  std::vector<double> mape;           // per seed; NaN for a failed seed
  std::vector<std::size_t> latents;   // per seed; 0 for a failed seed
  std::vector<std::string> failures;  // "seed <s>: <message>"
  double mean = 0.0;
  double standard_error = 0.0;        // across successful seeds
  std::vector<CoregionalizationMatrix> coregionalization; // first good seed
  std::vector<double> train_seconds;  // per seed, not part of the report file
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::vector<MethodResult> results; // methods outer, coarse levels inner
};

/// Collection in which the target's training dataset is replaced by the
/// observed partition `coarse_id`.
DatasetCollection with_training_partition(const DatasetCollection &collection,
                                          const TargetRef &target,
                                          const std::string &coarse_id);

std::vector<CoregionalizationMatrix>
coregionalization(const FittedModel &model);

/// Trains and scores every (method, coarseness level, seed) combination.
/// Seed failures are recorded and the run continues.
ExperimentReport run_experiment(const ExperimentSpec &spec,
                                const DatasetCollection &collection,
                                const std::map<std::string, std::vector<double>> &truth);

} // namespace aggmogp
