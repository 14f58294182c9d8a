#pragma once

#include "aggmogp/dataset.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace aggmogp {

/// A regular partition: bins per axis ({count} in 1-D, {bx, by} in 2-D).
struct SynthPartition {
  std::string id;
  std::string attribute;
  std::vector<std::size_t> bins;
  /// Training partitions get noisy observations; evaluation partitions get
  /// noiseless truth only (written separately from the dataset).
  bool observed = true;
  /// Extra coarse versions of a training dataset are observed but stored as
  /// prediction targets, so an experiment can swap them in.
  bool training = true;
};

struct SynthDomain {
  std::string id;
  Extent extent;
  std::vector<std::size_t> shape; // grid cells per axis
  std::vector<SynthPartition> partitions;
  /// Per-attribute noise variance in raw units (catalogue order).
  std::vector<double> noise_var;
  /// Fixed |S| x |L| mixing weights; drawn from the prior when absent.
  std::optional<Eigen::MatrixXd> weights;
};

struct SynthConfig {
  std::vector<std::string> attributes;
  std::vector<double> beta; // true kernel scales, one per latent
  Eigen::MatrixXd prior_w_bar; // |S| x |L|
  Eigen::MatrixXd prior_eta2;  // |S| x |L|
  /// Per-attribute constant added to every field, keeping values away from
  /// zero so percentage errors are defined.
  std::vector<double> offsets;
  std::vector<SynthDomain> domains;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthResult {
  DatasetCollection collection;
  /// Noiseless aggregated values of every generated partition, by id.
  std::map<std::string, std::vector<double>> truth;
  /// Mixing weights actually used, per domain.
  std::vector<Eigen::MatrixXd> weights;
  /// Pointwise fields on the grid: fields[v] is |G_v| x |S|.
  std::vector<Eigen::MatrixXd> fields;
};

/// Draws latent fields exactly on each domain grid, mixes, aggregates by
/// averaging over each partition, and adds observation noise.
SynthResult synth_generate(const SynthConfig &config);

} // namespace aggmogp
