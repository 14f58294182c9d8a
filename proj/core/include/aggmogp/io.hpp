#pragma once

#include "aggmogp/baselines.hpp"
#include "aggmogp/dataset.hpp"
#include "aggmogp/evaluation.hpp"
#include "aggmogp/inference.hpp"
#include "aggmogp/model.hpp"
#include "aggmogp/prediction.hpp"
#include "aggmogp/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace aggmogp {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr int kModelFormatVersion = 1;

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string &bytes);

std::string read_file(const std::filesystem::path &path);
/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path &path,
                       const std::string &content);

// Dataset files -----------------------------------------------------------

DatasetCollection parse_dataset(const std::string &text);
std::string dataset_to_string(const DatasetCollection &collection);
DatasetCollection load_dataset(const std::filesystem::path &path);

/// Hash of the training part (domains, catalogue, datasets) of a
/// collection; prediction targets do not affect it.
std::string training_hash(const DatasetCollection &collection);

// Configuration -----------------------------------------------------------

struct AppConfig {
  std::optional<std::size_t> num_latents = 1; // nullopt: cross-validation
  IntegrationMode mode = IntegrationMode::Auto;
  Method method = Method::AmogpTrans;
  std::optional<TargetRef> target;
  TrainConfig train;
  std::size_t tp = 100;
  std::string target_partition;
  bool grid_export = false;
  std::optional<ExperimentSpec> experiment;
};

AppConfig parse_config(const std::string &text);
std::string config_to_string(const AppConfig &config);
/// Hash of the canonical serialization.
std::string config_hash(const AppConfig &config);

// Model files -------------------------------------------------------------

struct ModelDocument {
  int version = kModelFormatVersion;
  Method method = Method::AmogpTrans;
  std::optional<TargetRef> target;
  IntegrationMode mode = IntegrationMode::Auto;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string dataset_hash;
  std::vector<std::string> attributes;
  std::vector<std::string> domain_ids;
  std::vector<std::vector<std::string>> domain_attributes;
  std::vector<std::vector<Normalization>> normalization;
  ModelState state;

  bool operator==(const ModelDocument &) const = default;
};

ModelDocument make_model_document(const FittedModel &model,
                                  const AppConfig &config,
                                  const DatasetCollection &input);
std::string model_to_string(const ModelDocument &doc);
/// Throws UnsupportedVersion for newer files and ParseError for malformed
/// ones.
ModelDocument parse_model(const std::string &text);

/// Rebuilds the training view a model was fitted on and checks that the
/// dataset matches it; throws IncompatibleModel otherwise.
FittedModel restore_model(const ModelDocument &doc,
                          const DatasetCollection &input);

// Synthetic generator configuration ---------------------------------------

SynthConfig parse_synth_config(const std::string &text);
std::string synth_config_to_string(const SynthConfig &config);

// Other outputs -----------------------------------------------------------

std::string trace_to_csv(const TrainTrace &trace);
struct TraceSeries {
  std::vector<std::size_t> iteration;
  std::vector<double> elbo;
};
TraceSeries parse_trace_csv(const std::string &text);

std::string support_prediction_csv(const SupportPrediction &prediction);
std::string grid_prediction_csv(const GridPrediction &prediction);

struct GridTable {
  std::size_t dimension = 1;
  Eigen::MatrixXd points;
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};
GridTable parse_grid_csv(const std::string &text);

std::string truth_to_string(const std::map<std::string, std::vector<double>> &truth);
std::map<std::string, std::vector<double>> parse_truth(const std::string &text);

std::string report_to_string(const ExperimentReport &report);
/// Human-readable table of a report.
std::string report_table(const ExperimentReport &report);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

} // namespace aggmogp
