#include "aggmogp/error.hpp"
#include "aggmogp/io.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace aggmogp;
namespace fs = std::filesystem;

namespace {

FittedModel small_fit() {
  TrainConfig cfg;
  cfg.max_iters = 40;
  cfg.learning_rate = 0.02;
  cfg.seed = 2;
  return fit_method(Method::AmogpTrans, fixtures::two_domain_line(), {"d0", "a"}, 2, cfg);
}

AppConfig app_config() {
  AppConfig c;
  c.num_latents = 2;
  c.target = TargetRef{"d0", "a"};
  c.train.max_iters = 40;
  c.train.learning_rate = 0.02;
  c.train.seed = 2;
  return c;
}

fs::path scratch(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / ("aggmogp_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

} // namespace

TEST(Fnv, KnownVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(FormatDouble, RoundTripsExactly) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(gen) * std::pow(10.0, static_cast<int>(gen() % 40) - 20);
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(DatasetFile, RoundTrip) {
  auto c = fixtures::two_attribute_line();
  c.targets.push_back(fixtures::interval_dataset(c.domains[0], "fine", "a", 16, {}));
  const std::string text = dataset_to_string(c);
  const auto back = parse_dataset(text);
  EXPECT_EQ(dataset_to_string(back), text);
  EXPECT_EQ(back.datasets[1].values, c.datasets[1].values);
  EXPECT_EQ(std::get<CellSet>(back.datasets[1].partition.supports[2].body).cells,
            std::get<CellSet>(c.datasets[1].partition.supports[2].body).cells);
  EXPECT_EQ(training_hash(back), training_hash(c));
  auto no_targets = c;
  no_targets.targets.clear();
  EXPECT_EQ(training_hash(no_targets), training_hash(c));
}

TEST(DatasetFile, RejectsMalformedInput) {
  EXPECT_THROW(parse_dataset("{"), Error);
  try {
    parse_dataset("[1, 2]");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
  }
}

TEST(ModelFile, BitExactRoundTrip) {
  const auto model = small_fit();
  const auto input = fixtures::two_domain_line();
  const auto doc = make_model_document(model, app_config(), input);
  const std::string text = model_to_string(doc);
  const auto back = parse_model(text);
  EXPECT_EQ(back, doc);
  EXPECT_EQ(back.state, model.state);
  EXPECT_EQ(model_to_string(back), text);

  const auto restored = restore_model(back, input);
  EXPECT_EQ(restored.state, model.state);
  EXPECT_EQ(restored.data.domains.size(), 2u);
}

TEST(ModelFile, RejectsNewerVersions) {
  const auto doc = make_model_document(small_fit(), app_config(), fixtures::two_domain_line());
  std::string text = model_to_string(doc);
  const auto at = text.find("\"version\": 1");
  ASSERT_NE(at, std::string::npos);
  text.replace(at, 12, "\"version\": 7");
  try {
    parse_model(text);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedVersion);
  }
  EXPECT_THROW(parse_model("{\"format\": \"other\"}"), Error);
}

TEST(ModelFile, RestoreDetectsDatasetChanges) {
  const auto doc = make_model_document(small_fit(), app_config(), fixtures::two_domain_line());
  auto changed = fixtures::two_domain_line();
  changed.datasets[0].values[0] += 1.0;
  try {
    restore_model(doc, changed);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::IncompatibleModel);
  }
}

TEST(Files, AtomicWriteLeavesNoTemporaries) {
  const fs::path dir = scratch("atomic");
  const fs::path target = dir / "out.json";
  write_file_atomic(target, "first");
  write_file_atomic(target, "second");
  EXPECT_EQ(read_file(target), "second");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto &e : fs::directory_iterator(dir))
    ++entries;
  EXPECT_EQ(entries, 1u);
  EXPECT_THROW(read_file(dir / "missing"), Error);
  EXPECT_THROW(write_file_atomic(dir / "no" / "such" / "dir" / "x", "y"), Error);
  fs::remove_all(dir);
}

TEST(Config, RoundTripAndHash) {
  const AppConfig c = app_config();
  const std::string text = config_to_string(c);
  const AppConfig back = parse_config(text);
  EXPECT_EQ(config_to_string(back), text);
  EXPECT_EQ(config_hash(back), config_hash(c));
  AppConfig other = c;
  other.train.seed = 3;
  EXPECT_NE(config_hash(other), config_hash(c));
}

TEST(Csv, TraceFormat) {
  TrainTrace t;
  t.entries = {{0, -3.5, 0.01}, {1, -2.25, 0.01}};
  const std::string csv = trace_to_csv(t);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,elbo,learning_rate");
  const auto series = parse_trace_csv(csv);
  EXPECT_EQ(series.iteration, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(series.elbo, (std::vector<double>{-3.5, -2.25}));
}

TEST(Csv, PredictionFormats) {
  SupportPrediction p{"t", {"x", "y"}, {1.5, -2.0}, {0.25, 0.0}, 0};
  EXPECT_EQ(support_prediction_csv(p), "support_id,value,variance\nx,1.5,0.25\ny,-2,0\n");

  GridPrediction g;
  g.points = Eigen::MatrixXd(3, 1);
  g.points << 0.1, 0.2, 0.3;
  g.mean = Eigen::Vector3d(1.0, 2.0, 3.0);
  g.variance = Eigen::Vector3d(0.1, 0.2, 0.3);
  const auto table = parse_grid_csv(grid_prediction_csv(g));
  EXPECT_EQ(table.dimension, 1u);
  EXPECT_EQ(table.points, g.points);
  EXPECT_EQ(table.mean, g.mean);
  EXPECT_EQ(table.variance, g.variance);
}

TEST(Truth, RoundTrip) {
  const std::map<std::string, std::vector<double>> truth{{"fine", {0.1, 1.0 / 3.0}},
                                                         {"other", {}}};
  EXPECT_EQ(parse_truth(truth_to_string(truth)), truth);
}

TEST(SynthConfigFile, RoundTrip) {
  SynthConfig c;
  c.attributes = {"a", "b"};
  c.beta = {0.3};
  c.prior_w_bar = Eigen::MatrixXd::Constant(2, 1, 0.5);
  c.prior_eta2 = Eigen::MatrixXd::Constant(2, 1, 0.1);
  c.offsets = {3.0, 4.0};
  c.seed = 11;
  SynthDomain d;
  d.id = "d";
  d.extent = {{0.0}, {2.0}};
  d.shape = {30};
  d.noise_var = {0.01, 0.02};
  d.partitions.push_back({"pa", "a", {5}, true, true});
  d.partitions.push_back({"fine", "a", {15}, false, false});
  c.domains.push_back(d);
  const std::string text = synth_config_to_string(c);
  EXPECT_EQ(synth_config_to_string(parse_synth_config(text)), text);
}
