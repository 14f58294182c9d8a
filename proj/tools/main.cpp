#include <aggmogp/baselines.hpp>
#include <aggmogp/error.hpp>
#include <aggmogp/evaluation.hpp>
#include <aggmogp/io.hpp>
#include <aggmogp/plot.hpp>
#include <aggmogp/prediction.hpp>
#include <aggmogp/synth.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

using namespace aggmogp;

namespace {

struct Options {
  std::string dataset, config, model, out, method, latents, target_partition;
  std::string target_domain, target_attribute, trace, grid_out, truth, grid;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> tp;
};

std::optional<std::size_t> parse_latents(const std::string &s) {
  if (s == "cv")
    return std::nullopt;
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception &) {
    pos = 0;
  }
  if (pos != s.size() || v == 0)
    throw Error(ErrorCode::InvalidArgument, "--latents takes a positive integer or cv",
                {s});
  return static_cast<std::size_t>(v);
}

AppConfig effective_config(const Options &o) {
  AppConfig c = o.config.empty() ? AppConfig{} : parse_config(read_file(o.config));
  if (o.seed)
    c.train.seed = *o.seed;
  if (!o.method.empty())
    c.method = method_from_string(o.method);
  if (!o.latents.empty())
    c.num_latents = parse_latents(o.latents);
  if (o.tp)
    c.tp = *o.tp;
  if (!o.target_partition.empty())
    c.target_partition = o.target_partition;
  if (!o.target_domain.empty() || !o.target_attribute.empty()) {
    if (o.target_domain.empty() || o.target_attribute.empty())
      throw Error(ErrorCode::InvalidArgument,
                  "--target-domain and --target-attribute go together");
    c.target = TargetRef{o.target_domain, o.target_attribute};
  }
  if (c.tp == 0)
    throw Error(ErrorCode::InvalidArgument, "--tp must be positive");
  return c;
}

void require(const std::string &value, const char *flag) {
  if (value.empty())
    throw Error(ErrorCode::InvalidArgument, std::string(flag) + " is required");
}

std::vector<std::size_t> latent_candidates(const AppConfig &c,
                                           const DatasetCollection &data) {
  const auto restricted = restrict_collection(c.method, data, *c.target);
  std::vector<std::size_t> cand;
  const std::size_t S = c.method == Method::Agp ? 1 : restricted.attributes.size();
  for (std::size_t l = 1; l <= S; ++l)
    cand.push_back(l);
  return cand;
}

CvResult run_cv(const AppConfig &c, const DatasetCollection &data) {
  if (!c.target)
    throw Error(ErrorCode::InvalidArgument,
                "cross-validation needs a target (--target-domain, --target-attribute)");
  return cv_select_L(c.method, data, *c.target, latent_candidates(c, data),
                     {c.train, c.tp, c.mode, false});
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_fit(const Options &o) {
  require(o.dataset, "--dataset");
  require(o.out, "--out");
  AppConfig c = effective_config(o);
  const DatasetCollection data = load_dataset(o.dataset);
  if (c.method != Method::AmogpTrans && !c.target)
    throw Error(ErrorCode::InvalidArgument,
                std::string("method ") + to_string(c.method) + " needs a target");
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t L = c.num_latents.value_or(0);
  if (!c.num_latents) {
    const CvResult cv = run_cv(c, data);
    L = cv.chosen;
    std::cout << "cv: chose L=" << L << "\n";
  }
  const FittedModel model =
      c.target ? fit_method(c.method, data, *c.target, L, c.train, c.mode)
               : fit_amogp(data, L, c.train, c.mode);
  write_file_atomic(o.out, model_to_string(make_model_document(model, c, data)));
  const std::string trace_path = o.trace.empty() ? o.out + ".trace.csv" : o.trace;
  write_file_atomic(trace_path, trace_to_csv(model.trace));
  const auto &tr = model.trace;
  std::cout << "fit: method=" << to_string(model.method) << " L=" << L
            << " iterations=" << tr.entries.size()
            << " best_iteration=" << tr.best_iteration
            << " best_window_elbo=" << format_double(tr.best_window_elbo)
            << " backoffs=" << tr.backoffs
            << (tr.converged ? " converged" : "") << "\n"
            << "time: " << seconds_since(t0) << " s\n";
  return 0;
}

int cmd_refine(const Options &o) {
  require(o.dataset, "--dataset");
  require(o.model, "--model");
  require(o.out, "--out");
  AppConfig c = effective_config(o);
  require(c.target_partition, "--target-partition");
  const DatasetCollection data = load_dataset(o.dataset);
  const ModelDocument doc = parse_model(read_file(o.model));
  const FittedModel model = restore_model(doc, data);
  const std::uint64_t seed = o.seed.value_or(doc.seed);
  const Partition target = prediction_partition(
      model, data.find_partition(c.target_partition).partition);
  const SupportPrediction pred =
      predict_supports(target, model.state, model.data, c.tp, seed);
  write_file_atomic(o.out, support_prediction_csv(pred));
  std::cout << "refine: " << pred.values.size() << " supports, clamped variances="
            << pred.clamped << "\n";
  if (!o.grid_out.empty() || c.grid_export) {
    const std::string path = o.grid_out.empty() ? o.out + ".grid.csv" : o.grid_out;
    const GridPrediction grid = predict_grid(target.domain_id, target.attribute_id,
                                             model.state, model.data, c.tp, seed);
    write_file_atomic(path, grid_prediction_csv(grid));
    std::cout << "grid: " << grid.mean.size() << " points, clamped variances="
              << grid.clamped << "\n";
  }
  return 0;
}

int cmd_cv(const Options &o) {
  require(o.dataset, "--dataset");
  AppConfig c = effective_config(o);
  const DatasetCollection data = load_dataset(o.dataset);
  const CvResult cv = run_cv(c, data);
  nlohmann::ordered_json j;
  j["method"] = to_string(c.method);
  j["candidates"] = cv.candidates;
  nlohmann::ordered_json errs = nlohmann::ordered_json::array();
  for (double e : cv.errors)
    errs.push_back(std::isfinite(e) ? nlohmann::ordered_json(e) : nullptr);
  j["errors"] = errs;
  j["chosen"] = cv.chosen;
  const std::string text = j.dump(2) + "\n";
  if (o.out.empty())
    std::cout << text;
  else
    write_file_atomic(o.out, text);
  std::cout << "cv: chose L=" << cv.chosen << "\n";
  return 0;
}

int cmd_synth(const Options &o) {
  require(o.config, "--config");
  require(o.out, "--out");
  SynthConfig cfg = parse_synth_config(read_file(o.config));
  if (o.seed)
    cfg.seed = *o.seed;
  const SynthResult r = synth_generate(cfg);
  write_file_atomic(o.out, dataset_to_string(r.collection));
  const std::string truth = o.truth.empty() ? o.out + ".truth.json" : o.truth;
  write_file_atomic(truth, truth_to_string(r.truth));
  std::cout << "synth: " << r.collection.domains.size() << " domains, "
            << r.collection.datasets.size() << " training datasets, "
            << r.collection.targets.size() << " extra partitions\n";
  return 0;
}

int cmd_eval(const Options &o) {
  require(o.dataset, "--dataset");
  require(o.config, "--config");
  require(o.truth, "--truth");
  require(o.out, "--out");
  AppConfig c = effective_config(o);
  if (!c.experiment)
    throw Error(ErrorCode::InvalidArgument, "config has no experiment section");
  ExperimentSpec spec = *c.experiment;
  spec.train = c.train;
  spec.tp = c.tp;
  spec.mode = c.mode;
  if (!o.method.empty())
    spec.methods = {c.method};
  if (!o.latents.empty())
    spec.latents = c.num_latents;
  if (o.seed)
    spec.seeds = {*o.seed};
  const DatasetCollection data = load_dataset(o.dataset);
  const auto truth = parse_truth(read_file(o.truth));
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentReport report = run_experiment(spec, data, truth);
  write_file_atomic(o.out, report_to_string(report));
  std::cout << report_table(report);
  for (const auto &r : report.results) {
    double total = 0.0;
    for (double s : r.train_seconds)
      total += s;
    std::cout << "train time " << to_string(r.method) << " "
              << (r.coarse_partition.empty() ? "-" : r.coarse_partition) << ": "
              << total << " s\n";
    for (const auto &f : r.failures)
      std::cout << "failure " << to_string(r.method) << ": " << f << "\n";
  }
  std::cout << "time: " << seconds_since(t0) << " s\n";
  return 0;
}

int cmd_plot(const Options &o) {
  require(o.out, "--out");
  if (o.trace.empty() == o.grid.empty())
    throw Error(ErrorCode::InvalidArgument, "plot takes exactly one of --trace or --grid");
  std::string svg;
  if (!o.trace.empty()) {
    svg = plot_trace_svg(parse_trace_csv(read_file(o.trace)));
  } else {
    const GridTable g = parse_grid_csv(read_file(o.grid));
    svg = g.dimension == 1 ? plot_band_svg(g) : plot_heatmap_svg(g);
  }
  write_file_atomic(o.out, svg);
  return 0;
}

void error_record(const std::string &code, const std::string &message,
                  const std::vector<std::string> &subjects) {
  nlohmann::ordered_json j;
  j["status"] = "error";
  j["code"] = code;
  j["message"] = message;
  j["subjects"] = subjects;
  std::cerr << j.dump() << "\n";
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Multi-output Gaussian processes for aggregated data"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App *sub) {
    sub->add_option("--dataset", o.dataset, "dataset JSON file");
    sub->add_option("--config", o.config, "configuration JSON file");
    sub->add_option("--out", o.out, "output file");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--method", o.method, "agp, slfm, amogp or amogp-trans");
    sub->add_option("--latents", o.latents, "number of latent processes or cv");
    sub->add_option("--tp", o.tp, "predictive mixture components");
    sub->add_option("--target-domain", o.target_domain, "target domain id");
    sub->add_option("--target-attribute", o.target_attribute, "target attribute id");
  };

  auto *fit = app.add_subcommand("fit", "train a model");
  add_common(fit);
  fit->add_option("--trace", o.trace, "trace CSV (default <out>.trace.csv)");

  auto *refine = app.add_subcommand("refine", "predict a target partition");
  add_common(refine);
  refine->add_option("--model", o.model, "model JSON file");
  refine->add_option("--target-partition", o.target_partition, "partition id");
  refine->add_option("--grid-out", o.grid_out, "also write pointwise grid CSV");

  auto *cv = app.add_subcommand("cv", "choose the number of latents by LOO-CV");
  add_common(cv);

  auto *synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth);
  synth->add_option("--truth", o.truth, "ground truth JSON (default <out>.truth.json)");

  auto *eval = app.add_subcommand("eval", "run a refinement experiment");
  add_common(eval);
  eval->add_option("--truth", o.truth, "ground truth JSON");

  auto *plot = app.add_subcommand("plot", "render an SVG");
  plot->add_option("--out", o.out, "output SVG");
  plot->add_option("--trace", o.trace, "trace CSV");
  plot->add_option("--grid", o.grid, "grid CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    error_record("UsageError", e.what(), {});
    return 1;
  }

  try {
    if (*fit)
      return cmd_fit(o);
    if (*refine)
      return cmd_refine(o);
    if (*cv)
      return cmd_cv(o);
    if (*synth)
      return cmd_synth(o);
    if (*eval)
      return cmd_eval(o);
    if (*plot)
      return cmd_plot(o);
  } catch (const Error &e) {
    error_record(to_string(e.code()), e.what(), e.subjects());
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception &e) {
    error_record("InternalError", e.what(), {});
    return 2;
  }
  return 1;
}
