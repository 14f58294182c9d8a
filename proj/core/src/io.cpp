#include "aggmogp/io.hpp"

#include "aggmogp/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace aggmogp {

using json = nlohmann::ordered_json;

std::string format_double(double value) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, r.ptr);
}

std::string fnv1a_hex(const std::string &bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoError, "cannot open file", {path.string()});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path &path,
                       const std::string &content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error(ErrorCode::IoError, "cannot write file", {tmp.string()});
    out << content;
    out.flush();
    if (!out)
      throw Error(ErrorCode::IoError, "write failed", {tmp.string()});
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw Error(ErrorCode::IoError, "cannot move file into place: " + ec.message(),
                {path.string()});
}

namespace {

[[noreturn]] void parse_fail(const std::string &what,
                             std::vector<std::string> subjects = {}) {
  throw Error(ErrorCode::ParseError, what, std::move(subjects));
}

json parse_json(const std::string &text) {
  try {
    return json::parse(text);
  } catch (const json::exception &e) {
    parse_fail(std::string("malformed JSON: ") + e.what());
  }
}

template <typename T> T get(const json &j, const char *key) {
  if (!j.is_object() || !j.contains(key))
    parse_fail(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &e) {
    parse_fail(std::string("bad field '") + key + "': " + e.what());
  }
}

template <typename T> T get_or(const json &j, const char *key, T fallback) {
  if (!j.is_object() || !j.contains(key))
    return fallback;
  return get<T>(j, key);
}

// Doubles travel as JSON numbers; non-finite values are rejected on write
// since JSON has no encoding for them.
json number(double x) {
  if (!std::isfinite(x))
    throw Error(ErrorCode::InvalidArgument, "cannot serialize non-finite value");
  return x;
}

json vec_json(const std::vector<double> &v) {
  json a = json::array();
  for (double x : v)
    a.push_back(number(x));
  return a;
}

json vec_json(const Eigen::VectorXd &v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    a.push_back(number(v[i]));
  return a;
}

json mat_json(const Eigen::MatrixXd &m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      r.push_back(number(m(i, j)));
    rows.push_back(std::move(r));
  }
  return rows;
}

Eigen::VectorXd json_vec(const json &j) {
  if (!j.is_array())
    parse_fail("expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      parse_fail("expected a number");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd json_mat(const json &j, Eigen::Index cols) {
  if (!j.is_array())
    parse_fail("expected a matrix");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Eigen::VectorXd r = json_vec(j[i]);
    if (r.size() != cols)
      parse_fail("ragged matrix");
    m.row(static_cast<Eigen::Index>(i)) = r.transpose();
  }
  return m;
}

json support_json(const Support &s) {
  json j;
  j["id"] = s.id;
  if (const auto *iv = std::get_if<Interval>(&s.body))
    j["interval"] = {number(iv->lo), number(iv->hi)};
  else if (const auto *cs = std::get_if<CellSet>(&s.body))
    j["cells"] = cs->cells;
  else
    j["point"] = vec_json(std::get<PointSite>(s.body).x);
  return j;
}

Support json_support(const json &j, const std::string &domain_id) {
  Support s;
  s.id = get<std::string>(j, "id");
  s.domain_id = domain_id;
  if (j.contains("interval")) {
    const auto iv = get<std::vector<double>>(j, "interval");
    if (iv.size() != 2)
      parse_fail("interval needs [lo, hi]", {s.id});
    s.body = Interval{iv[0], iv[1]};
  } else if (j.contains("cells")) {
    s.body = CellSet{get<std::vector<std::size_t>>(j, "cells")};
  } else if (j.contains("point")) {
    s.body = PointSite{get<std::vector<double>>(j, "point")};
  } else {
    parse_fail("support needs interval, cells, or point", {s.id});
  }
  return s;
}

json partition_json(const ObservedPartition &op, bool with_values) {
  const Partition &p = op.partition;
  json j;
  j["id"] = p.id;
  j["domain_id"] = p.domain_id;
  j["attribute_id"] = p.attribute_id;
  j["aggregation"] = to_string(p.aggregation);
  if (p.aggregation == AggregationKind::Custom) {
    json w = json::array();
    for (const auto &cw : p.custom_weights)
      w.push_back(vec_json(cw));
    j["weights"] = std::move(w);
  }
  json sup = json::array();
  for (const auto &s : p.supports)
    sup.push_back(support_json(s));
  j["supports"] = std::move(sup);
  if (with_values || !op.values.empty())
    j["values"] = vec_json(op.values);
  return j;
}

ObservedPartition json_partition(const json &j) {
  ObservedPartition op;
  Partition &p = op.partition;
  p.id = get<std::string>(j, "id");
  p.domain_id = get<std::string>(j, "domain_id");
  p.attribute_id = get<std::string>(j, "attribute_id");
  try {
    p.aggregation = aggregation_from_string(
        get_or<std::string>(j, "aggregation", "average"));
  } catch (const Error &e) {
    parse_fail(e.what(), {p.id});
  }
  if (p.aggregation == AggregationKind::Custom)
    p.custom_weights = get<std::vector<std::vector<double>>>(j, "weights");
  if (!j.contains("supports") || !j["supports"].is_array())
    parse_fail("partition needs a supports array", {p.id});
  for (const auto &s : j["supports"])
    p.supports.push_back(json_support(s, p.domain_id));
  if (j.contains("values"))
    op.values = get<std::vector<double>>(j, "values");
  return op;
}

json domain_json(const Domain &d) {
  json j;
  j["id"] = d.id;
  j["dimension"] = d.dimension;
  j["extent"] = {{"lo", vec_json(d.extent.lo)}, {"hi", vec_json(d.extent.hi)}};
  j["grid"] = {{"origin", vec_json(d.grid.origin)},
               {"cell_size", vec_json(d.grid.cell_size)},
               {"shape", d.grid.shape}};
  return j;
}

Domain json_domain(const json &j) {
  Domain d;
  d.id = get<std::string>(j, "id");
  d.dimension = get<std::size_t>(j, "dimension");
  const json &ext = j.contains("extent") ? j["extent"] : json();
  d.extent.lo = get<std::vector<double>>(ext, "lo");
  d.extent.hi = get<std::vector<double>>(ext, "hi");
  const json &grid = j.contains("grid") ? j["grid"] : json();
  d.grid.shape = get<std::vector<std::size_t>>(grid, "shape");
  if (grid.contains("origin") || grid.contains("cell_size")) {
    d.grid.origin = get<std::vector<double>>(grid, "origin");
    d.grid.cell_size = get<std::vector<double>>(grid, "cell_size");
  } else {
    if (d.extent.lo.size() != d.grid.shape.size() ||
        d.extent.hi.size() != d.grid.shape.size())
      parse_fail("grid shape and extent disagree", {d.id});
    d.grid = GridSpec::covering(d.extent.lo, d.extent.hi, d.grid.shape);
  }
  return d;
}

json training_json(const DatasetCollection &c) {
  json j;
  json doms = json::array();
  for (const auto &d : c.domains)
    doms.push_back(domain_json(d));
  j["domains"] = std::move(doms);
  j["attributes"] = c.attributes;
  json ds = json::array();
  for (const auto &d : c.datasets)
    ds.push_back(partition_json(d, true));
  j["datasets"] = std::move(ds);
  return j;
}

} // namespace

std::string dataset_to_string(const DatasetCollection &collection) {
  json j;
  j["format"] = "aggmogp-dataset";
  j["version"] = kDatasetFormatVersion;
  const json training = training_json(collection);
  for (const auto &[k, v] : training.items())
    j[k] = v;
  json ts = json::array();
  for (const auto &t : collection.targets)
    ts.push_back(partition_json(t, false));
  j["targets"] = std::move(ts);
  return j.dump(2) + "\n";
}

DatasetCollection parse_dataset(const std::string &text) {
  const json j = parse_json(text);
  if (!j.is_object())
    parse_fail("dataset must be a JSON object");
  const int version = get_or<int>(j, "version", kDatasetFormatVersion);
  if (version > kDatasetFormatVersion)
    throw Error(ErrorCode::UnsupportedVersion, "dataset format is newer",
                {std::to_string(version)});
  DatasetCollection c;
  if (!j.contains("domains") || !j["domains"].is_array())
    parse_fail("missing domains array");
  for (const auto &d : j["domains"])
    c.domains.push_back(json_domain(d));
  c.attributes = get<std::vector<std::string>>(j, "attributes");
  if (j.contains("datasets"))
    for (const auto &d : j["datasets"])
      c.datasets.push_back(json_partition(d));
  if (j.contains("targets"))
    for (const auto &t : j["targets"])
      c.targets.push_back(json_partition(t));
  c.validate();
  return c;
}

DatasetCollection load_dataset(const std::filesystem::path &path) {
  return parse_dataset(read_file(path));
}

std::string training_hash(const DatasetCollection &collection) {
  return fnv1a_hex(training_json(collection).dump());
}

// Configuration ------------------------------------------------------------

namespace {

json latents_json(const std::optional<std::size_t> &l) {
  if (l)
    return *l;
  return "cv";
}

std::optional<std::size_t> json_latents(const json &j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "cv")
      return std::nullopt;
    parse_fail("num_latents must be an integer or \"cv\"");
  }
  if (!j.is_number_unsigned() || j.get<std::size_t>() == 0)
    parse_fail("num_latents must be a positive integer or \"cv\"");
  return j.get<std::size_t>();
}

json train_json(const TrainConfig &t) {
  return {{"learning_rate", number(t.learning_rate)},
          {"max_iters", t.max_iters},
          {"mc_samples", t.mc_samples},
          {"seed", t.seed},
          {"convergence_tol", number(t.convergence_tol)},
          {"window", t.window},
          {"fixed_eps", t.fixed_eps},
          {"max_backoffs", t.max_backoffs}};
}

TrainConfig json_train(const json &j) {
  TrainConfig t;
  t.learning_rate = get_or<double>(j, "learning_rate", t.learning_rate);
  t.max_iters = get_or<std::size_t>(j, "max_iters", t.max_iters);
  t.mc_samples = get_or<std::size_t>(j, "mc_samples", t.mc_samples);
  t.seed = get_or<std::uint64_t>(j, "seed", t.seed);
  t.convergence_tol = get_or<double>(j, "convergence_tol", t.convergence_tol);
  t.window = get_or<std::size_t>(j, "window", t.window);
  t.fixed_eps = get_or<bool>(j, "fixed_eps", t.fixed_eps);
  t.max_backoffs = get_or<std::size_t>(j, "max_backoffs", t.max_backoffs);
  try {
    t.validate();
  } catch (const Error &e) {
    parse_fail(e.what());
  }
  return t;
}

json experiment_json(const ExperimentSpec &e) {
  json methods = json::array();
  for (Method m : e.methods)
    methods.push_back(to_string(m));
  return {{"target_domain", e.target.domain_id},
          {"target_attribute", e.target.attribute_id},
          {"coarse_partitions", e.coarse_partitions},
          {"fine_partition", e.fine_partition},
          {"methods", std::move(methods)},
          {"latents", latents_json(e.latents)},
          {"seeds", e.seeds},
          {"exact_refits", e.exact_refits}};
}

ExperimentSpec json_experiment(const json &j, const AppConfig &base) {
  ExperimentSpec e;
  e.target.domain_id = get<std::string>(j, "target_domain");
  e.target.attribute_id = get<std::string>(j, "target_attribute");
  e.coarse_partitions =
      get_or<std::vector<std::string>>(j, "coarse_partitions", {});
  e.fine_partition = get<std::string>(j, "fine_partition");
  for (const auto &m : get_or<std::vector<std::string>>(
           j, "methods", {"agp", "slfm", "amogp", "amogp-trans"})) {
    try {
      e.methods.push_back(method_from_string(m));
    } catch (const Error &err) {
      parse_fail(err.what(), {m});
    }
  }
  e.latents = j.contains("latents") ? json_latents(j["latents"]) : base.num_latents;
  e.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", {base.train.seed});
  e.exact_refits = get_or<bool>(j, "exact_refits", false);
  e.train = base.train;
  e.tp = base.tp;
  e.mode = base.mode;
  return e;
}

} // namespace

AppConfig parse_config(const std::string &text) {
  const json j = parse_json(text);
  if (!j.is_object())
    parse_fail("config must be a JSON object");
  for (const auto &[key, value] : j.items())
    if (key != "model" && key != "training" && key != "prediction" &&
        key != "experiment")
      parse_fail("unknown config section", {key});
  AppConfig c;
  if (j.contains("model")) {
    const json &m = j["model"];
    if (m.contains("num_latents"))
      c.num_latents = json_latents(m["num_latents"]);
    try {
      c.mode = integration_mode_from_string(
          get_or<std::string>(m, "integration", "auto"));
      c.method = method_from_string(get_or<std::string>(m, "method", "amogp-trans"));
    } catch (const Error &e) {
      parse_fail(e.what(), e.subjects());
    }
    if (m.contains("target_domain") || m.contains("target_attribute"))
      c.target = TargetRef{get<std::string>(m, "target_domain"),
                           get<std::string>(m, "target_attribute")};
  }
  if (j.contains("training"))
    c.train = json_train(j["training"]);
  if (j.contains("prediction")) {
    const json &p = j["prediction"];
    c.tp = get_or<std::size_t>(p, "tp", c.tp);
    if (c.tp == 0)
      parse_fail("tp must be positive");
    c.target_partition = get_or<std::string>(p, "target_partition", "");
    c.grid_export = get_or<bool>(p, "grid", false);
  }
  if (j.contains("experiment"))
    c.experiment = json_experiment(j["experiment"], c);
  return c;
}

std::string config_to_string(const AppConfig &c) {
  json j;
  json m = {{"num_latents", latents_json(c.num_latents)},
            {"integration", to_string(c.mode)},
            {"method", to_string(c.method)}};
  if (c.target) {
    m["target_domain"] = c.target->domain_id;
    m["target_attribute"] = c.target->attribute_id;
  }
  j["model"] = std::move(m);
  j["training"] = train_json(c.train);
  j["prediction"] = {{"tp", c.tp},
                     {"target_partition", c.target_partition},
                     {"grid", c.grid_export}};
  if (c.experiment)
    j["experiment"] = experiment_json(*c.experiment);
  return j.dump(2) + "\n";
}

std::string config_hash(const AppConfig &config) {
  return fnv1a_hex(config_to_string(config));
}

// Model files --------------------------------------------------------------

ModelDocument make_model_document(const FittedModel &model,
                                  const AppConfig &config,
                                  const DatasetCollection &input) {
  ModelDocument doc;
  doc.method = model.method;
  doc.target = config.target;
  doc.mode = model.data.mode;
  doc.seed = config.train.seed;
  doc.config_hash = config_hash(config);
  doc.dataset_hash = training_hash(input);
  doc.attributes = model.data.attributes;
  for (const auto &d : model.data.domains) {
    doc.domain_ids.push_back(d.domain.id);
    std::vector<std::string> attrs;
    std::vector<Normalization> norms;
    for (const auto &b : d.blocks) {
      attrs.push_back(model.data.attributes[b.attribute]);
      norms.push_back(b.transform);
    }
    doc.domain_attributes.push_back(std::move(attrs));
    doc.normalization.push_back(std::move(norms));
  }
  doc.state = model.state;
  return doc;
}

std::string model_to_string(const ModelDocument &doc) {
  json j;
  j["format"] = "aggmogp-model";
  j["version"] = doc.version;
  j["method"] = to_string(doc.method);
  if (doc.target)
    j["target"] = {{"domain_id", doc.target->domain_id},
                   {"attribute_id", doc.target->attribute_id}};
  j["integration"] = to_string(doc.mode);
  j["provenance"] = {{"seed", doc.seed},
                     {"config_hash", doc.config_hash},
                     {"dataset_hash", doc.dataset_hash}};
  j["attributes"] = doc.attributes;
  json lb = json::array();
  for (const auto &k : doc.state.kernels.kernels)
    lb.push_back(number(k.log_beta()));
  j["kernels"] = {{"log_beta", std::move(lb)}};
  j["prior"] = {{"w_bar", mat_json(doc.state.prior.w_bar)},
                {"log_eta2", mat_json(doc.state.prior.log_eta2)}};
  json doms = json::array();
  for (std::size_t v = 0; v < doc.domain_ids.size(); ++v) {
    json norms = json::array();
    for (const auto &n : doc.normalization[v])
      norms.push_back({{"mean", number(n.mean)}, {"scale", number(n.scale)}});
    doms.push_back({{"id", doc.domain_ids[v]},
                    {"attributes", doc.domain_attributes[v]},
                    {"q_w_bar", mat_json(doc.state.q.w_bar[v])},
                    {"q_log_eta2", mat_json(doc.state.q.log_eta2[v])},
                    {"log_sigma2", vec_json(doc.state.noise.log_sigma2[v])},
                    {"normalization", std::move(norms)}});
  }
  j["domains"] = std::move(doms);
  return j.dump(2) + "\n";
}

ModelDocument parse_model(const std::string &text) {
  const json j = parse_json(text);
  if (!j.is_object() || get_or<std::string>(j, "format", "") != "aggmogp-model")
    parse_fail("not a model file");
  ModelDocument doc;
  doc.version = get<int>(j, "version");
  if (doc.version > kModelFormatVersion)
    throw Error(ErrorCode::UnsupportedVersion,
                "model file was written by a newer format version",
                {std::to_string(doc.version)});
  if (doc.version < 1)
    parse_fail("bad model format version");
  try {
    doc.method = method_from_string(get<std::string>(j, "method"));
    doc.mode = integration_mode_from_string(get<std::string>(j, "integration"));
  } catch (const Error &e) {
    if (e.code() == ErrorCode::ParseError)
      throw;
    parse_fail(e.what(), e.subjects());
  }
  if (j.contains("target"))
    doc.target = TargetRef{get<std::string>(j["target"], "domain_id"),
                           get<std::string>(j["target"], "attribute_id")};
  const json &prov = j.contains("provenance") ? j["provenance"] : json();
  doc.seed = get<std::uint64_t>(prov, "seed");
  doc.config_hash = get<std::string>(prov, "config_hash");
  doc.dataset_hash = get<std::string>(prov, "dataset_hash");
  doc.attributes = get<std::vector<std::string>>(j, "attributes");
  const json &kern = j.contains("kernels") ? j["kernels"] : json();
  const auto log_beta = get<std::vector<double>>(kern, "log_beta");
  if (log_beta.empty())
    parse_fail("model needs at least one kernel");
  for (double lb : log_beta)
    doc.state.kernels.kernels.emplace_back(lb);
  const auto L = static_cast<Eigen::Index>(log_beta.size());
  const json &prior = j.contains("prior") ? j["prior"] : json();
  doc.state.prior.w_bar = json_mat(prior.value("w_bar", json()), L);
  doc.state.prior.log_eta2 = json_mat(prior.value("log_eta2", json()), L);
  if (doc.state.prior.w_bar.rows() !=
          static_cast<Eigen::Index>(doc.attributes.size()) ||
      doc.state.prior.log_eta2.rows() != doc.state.prior.w_bar.rows())
    parse_fail("prior shape does not match the attribute catalogue");
  if (!j.contains("domains") || !j["domains"].is_array())
    parse_fail("model needs a domains array");
  for (const auto &d : j["domains"]) {
    doc.domain_ids.push_back(get<std::string>(d, "id"));
    doc.domain_attributes.push_back(get<std::vector<std::string>>(d, "attributes"));
    const auto Sv = static_cast<Eigen::Index>(doc.domain_attributes.back().size());
    doc.state.q.w_bar.push_back(json_mat(d.value("q_w_bar", json()), L));
    doc.state.q.log_eta2.push_back(json_mat(d.value("q_log_eta2", json()), L));
    doc.state.noise.log_sigma2.push_back(json_vec(d.value("log_sigma2", json())));
    if (doc.state.q.w_bar.back().rows() != Sv ||
        doc.state.q.log_eta2.back().rows() != Sv ||
        doc.state.noise.log_sigma2.back().size() != Sv)
      parse_fail("domain slice shape", {doc.domain_ids.back()});
    std::vector<Normalization> norms;
    if (!d.contains("normalization") || !d["normalization"].is_array())
      parse_fail("missing normalization", {doc.domain_ids.back()});
    for (const auto &n : d["normalization"])
      norms.push_back({get<double>(n, "mean"), get<double>(n, "scale")});
    if (norms.size() != static_cast<std::size_t>(Sv))
      parse_fail("normalization count", {doc.domain_ids.back()});
    doc.normalization.push_back(std::move(norms));
  }
  return doc;
}

FittedModel restore_model(const ModelDocument &doc,
                          const DatasetCollection &input) {
  auto incompatible = [](const std::string &what,
                         std::vector<std::string> subjects = {}) {
    throw Error(ErrorCode::IncompatibleModel, what, std::move(subjects));
  };
  if (training_hash(input) != doc.dataset_hash)
    incompatible("dataset training content differs from the one the model was fitted on",
                 {doc.dataset_hash, training_hash(input)});
  DatasetCollection coll = input;
  if (doc.target)
    coll = restrict_collection(doc.method, input, *doc.target);
  else if (doc.method != Method::AmogpTrans)
    incompatible("model lacks the target its method needs", {to_string(doc.method)});
  if (doc.method == Method::Slfm)
    coll = centroid_collection(coll);
  FittedModel m;
  m.method = doc.method;
  m.collection = coll;
  m.data = build_aggregated(coll, doc.mode);
  if (m.data.attributes != doc.attributes ||
      m.data.domains.size() != doc.domain_ids.size())
    incompatible("attribute catalogue or domains differ");
  for (std::size_t v = 0; v < doc.domain_ids.size(); ++v) {
    const DomainData &d = m.data.domains[v];
    if (d.domain.id != doc.domain_ids[v])
      incompatible("domain order differs", {doc.domain_ids[v]});
    for (std::size_t b = 0; b < d.blocks.size(); ++b)
      if (b >= doc.domain_attributes[v].size() ||
          m.data.attributes[d.blocks[b].attribute] != doc.domain_attributes[v][b] ||
          !(d.blocks[b].transform == doc.normalization[v][b]))
        incompatible("domain attributes or normalization differ", {d.domain.id});
  }
  try {
    check_consistent(doc.state, m.data);
  } catch (const Error &e) {
    incompatible(e.what());
  }
  m.state = doc.state;
  return m;
}

// Other outputs ------------------------------------------------------------

std::string trace_to_csv(const TrainTrace &trace) {
  std::string out = "iteration,elbo,learning_rate\n";
  for (const auto &e : trace.entries)
    out += std::to_string(e.iteration) + "," +
           (std::isfinite(e.elbo) ? format_double(e.elbo) : std::string("nan")) +
           "," + format_double(e.learning_rate) + "\n";
  return out;
}

namespace {

std::vector<std::string> split(const std::string &line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string &s) {
  if (s == "nan")
    return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    parse_fail("bad number in CSV", {s});
  return v;
}

std::vector<std::vector<std::string>> csv_rows(const std::string &text,
                                               std::vector<std::string> &header) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    parse_fail("empty CSV");
  header = split(line, ',');
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    auto r = split(line, ',');
    if (r.size() != header.size())
      parse_fail("CSV row width differs from header");
    rows.push_back(std::move(r));
  }
  return rows;
}

} // namespace

TraceSeries parse_trace_csv(const std::string &text) {
  std::vector<std::string> header;
  const auto rows = csv_rows(text, header);
  if (header.size() < 2 || header[0] != "iteration" || header[1] != "elbo")
    parse_fail("not a trace file");
  TraceSeries s;
  for (const auto &r : rows) {
    s.iteration.push_back(static_cast<std::size_t>(to_double(r[0])));
    s.elbo.push_back(to_double(r[1]));
  }
  return s;
}

std::string support_prediction_csv(const SupportPrediction &p) {
  std::string out = "support_id,value,variance\n";
  for (std::size_t n = 0; n < p.values.size(); ++n)
    out += p.support_ids[n] + "," + format_double(p.values[n]) + "," +
           format_double(p.variances[n]) + "\n";
  return out;
}

std::string grid_prediction_csv(const GridPrediction &p) {
  std::string out;
  for (Eigen::Index d = 0; d < p.points.cols(); ++d)
    out += "x" + std::to_string(d) + ",";
  out += "mean,variance\n";
  for (Eigen::Index i = 0; i < p.points.rows(); ++i) {
    for (Eigen::Index d = 0; d < p.points.cols(); ++d)
      out += format_double(p.points(i, d)) + ",";
    out += format_double(p.mean[i]) + "," + format_double(p.variance[i]) + "\n";
  }
  return out;
}

GridTable parse_grid_csv(const std::string &text) {
  std::vector<std::string> header;
  const auto rows = csv_rows(text, header);
  if (header.size() < 3 || header[header.size() - 2] != "mean" ||
      header.back() != "variance")
    parse_fail("grid CSV needs x columns followed by mean,variance");
  GridTable t;
  t.dimension = header.size() - 2;
  for (std::size_t d = 0; d < t.dimension; ++d)
    if (header[d] != "x" + std::to_string(d))
      parse_fail("unexpected grid CSV column", {header[d]});
  const auto n = static_cast<Eigen::Index>(rows.size());
  t.points.resize(n, static_cast<Eigen::Index>(t.dimension));
  t.mean.resize(n);
  t.variance.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto &r = rows[static_cast<std::size_t>(i)];
    for (std::size_t d = 0; d < t.dimension; ++d)
      t.points(i, static_cast<Eigen::Index>(d)) = to_double(r[d]);
    t.mean[i] = to_double(r[t.dimension]);
    t.variance[i] = to_double(r[t.dimension + 1]);
  }
  return t;
}

std::string truth_to_string(const std::map<std::string, std::vector<double>> &truth) {
  json j;
  j["format"] = "aggmogp-truth";
  j["version"] = 1;
  json parts = json::object();
  for (const auto &[id, values] : truth)
    parts[id] = vec_json(values);
  j["partitions"] = std::move(parts);
  return j.dump(2) + "\n";
}

std::map<std::string, std::vector<double>> parse_truth(const std::string &text) {
  const json j = parse_json(text);
  if (!j.is_object() || !j.contains("partitions") || !j["partitions"].is_object())
    parse_fail("not a truth file");
  std::map<std::string, std::vector<double>> out;
  for (const auto &[id, values] : j["partitions"].items())
    out[id] = values.get<std::vector<double>>();
  return out;
}

std::string report_to_string(const ExperimentReport &report) {
  json j;
  j["format"] = "aggmogp-report";
  j["version"] = 1;
  j["experiment"] = experiment_json(report.spec);
  j["standard_error"] = "seed-wise standard error of the mean";
  json results = json::array();
  for (const auto &r : report.results) {
    json per_seed = json::array();
    for (std::size_t i = 0; i < r.mape.size(); ++i) {
      json s = {{"seed", report.spec.seeds[i]}};
      if (std::isfinite(r.mape[i])) {
        s["mape"] = r.mape[i];
        s["latents"] = r.latents[i];
      } else {
        s["mape"] = nullptr;
      }
      per_seed.push_back(std::move(s));
    }
    json coreg = json::array();
    for (const auto &c : r.coregionalization)
      coreg.push_back({{"domain_id", c.domain_id},
                       {"attributes", c.attributes},
                       {"abs_w_wt", mat_json(c.value)}});
    json res = {{"method", to_string(r.method)},
                {"coarse_partition", r.coarse_partition},
                {"per_seed", std::move(per_seed)},
                {"failures", r.failures},
                {"coregionalization", std::move(coreg)}};
    if (std::isfinite(r.mean)) {
      res["mape_mean"] = r.mean;
      res["mape_se"] = r.standard_error;
    } else {
      res["mape_mean"] = nullptr;
      res["mape_se"] = nullptr;
    }
    results.push_back(std::move(res));
  }
  j["results"] = std::move(results);
  return j.dump(2) + "\n";
}

std::string report_table(const ExperimentReport &report) {
  std::ostringstream out;
  out << std::left << std::setw(13) << "method" << std::setw(22) << "coarse"
      << std::setw(24) << "MAPE (mean +- SE)" << "failures\n";
  for (const auto &r : report.results) {
    std::ostringstream m;
    m << std::fixed << std::setprecision(4) << r.mean << " +- "
      << r.standard_error;
    out << std::left << std::setw(13) << to_string(r.method) << std::setw(22)
        << (r.coarse_partition.empty() ? "-" : r.coarse_partition)
        << std::setw(24) << m.str() << r.failures.size() << "\n";
  }
  return out.str();
}

} // namespace aggmogp

namespace aggmogp {

SynthConfig parse_synth_config(const std::string &text) {
  const json j = parse_json(text);
  if (!j.is_object())
    parse_fail("synth config must be a JSON object");
  SynthConfig c;
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  c.attributes = get<std::vector<std::string>>(j, "attributes");
  c.beta = get<std::vector<double>>(j, "beta");
  const auto L = static_cast<Eigen::Index>(c.beta.size());
  const auto S = static_cast<Eigen::Index>(c.attributes.size());
  if (j.contains("prior")) {
    c.prior_w_bar = json_mat(j["prior"].value("w_bar", json()), L);
    c.prior_eta2 = json_mat(j["prior"].value("eta2", json()), L);
  } else {
    c.prior_w_bar = Eigen::MatrixXd::Zero(S, L);
    c.prior_eta2 = Eigen::MatrixXd::Ones(S, L);
  }
  c.offsets = get_or<std::vector<double>>(j, "offsets", {});
  if (!j.contains("domains") || !j["domains"].is_array())
    parse_fail("synth config needs a domains array");
  for (const auto &d : j["domains"]) {
    SynthDomain sd;
    sd.id = get<std::string>(d, "id");
    const json &ext = d.contains("extent") ? d["extent"] : json();
    sd.extent.lo = get<std::vector<double>>(ext, "lo");
    sd.extent.hi = get<std::vector<double>>(ext, "hi");
    sd.shape = get<std::vector<std::size_t>>(d, "shape");
    sd.noise_var = get<std::vector<double>>(d, "noise_var");
    if (d.contains("weights"))
      sd.weights = json_mat(d["weights"], L);
    if (d.contains("partitions"))
      for (const auto &p : d["partitions"])
        sd.partitions.push_back({get<std::string>(p, "id"),
                                 get<std::string>(p, "attribute"),
                                 get<std::vector<std::size_t>>(p, "bins"),
                                 get_or<bool>(p, "observed", true),
                                 get_or<bool>(p, "training", true)});
    c.domains.push_back(std::move(sd));
  }
  try {
    c.validate();
  } catch (const Error &e) {
    parse_fail(e.what(), e.subjects());
  }
  return c;
}

std::string synth_config_to_string(const SynthConfig &c) {
  json j;
  j["seed"] = c.seed;
  j["attributes"] = c.attributes;
  j["beta"] = vec_json(c.beta);
  j["prior"] = {{"w_bar", mat_json(c.prior_w_bar)}, {"eta2", mat_json(c.prior_eta2)}};
  j["offsets"] = vec_json(c.offsets);
  json doms = json::array();
  for (const auto &d : c.domains) {
    json parts = json::array();
    for (const auto &p : d.partitions)
      parts.push_back({{"id", p.id},
                       {"attribute", p.attribute},
                       {"bins", p.bins},
                       {"observed", p.observed},
                       {"training", p.training}});
    json dj = {{"id", d.id},
               {"extent", {{"lo", vec_json(d.extent.lo)}, {"hi", vec_json(d.extent.hi)}}},
               {"shape", d.shape},
               {"noise_var", vec_json(d.noise_var)},
               {"partitions", std::move(parts)}};
    if (d.weights)
      dj["weights"] = mat_json(*d.weights);
    doms.push_back(std::move(dj));
  }
  j["domains"] = std::move(doms);
  return j.dump(2) + "\n";
}

} // namespace aggmogp
