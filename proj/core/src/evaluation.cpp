#include "aggmogp/evaluation.hpp"

#include "aggmogp/error.hpp"
#include "aggmogp/parallel.hpp"
#include "aggmogp/prediction.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace aggmogp {

double mape(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size())
    throw Error(ErrorCode::LengthMismatch, "truth and prediction lengths differ");
  if (y_true.empty())
    throw Error(ErrorCode::InvalidArgument, "no values to score");
  std::vector<std::string> zeros;
  for (std::size_t n = 0; n < y_true.size(); ++n)
    if (y_true[n] == 0.0)
      zeros.push_back(std::to_string(n));
  if (!zeros.empty())
    throw Error(ErrorCode::ZeroTruth, "percentage error undefined for zero truth",
                zeros);
  double sum = 0.0;
  for (std::size_t n = 0; n < y_true.size(); ++n)
    sum += std::abs((y_true[n] - y_pred[n]) / y_true[n]);
  return sum / static_cast<double>(y_true.size());
}

std::size_t argmin_candidate(const std::vector<std::size_t> &candidates,
                             const std::vector<double> &errors) {
  if (candidates.empty() || candidates.size() != errors.size())
    throw Error(ErrorCode::InvalidArgument, "candidate list and errors differ");
  std::size_t best = 0;
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    const bool better = errors[k] < errors[best] ||
                        (errors[k] == errors[best] && candidates[k] < candidates[best]);
    if (better || (std::isnan(errors[best]) && !std::isnan(errors[k])))
      best = k;
  }
  return candidates[best];
}

namespace {

std::size_t target_dataset_index(const DatasetCollection &c,
                                  const TargetRef &target) {
  for (std::size_t k = 0; k < c.datasets.size(); ++k)
    if (c.datasets[k].partition.domain_id == target.domain_id &&
        c.datasets[k].partition.attribute_id == target.attribute_id)
      return k;
  throw Error(ErrorCode::InvalidArgument, "target has no training dataset",
              {target.domain_id, target.attribute_id});
}

Partition single_support(const Partition &p, std::size_t n) {
  Partition out = p;
  out.id = p.id + "#" + std::to_string(n);
  out.supports = {p.supports[n]};
  if (!p.custom_weights.empty())
    out.custom_weights = {p.custom_weights[n]};
  return out;
}

ObservedPartition without(const ObservedPartition &op, std::size_t n) {
  ObservedPartition out = op;
  out.partition.supports.erase(out.partition.supports.begin() +
                               static_cast<std::ptrdiff_t>(n));
  if (!out.partition.custom_weights.empty())
    out.partition.custom_weights.erase(out.partition.custom_weights.begin() +
                                       static_cast<std::ptrdiff_t>(n));
  out.values.erase(out.values.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

} // namespace

CvResult cv_select_L(Method method, const DatasetCollection &collection,
                     const TargetRef &target,
                     const std::vector<std::size_t> &candidates,
                     const CvConfig &config) {
  if (candidates.empty())
    throw Error(ErrorCode::InvalidArgument, "no candidate latent counts");
  CvResult out;
  out.candidates = candidates;
  if (candidates.size() == 1) {
    out.chosen = candidates.front();
    out.errors.assign(1, std::numeric_limits<double>::quiet_NaN());
    return out;
  }
  for (std::size_t L : candidates) {
    const FittedModel full =
        fit_method(method, collection, target, L, config.train, config.mode);
    const DatasetCollection &base = full.collection;
    const std::size_t k = target_dataset_index(base, target);
    const ObservedPartition &held = base.datasets[k];
    const std::size_t folds = held.values.size();
    if (folds < 2)
      throw Error(ErrorCode::InvalidArgument,
                  "leave-one-out needs at least two target observations",
                  {held.partition.id});
    std::vector<double> ape(folds);
    std::vector<std::string> fold_error(folds);
    parallel_for(folds, [&](std::size_t n) {
      try {
        DatasetCollection fold = base;
        fold.datasets[k] = without(held, n);
        const AggregatedDataset data = build_aggregated(fold, config.mode);
        TrainConfig tc = config.train;
        ModelState init;
        if (config.exact_refits) {
          init = initial_state(data, L, tc.seed);
        } else {
          init = full.state;
          tc.max_iters = std::max<std::size_t>(1, tc.max_iters / 5);
        }
        const FitResult r = fit(data, tc, init);
        const SupportPrediction p =
            predict_supports(single_support(held.partition, n), r.state, data,
                             config.tp, tc.seed);
        const double y = held.values[n];
        ape[n] = mape(std::span<const double>(&y, 1),
                      std::span<const double>(p.values));
      } catch (const Error &e) {
        fold_error[n] = e.what();
        ape[n] = std::numeric_limits<double>::quiet_NaN();
      }
    });
    for (std::size_t n = 0; n < folds; ++n)
      if (!fold_error[n].empty())
        throw Error(ErrorCode::InvalidArgument,
                    "cross-validation fold failed: " + fold_error[n],
                    {"L=" + std::to_string(L), "fold=" + std::to_string(n)});
    double sum = 0.0;
    for (double a : ape)
      sum += a;
    out.errors.push_back(sum / static_cast<double>(folds));
  }
  out.chosen = argmin_candidate(candidates, out.errors);
  return out;
}

DatasetCollection with_training_partition(const DatasetCollection &collection,
                                          const TargetRef &target,
                                          const std::string &coarse_id) {
  DatasetCollection out = collection;
  const std::size_t k = target_dataset_index(out, target);
  if (out.datasets[k].partition.id == coarse_id)
    return out;
  for (std::size_t t = 0; t < out.targets.size(); ++t) {
    const ObservedPartition &cand = out.targets[t];
    if (cand.partition.id != coarse_id)
      continue;
    if (cand.partition.domain_id != target.domain_id ||
        cand.partition.attribute_id != target.attribute_id)
      throw Error(ErrorCode::InvalidArgument,
                  "coarse partition does not belong to the target", {coarse_id});
    if (cand.values.size() != cand.partition.supports.size())
      throw Error(ErrorCode::InvalidArgument,
                  "coarse partition carries no observations", {coarse_id});
    ObservedPartition previous = out.datasets[k];
    out.datasets[k] = cand;
    out.targets[t] = std::move(previous);
    return out;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown coarse partition", {coarse_id});
}

std::vector<CoregionalizationMatrix> coregionalization(const FittedModel &model) {
  std::vector<CoregionalizationMatrix> out;
  for (std::size_t v = 0; v < model.data.domains.size(); ++v) {
    const DomainData &d = model.data.domains[v];
    CoregionalizationMatrix m;
    m.domain_id = d.domain.id;
    for (const auto &b : d.blocks)
      m.attributes.push_back(model.data.attributes[b.attribute]);
    const Eigen::MatrixXd &W = model.state.q.w_bar[v];
    m.value = (W * W.transpose()).cwiseAbs();
    out.push_back(std::move(m));
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentSpec &spec,
                                const DatasetCollection &collection,
                                const std::map<std::string, std::vector<double>> &truth) {
  ExperimentReport report;
  report.spec = spec;
  if (spec.seeds.empty())
    return report;
  const std::vector<std::string> levels =
      spec.coarse_partitions.empty() ? std::vector<std::string>{""}
                                     : spec.coarse_partitions;
  const auto truth_it = truth.find(spec.fine_partition);
  if (truth_it == truth.end())
    throw Error(ErrorCode::InvalidArgument, "no ground truth for the fine partition",
                {spec.fine_partition});
  const std::vector<double> &y_true = truth_it->second;

  for (Method method : spec.methods)
    for (const std::string &level : levels) {
      MethodResult res;
      res.method = method;
      res.coarse_partition = level;
      const std::size_t n_seeds = spec.seeds.size();
      res.mape.assign(n_seeds, std::numeric_limits<double>::quiet_NaN());
      res.latents.assign(n_seeds, 0);
      res.train_seconds.assign(n_seeds, 0.0);
      std::vector<std::string> errors(n_seeds);
      std::vector<std::vector<CoregionalizationMatrix>> coreg(n_seeds);

      parallel_for(n_seeds, [&](std::size_t i) {
        const std::uint64_t seed = spec.seeds[i];
        try {
          const DatasetCollection coll =
              level.empty() ? collection
                            : with_training_partition(collection, spec.target, level);
          TrainConfig tc = spec.train;
          tc.seed = seed;
          std::size_t L = 1;
          if (method != Method::Agp) {
            if (spec.latents) {
              L = *spec.latents;
            } else {
              const auto restricted =
                  restrict_collection(method, coll, spec.target);
              std::vector<std::size_t> cand;
              for (std::size_t l = 1; l <= restricted.attributes.size(); ++l)
                cand.push_back(l);
              L = cv_select_L(method, coll, spec.target, cand,
                              {tc, spec.tp, spec.mode, spec.exact_refits})
                      .chosen;
            }
          }
          const auto t0 = std::chrono::steady_clock::now();
          const FittedModel model =
              fit_method(method, coll, spec.target, L, tc, spec.mode);
          res.train_seconds[i] =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                  .count();
          const Partition fine = prediction_partition(
              model, coll.find_partition(spec.fine_partition).partition);
          const SupportPrediction pred =
              predict_supports(fine, model.state, model.data, spec.tp, seed);
          res.mape[i] = mape(y_true, pred.values);
          res.latents[i] = L;
          coreg[i] = coregionalization(model);
        } catch (const std::exception &e) {
          errors[i] = e.what();
        }
      });

      std::vector<double> ok;
      for (std::size_t i = 0; i < n_seeds; ++i) {
        if (!errors[i].empty()) {
          res.failures.push_back("seed " + std::to_string(spec.seeds[i]) + ": " +
                                 errors[i]);
          continue;
        }
        ok.push_back(res.mape[i]);
        if (res.coregionalization.empty())
          res.coregionalization = coreg[i];
      }
      if (!ok.empty()) {
        double sum = 0.0;
        for (double m : ok)
          sum += m;
        res.mean = sum / static_cast<double>(ok.size());
        if (ok.size() > 1) {
          double ss = 0.0;
          for (double m : ok)
            ss += (m - res.mean) * (m - res.mean);
          res.standard_error =
              std::sqrt(ss / static_cast<double>(ok.size() - 1)) /
              std::sqrt(static_cast<double>(ok.size()));
        }
      } else {
        res.mean = std::numeric_limits<double>::quiet_NaN();
      }
      report.results.push_back(std::move(res));
    }
  return report;
}

} // namespace aggmogp
