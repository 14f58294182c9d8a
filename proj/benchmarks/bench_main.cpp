#include "aggmogp/dataset.hpp"
#include "aggmogp/inference.hpp"
#include "aggmogp/model.hpp"
#include "aggmogp/prediction.hpp"
#include "aggmogp/support_covariance.hpp"
#include "aggmogp/synth.hpp"

#include <benchmark/benchmark.h>

#include <string>

using namespace aggmogp;

namespace {

// One square domain of side x side cells, three attributes from two latents.
SynthResult square(std::size_t side) {
  SynthConfig c;
  c.attributes = {"a", "b", "c"};
  c.beta = {0.3, 0.1};
  c.prior_w_bar = Eigen::MatrixXd::Ones(3, 2);
  c.prior_eta2 = Eigen::MatrixXd::Constant(3, 2, 0.1);
  c.offsets = {5.0, 5.0, 5.0};
  c.seed = 1;
  SynthDomain d;
  d.id = "d";
  d.extent = {{0.0, 0.0}, {1.0, 1.0}};
  d.shape = {side, side};
  d.noise_var = {0.01, 0.01, 0.01};
  d.partitions = {{"pa", "a", {4, 4}, true, true},
                  {"pb", "b", {6, 6}, true, true},
                  {"pc", "c", {5, 3}, true, true},
                  {"fine", "a", {8, 8}, false, false}};
  c.domains.push_back(d);
  return synth_generate(c);
}

} // namespace

static void BM_PlanBuild(benchmark::State &state) {
  const auto s = square(static_cast<std::size_t>(state.range(0)));
  const auto data = build_aggregated(s.collection);
  const auto &dd = data.domains[0];
  const auto supports = dd.all_resolved();
  for (auto _ : state)
    benchmark::DoNotOptimize(SupportCovariancePlan::symmetric(dd.domain.grid, supports));
}
BENCHMARK(BM_PlanBuild)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_PlanEvaluate(benchmark::State &state) {
  const auto s = square(static_cast<std::size_t>(state.range(0)));
  const auto data = build_aggregated(s.collection);
  const auto &plan = *data.domains[0].plan;
  const auto kernel = SEKernel::with_scale(0.2);
  Eigen::MatrixXd value, grad;
  for (auto _ : state) {
    plan.evaluate(kernel, value, &grad);
    benchmark::DoNotOptimize(value.data());
  }
}
BENCHMARK(BM_PlanEvaluate)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

static void BM_GradElbo(benchmark::State &state) {
  const auto s = square(32);
  const auto data = build_aggregated(s.collection);
  const auto init = initial_state(data, static_cast<std::size_t>(state.range(0)), 1);
  const auto eps = draw_eps(data, init.num_latents(), 1, 1, 0);
  for (auto _ : state)
    benchmark::DoNotOptimize(grad_elbo(data, init, eps));
}
BENCHMARK(BM_GradElbo)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMicrosecond);

static void BM_PredictSupports(benchmark::State &state) {
  const auto s = square(32);
  const auto data = build_aggregated(s.collection);
  const auto init = initial_state(data, 2, 1);
  const auto &fine = s.collection.find_partition("fine").partition;
  const auto tp = static_cast<std::size_t>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(predict_supports(fine, init, data, tp, 1));
}
BENCHMARK(BM_PredictSupports)->Arg(1)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
