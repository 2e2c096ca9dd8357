#include <benchmark/benchmark.h>

#include <random>

#include "triplegan/exact_game.hpp"
#include "triplegan/training.hpp"

namespace ad = triplegan::ad;
namespace nn = triplegan::nn;
namespace train = triplegan::train;

static void BM_AffineBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(0);
  std::normal_distribution<double> z;
  ad::Tensor x({32, n}), w({n, n}), b({n});
  for (auto& v : x.data()) v = z(rng);
  for (auto& v : w.data()) v = z(rng);
  for (auto _ : state) {
    w.zero_grad();
    ad::Graph g;
    auto out = ad::affine(g, g.constant(x), g.parameter(w), g.parameter(b));
    g.backward(ad::sum(g, ad::leaky_relu(g, out)));
    benchmark::DoNotOptimize(w.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * 32 * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_AffineBackward)->Arg(16)->Arg(64)->Arg(128);

static void BM_TrainStep(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  train::TrainConfig cfg;
  auto model = nn::TripleModel::create(dim, 3, cfg.latent, cfg.arch, 0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  auto rows = [&](std::size_t n) {
    ad::Tensor t({n, dim});
    for (auto& v : t.data()) v = u(rng);
    return t;
  };
  train::StepBatches b{rows(32), {}, rows(32), rows(32), {}, cfg.latent.sample(32, rng)};
  for (std::size_t i = 0; i < 32; ++i) {
    b.y_labeled.push_back(i % 3);
    b.y_gen.push_back(i % 3);
  }
  train::OptimizerStates st;
  for (auto _ : state) {
    auto l = train::train_step(model, b, cfg, st, 10, rng);
    benchmark::DoNotOptimize(l);
  }
}
BENCHMARK(BM_TrainStep)->Arg(2)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_IdentitySuite(benchmark::State& state) {
  triplegan::game::SuiteOptions opts;
  opts.instances = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto r = triplegan::game::run_identity_suite(opts);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_IdentitySuite)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
