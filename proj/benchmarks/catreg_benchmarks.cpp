#include "catreg/dist.hpp"
#include "catreg/interval_likelihood.hpp"
#include "catreg/model.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

namespace {

using namespace catreg;

void BM_Erf(benchmark::State& state) {
    double z = -3.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(catreg::erf(z));
        z = z > 3.0 ? -3.0 : z + 1e-3;
    }
}
BENCHMARK(BM_Erf);

void BM_IntervalProbs(benchmark::State& state) {
    const CategoryScheme scheme;
    const auto family = static_cast<Family>(state.range(0));
    double mu = 0.1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(interval_probs(mu, 0.12, scheme, family));
        mu = mu > 0.9 ? 0.1 : mu + 1e-3;
    }
}
BENCHMARK(BM_IntervalProbs)->Arg(0)->Arg(1);

void BM_IntervalProbsGrad(benchmark::State& state) {
    const CategoryScheme scheme;
    for (auto _ : state) {
        benchmark::DoNotOptimize(interval_probs_grad(0.42, 0.12, scheme, Family::Gaussian));
    }
}
BENCHMARK(BM_IntervalProbsGrad);

ModelConfig bench_config(int head) {
    ModelConfig c;
    c.head = static_cast<Head>(head);
    return c;
}

void BM_Forward(benchmark::State& state) {
    const auto params = init_params(bench_config(static_cast<int>(state.range(0))), 1);
    std::vector<double> x(params.config.input_dim, 0.3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(x, params));
    }
}
BENCHMARK(BM_Forward)->DenseRange(0, 4);

void BM_BackwardBatch32(benchmark::State& state) {
    const auto params = init_params(bench_config(static_cast<int>(state.range(0))), 1);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<std::vector<double>> features(32, std::vector<double>(params.config.input_dim));
    std::vector<TrainingExample> batch;
    for (auto& f : features) {
        for (double& v : f) {
            v = n(rng);
        }
        batch.push_back({f, {1, 2, {0.5, 0.5}}});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(backward(batch, params));
    }
    state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_BackwardBatch32)->DenseRange(0, 4);

}  // namespace

BENCHMARK_MAIN();
