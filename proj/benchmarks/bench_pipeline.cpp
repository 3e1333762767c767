#include <benchmark/benchmark.h>

#include "prefail/features.hpp"
#include "prefail/nn.hpp"
#include "prefail/rng.hpp"

namespace {

using namespace prefail;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.next_double(0.0, 1.0);
    return m;
}

// A 90-day, 44-attribute event matrix: the full-size ingest shape.
void BM_EdgeKernel(benchmark::State& state) {
    const Matrix m = random_matrix(90, 44, 1);
    for (auto _ : state) benchmark::DoNotOptimize(conv_time(m, kEdgeKernel, Padding::Causal));
}
BENCHMARK(BM_EdgeKernel);

void BM_BlurKernel(benchmark::State& state) {
    const Matrix m = random_matrix(90, 44, 2);
    for (auto _ : state) benchmark::DoNotOptimize(conv_time(m, kBlurKernel, Padding::Replicate));
}
BENCHMARK(BM_BlurKernel);

void BM_ReversalCounts(benchmark::State& state) {
    const Matrix m = random_matrix(static_cast<std::size_t>(state.range(0)), 44, 3);
    for (auto _ : state) benchmark::DoNotOptimize(reversal_counts(m));
}
BENCHMARK(BM_ReversalCounts)->Arg(30)->Arg(90)->Arg(365);

void BM_Cusum(benchmark::State& state) {
    const Matrix m = random_matrix(90, 44, 4);
    const CusumParams params{CusumParams::Mode::F2, default_cusum_init_period(90), 0.0};
    for (auto _ : state) benchmark::DoNotOptimize(cusum(m, params));
}
BENCHMARK(BM_Cusum);

void BM_BuildFullStack(benchmark::State& state) {
    const Matrix m = random_matrix(30, 44, 5);
    const StackConfig config = StackConfig::all();
    for (auto _ : state) benchmark::DoNotOptimize(build_feature_stack(m, config));
}
BENCHMARK(BM_BuildFullStack);

ModelConfig desk_model(std::size_t channels, std::size_t length) {
    ModelConfig config;
    config.input_channels = channels;
    config.input_length = length;
    return config;
}

void BM_Forward(benchmark::State& state) {
    const ModelConfig config = desk_model(60, 30);
    Rng rng(6);
    std::vector<TrainInstance> one(1);
    one[0].input.resize(config.input_size());
    for (double& v : one[0].input) v = rng.next_double(0.0, 1.0);
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 1;
    const Classifier model = train(config, tc, one);
    for (auto _ : state) benchmark::DoNotOptimize(forward(model, one[0].input));
}
BENCHMARK(BM_Forward);

void BM_TrainEpoch(benchmark::State& state) {
    const ModelConfig config = desk_model(60, 30);
    Rng rng(7);
    std::vector<TrainInstance> instances(64);
    for (std::size_t i = 0; i < instances.size(); ++i) {
        instances[i].input.resize(config.input_size());
        for (double& v : instances[i].input) v = rng.next_double(0.0, 1.0);
        instances[i].label = static_cast<int>(i % 2);
    }
    TrainConfig tc;
    tc.epochs = 1;
    tc.plateau_patience = 0;
    for (auto _ : state) {
        tc.seed = static_cast<std::uint64_t>(state.iterations());
        benchmark::DoNotOptimize(train(config, tc, instances));
    }
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
