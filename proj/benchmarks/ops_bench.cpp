#include "spdnn/ops.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

spdnn::Tensor filled(std::vector<std::size_t> shape, std::uint64_t seed) {
    spdnn::Tensor t(std::move(shape));
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& v : t.data()) v = dist(gen);
    return t;
}

// args: channels in, channels out, kernel
void BM_Conv2d(benchmark::State& state) {
    const auto ci = static_cast<std::size_t>(state.range(0));
    const auto co = static_cast<std::size_t>(state.range(1));
    const auto k = static_cast<std::size_t>(state.range(2));
    const auto x = filled({ci, 80, 264}, 1);
    const auto w = filled({co, ci, k, k}, 2);
    const auto b = filled({co}, 3);
    for (auto _ : state) benchmark::DoNotOptimize(spdnn::conv2d(x, w, b, spdnn::Padding::Same));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(80 * 264));
}
BENCHMARK(BM_Conv2d)->Args({1, 8, 3})->Args({8, 8, 3})->Args({8, 4, 5})->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
    const auto x = filled({8, 80, 264}, 1);
    const auto w = filled({8, 8, 3, 3}, 2);
    const auto g = filled({8, 80, 264}, 3);
    for (auto _ : state)
        benchmark::DoNotOptimize(spdnn::conv2d_backward(x, w, g, spdnn::Padding::Same));
}
BENCHMARK(BM_Conv2dBackward)->Unit(benchmark::kMillisecond);

void BM_MaxPool(benchmark::State& state) {
    const auto x = filled({8, 80, 264}, 1);
    const int f = static_cast<int>(state.range(0));
    std::vector<std::size_t> argmax;
    for (auto _ : state) benchmark::DoNotOptimize(spdnn::maxpool(x, f, &argmax));
}
BENCHMARK(BM_MaxPool)->Arg(2)->Arg(8);

void BM_Dense(benchmark::State& state) {
    const auto x = filled({1, 20, 66}, 1);
    const auto w = filled({1320, 1320}, 2);
    const auto b = filled({1320}, 3);
    for (auto _ : state) benchmark::DoNotOptimize(spdnn::dense(x, w, b));
}
BENCHMARK(BM_Dense)->Unit(benchmark::kMicrosecond);

} // namespace
