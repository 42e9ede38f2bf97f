// Serial reference loops against the OpenMP kernels.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "scd/kernels.hpp"

namespace {

std::vector<double> random_values(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

void BM_GemmSerial(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        scd::kernels::serial::gemm(a, b, c, n, n, n, false);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

void BM_GemmParallel(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    scd::kernels::set_threads(static_cast<int>(state.range(1)));
    const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        scd::kernels::parallel::gemm(a, b, c, n, n, n, false);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
    scd::kernels::set_threads(1);
}

scd::kernels::ConvGeometry conv_geometry(std::size_t side) { return {side, side, 128, 64, 3}; }

void BM_ConvSerial(benchmark::State& state) {
    const auto g = conv_geometry(static_cast<std::size_t>(state.range(0)));
    const auto x = random_values(g.height * g.width * g.in_channels, 3);
    const auto k = random_values(9 * g.in_channels * g.out_channels, 4);
    const std::vector<double> bias(g.out_channels, 0.1);
    std::vector<double> y(g.height * g.width * g.out_channels);
    for (auto _ : state) {
        scd::kernels::serial::conv2d_forward(g, x, k, bias, y);
        benchmark::DoNotOptimize(y.data());
    }
}

void BM_ConvParallel(benchmark::State& state) {
    const auto g = conv_geometry(static_cast<std::size_t>(state.range(0)));
    scd::kernels::set_threads(static_cast<int>(state.range(1)));
    const auto x = random_values(g.height * g.width * g.in_channels, 3);
    const auto k = random_values(9 * g.in_channels * g.out_channels, 4);
    const std::vector<double> bias(g.out_channels, 0.1);
    std::vector<double> y(g.height * g.width * g.out_channels);
    for (auto _ : state) {
        scd::kernels::parallel::conv2d_forward(g, x, k, bias, y);
        benchmark::DoNotOptimize(y.data());
    }
    scd::kernels::set_threads(1);
}

}  // namespace

BENCHMARK(BM_GemmSerial)->Arg(64)->Arg(256);
BENCHMARK(BM_GemmParallel)->Args({64, 1})->Args({64, 4})->Args({256, 1})->Args({256, 4});
BENCHMARK(BM_ConvSerial)->Arg(16)->Arg(36);
BENCHMARK(BM_ConvParallel)->Args({16, 1})->Args({16, 4})->Args({36, 1})->Args({36, 4});

BENCHMARK_MAIN();
