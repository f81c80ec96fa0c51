// Serial reference kernels against their OpenMP counterparts.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "uad/kernels.hpp"
#include "uad/matrix.hpp"

namespace k = uad::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 3.0);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

constexpr std::size_t kClasses = 8;

template <auto Kernel>
void bm_margins(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto logits = random_values(n * kClasses, 1);
    std::vector<double> out(n);
    for (auto _ : state) {
        Kernel(logits, kClasses, 1.7, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n));
}

template <auto Kernel>
void bm_dense(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const std::size_t in_dim = 64, out_dim = 64;
    uad::Matrix in(n, in_dim, random_values(n * in_dim, 2));
    const auto w = random_values(in_dim * out_dim, 3);
    const auto b = random_values(out_dim, 4);
    uad::Matrix out(n, out_dim);
    for (auto _ : state) {
        Kernel(in, w, b, true, out);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n));
}

template <auto Kernel>
void bm_ensemble(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<std::vector<double>> models;
    for (std::uint64_t m = 0; m < 5; ++m) models.push_back(random_values(n * kClasses, 10 + m));
    std::vector<std::span<const double>> views(models.begin(), models.end());
    std::vector<std::size_t> out(n);
    for (auto _ : state) {
        Kernel(views, kClasses, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n));
}

}  // namespace

BENCHMARK(bm_margins<k::serial::calibrated_margins>)->Name("margins/serial")->Range(1 << 10, 1 << 16);
BENCHMARK(bm_margins<k::omp::calibrated_margins>)->Name("margins/omp")->Range(1 << 10, 1 << 16);
BENCHMARK(bm_margins<k::serial::calibrated_complements>)->Name("complements/serial")->Range(1 << 10, 1 << 16);
BENCHMARK(bm_margins<k::omp::calibrated_complements>)->Name("complements/omp")->Range(1 << 10, 1 << 16);
BENCHMARK(bm_dense<k::serial::dense_layer>)->Name("dense/serial")->Range(1 << 8, 1 << 13);
BENCHMARK(bm_dense<k::omp::dense_layer>)->Name("dense/omp")->Range(1 << 8, 1 << 13);
BENCHMARK(bm_ensemble<k::serial::mean_softmax_argmax>)->Name("ensemble/serial")->Range(1 << 10, 1 << 16);
BENCHMARK(bm_ensemble<k::omp::mean_softmax_argmax>)->Name("ensemble/omp")->Range(1 << 10, 1 << 16);

BENCHMARK_MAIN();
