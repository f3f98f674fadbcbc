#include <benchmark/benchmark.h>

#include <opencv2/core.hpp>

#include <random>
#include <vector>

#include "crossview/features.hpp"
#include "crossview/model.hpp"
#include "crossview/nn/tensor.hpp"
#include "crossview/pairing.hpp"
#include "crossview/raster.hpp"
#include "crossview/stats.hpp"
#include "crossview/training.hpp"

using namespace crossview;
using nn::Tensor;
using nn::from_values;

namespace {

Tensor random_tensor(nn::Shape shape, std::mt19937_64& rng, bool grad = false) {
    std::normal_distribution<float> d(0.0f, 1.0f);
    long n = 1;
    for (int s : shape) n *= s;
    std::vector<float> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = d(rng);
    return from_values(shape, std::move(v), grad);
}

void bench_attention_forward(benchmark::State& state) {
    std::mt19937_64 rng(1);
    const int heads = 4, tokens = 64, dim = 16;
    auto gq = random_tensor({heads, tokens, dim}, rng);
    auto k = random_tensor({heads, tokens, dim}, rng);
    auto v = random_tensor({heads, tokens, dim}, rng);
    auto p = random_tensor({heads, tokens, tokens}, rng);
    for (auto _ : state) {
        auto g = model::global_token_attention(gq, k, v, p, static_cast<float>(dim));
        benchmark::DoNotOptimize(g->value.data());
    }
}
BENCHMARK(bench_attention_forward);

void bench_attention_backward(benchmark::State& state) {
    std::mt19937_64 rng(2);
    const int heads = 4, tokens = 64, dim = 16;
    auto gq = random_tensor({heads, tokens, dim}, rng, true);
    auto k = random_tensor({heads, tokens, dim}, rng, true);
    auto v = random_tensor({heads, tokens, dim}, rng, true);
    auto p = random_tensor({heads, tokens, tokens}, rng, true);
    for (auto _ : state) {
        auto loss =
            nn::sum_all(model::global_token_attention(gq, k, v, p, static_cast<float>(dim)));
        nn::backward(loss);
        benchmark::DoNotOptimize(gq->grad.data());
    }
}
BENCHMARK(bench_attention_backward);

void bench_stream_forward(benchmark::State& state) {
    model::Cgcvit net(model::GcvitConfig::toy(), 3);
    std::mt19937_64 rng(3);
    const int s = net.config().chip_size;
    auto chips = random_tensor({2, s, s, 3}, rng);
    for (auto _ : state) {
        auto f = net.stream_forward(chips, 0);
        benchmark::DoNotOptimize(f->value.data());
    }
}
BENCHMARK(bench_stream_forward);

void bench_facade_column_mask(benchmark::State& state) {
    std::vector<BuildingFootprint> scene;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-120.0, 120.0);
    for (int i = 0; i < 64; ++i) {
        BuildingFootprint fp;
        fp.id = "b" + std::to_string(i);
        const double x = u(rng), y = u(rng), h = 5.0;
        fp.polygon = geo::Ring({{x - h, y - h}, {x + h, y - h}, {x + h, y + h}, {x - h, y + h}});
        fp.centroid = fp.polygon.centroid();
        fp.is_residential = true;
        scene.push_back(std::move(fp));
    }
    pairing::FootprintIndex index(&scene);
    CaptureSample cap;
    cap.id = "c";
    cap.position = {0.0, 0.0};
    cap.width_px = 1024;
    pairing::PairingConfig cfg;
    for (auto _ : state) {
        auto mask = pairing::facade_column_mask(cap, scene[0], index, cfg);
        benchmark::DoNotOptimize(mask.data());
    }
}
BENCHMARK(bench_facade_column_mask);

void bench_zonal_tir(benchmark::State& state) {
    cv::Mat grid(256, 256, CV_32FC1);
    cv::randu(grid, 20.0f, 60.0f);
    geo::Raster raster(grid, geo::GeoTransform::north_up({0, 896}, 3.5));
    BuildingFootprint fp;
    fp.id = "b";
    fp.polygon = geo::Ring({{300, 300}, {420, 300}, {420, 420}, {300, 420}});
    fp.centroid = fp.polygon.centroid();
    for (auto _ : state) {
        auto [v, ok] = features::zonal_tir(raster, fp);
        benchmark::DoNotOptimize(v);
        benchmark::DoNotOptimize(ok);
    }
}
BENCHMARK(bench_zonal_tir);

void bench_kruskal_wallis(benchmark::State& state) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<std::vector<double>> groups(4);
    for (auto& g : groups)
        for (int i = 0; i < 200; ++i) g.push_back(d(rng));
    for (auto _ : state) {
        auto [h, p] = stats::kruskal_wallis(groups);
        benchmark::DoNotOptimize(h);
        benchmark::DoNotOptimize(p);
    }
}
BENCHMARK(bench_kruskal_wallis);

}  // namespace

BENCHMARK_MAIN();
