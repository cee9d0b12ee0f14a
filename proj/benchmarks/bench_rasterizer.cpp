#include "gsalign/rasterizer.hpp"
#include "gsalign_cli/cli.hpp"

#include <benchmark/benchmark.h>

using namespace gsalign;

namespace {

/// Overlap scene with `range(0)` splats on a 128x128 image.
cli::OverlapScene scene_for(const benchmark::State& state) {
    return cli::make_overlap_scene(int(state.range(0)), 128, 1);
}

Image unit_grad(const Camera& camera) {
    return Image(camera.width, camera.height, 1.0 / (3.0 * camera.width * camera.height));
}

void bm_forward(benchmark::State& state) {
    const auto s = scene_for(state);
    for (auto _ : state) benchmark::DoNotOptimize(rasterize_forward<float>(s.map, s.camera));
}

void bm_backward(benchmark::State& state, BackwardMode mode) {
    const auto s = scene_for(state);
    const auto render = rasterize_forward<float>(s.map, s.camera);
    const Image grad = unit_grad(s.camera);
    for (auto _ : state) benchmark::DoNotOptimize(backward(mode, render, s.map, s.camera, grad));
}

void bm_backward_pixel(benchmark::State& state) { bm_backward(state, BackwardMode::pixel); }
void bm_backward_splat(benchmark::State& state) { bm_backward(state, BackwardMode::splat); }

}  // namespace

BENCHMARK(bm_forward)->Arg(100)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_backward_pixel)->Arg(100)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_backward_splat)->Arg(100)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
