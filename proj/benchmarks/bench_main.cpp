#include "nste/dataset.hpp"
#include "nste/imaging.hpp"
#include "nste/metrics.hpp"
#include "nste/model.hpp"
#include "nste/nn/layers.hpp"
#include "nste/training.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace nste;

namespace {

ImagePlane noise_image(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    ImagePlane img(h, w);
    for (double& v : img.data()) v = u(rng);
    return img;
}

void BM_WarpImage(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto img = noise_image(n, n, 1);
    const auto H = Homography::from_params(std::array<double, 8>{1.1, 0.05, 3, -0.02, 0.95, 2, 1e-4, 0});
    for (auto _ : state) benchmark::DoNotOptimize(warp_image(img, H, {n * 5 / 4, n * 15 / 16}));
}
BENCHMARK(BM_WarpImage)->Arg(64)->Arg(256);

void BM_Blur(benchmark::State& state) {
    const auto img = noise_image(256, 256, 2);
    const BlurSpec b{static_cast<int>(state.range(0)), 0.0, {}};
    for (auto _ : state) benchmark::DoNotOptimize(apply_blur(img, b));
}
BENCHMARK(BM_Blur)->Arg(3)->Arg(9)->Arg(17);

void BM_SimulatePair(benchmark::State& state) {
    const auto m = make_manifest("medium", static_cast<Resolution>(state.range(0)), 1, 10);
    for (auto _ : state) benchmark::DoNotOptimize(simulate_pair(m, 0));
}
BENCHMARK(BM_SimulatePair)->Arg(static_cast<int>(Resolution::desk))->Arg(static_cast<int>(Resolution::paper));

void BM_Ssim(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto a = noise_image(n, n, 3), b = noise_image(n, n, 4);
    for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(256);

void BM_ReconLossWithGrad(benchmark::State& state) {
    const auto a = noise_image(64, 64, 5), b = noise_image(64, 64, 6);
    std::vector<double> g;
    for (auto _ : state) benchmark::DoNotOptimize(recon_loss_with_grad(a, b, g));
}
BENCHMARK(BM_ReconLossWithGrad);

void BM_Conv3x3(benchmark::State& state) {
    const int in = static_cast<int>(state.range(0)), out = static_cast<int>(state.range(1));
    std::mt19937_64 rng(7);
    nn::ParamSet ps;
    const auto conv = nn::Conv2d::create(ps, "c", in, out, 3, 1, 1, rng);
    nn::Tensor x(in, 64, 64, 0.5f), y;
    for (auto _ : state) {
        conv.forward(ps, x, y);
        benchmark::DoNotOptimize(y.v.data());
    }
}
BENCHMARK(BM_Conv3x3)->Args({3, 16})->Args({32, 32})->Args({32, 3});

void BM_ModelStep(benchmark::State& state) {
    const auto v = static_cast<ModelVariant>(state.range(0));
    const auto m = make_manifest("easy", Resolution::desk, 1, 10);
    const std::vector<PairedSample> data{simulate_pair(m, 0)};
    const NeuralSte net(v, geometry_for(data));
    const auto p = net.init(1);
    nn::GradSet grads = p.params.zeros_like();
    const std::vector<const PairedSample*> batch{&data[0]};
    for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(net, p, batch, {}, grads));
    state.SetLabel(to_string(v));
}
BENCHMARK(BM_ModelStep)
    ->Arg(static_cast<int>(ModelVariant::full))
    ->Arg(static_cast<int>(ModelVariant::no_refine))
    ->Arg(static_cast<int>(ModelVariant::black_box))
    ->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
