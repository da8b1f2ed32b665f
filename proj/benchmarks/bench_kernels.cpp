#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "plk/camera.hpp"
#include "plk/optim_fit.hpp"
#include "plk/parallel.hpp"
#include "plk/photometric.hpp"
#include "plk/soft_quant.hpp"

namespace {

using namespace plk;

std::vector<Vec3> random_cloud(std::size_t n) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> xy(-32, 32), z(0, 8);
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts) p = Vec3(xy(rng), xy(rng), z(rng));
  return pts;
}

VoxelGridSpec bev_grid() {
  VoxelGridSpec s;
  s.bins = {128, 128, 32};
  s.bin_size = Vec3(0.5, 0.5, 0.25);
  s.origin = Vec3(-32, -32, 0);
  s.sigma = VoxelGridSpec::default_sigma(s.bin_size);
  return s;
}

// Arg 0: thread cap (0 = all cores).
void BM_SoftQuantize100k(benchmark::State& state) {
  set_thread_count(static_cast<unsigned>(state.range(0)));
  const auto pts = random_cloud(100000);
  const VoxelGridSpec s = bev_grid();
  for (auto _ : state) benchmark::DoNotOptimize(soft_quantize(pts, s));
  state.SetItemsProcessed(state.iterations() * 100000);
  set_thread_count(0);
}
BENCHMARK(BM_SoftQuantize100k)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_SoftQuantizeGrad100k(benchmark::State& state) {
  set_thread_count(static_cast<unsigned>(state.range(0)));
  const auto pts = random_cloud(100000);
  const VoxelGridSpec s = bev_grid();
  const DenseGrid up({128, 128, 32}, 1, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(soft_quantize_grad(pts, s, up));
  set_thread_count(0);
}
BENCHMARK(BM_SoftQuantizeGrad100k)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

void BM_Backproject(benchmark::State& state) {
  const auto h = state.range(0), w = state.range(0) * 10 / 3;
  const DenseGrid d({h, w}, 1, 12.0);
  const CameraIntrinsics cam = default_camera(h, w);
  for (auto _ : state) benchmark::DoNotOptimize(backproject(d, cam));
}
BENCHMARK(BM_Backproject)->Arg(375)->Unit(benchmark::kMillisecond);

void BM_SelfSupervisedLoss(benchmark::State& state) {
  const auto h = state.range(0), w = state.range(0) * 4 / 3;
  const SyntheticScene s = make_scene(SceneKind::textured_random, h, w, default_camera(h, w), 1.0, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(self_supervised_loss(s.image_t, s.image_prev, s.image_next, s.gt_depth,
                                                  s.pose_to_prev, s.pose_to_next, s.cam,
                                                  PhotometricConfig{}));
  }
}
BENCHMARK(BM_SelfSupervisedLoss)->Arg(48)->Arg(192)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  DenseGrid a({192, 256}, 3), b({192, 256}, 3);
  for (double& v : a.values()) v = u(rng);
  for (double& v : b.values()) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b, SsimConfig{}));
}
BENCHMARK(BM_Ssim)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
