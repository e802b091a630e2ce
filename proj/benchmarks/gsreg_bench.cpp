#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "gsreg/coarse_reg.hpp"
#include "gsreg/fine_reg.hpp"
#include "gsreg/fusion.hpp"
#include "gsreg/overlap_select.hpp"
#include "gsreg/sh_transform.hpp"
#include "gsreg/splat_render.hpp"
#include "gsreg/synthetic.hpp"

namespace gsreg {
namespace {

const SyntheticPair& scene() {
  static const SyntheticPair pair = [] {
    SyntheticConfig cfg;
    cfg.gaussian_count = 20000;
    cfg.cameras_per_side = 30;
    return make_synthetic_scene_pair(7, cfg);
  }();
  return pair;
}

void BM_BuildShRotation(benchmark::State& state) {
  const Eigen::Matrix3d R = axis_angle(Eigen::Vector3d(1, 2, 3).normalized(), 0.7);
  for (auto _ : state) benchmark::DoNotOptimize(build_sh_rotation(R));
}
BENCHMARK(BM_BuildShRotation);

void BM_TransformModel(benchmark::State& state) {
  const GaussianModel& m = scene().a;
  const Sim3 x = Sim3::create(1.2, axis_angle(Eigen::Vector3d::UnitY(), 0.3), {0.5, 0.0, 1.0});
  for (auto _ : state) benchmark::DoNotOptimize(transform_model(m, x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.size()));
}
BENCHMARK(BM_TransformModel)->Unit(benchmark::kMillisecond);

void BM_Render(benchmark::State& state) {
  const GaussianModel& m = scene().a;
  const int w = static_cast<int>(state.range(0)), h = w * 3 / 4;
  for (auto _ : state) benchmark::DoNotOptimize(render(m, m.cameras.front(), w, h, true));
}
BENCHMARK(BM_Render)->Arg(160)->Arg(320)->Unit(benchmark::kMillisecond);

void BM_CostVolume(benchmark::State& state) {
  const GaussianModel& m = scene().a;
  const std::vector<CameraPose> cams = subsample_cameras(m.cameras, 5);
  std::vector<ColorImage> images;
  for (const CameraPose& c : cams) images.push_back(render_color(m, c, 160, 120));
  const auto range = depth_range_from_render(m, cams[0], 160, 120);
  const std::span<const ColorImage> src = std::span(images).subspan(1);
  const std::span<const CameraPose> src_cams = std::span(cams).subspan(1);
  const auto depths = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_cost_volume(images[0], src, cams[0], src_cams, range, depths));
  }
}
BENCHMARK(BM_CostVolume)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_CoarseRegister(benchmark::State& state) {
  const ColoredPointCloud a = extract_confident_points(scene().a);
  const ColoredPointCloud b = extract_confident_points(scene().b);
  for (auto _ : state) benchmark::DoNotOptimize(coarse_register(a, b));
}
BENCHMARK(BM_CoarseRegister)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_Merge(benchmark::State& state) {
  const GaussianModel b = transform_model(scene().b, scene().ground_truth);
  for (auto _ : state) benchmark::DoNotOptimize(merge_models(scene().a, b));
}
BENCHMARK(BM_Merge)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace gsreg

BENCHMARK_MAIN();
