#include <benchmark/benchmark.h>

#include <numbers>
#include <random>

#include "cathreg/cathreg.hpp"

using namespace cathreg;

namespace {

Path3 random_path(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::vector<Point3> pts(n);
  for (auto& p : pts) p = Point3(u(rng), u(rng), u(rng));
  return Path3(std::move(pts), Frame::Preop);
}

struct Scene {
  Branch route;
  SimulatedAcquisition sim;
};

Scene scene(double noise) {
  const PhantomModel phantom = generate_phantom(6, 42);
  Branch route = phantom_route(phantom, 3);
  AcquisitionConfig cfg;
  cfg.noise_sigma = noise;
  cfg.seed = 9;
  SimulatedAcquisition sim = simulate_em_path(route, cfg, sample_rigid_transform(9, 10.0, 50.0));
  return Scene{std::move(route), std::move(sim)};
}

void BM_DtwAlign(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Path3 a = random_path(n, 1);
  const Path3 b = random_path(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(dtw_align(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DtwAlign)->RangeMultiplier(2)->Range(64, 1024)->Complexity(benchmark::oNSquared);

void BM_DtwAlignBanded(benchmark::State& state) {
  const Path3 a = random_path(1024, 1);
  const Path3 b = random_path(1024, 2);
  const auto radius = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(dtw_align(a, b, radius));
}
BENCHMARK(BM_DtwAlignBanded)->Arg(16)->Arg(64)->Arg(256);

void BM_RigidFit(benchmark::State& state) {
  const Path3 src = random_path(static_cast<std::size_t>(state.range(0)), 3);
  const RigidTransform t{axis_angle_rotation(Point3(1, 2, 3), 0.4), Point3(5, -2, 8)};
  std::vector<Point3> dst;
  for (const auto& p : src.points()) dst.push_back(t.apply(p));
  for (auto _ : state) benchmark::DoNotOptimize(rigid_fit_corresponded(src.points(), dst));
}
BENCHMARK(BM_RigidFit)->Arg(30)->Arg(1000);

void BM_RegisterDtw(benchmark::State& state) {
  const Scene s = scene(0.5);
  for (auto _ : state) benchmark::DoNotOptimize(register_dtw(s.sim.em_path, s.route.centerline));
}
BENCHMARK(BM_RegisterDtw)->Unit(benchmark::kMillisecond);

void BM_RegisterIcpFromDtw(benchmark::State& state) {
  const Scene s = scene(0.5);
  const RigidTransform init = register_dtw(s.sim.em_path, s.route.centerline).transform;
  for (auto _ : state) benchmark::DoNotOptimize(register_icp(s.sim.em_path, s.route.centerline, init));
}
BENCHMARK(BM_RegisterIcpFromDtw)->Unit(benchmark::kMillisecond);

void BM_MeanRegistrationError(benchmark::State& state) {
  const Scene s = scene(0.5);
  const Path3 gt = s.route.centerline;
  const Path3 reg = apply_transform(invert_transform(s.sim.ground_truth), s.sim.em_path, Frame::Preop);
  for (auto _ : state) benchmark::DoNotOptimize(mean_registration_error(reg, gt));
}
BENCHMARK(BM_MeanRegistrationError);

}  // namespace
BENCHMARK_MAIN();
