#include <random>

#include <benchmark/benchmark.h>

#include "echoroom/beamform.hpp"
#include "echoroom/calibrate.hpp"
#include "echoroom/probe.hpp"
#include "echoroom/simulation.hpp"
#include "echoroom/stft.hpp"

using namespace echoroom;

static void BM_SimulateRir(benchmark::State& state) {
  const RoomSpec room = RoomSpec::from_surface_code(Vec3(6, 6, 2.4), "011111");
  SimulationOptions opt;
  opt.max_order = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_rir(room, Vec3(2.2, 2.9, 0.7), Vec3(4.1, 3.3, 1.2), opt));
  }
  state.SetLabel("order " + std::to_string(opt.max_order));
}
BENCHMARK(BM_SimulateRir)->Arg(1)->Arg(5)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

static void BM_StftRoundTrip(benchmark::State& state) {
  StftSpec spec;
  spec.length = static_cast<std::size_t>(state.range(0));
  spec.hop = spec.length / 2;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> x(96000);
  for (double& v : x) v = g(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(istft(stft(x, spec), spec, x.size()));
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * static_cast<int64_t>(x.size()));
}
BENCHMARK(BM_StftRoundTrip)->Arg(512)->Arg(1024)->Arg(2048)->Unit(benchmark::kMillisecond);

static void BM_MvdrWeights(benchmark::State& state) {
  const auto channels = static_cast<Eigen::Index>(state.range(0));
  const std::size_t bins = 513;
  std::vector<Vec3> mics;
  for (Eigen::Index i = 0; i < channels; ++i) mics.emplace_back(0.04 * static_cast<double>(i), 0.0, 1.0);
  std::vector<double> freqs(bins);
  for (std::size_t k = 0; k < bins; ++k) freqs[k] = 24000.0 * static_cast<double>(k) / (bins - 1);
  NoiseCovariance phi = diffuse_coherence(mics, freqs, kDefaultSpeedOfSound);
  for (auto& m : phi) diagonal_load(m, 1e-3);
  const SteeringMatrix h = steering_dp(mics, Vec3(2.0, 1.5, 1.2), freqs, kDefaultSpeedOfSound, 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mvdr_weights(h, phi, 0));
  }
}
BENCHMARK(BM_MvdrWeights)->Arg(2)->Arg(5)->Arg(16)->Unit(benchmark::kMicrosecond);

static void BM_EstimateRir(benchmark::State& state) {
  SweepSpec spec;
  spec.duration = static_cast<double>(state.range(0));
  spec.repetitions = 1;
  const auto sweep = generate_sweep(spec);
  DeconvolutionOptions opt;
  opt.rir_length = 48000;
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_rir(sweep, sweep, spec.sample_rate, opt));
  }
}
BENCHMARK(BM_EstimateRir)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

static void BM_Calibration(benchmark::State& state) {
  const RoomSpec room;
  const SceneLayout truth = reference_layout();
  const EchoAnnotation ann = predict_echo_annotation(room, truth, 1);
  SceneLayout init = truth;
  for (auto& a : init.arrays) a.barycenter += Vec3(0.03, -0.02, 0.02);
  for (auto& s : init.sources) s.position += Vec3(-0.02, 0.03, 0.01);
  const CalibrationProblem problem = CalibrationProblem::from_annotation(ann, truth, room);
  const MdsMode mode = state.range(0) == 0 ? MdsMode::kDirect : MdsMode::kDirectCeiling;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_mds(problem, init, mode));
  }
  state.SetLabel(mode == MdsMode::kDirect ? "dMDS" : "dcMDS");
}
BENCHMARK(BM_Calibration)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
