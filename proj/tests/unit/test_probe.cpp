#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "echoroom/annotate.hpp"
#include "echoroom/errors.hpp"
#include "echoroom/fft.hpp"
#include "echoroom/geometry.hpp"
#include "echoroom/probe.hpp"
#include "echoroom/simulation.hpp"

using namespace echoroom;

namespace {

constexpr double kFs = 48000.0;

SweepSpec short_sweep() {
  SweepSpec s;
  s.duration = 1.0;
  s.fade = 0.05;
  s.repetitions = 1;
  s.gap = 0.25;
  return s;
}

double rms(std::span<const double> x) {
  return std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0) / static_cast<double>(x.size()));
}

std::vector<double> add_noise(std::vector<double> x, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, sigma);
  for (double& v : x) v += g(rng);
  return x;
}

double correlation(std::span<const double> a, std::span<const double> b) {
  const double ab = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  const double aa = std::inner_product(a.begin(), a.end(), a.begin(), 0.0);
  const double bb = std::inner_product(b.begin(), b.end(), b.begin(), 0.0);
  return ab / std::sqrt(aa * bb);
}

std::size_t argmax_abs(std::span<const double> x) {
  return static_cast<std::size_t>(std::max_element(x.begin(), x.end(), [](double a, double b) {
                                    return std::abs(a) < std::abs(b);
                                  }) -
                                  x.begin());
}

}  // namespace

TEST(SweepSpec, InstantaneousFrequencyMatchesPhaseDerivative) {
  const SweepSpec s;
  const double h = 1e-7;
  const double f0 = (s.phase(h) - s.phase(0.0)) / h / (2.0 * M_PI);
  const double f1 = (s.phase(s.duration) - s.phase(s.duration - h)) / h / (2.0 * M_PI);
  EXPECT_NEAR(f0, s.f_start, 1e-3 * s.f_start);
  EXPECT_NEAR(f1, s.f_stop, 1e-3 * s.f_stop);
  EXPECT_NEAR(s.instantaneous_frequency(0.0), s.f_start, 1e-9);
  EXPECT_NEAR(s.instantaneous_frequency(s.duration), s.f_stop, 1e-6);
}

TEST(SweepSpec, DefaultTimingGivesThirtyFourSeconds) {
  const SweepSpec s;
  EXPECT_EQ(s.total_samples(), static_cast<std::size_t>(34.0 * kFs));
  EXPECT_EQ(generate_ess(s).size(), s.total_samples());
}

TEST(SweepSpec, RejectsInvalidRanges) {
  SweepSpec s;
  s.f_stop = 30000.0;
  EXPECT_THROW(s.validate(), ValidationError);
  s = SweepSpec{};
  s.f_start = 0.0;
  EXPECT_THROW(s.validate(), ValidationError);
  s = SweepSpec{};
  s.fade = 5.0;
  EXPECT_THROW(s.validate(), ValidationError);
}

TEST(GenerateEss, PeakAmplitudeAtMostOne) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    SweepSpec s = short_sweep();
    s.f_start = 20.0 + 200.0 * u(rng);
    s.f_stop = 1000.0 + 23000.0 * u(rng);
    s.duration = 0.2 + u(rng);
    s.fade = 0.4 * s.duration * u(rng);
    s.repetitions = 1 + t % 3;
    const auto x = generate_ess(s);
    for (double v : x) ASSERT_LE(std::abs(v), 1.0);
  }
}

TEST(GenerateEss, RepetitionsAreSeparatedBySilence) {
  SweepSpec s = short_sweep();
  s.repetitions = 3;
  const auto x = generate_ess(s);
  const auto one = generate_sweep(s);
  for (std::size_t i = 0; i < one.size(); ++i) ASSERT_EQ(x[2 * s.period_samples() + i], one[i]);
  for (std::size_t i = one.size(); i < s.period_samples(); ++i) ASSERT_EQ(x[i], 0.0);
}

TEST(EstimateRir, SelfDeconvolutionIsAnImpulse) {
  const auto ref = generate_sweep(SweepSpec{});
  DeconvolutionOptions o;
  o.rir_length = std::numeric_limits<std::size_t>::max();
  const Rir r = estimate_rir(ref, ref, kFs, o);
  ASSERT_EQ(argmax_abs(r.samples), 0u);
  const double peak = std::abs(r.samples[0]);
  // Lags are circular; everything beyond 10 ms on either side counts as sidelobe.
  const std::size_t guard = 480;
  double worst = 0.0;
  for (std::size_t i = guard; i + guard < r.size(); ++i) worst = std::max(worst, std::abs(r.samples[i]));
  EXPECT_LT(20.0 * std::log10(worst / peak), -60.0);
}

TEST(EstimateRir, DelayedHalvedRecordingShiftsAndScales) {
  const auto ref = generate_sweep(short_sweep());
  std::vector<double> rec(ref.size() + 480, 0.0);
  for (std::size_t i = 0; i < ref.size(); ++i) rec[i + 480] = 0.5 * ref[i];
  std::vector<double> self(rec.size(), 0.0);
  std::copy(ref.begin(), ref.end(), self.begin());
  const Rir shifted = estimate_rir(rec, ref, kFs);
  const Rir base = estimate_rir(self, ref, kFs);
  EXPECT_EQ(argmax_abs(shifted.samples), 480u);
  for (std::size_t k = 0; k + 480 < shifted.size(); ++k) {
    ASSERT_NEAR(shifted.samples[k + 480], 0.5 * base.samples[k], 1e-9);
  }
}

TEST(EstimateRir, RecoversSimulatedRoomAtFortyDecibels) {
  const SweepSpec spec = short_sweep();
  const auto ref = generate_sweep(spec);
  const RoomSpec room = RoomSpec::from_surface_code(Vec3(6, 6, 2.4), "011111");
  SimulationOptions opt;
  opt.duration = 0.1;
  const Rir truth = simulate_rir(room, Vec3(1.5, 4.2, 1.4), Vec3(4.1, 2.0, 1.1), opt);
  auto rec = dsp::convolve(ref, truth.samples);
  std::mt19937_64 rng(7);
  rec = add_noise(rec, rms(rec) * 1e-2, rng);
  DeconvolutionOptions o;
  o.rir_length = truth.size();
  const Rir est = estimate_rir(rec, ref, kFs, o);

  // The estimator is linear, so without noise it returns the true RIR seen
  // through the probe's own band-limited response.
  DeconvolutionOptions full;
  full.rir_length = std::numeric_limits<std::size_t>::max();
  const Rir system = estimate_rir(ref, ref, kFs, full);
  const std::size_t n = system.size();
  auto h = dsp::rfft(truth.samples, n);
  const auto g = dsp::rfft(system.samples, n);
  for (std::size_t k = 0; k < h.size(); ++k) h[k] *= g[k];
  const auto expected = dsp::irfft(h, n);

  const std::size_t early = 2400;
  EXPECT_GE(correlation(std::span(est.samples).first(early), std::span(expected).first(early)), 0.99);
}

TEST(EstimateRir, RecoversFirstOrderEchoTimings) {
  const SweepSpec spec = short_sweep();
  const auto ref = generate_sweep(spec);
  const RoomSpec room = RoomSpec::from_surface_code(Vec3(6, 6, 2.4), "011111");
  SceneLayout l;
  ArrayPose a;
  a.barycenter = Vec3(1.83, 2.26, 0.77);
  a.local_offsets = {0.0};
  l.arrays.push_back(a);
  l.sources.push_back({Vec3(2.24, 2.88, 0.73), "s"});
  SimulationOptions opt;
  opt.max_order = 1;
  const auto rirs = simulate_scene(room, l, opt);
  const auto rec = dsp::convolve(ref, rirs[0][0].samples);
  DeconvolutionOptions o;
  o.rir_length = rirs[0][0].size();
  std::vector<std::vector<Rir>> est = {{estimate_rir(rec, ref, kFs, o)}};
  const auto run = annotate_rirs(est, room, l);
  const auto truth = predict_echo_annotation(room, l, 1);
  for (const auto& e : *truth.find(0, 0)) {
    const Echo* got = run.annotation.find_echo(0, 0, e.label);
    ASSERT_NE(got, nullptr) << e.label;
    EXPECT_LE(std::abs(got->toa - e.toa) * kFs, 2.0) << e.label;
  }
}

TEST(EstimateRir, AveragingRepetitionsLowersTheNoiseFloor) {
  SweepSpec spec = short_sweep();
  spec.duration = 0.5;
  spec.fade = 0.02;
  spec.repetitions = 4;
  const auto one = generate_sweep(spec);
  auto probe = generate_ess(spec);
  probe.resize(probe.size() + spec.gap_samples(), 0.0);
  double gain_db = 0.0;
  const int seeds = 10;
  for (int seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(100 + seed));
    const auto rec = add_noise(probe, 0.05, rng);
    DeconvolutionOptions single;
    single.rir_length = 4000;
    DeconvolutionOptions avg = single;
    avg.repetitions = spec.repetitions;
    avg.period = spec.period_samples();
    const std::span<const double> first(rec.data(), spec.period_samples());
    const Rir r1 = estimate_rir(first, one, kFs, single);
    const Rir r4 = estimate_rir(rec, one, kFs, avg);
    const auto tail1 = std::span(r1.samples).subspan(1000);
    const auto tail4 = std::span(r4.samples).subspan(1000);
    gain_db += 20.0 * std::log10(rms(tail1) / rms(tail4));
  }
  EXPECT_NEAR(gain_db / seeds, 10.0 * std::log10(4.0), 1.0);
}

TEST(EstimateRir, RejectsDegenerateInputs) {
  const std::vector<double> zero(100, 0.0), ref(200, 0.1);
  EXPECT_THROW(estimate_rir(ref, zero, kFs), ValidationError);
  EXPECT_THROW(estimate_rir(zero, ref, kFs), ValidationError);
}

TEST(EstimateRir, FlagsClippedRecordings) {
  const auto ref = generate_sweep(short_sweep());
  std::vector<double> rec = ref;
  for (double& v : rec) v = std::clamp(3.0 * v, -1.0, 1.0);
  EXPECT_TRUE(is_clipped(rec));
  EXPECT_TRUE(estimate_rir(rec, ref, kFs).clipped);
  std::vector<double> quiet = ref;
  for (double& v : quiet) v *= 0.5;
  EXPECT_FALSE(is_clipped(quiet));
  EXPECT_FALSE(estimate_rir(quiet, ref, kFs).clipped);
}

TEST(AlignByLoopback, RecoversIntegerShiftUnderGainScaling) {
  const auto ref = generate_sweep(short_sweep());
  for (std::size_t k : {0u, 1u, 333u, 4800u}) {
    std::vector<double> loop(ref.size() + 6000, 0.0), mic(loop.size(), 0.0);
    for (std::size_t i = 0; i < ref.size(); ++i) loop[i + k] = ref[i];
    mic[k + 10] = 1.0;
    const auto a = align_by_loopback({mic, loop}, 1, ref);
    EXPECT_EQ(a.onset, k);
    EXPECT_NEAR(a.peak_correlation, 1.0, 1e-9);
    EXPECT_EQ(a.channels[0][10], 1.0);
    for (double& v : loop) v *= 0.013;
    EXPECT_EQ(align_by_loopback({mic, loop}, 1, ref).onset, k);
  }
}

TEST(AlignByLoopback, WithinOneSampleAtTwentyDecibels) {
  const auto ref = generate_sweep(short_sweep());
  const double sigma = rms(ref) * 0.1;
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    const std::size_t k = 100 + static_cast<std::size_t>(seed) * 97;
    std::vector<double> loop(ref.size() + 4000, 0.0);
    for (std::size_t i = 0; i < ref.size(); ++i) loop[i + k] = ref[i];
    loop = add_noise(loop, sigma, rng);
    const auto a = align_by_loopback({loop}, 0, ref);
    EXPECT_LE(std::abs(static_cast<double>(a.onset) - static_cast<double>(k)), 1.0);
  }
}

TEST(AlignByLoopback, FailsWithoutTheReference) {
  const auto ref = generate_sweep(short_sweep());
  std::mt19937_64 rng(9);
  const auto loop = add_noise(std::vector<double>(ref.size() + 2000, 0.0), 1.0, rng);
  EXPECT_THROW(align_by_loopback({loop}, 0, ref), NumericalError);
  EXPECT_THROW(align_by_loopback({loop}, 3, ref), ValidationError);
}

TEST(AlignByLoopback, RepeatedProbeLocksOntoFirstRepetition) {
  SweepSpec spec = short_sweep();
  spec.repetitions = 3;
  const auto probe = generate_ess(spec);
  const auto sweep = generate_sweep(spec);
  for (std::size_t shift : {0u, 17u, 4801u}) {
    std::vector<double> loop(shift + probe.size() + 500, 0.0);
    for (std::size_t i = 0; i < probe.size(); ++i) loop[shift + i] = 0.7 * probe[i];
    const auto al = align_by_loopback({loop}, 0, sweep);
    EXPECT_EQ(al.onset, shift);
  }
}
