#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "echoroom/annotate.hpp"
#include "echoroom/errors.hpp"
#include "echoroom/geometry.hpp"
#include "echoroom/simulation.hpp"
#include "oracles.hpp"

using namespace echoroom;

namespace {

constexpr double kFs = 48000.0;

Rir from_samples(std::vector<double> x) {
  Rir r;
  r.samples = std::move(x);
  return r;
}

std::vector<double> hann_hump(std::size_t length) {
  std::vector<double> k(length);
  for (std::size_t i = 0; i < length; ++i) {
    k[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i + 1) / static_cast<double>(length + 1)));
  }
  return k;
}

void add_scaled(std::vector<double>& out, const std::vector<double>& kernel, std::size_t at, double gain) {
  for (std::size_t i = 0; i < kernel.size(); ++i) out[at + i] += gain * kernel[i];
}

SceneLayout single_channel(const Vec3& mic, const Vec3& src) {
  SceneLayout l;
  ArrayPose a;
  a.barycenter = mic;
  a.local_offsets = {0.0};
  l.arrays.push_back(a);
  l.sources.push_back({src, "s"});
  return l;
}

std::vector<Peak> peaks_at(std::initializer_list<double> positions) {
  std::vector<Peak> out;
  for (double p : positions) {
    Peak k;
    k.position = p;
    k.sample = static_cast<std::size_t>(std::lround(p));
    k.height = 1.0;
    out.push_back(k);
  }
  return out;
}

std::vector<Echo> echoes_at(std::initializer_list<std::pair<const char*, double>> items) {
  std::vector<Echo> out;
  for (const auto& [label, toa] : items) out.push_back({label, toa, 1.0, {}});
  return out;
}

}  // namespace

TEST(BuildSkyline, ColumnsAreNormalized) {
  std::vector<Rir> rirs = {from_samples({0.0, 0.5, -0.25, 0.1}), from_samples({-2.0, 1.0})};
  const Skyline s = build_skyline(rirs);
  ASSERT_EQ(s.matrix.rows(), 4);
  ASSERT_EQ(s.matrix.cols(), 2);
  EXPECT_DOUBLE_EQ(s.matrix(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(s.matrix(2, 0), 0.5);
  EXPECT_DOUBLE_EQ(s.matrix(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(s.matrix(3, 1), 0.0);
  for (Eigen::Index c = 0; c < s.matrix.cols(); ++c) EXPECT_DOUBLE_EQ(s.matrix.col(c).maxCoeff(), 1.0);
  EXPECT_GE(s.matrix.minCoeff(), 0.0);
}

TEST(BuildSkyline, PermutingOrderPermutesColumns) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::vector<Rir> rirs;
  for (int k = 0; k < 5; ++k) {
    std::vector<double> x(50);
    for (double& v : x) v = g(rng);
    rirs.push_back(from_samples(x));
  }
  const Skyline base = build_skyline(rirs);
  const std::vector<std::size_t> order = {3, 0, 4, 1, 2};
  const Skyline perm = build_skyline(rirs, order);
  EXPECT_EQ(perm.mic_order, order);
  for (std::size_t n = 0; n < order.size(); ++n) {
    EXPECT_EQ(perm.matrix.col(static_cast<Eigen::Index>(n)), base.matrix.col(static_cast<Eigen::Index>(order[n])));
  }
}

TEST(BuildSkyline, AllZeroRirNamesTheChannel) {
  std::vector<Rir> rirs = {from_samples({1.0, 0.0}), from_samples({0.0, 0.0})};
  try {
    build_skyline(rirs);
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("RIR 1"), std::string::npos);
  }
}

TEST(BuildSkyline, DirectRidgeIsCoherentWithinEachArray) {
  const RoomSpec room = RoomSpec::from_surface_code(Vec3(6, 6, 2.4), "011111");
  const SceneLayout layout = reference_layout();
  SimulationOptions opt;
  opt.duration = 0.05;
  const auto rirs = simulate_scene(room, layout, opt);
  const auto truth = predict_echo_annotation(room, layout, 0);
  for (std::size_t s = 0; s < layout.source_count(); ++s) {
    std::vector<Rir> column;
    for (std::size_t m = 0; m < layout.mic_count(); ++m) column.push_back(rirs[m][s]);
    const Skyline sky = build_skyline(column);
    for (std::size_t a = 0; a < layout.arrays.size(); ++a) {
      const std::size_t first = layout.array_first_mics()[a];
      const std::size_t count = layout.arrays[a].local_offsets.size();
      double lo = 1e9, hi = -1e9;
      std::vector<Eigen::Index> rows;
      for (std::size_t m = first; m < first + count; ++m) {
        const double toa = truth.find_echo(m, s, "d")->toa * kFs;
        lo = std::min(lo, toa);
        hi = std::max(hi, toa);
        // The ridge is the first local maximum above half the column peak.
        const auto col = sky.matrix.col(static_cast<Eigen::Index>(m));
        Eigen::Index row = 0;
        while (col(row) < 0.5) ++row;
        while (row + 1 < col.size() && col(row + 1) > col(row)) ++row;
        rows.push_back(row);
      }
      const auto [mn, mx] = std::minmax_element(rows.begin(), rows.end());
      EXPECT_LE(static_cast<double>(*mx - *mn), std::ceil(hi - lo) + 1.0) << "array " << a << " source " << s;
    }
  }
}

TEST(EqualizeDirectPath, ImpulsiveRirIsUnchanged) {
  std::vector<double> x(1000, 0.0);
  x[200] = 0.8;
  x[520] = -0.3;
  x[777] = 0.25;
  const auto eq = equalize_direct_path(from_samples(x), 200.0);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(eq[i], x[i] / 0.8, 1e-9) << i;
}

TEST(EqualizeDirectPath, CopiesOfTheKernelBecomeUnitSpikes) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  std::vector<double> kernel(61);
  for (std::size_t i = 0; i < kernel.size(); ++i) kernel[i] = g(rng) * std::exp(-static_cast<double>(i) / 20.0);
  std::vector<double> x(3000, 0.0);
  add_scaled(x, kernel, 400 - 30, 1.0);
  add_scaled(x, kernel, 900 - 30, 0.6);
  add_scaled(x, kernel, 1500 - 30, -0.35);
  const auto eq = equalize_direct_path(from_samples(x), 400.0);
  EXPECT_NEAR(eq[400], 1.0, 1e-12);
  EXPECT_NEAR(eq[900], 0.6, 0.02);
  EXPECT_NEAR(eq[1500], -0.35, 0.02);
  const auto peaks = find_peaks(eq);
  for (std::size_t at : {400u, 900u, 1500u}) {
    EXPECT_TRUE(std::any_of(peaks.begin(), peaks.end(), [&](const Peak& p) { return p.sample == at; })) << at;
  }
}

TEST(EqualizeDirectPath, SeparatesEchoesMergedByAWideKernel) {
  // Hann hump with a full width at half height of 100 samples.
  const auto kernel = hann_hump(199);
  std::vector<double> x(2000, 0.0);
  add_scaled(x, kernel, 300 - 99, 1.0);
  add_scaled(x, kernel, 900 - 99, 0.6);
  add_scaled(x, kernel, 960 - 99, 0.5);
  auto near = [](const std::vector<Peak>& peaks, double at) {
    return std::count_if(peaks.begin(), peaks.end(), [&](const Peak& p) { return std::abs(p.position - at) <= 1.0; });
  };
  const auto raw = find_peaks(x);
  const auto in_cluster = std::count_if(raw.begin(), raw.end(), [](const Peak& p) {
    return p.position > 850.0 && p.position < 1010.0;
  });
  EXPECT_EQ(in_cluster, 1);
  EqualizationOptions o;
  o.reg_eps = 1e-6;
  const auto eq = find_peaks(equalize_direct_path(from_samples(x), 300.0, o));
  EXPECT_EQ(near(eq, 900.0), 1);
  EXPECT_EQ(near(eq, 960.0), 1);
}

TEST(EqualizeDirectPath, NoiseOnlySegmentIsRejected) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1e-3);
  std::vector<double> x(4000);
  for (double& v : x) v = g(rng);
  x[3000] = 1.0;
  EXPECT_THROW(equalize_direct_path(from_samples(x), 500.0), NumericalError);
  EXPECT_THROW(equalize_direct_path(from_samples(x), 5000.0), ValidationError);
}

TEST(FindPeaks, HeightThreshold) {
  std::vector<double> x(300, 0.0);
  x[50] = 1.0;
  x[200] = 0.4;
  PeakFinderOptions o;
  o.min_height = 0.3;
  auto p = find_peaks(x, o);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].sample, 50u);
  EXPECT_EQ(p[1].sample, 200u);
  o.min_height = 0.5;
  p = find_peaks(x, o);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].sample, 50u);
}

TEST(FindPeaks, ThinsByHeightThenPrefersEarlierSample) {
  std::vector<double> x(300, 0.0);
  x[100] = 0.5;
  x[120] = 1.0;
  x[200] = 0.7;
  x[230] = 0.7;
  const auto p = find_peaks(x);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].sample, 120u);
  EXPECT_EQ(p[1].sample, 200u);
}

TEST(FindPeaks, SortedAndInvariantToPositiveScaling) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  std::vector<double> x(5000);
  for (double& v : x) v = g(rng);
  const auto base = find_peaks(x);
  ASSERT_FALSE(base.empty());
  for (std::size_t k = 1; k < base.size(); ++k) {
    EXPECT_LT(base[k - 1].sample, base[k].sample);
    EXPECT_GE(base[k].sample - base[k - 1].sample, 40u);
  }
  const double top = std::abs(*std::max_element(x.begin(), x.end(), [](double a, double b) {
    return std::abs(a) < std::abs(b);
  }));
  for (const auto& p : base) EXPECT_GT(p.height, 0.05 * top);
  for (double s : {1e-6, 0.37, 250.0}) {
    std::vector<double> y = x;
    for (double& v : y) v *= s;
    const auto scaled = find_peaks(y);
    ASSERT_EQ(scaled.size(), base.size());
    for (std::size_t k = 0; k < base.size(); ++k) {
      EXPECT_EQ(scaled[k].sample, base[k].sample);
      EXPECT_NEAR(scaled[k].position, base[k].position, 1e-9);
    }
  }
}

TEST(FindPeaks, ParabolicRefinementIsExactForAParabola) {
  std::vector<double> x(100, 0.0);
  for (int i = 40; i <= 60; ++i) x[static_cast<std::size_t>(i)] = 1.0 - 0.01 * std::pow(i - 50.3, 2);
  const auto p = find_peaks(x);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_NEAR(p[0].position, 50.3, 1e-9);
}

TEST(FindPeaks, RejectsBadOptions) {
  const std::vector<double> x(10, 1.0);
  EXPECT_THROW(find_peaks(x, {1.5, 40}), ValidationError);
  EXPECT_THROW(find_peaks(x, {0.1, 0}), ValidationError);
  EXPECT_TRUE(find_peaks(std::vector<double>(10, 0.0)).empty());
}

TEST(FindPeaks, SimulatedRoomShowsStrongestIsolatedArrivals) {
  const RoomSpec room = RoomSpec::from_surface_code(Vec3(6, 6, 2.4), "011111");
  const SceneLayout l = single_channel(Vec3(1.83, 2.26, 0.77), Vec3(2.24, 2.88, 0.73));
  SimulationOptions opt;
  opt.duration = 0.05;
  const Rir r = simulate_scene(room, l, opt)[0][0];
  const auto peaks = find_peaks(r.samples);
  // Arrivals without a comparable neighbour within two kernel half-widths, strongest first.
  std::vector<Echo> all = *predict_echo_annotation(room, l, 6).find(0, 0);
  std::erase_if(all, [](const Echo& e) { return e.toa > 0.045; });
  std::vector<Echo> isolated;
  for (const auto& e : all) {
    const bool alone = std::none_of(all.begin(), all.end(), [&](const Echo& o) {
      return &o != &e && std::abs(o.toa - e.toa) * kFs < 80.0 && o.amplitude > 0.25 * e.amplitude;
    });
    if (alone) isolated.push_back(e);
  }
  std::sort(isolated.begin(), isolated.end(), [](const Echo& a, const Echo& b) { return a.amplitude > b.amplitude; });
  ASSERT_GE(isolated.size(), 3u);
  for (const auto& e : isolated) {
    double best = 1e9;
    for (const auto& p : peaks) best = std::min(best, std::abs(p.position - e.toa * kFs));
    EXPECT_LE(best, 1.0) << e.label;
  }
}

TEST(FindPeaks, FirstOrderRirShowsAllSevenAnnotatedArrivals) {
  const RoomSpec room = RoomSpec::from_surface_code(Vec3(6, 6, 2.4), "011111");
  const SceneLayout l = single_channel(Vec3(1.83, 2.26, 0.77), Vec3(2.24, 2.88, 0.73));
  SimulationOptions opt;
  opt.max_order = 1;
  const auto peaks = find_peaks(simulate_scene(room, l, opt)[0][0].samples);
  const std::vector<Echo> echoes = *predict_echo_annotation(room, l, 1).find(0, 0);
  ASSERT_EQ(echoes.size(), 7u);
  for (const auto& e : echoes) {
    double best = 1e9;
    for (const auto& p : peaks) best = std::min(best, std::abs(p.position - e.toa * kFs));
    EXPECT_LE(best, 1.0) << e.label;
  }
}

TEST(MatchAndLabel, ExactPeaksGiveZeroCost) {
  const auto pred = echoes_at({{"d", 0.004}, {"f", 0.005}, {"c", 0.0071}});
  const auto peaks = peaks_at({0.004 * kFs, 0.005 * kFs, 0.0071 * kFs});
  const auto m = match_and_label(peaks, kFs, pred);
  ASSERT_EQ(m.labeled.size(), 3u);
  EXPECT_NEAR(m.total_cost, 0.0, 1e-15);
  EXPECT_EQ(m.labeled[1].label, "f");
  EXPECT_TRUE(m.unmatched_peaks.empty());
  EXPECT_TRUE(m.unmatched_predictions.empty());
}

TEST(MatchAndLabel, SpuriousPeakIsUnmatched) {
  const auto pred = echoes_at({{"d", 0.004}, {"f", 0.006}});
  const auto peaks = peaks_at({0.004 * kFs, 0.0061 * kFs, 0.02 * kFs});
  const auto m = match_and_label(peaks, kFs, pred);
  EXPECT_EQ(m.labeled.size(), 2u);
  ASSERT_EQ(m.unmatched_peaks.size(), 1u);
  EXPECT_EQ(m.unmatched_peaks[0], 2u);
  EXPECT_NEAR(m.total_cost, 1e-4, 1e-12);
}

TEST(MatchAndLabel, CoincidentPredictionsAreFlaggedAmbiguous) {
  const auto pred = echoes_at({{"d", 0.004}, {"f", 0.006}, {"c", 0.006}});
  const auto m = match_and_label(peaks_at({0.004 * kFs, 0.006 * kFs}), kFs, pred);
  ASSERT_EQ(m.labeled.size(), 2u);
  const Echo& e = m.labeled[1];
  ASSERT_EQ(e.ambiguous_with.size(), 1u);
  EXPECT_EQ(e.ambiguous_with[0] == "c" ? "f" : "c", e.label);
  ASSERT_EQ(m.unmatched_predictions.size(), 1u);
}

TEST(MatchAndLabel, AgreesWithBruteForceAssignment) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 0.004);
  const double tol = 0.5e-3, penalty = 1.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 5;
    std::vector<Echo> pred;
    std::vector<Peak> peaks;
    for (int k = 0; k < n; ++k) {
      pred.push_back({"e" + std::to_string(k), u(rng), 1.0, {}});
      Peak p;
      p.position = u(rng) * kFs;
      peaks.push_back(p);
    }
    Eigen::MatrixXd cost(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double dt = std::abs(peaks[static_cast<std::size_t>(i)].position / kFs - pred[static_cast<std::size_t>(j)].toa);
        cost(i, j) = dt <= tol ? dt : penalty;
      }
    }
    const double oracle = oracles::brute_force_assignment_cost(cost);
    MatchOptions o;
    o.tolerance = tol;
    const auto m = match_and_label(peaks, kFs, pred, o);
    const double ours = m.total_cost + penalty * static_cast<double>(n - static_cast<int>(m.labeled.size()));
    EXPECT_NEAR(ours, oracle, 1e-12) << "trial " << trial;
  }
}

TEST(MatchAndLabel, JitteredPredictionsAllMatch) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> jitter(-0.2e-3, 0.2e-3), gap(1.1e-3, 3e-3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Echo> pred;
    std::vector<Peak> peaks;
    double t = 0.003;
    for (int k = 0; k < 7; ++k) {
      t += gap(rng);
      pred.push_back({"e" + std::to_string(k), t + jitter(rng), 1.0, {}});
      Peak p;
      p.position = t * kFs;
      peaks.push_back(p);
    }
    const auto m = match_and_label(peaks, kFs, pred);
    EXPECT_EQ(m.labeled.size(), 7u);
    EXPECT_TRUE(m.unmatched_predictions.empty());
  }
}

TEST(MatchAndLabel, InvariantToCommonTimeShift) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.002, 0.01), shift(-0.001, 0.01);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Echo> pred;
    std::vector<Peak> peaks;
    for (int k = 0; k < 6; ++k) {
      pred.push_back({"e" + std::to_string(k), u(rng), 1.0, {}});
      Peak p;
      p.position = u(rng) * kFs;
      peaks.push_back(p);
    }
    const double s = shift(rng);
    std::vector<Echo> pred2 = pred;
    std::vector<Peak> peaks2 = peaks;
    for (auto& e : pred2) e.toa += s + 0.002;
    for (auto& p : peaks2) p.position += (s + 0.002) * kFs;
    const auto a = match_and_label(peaks, kFs, pred);
    const auto b = match_and_label(peaks2, kFs, pred2);
    ASSERT_EQ(a.labeled.size(), b.labeled.size());
    for (std::size_t k = 0; k < a.labeled.size(); ++k) EXPECT_EQ(a.labeled[k].label, b.labeled[k].label);
    EXPECT_EQ(a.unmatched_peaks, b.unmatched_peaks);
    EXPECT_NEAR(a.total_cost, b.total_cost, 1e-12);
  }
}

TEST(GoodnessOfMatch, IdentityIsOneAndEmptyIsAnError) {
  const RoomSpec room = RoomSpec::from_surface_code(Vec3(6, 6, 2.4), "011111");
  const auto ann = predict_echo_annotation(room, reference_layout(), 1);
  for (double tol : {1e-9, 0.05e-3, 0.5e-3}) EXPECT_DOUBLE_EQ(goodness_of_match(ann, ann, tol), 1.0);
  EXPECT_THROW(goodness_of_match(EchoAnnotation{}, ann, 0.5e-3), ValidationError);
}

TEST(GoodnessOfMatch, GaussianTimingNoiseMatchesNormalProbability) {
  const RoomSpec room = RoomSpec::from_surface_code(Vec3(6, 6, 2.4), "011111");
  const auto geo = predict_echo_annotation(room, reference_layout(), 1);
  const double sigma = 0.17e-3;
  double sum = 0.0;
  const int reps = 40;
  std::vector<double> last;
  for (int seed = 0; seed < reps; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    const auto noisy = perturb_annotation(geo, sigma, rng);
    std::vector<double> g;
    for (double tol : {0.05e-3, 0.1e-3, 0.2e-3, 0.5e-3}) g.push_back(goodness_of_match(noisy, geo, tol));
    for (std::size_t k = 1; k < g.size(); ++k) EXPECT_LE(g[k - 1], g[k]);
    sum += g.back();
  }
  const double expected = std::erf(0.5e-3 / sigma / std::sqrt(2.0));
  // 40 x 720 first-order entries: binomial standard error about 4e-4.
  EXPECT_NEAR(sum / reps, expected, 2e-3);
}

TEST(AnnotateRirs, LabelsSimulatedScene) {
  const RoomSpec room = RoomSpec::from_surface_code(Vec3(6, 6, 2.4), "011111");
  const SceneLayout l = single_channel(Vec3(1.83, 2.26, 0.77), Vec3(2.24, 2.88, 0.73));
  SimulationOptions opt;
  opt.max_order = 1;
  const auto run = annotate_rirs(simulate_scene(room, l, opt), room, l);
  const auto truth = predict_echo_annotation(room, l, 1);
  EXPECT_DOUBLE_EQ(goodness_of_match(run.annotation, truth, 2.0 / kFs), 1.0);
  EXPECT_THROW(annotate_rirs({}, room, l), ValidationError);
}
