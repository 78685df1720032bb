#include "echoroom/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "echoroom/errors.hpp"
#include "echoroom/fft.hpp"

namespace echoroom {
namespace {

constexpr double kPi = std::numbers::pi;

double power(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

std::vector<double> fit_length(std::vector<double> x, std::size_t n) {
  x.resize(n, 0.0);
  return x;
}

}  // namespace

Rir simulate_rir(const RoomSpec& room, const Vec3& source, const Vec3& mic, const SimulationOptions& options) {
  room.validate();
  if (!room.strictly_contains(source) || !room.strictly_contains(mic)) {
    throw InvalidGeometry("source and microphone must lie strictly inside the room");
  }
  if (options.max_order >= 0) {
    const auto images = enumerate_images(room, source, options.max_order);
    const std::size_t len = required_rir_length(images, mic, options.sample_rate, room.speed_of_sound);
    return synthesize_rir(images, mic, options.sample_rate, len, room.speed_of_sound);
  }
  if (!(options.duration > 0.0)) throw ValidationError("simulation duration must be positive");
  const FractionalDelayKernel kernel(options.sample_rate);
  const auto len = static_cast<std::size_t>(std::ceil(options.duration * options.sample_rate));
  const double reach = (static_cast<double>(len) - kernel.half_width() - 1) / options.sample_rate * room.speed_of_sound;
  if (!(reach > (source - mic).norm())) throw TruncationError("duration too short for the direct path", len);
  const auto images = enumerate_images_within(room, source, mic, reach);
  return synthesize_rir(images, mic, options.sample_rate, len, room.speed_of_sound);
}

std::vector<std::vector<Rir>> simulate_scene(const RoomSpec& room, const SceneLayout& layout,
                                             const SimulationOptions& options) {
  layout.validate(room);
  std::vector<std::vector<Rir>> out(layout.mic_count());
  for (std::size_t m = 0; m < layout.mic_count(); ++m) {
    for (const auto& s : layout.sources) out[m].push_back(simulate_rir(room, s.position, layout.mic_position(m), options));
  }
  return out;
}

SceneLayout sample_layout(const RoomSpec& room, Rng& rng, const LayoutSampler& sampler) {
  room.validate();
  const double span = 2.0 * *std::max_element(kNulaOffsets.begin(), kNulaOffsets.end(),
                                              [](double a, double b) { return std::abs(a) < std::abs(b); });
  if (room.dims.x() <= 2 * sampler.wall_margin || room.dims.y() <= 2 * sampler.wall_margin ||
      sampler.max_height >= room.dims.z() || sampler.min_height <= 0.0 || sampler.min_height > sampler.max_height ||
      sampler.wall_margin < std::abs(span)) {
    throw ValidationError("layout sampler constraints do not fit the room");
  }
  std::uniform_real_distribution<double> ux(sampler.wall_margin, room.dims.x() - sampler.wall_margin);
  std::uniform_real_distribution<double> uy(sampler.wall_margin, room.dims.y() - sampler.wall_margin);
  std::uniform_real_distribution<double> uz(sampler.min_height, sampler.max_height);
  std::uniform_real_distribution<double> ut(0.0, 2.0 * kPi);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    SceneLayout layout;
    for (std::size_t a = 0; a < sampler.arrays; ++a) {
      ArrayPose pose;
      pose.barycenter = Vec3(ux(rng), uy(rng), uz(rng));
      pose.azimuth_tilt = ut(rng);
      layout.arrays.push_back(pose);
    }
    for (std::size_t s = 0; s < sampler.sources; ++s) {
      SourcePose pose;
      pose.position = Vec3(ux(rng), uy(rng), uz(rng));
      pose.label = "s" + std::to_string(s);
      layout.sources.push_back(pose);
    }
    bool ok = true;
    for (const auto& s : layout.sources) {
      for (const auto& a : layout.arrays) ok = ok && (s.position - a.barycenter).norm() >= sampler.min_separation;
    }
    if (ok) return layout;
  }
  throw ValidationError("could not draw a layout satisfying the separation constraint");
}

SceneLayout reference_layout() {
  SceneLayout l;
  const std::vector<std::pair<Vec3, double>> arrays = {
      {Vec3(1.5, 1.2, 1.05), 0.3},  {Vec3(4.3, 1.5, 1.40), 1.2}, {Vec3(4.6, 4.2, 0.85), 2.5},
      {Vec3(1.6, 4.5, 1.65), -0.7}, {Vec3(3.0, 2.4, 1.25), 0.9}, {Vec3(2.3, 3.3, 0.95), 2.0}};
  for (const auto& [b, t] : arrays) {
    ArrayPose p;
    p.barycenter = b;
    p.azimuth_tilt = t;
    l.arrays.push_back(p);
  }
  const std::vector<Vec3> sources = {Vec3(1.0, 2.9, 1.40), Vec3(5.1, 3.0, 1.10), Vec3(3.2, 0.9, 1.60),
                                     Vec3(3.6, 5.1, 1.25)};
  for (std::size_t s = 0; s < sources.size(); ++s) l.sources.push_back({sources[s], "s" + std::to_string(s)});
  return l;
}

EchoAnnotation perturb_annotation(const EchoAnnotation& annotation, double sigma, Rng& rng) {
  if (sigma < 0.0) throw ValidationError("noise level must be non-negative");
  std::normal_distribution<double> noise(0.0, sigma);
  EchoAnnotation out;
  for (const auto& [key, echoes] : annotation.entries()) {
    std::vector<Echo> e = echoes;
    for (auto& echo : e) echo.toa = std::max(echo.toa + (sigma > 0.0 ? noise(rng) : 0.0), 1e-9);
    std::stable_sort(e.begin(), e.end(), [](const Echo& a, const Echo& b) { return a.toa < b.toa; });
    out.set(key.first, key.second, std::move(e));
  }
  return out;
}

SceneLayout sub_layout(const SceneLayout& layout, std::size_t array, std::size_t source) {
  if (array >= layout.arrays.size() || source >= layout.sources.size()) throw ValidationError("index out of range");
  SceneLayout s;
  s.arrays = {layout.arrays[array]};
  s.sources = {layout.sources[source]};
  return s;
}

std::vector<double> speech_like_signal(std::size_t length, double sample_rate, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  const double phi = phase(rng);
  std::vector<double> x(length);
  double lp = 0.0, prev = 0.0, hp = 0.0;
  for (std::size_t n = 0; n < length; ++n) {
    lp = 0.9 * lp + 0.1 * g(rng);
    hp = 0.995 * (hp + lp - prev);
    prev = lp;
    const double t = static_cast<double>(n) / sample_rate;
    const double env = 0.5 + 0.5 * std::sin(2.0 * kPi * 4.0 * t + phi);
    x[n] = hp * (0.1 + env * env);
  }
  const double rms = std::sqrt(power(x));
  if (rms > 0.0) {
    for (double& v : x) v /= rms;
  }
  return x;
}

std::vector<std::vector<double>> diffuse_noise(const std::vector<Vec3>& mics, std::size_t length,
                                               const StftSpec& spec, double speed_of_sound, Rng& rng) {
  spec.validate();
  const auto freqs = spec.frequencies();
  const auto coherence = diffuse_coherence(mics, freqs, speed_of_sound);
  const auto n = static_cast<Eigen::Index>(mics.size());
  const std::size_t frames = (spec.front_padding() + length + spec.hop - 1) / spec.hop + 1;
  std::vector<Spectrogram> specs(mics.size());
  for (auto& s : specs) {
    s.frames = frames;
    s.bins = spec.bins();
    s.data.assign(frames * s.bins, 0.0);
  }
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  for (std::size_t f = 0; f < freqs.size(); ++f) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(coherence[f]);
    const Eigen::MatrixXcd mix =
        es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    Eigen::VectorXcd z(n);
    for (std::size_t t = 0; t < frames; ++t) {
      for (Eigen::Index i = 0; i < n; ++i) z(i) = std::complex<double>(g(rng), g(rng));
      const Eigen::VectorXcd y = mix * z;
      for (Eigen::Index i = 0; i < n; ++i) specs[static_cast<std::size_t>(i)](t, f) = y(i);
    }
  }
  std::vector<std::vector<double>> out;
  for (const auto& s : specs) out.push_back(istft(s, spec, length));
  return out;
}

EchoModelParams rake_model(const std::vector<std::vector<Echo>>& predicted, const std::vector<Rir>& rirs, int r) {
  if (predicted.size() != rirs.size()) throw ValidationError("one echo list per RIR required");
  if (r < 1) throw ValidationError("rake needs at least one path");
  EchoModelParams params;
  for (std::size_t i = 0; i < rirs.size(); ++i) {
    std::vector<Echo> e = predicted[i];
    if (e.size() < static_cast<std::size_t>(r)) throw ValidationError("fewer predicted arrivals than rake paths");
    std::stable_sort(e.begin(), e.end(), [](const Echo& a, const Echo& b) { return a.amplitude > b.amplitude; });
    e.resize(static_cast<std::size_t>(r));
    std::sort(e.begin(), e.end(), [](const Echo& a, const Echo& b) { return a.toa < b.toa; });
    std::vector<double> taus;
    for (const auto& x : e) taus.push_back(x.toa);
    const AmplitudeFit fit = estimate_echo_amplitudes(rirs[i], taus);
    std::vector<EchoPath> paths;
    for (std::size_t k = 0; k < taus.size(); ++k) paths.push_back({taus[k], fit.alphas[k]});
    params.push_back(std::move(paths));
  }
  return params;
}

BeamformingTrial run_beamforming_trial(const RoomSpec& room, const SceneLayout& layout, std::size_t array,
                                       std::size_t source, const BeamformingTrialConfig& cfg, Rng& rng) {
  const SceneLayout scene = sub_layout(layout, array, source);
  scene.validate(room);
  const double fs = cfg.stft.sample_rate;
  const auto mics = scene.mic_positions();
  const std::size_t channels = mics.size();
  const Vec3& src = scene.sources.front().position;

  SimulationOptions sim;
  sim.sample_rate = fs;
  sim.duration = cfg.rir_duration;
  std::vector<Rir> rirs;
  for (const auto& m : mics) rirs.push_back(simulate_rir(room, src, m, sim));

  const EchoAnnotation predicted = predict_echo_annotation(room, scene, 2);
  std::vector<std::vector<Echo>> per_mic;
  for (std::size_t i = 0; i < channels; ++i) per_mic.push_back(*predicted.find(i, 0));
  const EchoModelParams rake = rake_model(per_mic, rirs, cfg.rake_echoes);

  const FractionalDelayKernel kernel(fs);
  const auto dry = speech_like_signal(static_cast<std::size_t>(cfg.signal_duration * fs), fs, rng);
  const std::size_t length = dry.size() + rirs.front().size() - 1;

  std::vector<std::vector<double>> reverberant, early_part, late_tails;
  for (std::size_t i = 0; i < channels; ++i) {
    reverberant.push_back(fit_length(dsp::convolve(dry, rirs[i].samples), length));
    const auto early_end = std::min(
        rirs[i].size(), static_cast<std::size_t>(std::floor(rake[i].back().delay * fs)) + kernel.half_width() + 1);
    const auto cut = rirs[i].samples.begin() + static_cast<std::ptrdiff_t>(early_end);
    late_tails.emplace_back(cut, rirs[i].samples.end());
    early_part.push_back(fit_length(dsp::convolve(dry, std::vector<double>(rirs[i].samples.begin(), cut)), length));
  }
  const std::vector<double>& target = early_part.front();

  auto noise = diffuse_noise(mics, length, cfg.stft, room.speed_of_sound, rng);
  {
    std::normal_distribution<double> g(0.0, 1.0);
    const double diffuse_pow = power(noise.front());
    const double sigma = std::sqrt(cfg.sensor_noise_ratio * diffuse_pow);
    for (auto& ch : noise) {
      for (double& v : ch) v += sigma * g(rng);
    }
    const double gain = std::sqrt(power(reverberant.front()) / power(noise.front()) * std::pow(10.0, -cfg.snr_db / 10.0));
    for (auto& ch : noise) {
      for (double& v : ch) v *= gain;
    }
  }
  std::vector<std::vector<double>> mixture(channels), residual(channels);
  for (std::size_t i = 0; i < channels; ++i) {
    mixture[i].resize(length);
    residual[i].resize(length);
    for (std::size_t n = 0; n < length; ++n) {
      mixture[i][n] = reverberant[i][n] + noise[i][n];
      residual[i][n] = mixture[i][n] - early_part[i][n];
    }
  }

  const auto freqs = cfg.stft.frequencies();
  BeamformerInputs in;
  std::vector<Spectrogram> noise_stft, residual_stft;
  for (std::size_t i = 0; i < channels; ++i) {
    in.mixture.push_back(stft(mixture[i], cfg.stft));
    noise_stft.push_back(stft(noise[i], cfg.stft));
    residual_stft.push_back(stft(residual[i], cfg.stft));
  }
  in.noise_cov = sample_covariance(noise_stft);
  in.coherence = diffuse_coherence(mics, freqs, room.speed_of_sound);
  in.late_power = late_power_estimate(late_tails, power_spectrum(stft(dry, cfg.stft)), cfg.stft);
  std::vector<double> direct_toas;
  for (const auto& m : mics) direct_toas.push_back((m - src).norm() / room.speed_of_sound);
  in.dp = steering_dp(direct_toas, freqs, 0);
  in.rake = steering_rake(rake, freqs, 0);

  BeamformingTrial trial;
  const auto score = [&](const BeamformerInputs& inputs, Design d, bool record) {
    const auto out = run_beamformer(BeamformerSpec::from_design(d, 0), inputs);
    if (record) {
      trial.distortion[d] = distortionless_error(out.weights, out.steering, out.flagged);
      trial.flagged_bins[d] = static_cast<std::size_t>(std::count(out.flagged.begin(), out.flagged.end(), true));
    }
    const auto enhanced = istft(out.enhanced, cfg.stft, length);
    const auto leaked = istft(apply_weights(out.weights, residual_stft), cfg.stft, length);
    return evaluate_isnrr(enhanced, leaked, mixture.front(), target);
  };
  for (Design d : kAllDesigns) trial.isnrr[d] = score(in, d, true);
  {
    const Eigen::MatrixXcd ds = ds_weights(in.dp);
    const NoiseCovariance identity(in.dp.rows(), Eigen::MatrixXcd::Identity(in.dp.cols(), in.dp.cols()));
    const MvdrWeights mv = mvdr_weights(in.dp, identity, 0);
    trial.ds_mvdr_identity_gap = (ds - mv.weights).cwiseAbs().maxCoeff();
  }

  std::bernoulli_distribution coin(0.5);
  std::vector<std::vector<Echo>> jittered = per_mic;
  for (std::size_t i = 0; i < channels; ++i) {
    // Jitter exactly the arrivals the exact rake uses.
    std::vector<Echo> chosen;
    for (const auto& p : rake[i]) {
      Echo e;
      e.toa = std::max(p.delay + (coin(rng) ? cfg.rake_jitter : -cfg.rake_jitter), 1.0 / fs);
      e.amplitude = 1.0;
      chosen.push_back(e);
    }
    jittered[i] = chosen;
  }
  BeamformerInputs jin = in;
  jin.rake = steering_rake(rake_model(jittered, rirs, cfg.rake_echoes), freqs, 0);
  for (Design d : {Design::kMvdrRake, Design::kMvdrRakeLate}) trial.jittered[d] = score(jin, d, false);
  return trial;
}

}  // namespace echoroom
