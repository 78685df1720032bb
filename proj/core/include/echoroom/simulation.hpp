#pragma once

#include <cstddef>
#include <map>
#include <random>
#include <vector>

#include "echoroom/beamform.hpp"
#include "echoroom/geometry.hpp"
#include "echoroom/ism_synth.hpp"
#include "echoroom/stft.hpp"

namespace echoroom {

using Rng = std::mt19937_64;

struct SimulationOptions {
  double sample_rate = kDefaultSampleRate;
  /// Reflection order limit; negative means "all images arriving within `duration`".
  int max_order = -1;
  double duration = 0.3;  // s, used when max_order < 0
};

Rir simulate_rir(const RoomSpec& room, const Vec3& source, const Vec3& mic, const SimulationOptions& options = {});

/// RIRs indexed [mic][source].
std::vector<std::vector<Rir>> simulate_scene(const RoomSpec& room, const SceneLayout& layout,
                                             const SimulationOptions& options = {});

struct LayoutSampler {
  std::size_t arrays = 6;
  std::size_t sources = 4;
  double wall_margin = 0.5;   // m, horizontal clearance of barycenters and sources
  double min_height = 0.6;    // m
  double max_height = 1.9;    // m
  double min_separation = 1.0;  // m between any source and any array barycenter
};

/// Uniformly drawn poses satisfying the sampler constraints.
SceneLayout sample_layout(const RoomSpec& room, Rng& rng, const LayoutSampler& sampler = {});

/// Fixed six-array, four-source layout for the default 6 x 6 x 2.4 m room.
SceneLayout reference_layout();

/// Adds N(0, sigma^2) to every TOA.
EchoAnnotation perturb_annotation(const EchoAnnotation& annotation, double sigma, Rng& rng);

/// Single-channel layout of array `array` and source `source`.
SceneLayout sub_layout(const SceneLayout& layout, std::size_t array, std::size_t source);

/// Low-pass filtered Gaussian noise with a 4 Hz syllabic envelope, unit RMS.
std::vector<double> speech_like_signal(std::size_t length, double sample_rate, Rng& rng);

/// Noise whose cross-spectra follow the diffuse sinc coherence.
std::vector<std::vector<double>> diffuse_noise(const std::vector<Vec3>& mics, std::size_t length,
                                               const StftSpec& spec, double speed_of_sound, Rng& rng);

/// Per channel, the R largest-amplitude predicted arrivals (direct included)
/// with gains fitted on the RIR.
EchoModelParams rake_model(const std::vector<std::vector<Echo>>& predicted, const std::vector<Rir>& rirs, int r);

struct BeamformingTrialConfig {
  double snr_db = 10.0;
  double signal_duration = 2.0;  // s
  double rir_duration = 0.4;     // s
  double sensor_noise_ratio = 0.1;  // white / diffuse noise power
  int rake_echoes = 4;
  double rake_jitter = 0.5e-3;  // s, applied with random sign to every rake TOA
  StftSpec stft;
};

struct BeamformingTrial {
  std::map<Design, IsnrrResult> isnrr;
  std::map<Design, IsnrrResult> jittered;  // rake designs with jittered TOAs
  std::map<Design, double> distortion;      // max |w^H h - 1| over unflagged bins
  std::map<Design, std::size_t> flagged_bins;
  double ds_mvdr_identity_gap = 0.0;  // max |w_DS - w_MVDR(I)| over bins
};

/// Mixture of a speech-like source and diffuse plus sensor noise at the
/// microphones of one array; runs every design against the early target.
BeamformingTrial run_beamforming_trial(const RoomSpec& room, const SceneLayout& layout, std::size_t array,
                                       std::size_t source, const BeamformingTrialConfig& config, Rng& rng);

}  // namespace echoroom
