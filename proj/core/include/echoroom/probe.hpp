#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "echoroom/ism_synth.hpp"

namespace echoroom {

/// Exponential sine sweep x(t) = sin(K (exp(t / L) - 1)) with Tukey fades,
/// repeated with silent gaps.
struct SweepSpec {
  double duration = 10.0;  // s, one sweep
  double f_start = 100.0;  // Hz
  double f_stop = 14000.0;
  double fade = 0.2;  // s, cosine taper at each end
  int repetitions = 3;
  double gap = 2.0;  // s of silence between repetitions
  double sample_rate = kDefaultSampleRate;

  void validate() const;
  std::size_t sweep_samples() const;
  std::size_t gap_samples() const;
  /// Distance between the starts of two consecutive repetitions.
  std::size_t period_samples() const { return sweep_samples() + gap_samples(); }
  std::size_t total_samples() const;

  /// Sweep phase (radians) at time t seconds into one repetition.
  double phase(double t) const;
  double instantaneous_frequency(double t) const;
};

/// One faded sweep.
std::vector<double> generate_sweep(const SweepSpec& spec);
/// The full probe: `repetitions` sweeps separated by `gap` seconds of silence.
std::vector<double> generate_ess(const SweepSpec& spec);

struct DeconvolutionOptions {
  double reg_eps = 1e-4;       // relative floor: eps * max|S|^2
  std::size_t rir_length = 0;  // 0 keeps the full deconvolution length
  int repetitions = 1;         // sweeps in the recording, averaged coherently
  std::size_t period = 0;      // samples between repetitions (needed if repetitions > 1)
  bool band_mask = true;
  double band_low = 80.0;  // Hz, raised-cosine mask pass band
  double band_high = 15000.0;
  double channel_gain = 1.0;  // applied to the recording before deconvolution
};

/// Raised-cosine mask: 1 inside [low, high], cosine roll-off over the octave
/// below `low` and over [high, min(1.1 high, fs/2)].
double band_mask_gain(double f, double low, double high, double sample_rate);

/// Regularized spectral division H = X conj(S) / (|S|^2 + eps max|S|^2).
/// `reference` is a single sweep; the recording must be aligned so that its
/// first repetition starts at sample 0.
Rir estimate_rir(std::span<const double> recorded, std::span<const double> reference,
                 double sample_rate, const DeconvolutionOptions& options = {});

/// True if more than 0.1 % of the samples are within 1e-4 of full scale.
bool is_clipped(std::span<const double> signal);

struct LoopbackAlignment {
  std::vector<std::vector<double>> channels;  // every channel advanced by `onset`
  std::size_t onset = 0;
  double peak_correlation = 0.0;  // normalized, in [0, 1]
};

/// Locates the reference in the loop-back channel by cross-correlation and
/// shifts every channel so that the emission starts at sample 0. Throws
/// NumericalError if the normalized correlation peak is below `min_correlation`.
LoopbackAlignment align_by_loopback(const std::vector<std::vector<double>>& channels,
                                    std::size_t loopback_index,
                                    std::span<const double> reference,
                                    double min_correlation = 0.5);

}  // namespace echoroom
