#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "echoroom/geometry.hpp"

namespace echoroom {

inline constexpr double kDefaultSampleRate = 48000.0;

enum class Provenance { kSynthetic, kEstimated };

struct Rir {
  std::vector<double> samples;
  double sample_rate = kDefaultSampleRate;
  Provenance provenance = Provenance::kSynthetic;
  bool clipped = false;  // set by estimation when the recording hit full scale

  std::size_t size() const { return samples.size(); }
  void validate() const;
};

/// Hann-windowed sinc used for fractional-delay placement of arrivals.
/// Half-width is 40 samples at 48 kHz and scales with the sample rate.
class FractionalDelayKernel {
 public:
  explicit FractionalDelayKernel(double sample_rate = kDefaultSampleRate);

  int half_width() const { return half_width_; }
  /// Kernel value at offset t (samples) from its center.
  double operator()(double t) const;
  /// Adds amplitude * kernel centered at `position` (samples) into `out`.
  /// Taps falling outside `out` are dropped.
  void accumulate(std::span<double> out, double position, double amplitude) const;

 private:
  int half_width_;
};

/// Minimum RIR length holding every image arrival plus the kernel support.
std::size_t required_rir_length(std::span<const ImageSource> images, const Vec3& mic,
                                double sample_rate, double speed_of_sound);

/// Superposition of amplitude / (4 pi d) weighted fractional-delay kernels.
/// Throws TruncationError if `length` is shorter than required_rir_length().
Rir synthesize_rir(std::span<const ImageSource> images, const Vec3& mic, double sample_rate,
                   std::size_t length, double speed_of_sound);

/// One path of the parametric echo model: delay (s) and gain.
struct EchoPath {
  double delay = 0.0;
  double gain = 0.0;
};

/// Per-channel list of R paths, sorted by delay.
using EchoModelParams = std::vector<std::vector<EchoPath>>;

void validate_echo_model(const EchoModelParams& params);

/// RIR made of the given paths (no spreading loss applied).
Rir synthesize_from_paths(std::span<const EchoPath> paths, double sample_rate, std::size_t length);

/// h_i(f) = sum_r alpha_i^r exp(-j 2 pi f tau_i^r). Rows are frequencies,
/// columns are channels.
Eigen::MatrixXcd echo_model_frequency_response(const EchoModelParams& params,
                                               std::span<const double> freqs);

struct AmplitudeFit {
  std::vector<double> alphas;
  double condition_number = 1.0;
  bool ill_conditioned = false;
  double residual_energy = 0.0;
};

/// Least-squares gains of fractional-delay spikes at the given delays, fitted
/// on the early support [min tau - W, max tau + W]. Flags designs whose
/// condition number exceeds `max_condition`.
AmplitudeFit estimate_echo_amplitudes(const Rir& rir, std::span<const double> taus,
                                      double max_condition = 1e8);

}  // namespace echoroom
