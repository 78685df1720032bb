#include "echoroom/ism_synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "echoroom/errors.hpp"

namespace echoroom {
namespace {

constexpr double kPi = std::numbers::pi;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

}  // namespace

void Rir::validate() const {
  if (samples.empty()) throw ValidationError("RIR is empty");
  if (!(sample_rate > 0.0)) throw ValidationError("RIR sample rate must be positive");
  for (double v : samples) {
    if (!std::isfinite(v)) throw ValidationError("RIR contains non-finite samples");
  }
}

FractionalDelayKernel::FractionalDelayKernel(double sample_rate)
    : half_width_(std::max(1, static_cast<int>(std::lround(40.0 * sample_rate / 48000.0)))) {}

double FractionalDelayKernel::operator()(double t) const {
  const double w = static_cast<double>(half_width_);
  if (std::abs(t) >= w) return 0.0;
  return sinc(t) * 0.5 * (1.0 + std::cos(kPi * t / w));
}

void FractionalDelayKernel::accumulate(std::span<double> out, double position,
                                       double amplitude) const {
  const auto center = static_cast<long>(std::floor(position));
  const long lo = std::max<long>(0, center - half_width_ + 1);
  const long hi = std::min<long>(static_cast<long>(out.size()) - 1, center + half_width_);
  for (long n = lo; n <= hi; ++n) {
    out[static_cast<std::size_t>(n)] += amplitude * (*this)(static_cast<double>(n) - position);
  }
}

std::size_t required_rir_length(std::span<const ImageSource> images, const Vec3& mic,
                                double sample_rate, double speed_of_sound) {
  const FractionalDelayKernel kernel(sample_rate);
  double latest = 0.0;
  for (const auto& img : images) {
    latest = std::max(latest, (img.position - mic).norm() / speed_of_sound);
  }
  return static_cast<std::size_t>(std::floor(latest * sample_rate)) + kernel.half_width() + 1;
}

Rir synthesize_rir(std::span<const ImageSource> images, const Vec3& mic, double sample_rate,
                   std::size_t length, double speed_of_sound) {
  if (!(sample_rate > 0.0)) throw ValidationError("sample rate must be positive");
  if (!(speed_of_sound > 0.0)) throw ValidationError("speed of sound must be positive");
  const std::size_t required = required_rir_length(images, mic, sample_rate, speed_of_sound);
  if (length < required) {
    throw TruncationError("RIR length " + std::to_string(length) +
                              " truncates arrivals; at least " + std::to_string(required) +
                              " samples required",
                          required);
  }
  const FractionalDelayKernel kernel(sample_rate);
  Rir rir;
  rir.sample_rate = sample_rate;
  rir.provenance = Provenance::kSynthetic;
  rir.samples.assign(length, 0.0);
  for (const auto& img : images) {
    const double d = (img.position - mic).norm();
    if (d <= 0.0) throw InvalidGeometry("microphone coincides with an image source");
    const double amplitude = img.attenuation / (4.0 * kPi * d);
    kernel.accumulate(rir.samples, d / speed_of_sound * sample_rate, amplitude);
  }
  return rir;
}

void validate_echo_model(const EchoModelParams& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& paths = params[i];
    if (paths.empty()) throw ValidationError("echo model channel " + std::to_string(i) + " has no paths");
    for (std::size_t r = 0; r < paths.size(); ++r) {
      if (!(paths[r].delay >= 0.0)) throw ValidationError("echo delays must be non-negative");
      if (r > 0 && paths[r].delay < paths[r - 1].delay) {
        throw ValidationError("echo delays must be sorted ascending");
      }
    }
  }
}

Rir synthesize_from_paths(std::span<const EchoPath> paths, double sample_rate, std::size_t length) {
  const FractionalDelayKernel kernel(sample_rate);
  Rir rir;
  rir.sample_rate = sample_rate;
  rir.samples.assign(length, 0.0);
  for (const auto& p : paths) {
    const double pos = p.delay * sample_rate;
    if (pos + kernel.half_width() >= static_cast<double>(length)) {
      const auto required = static_cast<std::size_t>(std::floor(pos)) + kernel.half_width() + 1;
      throw TruncationError("path delay exceeds RIR length", required);
    }
    kernel.accumulate(rir.samples, pos, p.gain);
  }
  return rir;
}

Eigen::MatrixXcd echo_model_frequency_response(const EchoModelParams& params,
                                               std::span<const double> freqs) {
  validate_echo_model(params);
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(freqs.size()),
                                              static_cast<Eigen::Index>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t k = 0; k < freqs.size(); ++k) {
      std::complex<double> acc{};
      for (const auto& p : params[i]) {
        acc += p.gain * std::polar(1.0, -2.0 * kPi * freqs[k] * p.delay);
      }
      h(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = acc;
    }
  }
  return h;
}

AmplitudeFit estimate_echo_amplitudes(const Rir& rir, std::span<const double> taus,
                                      double max_condition) {
  rir.validate();
  AmplitudeFit fit;
  if (taus.empty()) return fit;
  const FractionalDelayKernel kernel(rir.sample_rate);
  const double duration = static_cast<double>(rir.size()) / rir.sample_rate;
  for (double t : taus) {
    if (!(t >= 0.0) || t >= duration) throw ValidationError("echo delay outside the RIR duration");
  }
  const auto [tmin, tmax] = std::minmax_element(taus.begin(), taus.end());
  const long lo = std::max<long>(0, static_cast<long>(std::floor(*tmin * rir.sample_rate)) -
                                        kernel.half_width());
  const long hi = std::min<long>(static_cast<long>(rir.size()) - 1,
                                 static_cast<long>(std::ceil(*tmax * rir.sample_rate)) +
                                     kernel.half_width());
  const auto rows = static_cast<Eigen::Index>(hi - lo + 1);
  const auto cols = static_cast<Eigen::Index>(taus.size());
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::VectorXd target(rows);
  for (Eigen::Index n = 0; n < rows; ++n) {
    const double sample = static_cast<double>(lo + n);
    target(n) = rir.samples[static_cast<std::size_t>(lo + n)];
    for (Eigen::Index r = 0; r < cols; ++r) {
      design(n, r) = kernel(sample - taus[static_cast<std::size_t>(r)] * rir.sample_rate);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  fit.condition_number = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  fit.ill_conditioned = !(fit.condition_number <= max_condition);
  const Eigen::VectorXd alpha = svd.solve(target);
  fit.alphas.assign(alpha.data(), alpha.data() + alpha.size());
  fit.residual_energy = (design * alpha - target).squaredNorm();
  return fit;
}

}  // namespace echoroom
