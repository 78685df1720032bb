#include "echoroom/stft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "echoroom/errors.hpp"
#include "echoroom/fft.hpp"

namespace echoroom {
namespace {

std::size_t frame_count(std::size_t signal_length, const StftSpec& spec) {
  const std::size_t span = spec.front_padding() + signal_length;
  return (span + spec.hop - 1) / spec.hop + 1;
}

}  // namespace

std::vector<double> StftSpec::frequencies() const {
  std::vector<double> f(bins());
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = bin_frequency(k);
  return f;
}

std::vector<double> StftSpec::analysis_window() const {
  std::vector<double> w(length, 1.0);
  const double n = static_cast<double>(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
    switch (window) {
      case WindowShape::kHann: w[i] = hann; break;
      case WindowShape::kSqrtHann: w[i] = std::sqrt(hann); break;
      case WindowShape::kRectangular: break;
    }
  }
  return w;
}

void StftSpec::validate() const {
  if (length < 2 || length % 2 != 0) throw ValidationError("STFT length must be even and >= 2");
  if (hop == 0 || hop > length) throw ValidationError("STFT hop must lie in [1, length]");
  if (!(sample_rate > 0.0)) throw ValidationError("sample rate must be positive");
  const auto w = analysis_window();
  double lo = INFINITY, hi = 0.0;
  for (std::size_t n = 0; n < hop; ++n) {
    double s = 0.0;
    for (std::size_t k = n; k < length; k += hop) s += w[k] * w[k];
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  if (!(lo > 1e-10 * hi)) throw ValidationError("window and hop do not satisfy the overlap-add condition");
}

Spectrogram stft(std::span<const double> signal, const StftSpec& spec) {
  spec.validate();
  const auto w = spec.analysis_window();
  Spectrogram out;
  out.frames = frame_count(signal.size(), spec);
  out.bins = spec.bins();
  out.data.resize(out.frames * out.bins);
  const auto pad = static_cast<std::ptrdiff_t>(spec.front_padding());
  std::vector<double> frame(spec.length);
  for (std::size_t t = 0; t < out.frames; ++t) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t * spec.hop) - pad;
    for (std::size_t i = 0; i < spec.length; ++i) {
      const std::ptrdiff_t n = start + static_cast<std::ptrdiff_t>(i);
      const double v = (n >= 0 && n < static_cast<std::ptrdiff_t>(signal.size())) ? signal[static_cast<std::size_t>(n)] : 0.0;
      frame[i] = v * w[i];
    }
    const auto spec_t = dsp::rfft(frame, spec.length);
    std::copy(spec_t.begin(), spec_t.end(), out.data.begin() + static_cast<std::ptrdiff_t>(t * out.bins));
  }
  return out;
}

std::vector<double> istft(const Spectrogram& spectrogram, const StftSpec& spec, std::size_t length) {
  spec.validate();
  if (spectrogram.bins != spec.bins()) throw ValidationError("spectrogram bin count does not match the STFT spec");
  const auto w = spec.analysis_window();
  const auto pad = static_cast<std::ptrdiff_t>(spec.front_padding());
  std::vector<double> acc(length, 0.0), norm(length, 0.0);
  for (std::size_t t = 0; t < spectrogram.frames; ++t) {
    const std::span<const std::complex<double>> bins(spectrogram.data.data() + t * spectrogram.bins, spectrogram.bins);
    const auto frame = dsp::irfft(bins, spec.length);
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t * spec.hop) - pad;
    for (std::size_t i = 0; i < spec.length; ++i) {
      const std::ptrdiff_t n = start + static_cast<std::ptrdiff_t>(i);
      if (n < 0 || n >= static_cast<std::ptrdiff_t>(length)) continue;
      acc[static_cast<std::size_t>(n)] += frame[i] * w[i];
      norm[static_cast<std::size_t>(n)] += w[i] * w[i];
    }
  }
  for (std::size_t n = 0; n < length; ++n) {
    if (!(norm[n] > 0.0)) throw ValidationError("spectrogram does not cover the requested output length");
    acc[n] /= norm[n];
  }
  return acc;
}

}  // namespace echoroom
