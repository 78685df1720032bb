#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace echoroom {

enum class WindowShape { kHann, kSqrtHann, kRectangular };

struct StftSpec {
  std::size_t length = 1024;
  std::size_t hop = 512;
  WindowShape window = WindowShape::kHann;
  double sample_rate = 48000.0;

  std::size_t bins() const { return length / 2 + 1; }
  double bin_frequency(std::size_t k) const { return static_cast<double>(k) * sample_rate / static_cast<double>(length); }
  std::vector<double> frequencies() const;
  /// Periodic analysis window.
  std::vector<double> analysis_window() const;
  /// Rejects hop > length, odd or zero lengths, and window/hop pairs whose
  /// overlapped squared windows vanish somewhere (overlap-add cannot invert).
  void validate() const;
  /// Samples of zero padding placed before the signal.
  std::size_t front_padding() const { return length - hop; }
};

/// Single-channel time-frequency representation, frame-major.
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<std::complex<double>> data;

  std::complex<double>& operator()(std::size_t t, std::size_t f) { return data[t * bins + f]; }
  const std::complex<double>& operator()(std::size_t t, std::size_t f) const { return data[t * bins + f]; }
};

Spectrogram stft(std::span<const double> signal, const StftSpec& spec);

/// Weighted overlap-add inverse; returns `length` samples.
std::vector<double> istft(const Spectrogram& spectrogram, const StftSpec& spec, std::size_t length);

}  // namespace echoroom
