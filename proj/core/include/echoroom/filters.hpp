#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace echoroom {

/// Normalized second-order section (a0 == 1).
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

using Sos = std::vector<Biquad>;

/// Digital Butterworth band-pass obtained from an analog prototype of the
/// given order by the band-pass transform and the prewarped bilinear
/// transform. Produces `order` sections (2 * order poles), unit gain at the
/// band center.
Sos butterworth_bandpass(int order, double low_hz, double high_hz, double sample_rate);

/// Octave band [fc / sqrt(2), fc * sqrt(2)].
Sos octave_band_filter(double center_hz, double sample_rate, int order = 4);

std::complex<double> sos_response(const Sos& sos, double f_hz, double sample_rate);

/// Direct form II transposed, zero initial state.
std::vector<double> sosfilt(const Sos& sos, std::span<const double> x);

/// Forward-backward filtering with `pad` zeros appended on both sides; the
/// output has the length of `x`.
std::vector<double> sosfiltfilt(const Sos& sos, std::span<const double> x, std::size_t pad);

}  // namespace echoroom
