#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace echoroom::dsp {

using Complex = std::complex<double>;

std::size_t next_pow2(std::size_t n);

/// Real-to-complex transform of `x` zero-padded (or truncated) to `n` points.
/// Returns the n/2+1 non-negative frequency bins, unnormalized.
std::vector<Complex> rfft(std::span<const double> x, std::size_t n);

/// Inverse of rfft; output has `n` samples and carries the 1/n factor.
std::vector<double> irfft(std::span<const Complex> spectrum, std::size_t n);

/// Full linear convolution (length a.size() + b.size() - 1).
std::vector<double> convolve(std::span<const double> a, std::span<const double> b);

/// Linear cross-correlation r[k] = sum_n x[n + k] * y[n] for k in [0, x.size()).
std::vector<double> xcorr_positive_lags(std::span<const double> x, std::span<const double> y);

}  // namespace echoroom::dsp
