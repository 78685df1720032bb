#include "echoroom/filters.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "echoroom/errors.hpp"

namespace echoroom {

using Cplx = std::complex<double>;

Sos butterworth_bandpass(int order, double low_hz, double high_hz, double sample_rate) {
  if (order < 1 || order % 2 != 0) throw ValidationError("Butterworth order must be a positive even number");
  if (!(sample_rate > 0.0)) throw ValidationError("sample rate must be positive");
  if (!(low_hz > 0.0) || !(high_hz > low_hz) || !(high_hz < sample_rate / 2.0)) {
    throw ValidationError("band edges must satisfy 0 < low < high < fs/2");
  }
  const double pi = std::numbers::pi;
  const double k = 2.0 * sample_rate;
  const double w1 = k * std::tan(pi * low_hz / sample_rate);
  const double w2 = k * std::tan(pi * high_hz / sample_rate);
  const double w0 = std::sqrt(w1 * w2);
  const double bw = w2 - w1;

  Sos sos;
  // Upper half-plane prototype poles; their conjugates give the mirrored sections.
  for (int i = 0; i < order / 2; ++i) {
    const double theta = pi * (2.0 * i + 1.0 + order) / (2.0 * order);
    const Cplx p = std::polar(1.0, theta);
    const Cplx pb = p * bw;
    const Cplx disc = std::sqrt(pb * pb - 4.0 * w0 * w0);
    for (const Cplx s : {(pb + disc) / 2.0, (pb - disc) / 2.0}) {
      const Cplx z = (k + s) / (k - s);
      Biquad q;
      q.b0 = 1.0;
      q.b1 = 0.0;
      q.b2 = -1.0;
      q.a1 = -2.0 * z.real();
      q.a2 = std::norm(z);
      sos.push_back(q);
    }
  }
  const double fc = std::atan(w0 / k) * sample_rate / pi;
  const double g = std::abs(sos_response(sos, fc, sample_rate));
  sos.front().b0 /= g;
  sos.front().b2 /= g;
  return sos;
}

Sos octave_band_filter(double center_hz, double sample_rate, int order) {
  return butterworth_bandpass(order, center_hz / std::numbers::sqrt2, center_hz * std::numbers::sqrt2,
                              sample_rate);
}

Cplx sos_response(const Sos& sos, double f_hz, double sample_rate) {
  const Cplx z1 = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / sample_rate);
  const Cplx z2 = z1 * z1;
  Cplx h = 1.0;
  for (const auto& q : sos) h *= (q.b0 + q.b1 * z1 + q.b2 * z2) / (1.0 + q.a1 * z1 + q.a2 * z2);
  return h;
}

std::vector<double> sosfilt(const Sos& sos, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  for (const auto& q : sos) {
    double s1 = 0.0, s2 = 0.0;
    for (double& v : y) {
      const double in = v;
      const double out = q.b0 * in + s1;
      s1 = q.b1 * in - q.a1 * out + s2;
      s2 = q.b2 * in - q.a2 * out;
      v = out;
    }
  }
  return y;
}

std::vector<double> sosfiltfilt(const Sos& sos, std::span<const double> x, std::size_t pad) {
  std::vector<double> buf(x.size() + 2 * pad, 0.0);
  std::copy(x.begin(), x.end(), buf.begin() + static_cast<std::ptrdiff_t>(pad));
  buf = sosfilt(sos, buf);
  std::reverse(buf.begin(), buf.end());
  buf = sosfilt(sos, buf);
  std::reverse(buf.begin(), buf.end());
  return {buf.begin() + static_cast<std::ptrdiff_t>(pad),
          buf.begin() + static_cast<std::ptrdiff_t>(pad + x.size())};
}

}  // namespace echoroom
