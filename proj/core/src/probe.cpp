#include "echoroom/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "echoroom/errors.hpp"
#include "echoroom/fft.hpp"

namespace echoroom {
namespace {

constexpr double kPi = std::numbers::pi;

std::size_t to_samples(double seconds, double fs) {
  return static_cast<std::size_t>(std::llround(seconds * fs));
}

}  // namespace

void SweepSpec::validate() const {
  if (!(sample_rate > 0.0)) throw ValidationError("sweep sample rate must be positive");
  if (!(f_start > 0.0 && f_start < f_stop && f_stop <= sample_rate / 2.0)) {
    throw ValidationError("sweep requires 0 < f_start < f_stop <= fs/2");
  }
  if (!(duration > 0.0)) throw ValidationError("sweep duration must be positive");
  if (!(fade >= 0.0 && fade < duration / 2.0)) throw ValidationError("fade must be shorter than half the sweep");
  if (repetitions < 1) throw ValidationError("repetitions must be at least 1");
  if (!(gap >= 0.0)) throw ValidationError("gap must be non-negative");
}

std::size_t SweepSpec::sweep_samples() const { return to_samples(duration, sample_rate); }
std::size_t SweepSpec::gap_samples() const { return to_samples(gap, sample_rate); }

std::size_t SweepSpec::total_samples() const {
  const auto reps = static_cast<std::size_t>(repetitions);
  return reps * sweep_samples() + (reps - 1) * gap_samples();
}

double SweepSpec::phase(double t) const {
  const double rate = std::log(f_stop / f_start);
  const double k = 2.0 * kPi * f_start * duration / rate;
  const double l = duration / rate;
  return k * (std::exp(t / l) - 1.0);
}

double SweepSpec::instantaneous_frequency(double t) const {
  return f_start * std::exp(t * std::log(f_stop / f_start) / duration);
}

std::vector<double> generate_sweep(const SweepSpec& spec) {
  spec.validate();
  const std::size_t n = spec.sweep_samples();
  const std::size_t fade = to_samples(spec.fade, spec.sample_rate);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate;
    double w = 1.0;
    if (fade > 0) {
      const std::size_t from_end = n - 1 - i;
      const std::size_t edge = std::min(i, from_end);
      if (edge < fade) {
        w = 0.5 * (1.0 - std::cos(kPi * static_cast<double>(edge) / static_cast<double>(fade)));
      }
    }
    x[i] = w * std::sin(spec.phase(t));
  }
  return x;
}

std::vector<double> generate_ess(const SweepSpec& spec) {
  const auto sweep = generate_sweep(spec);
  std::vector<double> out(spec.total_samples(), 0.0);
  for (int r = 0; r < spec.repetitions; ++r) {
    std::copy(sweep.begin(), sweep.end(),
              out.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(r) * spec.period_samples()));
  }
  return out;
}

double band_mask_gain(double f, double low, double high, double sample_rate) {
  const double nyquist = sample_rate / 2.0;
  const double low_stop = low / 2.0;
  const double high_stop = std::min(1.1 * high, nyquist);
  if (f >= low && f <= high) return 1.0;
  if (f < low) {
    if (f <= low_stop) return 0.0;
    return 0.5 * (1.0 - std::cos(kPi * (f - low_stop) / (low - low_stop)));
  }
  if (f >= high_stop || high_stop <= high) return 0.0;
  return 0.5 * (1.0 + std::cos(kPi * (f - high) / (high_stop - high)));
}

bool is_clipped(std::span<const double> signal) {
  if (signal.empty()) return false;
  const auto hits = std::count_if(signal.begin(), signal.end(),
                                  [](double v) { return std::abs(v) >= 1.0 - 1e-4; });
  return static_cast<double>(hits) > 1e-3 * static_cast<double>(signal.size());
}

Rir estimate_rir(std::span<const double> recorded, std::span<const double> reference,
                 double sample_rate, const DeconvolutionOptions& options) {
  if (!(sample_rate > 0.0)) throw ValidationError("sample rate must be positive");
  if (reference.empty() ||
      std::all_of(reference.begin(), reference.end(), [](double v) { return v == 0.0; })) {
    throw ValidationError("reference signal is all zero");
  }
  if (recorded.size() < reference.size()) {
    throw ValidationError("recording is shorter than the reference");
  }
  if (options.repetitions < 1) throw ValidationError("repetitions must be at least 1");
  if (options.repetitions > 1 && options.period == 0) {
    throw ValidationError("period is required when averaging repetitions");
  }
  if (!(options.reg_eps >= 0.0)) throw ValidationError("regularization must be non-negative");

  const auto reps = static_cast<std::size_t>(options.repetitions);
  std::vector<std::pair<std::size_t, std::size_t>> segments;  // [begin, end)
  for (std::size_t r = 0; r < reps; ++r) {
    const std::size_t begin = r * options.period;
    if (begin >= recorded.size()) throw ValidationError("recording holds fewer repetitions than requested");
    const std::size_t end = (r + 1 == reps) ? recorded.size()
                                            : std::min(recorded.size(), begin + options.period);
    segments.emplace_back(begin, end);
  }
  std::size_t longest = 0;
  for (const auto& [b, e] : segments) longest = std::max(longest, e - b);

  const std::size_t n = dsp::next_pow2(longest + reference.size());
  const auto ref_spec = dsp::rfft(reference, n);
  double max_power = 0.0;
  for (const auto& v : ref_spec) max_power = std::max(max_power, std::norm(v));
  const double floor = options.reg_eps * max_power;

  std::vector<dsp::Complex> inverse(ref_spec.size());
  for (std::size_t k = 0; k < ref_spec.size(); ++k) {
    double g = 1.0;
    if (options.band_mask) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n);
      g = band_mask_gain(f, options.band_low, options.band_high, sample_rate);
    }
    const double denom = std::norm(ref_spec[k]) + floor;
    inverse[k] = denom > 0.0 ? g * std::conj(ref_spec[k]) / denom : dsp::Complex{};
  }

  std::vector<dsp::Complex> acc(ref_spec.size());
  std::vector<double> segment;
  for (const auto& [b, e] : segments) {
    segment.assign(recorded.begin() + static_cast<std::ptrdiff_t>(b),
                   recorded.begin() + static_cast<std::ptrdiff_t>(e));
    for (double& v : segment) v *= options.channel_gain;
    const auto spec = dsp::rfft(segment, n);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += spec[k] * inverse[k];
  }
  for (auto& v : acc) v /= static_cast<double>(reps);

  Rir rir;
  rir.samples = dsp::irfft(acc, n);
  const std::size_t len = options.rir_length > 0 ? options.rir_length : longest;
  rir.samples.resize(std::min(len, n));
  rir.sample_rate = sample_rate;
  rir.provenance = Provenance::kEstimated;
  rir.clipped = is_clipped(recorded);
  return rir;
}

LoopbackAlignment align_by_loopback(const std::vector<std::vector<double>>& channels,
                                    std::size_t loopback_index,
                                    std::span<const double> reference, double min_correlation) {
  if (loopback_index >= channels.size()) throw ValidationError("loop-back channel index out of range");
  const auto& loop = channels[loopback_index];
  if (loop.size() < reference.size() || reference.empty()) {
    throw ValidationError("loop-back channel shorter than the reference");
  }
  const auto corr = dsp::xcorr_positive_lags(loop, reference);
  const std::size_t max_lag = loop.size() - reference.size();
  double top = corr[0];
  for (std::size_t k = 1; k <= max_lag; ++k) top = std::max(top, corr[k]);
  // A repeated probe correlates equally with every repetition; take the first.
  std::size_t best = 0;
  while (best < max_lag && corr[best] < 0.9 * top) ++best;
  while (best < max_lag && corr[best + 1] > corr[best]) ++best;
  const double ref_energy = std::inner_product(reference.begin(), reference.end(), reference.begin(), 0.0);
  double seg_energy = 0.0;
  for (std::size_t i = best; i < best + reference.size(); ++i) seg_energy += loop[i] * loop[i];
  const double norm = std::sqrt(ref_energy * seg_energy);
  const double peak = norm > 0.0 ? corr[best] / norm : 0.0;
  if (!(peak >= min_correlation)) {
    throw NumericalError("loop-back alignment failed: correlation peak " + std::to_string(peak) +
                         " below threshold " + std::to_string(min_correlation));
  }
  LoopbackAlignment out;
  out.onset = best;
  out.peak_correlation = peak;
  out.channels.reserve(channels.size());
  for (const auto& ch : channels) {
    const std::size_t skip = std::min(best, ch.size());
    out.channels.emplace_back(ch.begin() + static_cast<std::ptrdiff_t>(skip), ch.end());
  }
  return out;
}

}  // namespace echoroom
