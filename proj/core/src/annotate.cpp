#include "echoroom/annotate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "echoroom/assignment.hpp"
#include "echoroom/errors.hpp"
#include "echoroom/fft.hpp"

namespace echoroom {

Skyline build_skyline(std::span<const Rir> rirs, std::span<const std::size_t> order) {
  std::vector<std::size_t> cols(order.begin(), order.end());
  if (cols.empty()) {
    cols.resize(rirs.size());
    std::iota(cols.begin(), cols.end(), 0);
  }
  std::size_t length = 0;
  for (const auto& r : rirs) length = std::max(length, r.size());
  Skyline sky;
  sky.mic_order = cols;
  sky.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(length),
                                     static_cast<Eigen::Index>(cols.size()));
  for (std::size_t n = 0; n < cols.size(); ++n) {
    if (cols[n] >= rirs.size()) throw ValidationError("skyline ordering index out of range");
    const auto& h = rirs[cols[n]].samples;
    double peak = 0.0;
    for (double v : h) peak = std::max(peak, std::abs(v));
    if (peak == 0.0) throw ValidationError("RIR " + std::to_string(cols[n]) + " is all zero");
    for (std::size_t l = 0; l < h.size(); ++l) {
      sky.matrix(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(n)) = std::abs(h[l]) / peak;
    }
  }
  return sky;
}

std::vector<double> equalize_direct_path(const Rir& rir, double direct_sample,
                                         const EqualizationOptions& options) {
  rir.validate();
  const long w = options.half_window;
  const auto len = static_cast<long>(rir.size());
  const long d0 = std::lround(direct_sample);
  if (w < 1 || d0 < 0 || d0 >= len) throw ValidationError("direct arrival outside the RIR");

  const long taper = std::max<long>(1, std::lround(options.taper * static_cast<double>(2 * w + 1)));
  const std::size_t n = dsp::next_pow2(rir.size() + static_cast<std::size_t>(2 * w + 1));
  // Kernel with its origin (the direct sample) moved to index 0, wrapped.
  std::vector<double> kernel(n, 0.0);
  double kernel_energy = 0.0;
  for (long m = -w; m <= w; ++m) {
    const long idx = d0 + m;
    if (idx < 0 || idx >= len) continue;
    const long edge = std::min(m + w, w - m);
    double g = 1.0;
    if (edge < taper) g = 0.5 * (1.0 - std::cos(std::numbers::pi * (edge + 0.5) / taper));
    const double v = g * rir.samples[static_cast<std::size_t>(idx)];
    kernel[static_cast<std::size_t>((m + static_cast<long>(n)) % static_cast<long>(n))] = v;
    kernel_energy += v * v;
  }

  // Noise floor: mean power of the last 10 % of the RIR, over a window as long as the kernel.
  const std::size_t tail = std::max<std::size_t>(1, rir.size() / 10);
  double tail_power = 0.0;
  for (std::size_t i = rir.size() - tail; i < rir.size(); ++i) tail_power += rir.samples[i] * rir.samples[i];
  tail_power /= static_cast<double>(tail);
  if (!(kernel_energy > tail_power * static_cast<double>(2 * w + 1))) {
    throw NumericalError("direct-path segment energy is below the noise floor");
  }

  const auto kspec = dsp::rfft(kernel, n);
  auto spec = dsp::rfft(rir.samples, n);
  double max_power = 0.0;
  for (const auto& v : kspec) max_power = std::max(max_power, std::norm(v));
  const double floor = options.reg_eps * max_power;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    spec[k] = spec[k] * std::conj(kspec[k]) / (std::norm(kspec[k]) + floor);
  }
  auto out = dsp::irfft(spec, n);
  out.resize(rir.size());
  const double ref = out[static_cast<std::size_t>(d0)];
  if (ref == 0.0) throw NumericalError("equalized direct path vanished");
  for (double& v : out) v /= ref;
  return out;
}

std::vector<Peak> find_peaks(std::span<const double> echogram, const PeakFinderOptions& options) {
  if (!(options.min_height > 0.0 && options.min_height < 1.0)) {
    throw ValidationError("min_height must lie in (0, 1)");
  }
  if (options.min_distance < 1) throw ValidationError("min_distance must be at least 1");
  const std::size_t n = echogram.size();
  std::vector<Peak> out;
  if (n < 3) return out;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::abs(echogram[i]);
  const double gmax = *std::max_element(x.begin(), x.end());
  if (gmax == 0.0) return out;
  const double threshold = options.min_height * gmax;

  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 < n;) {
    if (x[i] > x[i - 1]) {
      std::size_t j = i;
      while (j + 1 < n && x[j + 1] == x[i]) ++j;  // plateau, keep its first sample
      if (j + 1 < n && x[j + 1] < x[i] && x[i] > threshold) candidates.push_back(i);
      i = j + 1;
    } else {
      ++i;
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  std::vector<std::size_t> kept;
  for (std::size_t c : candidates) {
    const bool clear = std::all_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return (c > k ? c - k : k - c) >= options.min_distance;
    });
    if (clear) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end());

  out.reserve(kept.size());
  for (std::size_t i : kept) {
    Peak p;
    p.sample = i;
    p.height = x[i];
    const double ym = x[i - 1], y0 = x[i], yp = x[i + 1];
    const double denom = ym - 2.0 * y0 + yp;
    double delta = denom != 0.0 ? 0.5 * (ym - yp) / denom : 0.0;
    p.position = static_cast<double>(i) + std::clamp(delta, -0.5, 0.5);
    const double half = 0.5 * y0;
    double left = static_cast<double>(i), right = static_cast<double>(i);
    for (std::size_t k = i; k > 0; --k) {
      if (x[k - 1] <= half) {
        left = static_cast<double>(k - 1) + (half - x[k - 1]) / (x[k] - x[k - 1]);
        break;
      }
      left = static_cast<double>(k - 1);
    }
    for (std::size_t k = i; k + 1 < n; ++k) {
      if (x[k + 1] <= half) {
        right = static_cast<double>(k) + (x[k] - half) / (x[k] - x[k + 1]);
        break;
      }
      right = static_cast<double>(k + 1);
    }
    p.width = right - left;
    out.push_back(p);
  }
  return out;
}

MatchResult match_and_label(std::span<const Peak> peaks, double sample_rate,
                            std::span<const Echo> predicted, const MatchOptions& options) {
  if (!(options.tolerance > 0.0)) throw ValidationError("matching tolerance must be positive");
  if (!(sample_rate > 0.0)) throw ValidationError("sample rate must be positive");
  MatchResult result;
  const auto np = static_cast<Eigen::Index>(peaks.size());
  const auto ne = static_cast<Eigen::Index>(predicted.size());
  std::vector<int> assignment(peaks.size(), -1);
  if (np > 0 && ne > 0) {
    // Forbidden pairs cost more than any feasible matching in total.
    const double forbidden = (options.tolerance + 1.0) * static_cast<double>(np + ne + 1) * 10.0;
    Eigen::MatrixXd cost(np, ne);
    for (Eigen::Index i = 0; i < np; ++i) {
      const double t = peaks[static_cast<std::size_t>(i)].position / sample_rate;
      for (Eigen::Index j = 0; j < ne; ++j) {
        const double dt = std::abs(t - predicted[static_cast<std::size_t>(j)].toa);
        cost(i, j) = dt <= options.tolerance ? dt : forbidden;
      }
    }
    assignment = solve_assignment(cost);
    for (Eigen::Index i = 0; i < np; ++i) {
      int& j = assignment[static_cast<std::size_t>(i)];
      if (j >= 0 && cost(i, j) >= forbidden) j = -1;
    }
  }
  std::vector<char> used(predicted.size(), 0);
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    const int j = assignment[i];
    if (j < 0) {
      result.unmatched_peaks.push_back(i);
      continue;
    }
    used[static_cast<std::size_t>(j)] = 1;
    const Echo& pred = predicted[static_cast<std::size_t>(j)];
    Echo e;
    e.label = pred.label;
    e.toa = peaks[i].position / sample_rate;
    e.amplitude = peaks[i].height;
    for (std::size_t k = 0; k < predicted.size(); ++k) {
      if (static_cast<int>(k) != j &&
          std::abs(predicted[k].toa - pred.toa) <= options.ambiguity_window) {
        e.ambiguous_with.push_back(predicted[k].label);
      }
    }
    result.total_cost += std::abs(e.toa - pred.toa);
    result.labeled.push_back(std::move(e));
  }
  for (std::size_t j = 0; j < predicted.size(); ++j) {
    if (!used[j]) result.unmatched_predictions.push_back(predicted[j].label);
  }
  std::stable_sort(result.labeled.begin(), result.labeled.end(),
                   [](const Echo& a, const Echo& b) { return a.toa < b.toa; });
  return result;
}

double goodness_of_match(const EchoAnnotation& observed, const EchoAnnotation& geometric, double tol) {
  std::size_t total = 0;
  std::size_t hits = 0;
  for (const auto& [key, echoes] : observed.entries()) {
    if (!geometric.find(key.first, key.second)) {
      throw ValidationError("pair mic_" + std::to_string(key.first) + "/src_" +
                            std::to_string(key.second) + " missing from the geometric annotation");
    }
    for (const auto& e : echoes) {
      if (e.order() != 1) continue;
      ++total;
      const Echo* g = geometric.find_echo(key.first, key.second, e.label);
      if (g && std::abs(e.toa - g->toa) <= tol) ++hits;
    }
  }
  if (total == 0) throw ValidationError("annotation holds no first-order echoes");
  return static_cast<double>(hits) / static_cast<double>(total);
}

AnnotationRun annotate_rirs(const std::vector<std::vector<Rir>>& rirs, const RoomSpec& room,
                            const SceneLayout& layout, const AnnotationOptions& options) {
  const EchoAnnotation predicted = predict_echo_annotation(room, layout, 1);
  if (rirs.size() != layout.mic_count()) throw ValidationError("RIR count does not match the microphone count");
  AnnotationRun run;
  for (std::size_t m = 0; m < rirs.size(); ++m) {
    if (rirs[m].size() != layout.source_count()) {
      throw ValidationError("RIR count does not match the source count");
    }
    for (std::size_t s = 0; s < rirs[m].size(); ++s) {
      const Rir& rir = rirs[m][s];
      const auto* pred = predicted.find(m, s);
      std::vector<double> echogram;
      if (options.equalize) {
        echogram = equalize_direct_path(rir, pred->front().toa * rir.sample_rate, options.equalization);
      } else {
        echogram = rir.samples;
      }
      const auto peaks = find_peaks(echogram, options.peaks);
      MatchOptions mo = options.match;
      mo.ambiguity_window = std::max(mo.ambiguity_window, 1.0 / rir.sample_rate);
      auto match = match_and_label(peaks, rir.sample_rate, *pred, mo);
      run.annotation.set(m, s, match.labeled);
      run.details.emplace(EchoAnnotation::Key{m, s}, std::move(match));
    }
  }
  return run;
}

}  // namespace echoroom
