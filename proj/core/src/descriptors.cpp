#include "echoroom/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "echoroom/errors.hpp"
#include "echoroom/filters.hpp"

namespace echoroom {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double mean_range(const std::vector<double>& e, std::size_t from, std::size_t to) {
  if (to <= from) return 0.0;
  return std::accumulate(e.begin() + static_cast<std::ptrdiff_t>(from),
                         e.begin() + static_cast<std::ptrdiff_t>(to), 0.0) /
         static_cast<double>(to - from);
}

double to_db(double v) { return v > 0.0 ? 10.0 * std::log10(v) : kNegInf; }

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  f.r2 = (sxx > 0.0 && syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

// Lundeby-style estimate of where the decay meets the noise floor.
std::size_t decay_knee(const std::vector<double>& e, double fs, bool& reliable) {
  const std::size_t n = e.size();
  reliable = true;
  const double peak = *std::max_element(e.begin(), e.end());
  if (!(peak > 0.0)) {
    reliable = false;
    return n;
  }
  double noise = mean_range(e, n - std::max<std::size_t>(1, n / 10), n);
  if (noise <= peak * 1e-14) return n;

  const std::size_t block = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.01 * fs)));
  const std::size_t nb = n / block;
  if (nb < 3) return n;
  std::vector<double> env(nb), tb(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    env[b] = to_db(mean_range(e, b * block, (b + 1) * block));
    tb[b] = (static_cast<double>(b) + 0.5) * static_cast<double>(block);
  }
  const auto pk = static_cast<std::size_t>(std::max_element(env.begin(), env.end()) - env.begin());
  if (to_db(noise) > env[pk] - 20.0) reliable = false;

  std::size_t knee = n;
  for (int iter = 0; iter < 5; ++iter) {
    const double noise_db = to_db(noise);
    std::size_t end = pk + 1;
    while (end < nb && env[end] > noise_db + 10.0) ++end;
    if (end >= nb || end - pk < 2) break;
    const LineFit f = fit_line(std::span(tb).subspan(pk, end - pk), std::span(env).subspan(pk, end - pk));
    if (!(f.slope < 0.0)) break;
    const double cross = (noise_db - f.intercept) / f.slope;
    const auto new_knee = static_cast<std::size_t>(std::clamp(cross, 1.0, static_cast<double>(n)));
    const bool settled = (knee != n) && (new_knee + block > knee) && (knee + block > new_knee);
    knee = new_knee;
    if (settled) break;
    const auto tail_start = static_cast<std::size_t>(
        std::clamp(cross + 10.0 / -f.slope, 0.0, static_cast<double>(n)));
    noise = (n - tail_start >= n / 10) ? mean_range(e, tail_start, n)
                                       : mean_range(e, n - std::max<std::size_t>(1, n / 10), n);
    if (!(noise > 0.0)) break;
  }
  return std::max<std::size_t>(knee, 1);
}

std::size_t toa_to_sample(const Rir& rir, double toa) {
  const double pos = toa * rir.sample_rate;
  if (!(pos >= 0.0) || pos >= static_cast<double>(rir.size())) {
    throw ValidationError("arrival time lies outside the RIR");
  }
  return static_cast<std::size_t>(std::lround(pos));
}

double energy(const std::vector<double>& h, std::size_t from, std::size_t to) {
  double s = 0.0;
  for (std::size_t i = from; i < std::min(to, h.size()); ++i) s += h[i] * h[i];
  return s;
}

EnergyRatio ratio_db(double num, double den) {
  if (!(num > 0.0)) throw NumericalError("direct-path window carries no energy");
  if (!(den > 0.0)) return {std::numeric_limits<double>::infinity(), true};
  return {10.0 * std::log10(num / den), false};
}

}  // namespace

DecayCurve schroeder_edc(const Rir& rir, double band_center) {
  rir.validate();
  if (rir.samples.empty()) throw ValidationError("empty RIR");
  DecayCurve curve;
  curve.band_center = band_center;
  curve.sample_rate = rir.sample_rate;
  std::vector<double> h = rir.samples;
  if (band_center > 0.0) {
    const Sos sos = octave_band_filter(band_center, rir.sample_rate);
    h = sosfiltfilt(sos, h, static_cast<std::size_t>(rir.sample_rate / 10.0));
  }
  std::vector<double> e(h.size());
  std::transform(h.begin(), h.end(), e.begin(), [](double v) { return v * v; });
  curve.knee = decay_knee(e, rir.sample_rate, curve.reliable);

  curve.edc_db.assign(e.size(), kNegInf);
  std::vector<double> tail(curve.knee);
  double acc = 0.0;
  for (std::size_t i = curve.knee; i-- > 0;) {
    acc += e[i];
    tail[i] = acc;
  }
  if (!(acc > 0.0)) {
    curve.reliable = false;
    curve.edc_db[0] = 0.0;
    return curve;
  }
  for (std::size_t i = 0; i < curve.knee; ++i) curve.edc_db[i] = to_db(tail[i] / acc);
  curve.edc_db[0] = 0.0;
  return curve;
}

DecayCurve average_decay_curves(std::span<const DecayCurve> curves) {
  if (curves.empty()) throw ValidationError("no decay curves to average");
  DecayCurve out;
  out.band_center = curves.front().band_center;
  out.sample_rate = curves.front().sample_rate;
  out.knee = curves.front().knee;
  std::size_t length = curves.front().edc_db.size();
  for (const auto& c : curves) {
    if (c.band_center != out.band_center || c.sample_rate != out.sample_rate) {
      throw ValidationError("decay curves differ in band or sample rate");
    }
    out.knee = std::min(out.knee, c.knee);
    length = std::min(length, c.edc_db.size());
    out.reliable = out.reliable && c.reliable;
  }
  std::vector<double> acc(out.knee, 0.0);
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < out.knee; ++i) acc[i] += std::pow(10.0, c.edc_db[i] / 10.0);
  }
  out.edc_db.assign(length, kNegInf);
  for (std::size_t i = 0; i < out.knee; ++i) out.edc_db[i] = to_db(acc[i] / static_cast<double>(curves.size()));
  return out;
}

Rt60Estimate rt60_from_edc(DecayCurve& curve, double r2_threshold) {
  const auto& edc = curve.edc_db;
  const auto first_below = [&](double level) {
    return static_cast<std::size_t>(
        std::find_if(edc.begin(), edc.end(), [&](double v) { return v <= level; }) - edc.begin());
  };
  const std::size_t start = first_below(curve.fit_high_db);
  const std::size_t stop = first_below(curve.fit_low_db);
  if (stop >= edc.size() || !std::isfinite(edc[stop])) {
    throw ValidationError("decay curve never reaches the lower fit limit");
  }
  std::vector<double> t, y;
  for (std::size_t i = start; i <= stop; ++i) {
    t.push_back(static_cast<double>(i) / curve.sample_rate);
    y.push_back(edc[i]);
  }
  Rt60Estimate est;
  if (t.size() < 2) {
    // Span crossed within one sample: the slope is unresolved.
    est.seconds = 0.0;
    est.set = ReliabilitySet::kB;
    curve.linearity_score = 0.0;
    return est;
  }
  const LineFit f = fit_line(t, y);
  est.slope_db_per_s = f.slope;
  est.r_squared = f.r2;
  curve.linearity_score = f.r2;
  if (!(f.slope < 0.0)) throw NumericalError("decay fit has non-negative slope");
  const double rt10 = (curve.fit_low_db - curve.fit_high_db) / f.slope;
  est.seconds = 6.0 * rt10;
  est.set = (f.r2 >= r2_threshold && curve.reliable) ? ReliabilitySet::kA : ReliabilitySet::kB;
  return est;
}

EnergyRatio drr(const Rir& rir, double direct_toa, int half_window) {
  if (half_window < 0) throw ValidationError("half window must be non-negative");
  const std::size_t nd = toa_to_sample(rir, direct_toa);
  const auto w = static_cast<std::size_t>(half_window);
  const std::size_t d0 = nd > w ? nd - w : 0;
  const std::size_t d1 = std::min(rir.size(), nd + w + 1);
  return ratio_db(energy(rir.samples, d0, d1), energy(rir.samples, d1, rir.size()));
}

EnergyRatio der(const Rir& rir, std::span<const Echo> echoes, int half_window) {
  if (half_window < 0) throw ValidationError("half window must be non-negative");
  const auto direct = std::find_if(echoes.begin(), echoes.end(), [](const Echo& e) { return e.label == "d"; });
  if (direct == echoes.end()) throw ValidationError("echo list lacks the direct path");
  const std::size_t nd = toa_to_sample(rir, direct->toa);
  const auto w = static_cast<std::size_t>(half_window);
  const std::size_t d0 = nd > w ? nd - w : 0;
  const std::size_t d1 = std::min(rir.size(), nd + w + 1);

  std::vector<char> in_e(rir.size(), 0);
  for (const auto& echo : echoes) {
    if (echo.order() != 1) continue;
    const std::size_t ne = toa_to_sample(rir, echo.toa);
    const std::size_t e0 = ne > w ? ne - w : 0;
    const std::size_t e1 = std::min(rir.size(), ne + w + 1);
    for (std::size_t i = e0; i < e1; ++i) in_e[i] = 1;
  }
  double early = 0.0;
  for (std::size_t i = 0; i < rir.size(); ++i) {
    if (in_e[i] && (i < d0 || i >= d1)) early += rir.samples[i] * rir.samples[i];
  }
  return ratio_db(energy(rir.samples, d0, d1), early);
}

DescriptorSet compute_descriptors(const Rir& rir, std::span<const Echo> echoes, std::span<const double> bands,
                                  int half_window) {
  DescriptorSet out;
  for (double band : bands) {
    DecayCurve curve = schroeder_edc(rir, band);
    try {
      out.rt60[band] = rt60_from_edc(curve);
    } catch (const Error&) {
      out.rt60[band] = std::nullopt;
    }
  }
  const auto direct = std::find_if(echoes.begin(), echoes.end(), [](const Echo& e) { return e.label == "d"; });
  if (direct == echoes.end()) throw ValidationError("echo list lacks the direct path");
  out.drr = drr(rir, direct->toa, half_window);
  out.der = der(rir, echoes, half_window);
  return out;
}

}  // namespace echoroom
