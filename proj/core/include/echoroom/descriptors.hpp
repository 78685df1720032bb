#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "echoroom/geometry.hpp"
#include "echoroom/ism_synth.hpp"

namespace echoroom {

inline const std::vector<double> kDefaultOctaveBands = {500.0, 1000.0, 2000.0, 4000.0};

struct DecayCurve {
  double band_center = 0.0;  // Hz; 0 means broadband (no filtering)
  double sample_rate = kDefaultSampleRate;
  std::vector<double> edc_db;  // -inf past the integration limit
  double fit_high_db = -5.0;
  double fit_low_db = -15.0;
  double linearity_score = 0.0;  // R^2 of the last fit, filled by rt60_from_edc
  std::size_t knee = 0;          // integration limit (samples)
  bool reliable = true;          // false when the band barely clears its noise floor
};

/// Schroeder backward integration of the band-passed squared RIR, truncated
/// at the decay / noise-floor intersection. `band_center` 0 skips filtering.
DecayCurve schroeder_edc(const Rir& rir, double band_center);

/// Energy average of normalized decay curves from several positions, cut at
/// the earliest knee. Curves must share band and sample rate.
DecayCurve average_decay_curves(std::span<const DecayCurve> curves);

enum class ReliabilitySet { kA, kB };

struct Rt60Estimate {
  double seconds = 0.0;
  ReliabilitySet set = ReliabilitySet::kB;
  double r_squared = 0.0;
  double slope_db_per_s = 0.0;
};

inline constexpr double kLinearityThreshold = 0.98;

/// Line fit of the EDC between -5 and -15 dB, extrapolated to 60 dB.
/// Throws ValidationError if the curve never reaches -15 dB.
Rt60Estimate rt60_from_edc(DecayCurve& curve, double r2_threshold = kLinearityThreshold);

/// Energy ratio in dB. `infinite` flags a zero denominator.
struct EnergyRatio {
  double db = 0.0;
  bool infinite = false;
};

/// Direct window +-half_window around the direct arrival versus everything after it.
EnergyRatio drr(const Rir& rir, double direct_toa, int half_window = 120);

/// Direct window versus the union of +-half_window windows around the
/// first-order echoes of `echoes` (which must contain the direct path "d").
/// Overlap with the direct window is assigned to the direct window.
EnergyRatio der(const Rir& rir, std::span<const Echo> echoes, int half_window = 120);

struct DescriptorSet {
  std::map<double, std::optional<Rt60Estimate>> rt60;  // band -> estimate, empty when the fit failed
  EnergyRatio drr;
  EnergyRatio der;
};

DescriptorSet compute_descriptors(const Rir& rir, std::span<const Echo> echoes,
                                  std::span<const double> bands = kDefaultOctaveBands,
                                  int half_window = 120);

}  // namespace echoroom
