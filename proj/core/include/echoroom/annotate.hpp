#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "echoroom/geometry.hpp"
#include "echoroom/ism_synth.hpp"

namespace echoroom {

/// Column-normalized echograms stacked side by side (L x N).
struct Skyline {
  Eigen::MatrixXd matrix;
  std::vector<std::size_t> mic_order;  // column n holds rirs[mic_order[n]]
};

/// Column n = |h_{order[n]}| / max |h_{order[n]}|. Shorter RIRs are zero
/// padded. An empty `order` means identity ordering.
Skyline build_skyline(std::span<const Rir> rirs, std::span<const std::size_t> order = {});

struct EqualizationOptions {
  int half_window = 120;  // samples around the direct arrival used as kernel
  double reg_eps = 1e-3;  // relative spectral floor of the inversion
  double taper = 0.1;     // fraction of the window tapered at each edge
};

/// Deconvolves `rir` by its own windowed direct-path segment. The output is
/// scaled so that the equalized direct path has unit height at
/// `direct_sample`. Throws NumericalError if the direct segment carries no
/// more energy than an equally long stretch of the noise floor.
std::vector<double> equalize_direct_path(const Rir& rir, double direct_sample,
                                         const EqualizationOptions& options = {});

struct Peak {
  std::size_t sample = 0;  // integer index of the local maximum
  double position = 0.0;   // parabolic sub-sample refinement
  double height = 0.0;     // |x| at `sample`
  double width = 0.0;      // full width at half height, samples
};

struct PeakFinderOptions {
  double min_height = 0.05;      // relative to the global maximum of |x|
  std::size_t min_distance = 40;  // samples
};

/// Local maxima of |x| above min_height * max|x|, thinned greedily by height
/// (ties go to the earlier sample) so that no two survivors are closer than
/// min_distance. Sorted by sample index.
std::vector<Peak> find_peaks(std::span<const double> echogram, const PeakFinderOptions& options = {});

struct MatchResult {
  std::vector<Echo> labeled;                 // observed TOAs and peak heights, sorted by TOA
  std::vector<std::size_t> unmatched_peaks;  // indices into the peak list
  std::vector<std::string> unmatched_predictions;
  double total_cost = 0.0;  // sum of |dt| over matched pairs, seconds
};

struct MatchOptions {
  double tolerance = 0.5e-3;  // s
  /// Predictions closer than this (s) are reported as ambiguous with each other.
  double ambiguity_window = 1.0 / 48000.0;
};

/// One-to-one assignment of peaks to predicted echoes. Maximizes the number
/// of pairs with |dt| <= tolerance, then minimizes the total |dt|.
MatchResult match_and_label(std::span<const Peak> peaks, double sample_rate,
                            std::span<const Echo> predicted, const MatchOptions& options = {});

/// Fraction of first-order entries of `observed` whose TOA lies within `tol`
/// seconds of the same-label entry in `geometric`. Missing counterparts count
/// as mismatches.
double goodness_of_match(const EchoAnnotation& observed, const EchoAnnotation& geometric, double tol);

struct AnnotationOptions {
  bool equalize = false;
  EqualizationOptions equalization;
  PeakFinderOptions peaks;
  MatchOptions match;
};

struct AnnotationRun {
  EchoAnnotation annotation;
  std::map<EchoAnnotation::Key, MatchResult> details;
};

/// Peak-finds every RIR (indexed [mic][src]) and labels direct and
/// first-order arrivals against the geometric prediction.
AnnotationRun annotate_rirs(const std::vector<std::vector<Rir>>& rirs, const RoomSpec& room,
                            const SceneLayout& layout, const AnnotationOptions& options = {});

}  // namespace echoroom
