#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "echoroom/geometry.hpp"

namespace echoroom {

enum class MdsMode {
  kDirect,         // dMDS: direct-path distances only
  kDirectCeiling,  // dcMDS: direct paths plus first-order ceiling images
};

/// TOA matrices are (microphones x sources) in seconds; NaN marks a missing
/// observation.
struct CalibrationProblem {
  Eigen::MatrixXd toa_direct;
  std::optional<Eigen::MatrixXd> toa_ceiling;
  double ceiling_height = 2.4;
  double speed_of_sound = kDefaultSpeedOfSound;
  double ceiling_weight = 1.0;

  /// Direct ("d") and ceiling ("c") TOAs taken from an annotation.
  static CalibrationProblem from_annotation(const EchoAnnotation& annotation,
                                            const SceneLayout& layout, const RoomSpec& room);

  /// 4 per array (barycenter, tilt) + 3 per source, before gauge fixing.
  static std::size_t unknown_count(const SceneLayout& layout);
  void validate(const SceneLayout& layout, MdsMode mode) const;
};

/// Residuals c * toa - |m - s| (and the ceiling-image analogue) as a function
/// of the free layout parameters. Array 0 keeps the x, y and tilt of the
/// layout it was built from; everything else is free.
class MdsObjective {
 public:
  MdsObjective(const CalibrationProblem& problem, const SceneLayout& init, MdsMode mode);

  Eigen::Index parameter_count() const { return parameter_count_; }
  Eigen::Index residual_count() const { return static_cast<Eigen::Index>(terms_.size()); }

  Eigen::VectorXd pack(const SceneLayout& layout) const;
  SceneLayout unpack(const Eigen::VectorXd& x) const;
  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;
  double cost(const Eigen::VectorXd& x) const { return residuals(x).squaredNorm(); }

 private:
  struct Term {
    std::size_t mic;
    std::size_t src;
    bool ceiling;
    double range;  // c * toa
  };
  const CalibrationProblem* problem_;
  SceneLayout template_;
  std::vector<MicRef> mic_refs_;
  std::vector<Term> terms_;
  Eigen::Index parameter_count_ = 0;
};

/// Sum of squared residuals of a layout (direct terms only in kDirect mode).
double calibration_cost(const CalibrationProblem& problem, const SceneLayout& layout, MdsMode mode);

struct SolverOptions {
  int max_iterations = 200;
  double initial_damping = 1e-3;
  double step_tolerance = 1e-10;  // m
};

struct CalibrationResult {
  SceneLayout layout;
  Eigen::VectorXd residuals_direct;   // per (mic, src) observation, meters
  Eigen::VectorXd residuals_ceiling;  // empty in kDirect mode
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Damped Gauss-Newton (Levenberg) refinement of array poses and source
/// positions. On non-convergence the best iterate is returned with
/// `converged == false`.
CalibrationResult solve_mds(const CalibrationProblem& problem, const SceneLayout& init, MdsMode mode,
                            const SolverOptions& options = {});

struct MismatchStats {
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

MismatchStats summarize(const std::vector<double>& values);

/// Rigid motion of `layout` within the calibration gauge (rotation about
/// the vertical axis plus horizontal translation) that best matches
/// `reference` in least squares over all microphones and sources.
SceneLayout align_gauge(const SceneLayout& layout, const SceneLayout& reference);

struct MismatchReport {
  std::vector<double> geometric_cm;     // per element (mics, then sources) vs the reference layout
  std::vector<double> signal_cm;        // |c * toa_obs - predicted distance| per observed echo
  std::vector<double> signal_signed_cm;  // c * toa_obs - predicted distance
  MismatchStats geometric;
  MismatchStats signal;
  std::map<double, double> gom;  // threshold (s) -> goodness of match
  std::size_t skipped = 0;       // predicted direct/first-order entries absent from `observed`
};

/// Compares a layout with observed direct and first-order TOAs, and with a
/// reference layout when one is given.
MismatchReport mismatch_report(const SceneLayout& layout, const RoomSpec& room,
                               const EchoAnnotation& observed, const SceneLayout* reference = nullptr,
                               const std::vector<double>& gom_thresholds = {0.5e-3, 0.1e-3, 0.05e-3});

}  // namespace echoroom
