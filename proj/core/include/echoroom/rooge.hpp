#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "echoroom/geometry.hpp"

namespace echoroom {

struct MultilaterationResult {
  Vec3 point = Vec3::Zero();
  double rms_residual = 0.0;  // m
  int iterations = 0;
};

/// Linear least squares on squared ranges, then Gauss-Newton on the range
/// residuals. Requires at least four non-coplanar anchors.
MultilaterationResult multilaterate(std::span<const Vec3> anchors, std::span<const double> distances);

/// Sum of squared range residuals at `x`.
double multilateration_cost(std::span<const Vec3> anchors, std::span<const double> distances, const Vec3& x);

struct EstimatedPlane {
  Plane plane;  // normal points toward the side of the real source(s)
  std::optional<Facet> facet;
  std::vector<std::size_t> support;  // source indices that contributed
  double residual = 0.0;            // mean multilateration RMS residual, m
};

/// Perpendicular bisector of source and image, oriented toward the source.
EstimatedPlane plane_from_image(const Vec3& source, const Vec3& image);

struct FacetScore {
  double de_cm = 0.0;
  double ae_deg = 0.0;
};

struct GeometryScore {
  std::map<Facet, FacetScore> facets;
  double mean_de_cm = 0.0;
  double mean_ae_deg = 0.0;
};

/// DE: distance from the true facet centroid to the estimated plane.
/// AE: angle between the plane normals, folded into [0, 90] degrees.
GeometryScore score_geometry(std::span<const EstimatedPlane> estimated, const RoomSpec& truth);

struct RoomEstimate {
  std::vector<EstimatedPlane> planes;
  std::vector<Facet> missing;
};

struct RoomEstimateOptions {
  double speed_of_sound = kDefaultSpeedOfSound;
  /// Per-source weights for plane averaging; empty means uniform.
  std::vector<double> source_weights;
};

/// For every facet, multilaterates the first-order image of each selected
/// source from the first microphone of each array and bisects; planes from
/// several sources are averaged. Facets without enough labeled echoes are
/// reported as missing.
RoomEstimate estimate_room(const EchoAnnotation& annotation, const SceneLayout& layout,
                           std::span<const std::size_t> sources, const RoomEstimateOptions& options = {});

}  // namespace echoroom
