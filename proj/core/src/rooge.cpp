#include "echoroom/rooge.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "echoroom/errors.hpp"

namespace echoroom {

double multilateration_cost(std::span<const Vec3> anchors, std::span<const double> distances, const Vec3& x) {
  double c = 0.0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double r = (x - anchors[i]).norm() - distances[i];
    c += r * r;
  }
  return c;
}

MultilaterationResult multilaterate(std::span<const Vec3> anchors, std::span<const double> distances) {
  const std::size_t n = anchors.size();
  if (distances.size() != n) throw ValidationError("one distance per anchor required");
  if (n < 4) throw ValidationError("multilateration needs at least four anchors");
  for (double d : distances) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw ValidationError("distances must be finite and non-negative");
  }
  Vec3 mean = Vec3::Zero();
  for (const auto& a : anchors) mean += a;
  mean /= static_cast<double>(n);
  Eigen::MatrixXd centered(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) centered.row(static_cast<Eigen::Index>(i)) = (anchors[i] - mean).transpose();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const auto sv = svd.singularValues();
  if (!(sv(2) > 1e-9 * std::max(sv(0), 1e-300))) throw NumericalError("anchors are coplanar");

  // |x - a_i|^2 = d_i^2 with y = x - mean: 2 c_i.y - |y|^2 = |c_i|^2 - d_i^2;
  // differencing against the average equation removes |y|^2.
  double mean_rhs = 0.0;
  std::vector<double> rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    rhs[i] = centered.row(static_cast<Eigen::Index>(i)).squaredNorm() - distances[i] * distances[i];
    mean_rhs += rhs[i];
  }
  mean_rhs /= static_cast<double>(n);
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) b(static_cast<Eigen::Index>(i)) = rhs[i] - mean_rhs;
  const Eigen::MatrixXd a = 2.0 * centered;
  Vec3 x = mean + a.colPivHouseholderQr().solve(b);

  MultilaterationResult result;
  double cost = multilateration_cost(anchors, distances, x);
  for (int it = 0; it < 100; ++it) {
    Eigen::MatrixXd j(static_cast<Eigen::Index>(n), 3);
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 diff = x - anchors[i];
      const double d = diff.norm();
      const auto row = static_cast<Eigen::Index>(i);
      r(row) = d - distances[i];
      j.row(row) = d > 0.0 ? Eigen::RowVector3d((diff / d).transpose()) : Eigen::RowVector3d::Zero();
    }
    const Vec3 step = j.colPivHouseholderQr().solve(-r);
    double t = 1.0;
    bool improved = false;
    for (int k = 0; k < 30; ++k, t *= 0.5) {
      const Vec3 xn = x + t * step;
      const double cn = multilateration_cost(anchors, distances, xn);
      if (cn <= cost) {
        x = xn;
        cost = cn;
        improved = true;
        break;
      }
    }
    result.iterations = it + 1;
    if (!improved || t * step.norm() < 1e-13) break;
  }
  result.point = x;
  result.rms_residual = std::sqrt(cost / static_cast<double>(n));
  return result;
}

EstimatedPlane plane_from_image(const Vec3& source, const Vec3& image) {
  const Vec3 d = source - image;
  const double len = d.norm();
  if (!(len > 0.0)) throw ValidationError("source and image coincide");
  EstimatedPlane p;
  p.plane.normal = d / len;
  p.plane.offset = p.plane.normal.dot(0.5 * (source + image));
  return p;
}

GeometryScore score_geometry(std::span<const EstimatedPlane> estimated, const RoomSpec& truth) {
  GeometryScore score;
  for (const auto& est : estimated) {
    if (!est.facet) continue;
    const Facet f = *est.facet;
    const Plane true_plane = truth.facet_plane(f);
    FacetScore fs;
    fs.de_cm = 100.0 * std::abs(est.plane.signed_distance(truth.facet_centroid(f)));
    const double cosang = std::min(1.0, std::abs(est.plane.normal.normalized().dot(true_plane.normal)));
    fs.ae_deg = std::acos(cosang) * 180.0 / std::numbers::pi;
    score.facets[f] = fs;
  }
  if (!score.facets.empty()) {
    for (const auto& [f, s] : score.facets) {
      score.mean_de_cm += s.de_cm;
      score.mean_ae_deg += s.ae_deg;
    }
    score.mean_de_cm /= static_cast<double>(score.facets.size());
    score.mean_ae_deg /= static_cast<double>(score.facets.size());
  }
  return score;
}

RoomEstimate estimate_room(const EchoAnnotation& annotation, const SceneLayout& layout,
                           std::span<const std::size_t> sources, const RoomEstimateOptions& options) {
  if (!(options.speed_of_sound > 0.0)) throw ValidationError("speed of sound must be positive");
  if (!options.source_weights.empty() && options.source_weights.size() != layout.source_count()) {
    throw ValidationError("one weight per source required");
  }
  for (std::size_t s : sources) {
    if (s >= layout.source_count()) throw ValidationError("source index out of range");
  }
  const auto anchor_mics = layout.array_first_mics();
  RoomEstimate out;
  for (Facet f : kAllFacets) {
    const std::string label(1, facet_code(f));
    std::vector<EstimatedPlane> per_source;
    std::vector<double> weights;
    for (std::size_t s : sources) {
      std::vector<Vec3> anchors;
      std::vector<double> dists;
      for (std::size_t m : anchor_mics) {
        if (const Echo* e = annotation.find_echo(m, s, label)) {
          anchors.push_back(layout.mic_position(m));
          dists.push_back(options.speed_of_sound * e->toa);
        }
      }
      if (anchors.size() < 4) continue;
      MultilaterationResult ml;
      try {
        ml = multilaterate(anchors, dists);
      } catch (const NumericalError&) {
        continue;
      }
      EstimatedPlane p = plane_from_image(layout.sources[s].position, ml.point);
      p.residual = ml.rms_residual;
      p.support = {s};
      per_source.push_back(std::move(p));
      weights.push_back(options.source_weights.empty() ? 1.0 : options.source_weights[s]);
    }
    if (per_source.empty()) {
      out.missing.push_back(f);
      continue;
    }
    EstimatedPlane avg;
    avg.facet = f;
    double wsum = 0.0;
    Vec3 n = Vec3::Zero();
    for (std::size_t k = 0; k < per_source.size(); ++k) {
      n += weights[k] * per_source[k].plane.normal;
      wsum += weights[k];
    }
    if (!(wsum > 0.0) || !(n.norm() > 0.0)) {
      out.missing.push_back(f);
      continue;
    }
    n.normalize();
    double offset = 0.0;
    for (std::size_t k = 0; k < per_source.size(); ++k) {
      // Midpoint of source and image lies on the per-source plane.
      const Plane& pk = per_source[k].plane;
      const Vec3 mid = pk.normal * pk.offset;
      offset += weights[k] * n.dot(mid);
      avg.residual += weights[k] * per_source[k].residual;
      avg.support.push_back(per_source[k].support.front());
    }
    avg.plane.normal = n;
    avg.plane.offset = offset / wsum;
    avg.residual /= wsum;
    out.planes.push_back(std::move(avg));
  }
  return out;
}

}  // namespace echoroom
