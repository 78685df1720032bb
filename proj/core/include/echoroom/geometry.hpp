#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace echoroom {

using Vec3 = Eigen::Vector3d;

inline constexpr double kDefaultSpeedOfSound = 346.98;

// Facet order matches the six-digit surface code: floor, ceiling, west,
// south, east, north. Coordinates: west is x = 0, east is x = Lx,
// south is y = 0, north is y = Ly, floor is z = 0, ceiling is z = Lz.
enum class Facet : int { kFloor = 0, kCeiling, kWest, kSouth, kEast, kNorth };

inline constexpr std::array<Facet, 6> kAllFacets = {
    Facet::kFloor, Facet::kCeiling, Facet::kWest,
    Facet::kSouth, Facet::kEast,    Facet::kNorth};

/// One-letter label used in annotations: f, c, w, s, e, n.
char facet_code(Facet facet);
std::string_view facet_name(Facet facet);
std::optional<Facet> facet_from_code(char code);
std::optional<Facet> facet_from_name(std::string_view name);

/// Plane n . x = offset with unit normal n.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
  Vec3 reflect(const Vec3& p) const { return p - 2.0 * signed_distance(p) * normal; }
};

/// Amplitude reflection coefficients assigned to the two panel states.
struct SurfaceMaterials {
  // Fitted with Sabine's formula to reverberation times of 0.14 s (all
  // absorbent) and 0.73 s (all but floor reflective) in a 6 x 6 x 2.4 m room.
  std::array<double, 6> absorbent = {0.837, 0.22, 0.22, 0.22, 0.22, 0.22};
  std::array<double, 6> reflective = {0.955, 0.955, 0.955, 0.955, 0.955, 0.955};
};

struct RoomSpec {
  Vec3 dims = Vec3(6.0, 6.0, 2.4);
  std::array<double, 6> reflectivity = {1, 1, 1, 1, 1, 1};
  double speed_of_sound = kDefaultSpeedOfSound;
  std::optional<std::string> surface_code;

  static RoomSpec from_surface_code(const Vec3& dims, std::string_view code,
                                    const SurfaceMaterials& materials = {},
                                    double speed_of_sound = kDefaultSpeedOfSound);

  double beta(Facet f) const { return reflectivity[static_cast<int>(f)]; }
  /// Facet plane with its normal pointing into the room.
  Plane facet_plane(Facet f) const;
  /// Center point of the facet rectangle.
  Vec3 facet_centroid(Facet f) const;
  bool strictly_contains(const Vec3& p) const;
  void validate() const;
};

/// True if `code` is six characters of 0/1.
bool is_surface_code(std::string_view code);

/// Offsets (m) of the five-microphone non-uniform linear array w.r.t. its barycenter.
inline const std::vector<double> kNulaOffsets = {-0.1225, -0.0825, -0.0325, 0.0325, 0.1325};

struct ArrayPose {
  Vec3 barycenter = Vec3::Zero();
  double azimuth_tilt = 0.0;  // radians, rotation about +z of the array axis from +x
  std::vector<double> local_offsets = kNulaOffsets;

  Vec3 axis() const;
  Vec3 mic_position(std::size_t k) const;
};

struct SourcePose {
  Vec3 position = Vec3::Zero();
  std::string label;
};

struct MicRef {
  std::size_t array = 0;
  std::size_t element = 0;
};

struct SceneLayout {
  std::vector<ArrayPose> arrays;
  std::vector<SourcePose> sources;

  std::size_t mic_count() const;
  std::size_t source_count() const { return sources.size(); }
  /// Microphones enumerated array by array, preserving element order.
  std::vector<Vec3> mic_positions() const;
  Vec3 mic_position(std::size_t mic) const;
  MicRef mic_ref(std::size_t mic) const;
  /// Flat index of the first microphone of each array.
  std::vector<std::size_t> array_first_mics() const;
  void validate(const RoomSpec& room) const;
};

struct ImageSource {
  Vec3 position = Vec3::Zero();
  int order = 0;
  std::vector<Facet> facets;  // canonical order: x walls, y walls, z walls
  double attenuation = 1.0;

  /// "d" for the direct path, otherwise the concatenated facet codes.
  std::string label() const;
};

/// Mirror `p` across one facet plane of `room`.
Vec3 mirror_across(const RoomSpec& room, Facet facet, const Vec3& p);

/// All images with reflection order <= max_order. Count is the octahedral
/// number (2N+1)(2N^2+2N+3)/3.
std::vector<ImageSource> enumerate_images(const RoomSpec& room, const Vec3& source, int max_order);

/// All images (of any order) whose distance to `receiver` is <= max_distance.
std::vector<ImageSource> enumerate_images_within(const RoomSpec& room, const Vec3& source,
                                                 const Vec3& receiver, double max_distance);

struct Echo {
  std::string label;  // "d", single facet code for first order, code string otherwise
  double toa = 0.0;        // seconds
  double amplitude = 0.0;  // linear gain
  std::vector<std::string> ambiguous_with;  // other labels sharing this arrival

  int order() const { return label == "d" ? 0 : static_cast<int>(label.size()); }
};

/// Echo lists keyed by (microphone, source).
class EchoAnnotation {
 public:
  using Key = std::pair<std::size_t, std::size_t>;

  std::vector<Echo>& operator()(std::size_t mic, std::size_t src) { return entries_[{mic, src}]; }
  const std::vector<Echo>* find(std::size_t mic, std::size_t src) const;
  const Echo* find_echo(std::size_t mic, std::size_t src, std::string_view label) const;
  void set(std::size_t mic, std::size_t src, std::vector<Echo> echoes);

  const std::map<Key, std::vector<Echo>>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  /// Checks the invariants of a geometry-derived annotation: positive,
  /// ascending TOAs, direct path present and earliest, at most one
  /// first-order entry per facet.
  void validate() const;

 private:
  std::map<Key, std::vector<Echo>> entries_;
};

/// Predicted TOAs (|mic - image| / c) and amplitudes (attenuation / (4 pi d))
/// for every (mic, source) pair, sorted by TOA.
EchoAnnotation predict_echo_annotation(const RoomSpec& room, const SceneLayout& layout,
                                       int max_order);

/// Number of images up to a given order in the 3-D lattice.
std::size_t image_count_for_order(int max_order);

}  // namespace echoroom
