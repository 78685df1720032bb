#include "echoroom/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "echoroom/errors.hpp"

namespace echoroom {
namespace {

constexpr std::array<char, 6> kCodes = {'f', 'c', 'w', 's', 'e', 'n'};
constexpr std::array<std::string_view, 6> kNames = {"floor", "ceiling", "west",
                                                    "south", "east",    "north"};

// Low/high wall of each axis.
constexpr std::array<Facet, 3> kLowWall = {Facet::kWest, Facet::kSouth, Facet::kFloor};
constexpr std::array<Facet, 3> kHighWall = {Facet::kEast, Facet::kNorth, Facet::kCeiling};

std::string format_point(const Vec3& p) {
  std::ostringstream os;
  os << "(" << p.x() << ", " << p.y() << ", " << p.z() << ")";
  return os.str();
}

// Coordinate of the 1-D image with signed lattice index a.
double image_coordinate(double x, double length, int a) {
  return (a % 2 == 0) ? x + a * length : (a + 1) * length - x;
}

// Facet sequence of the 1-D image with index a, alternating walls.
void append_axis_facets(int axis, int a, std::vector<Facet>& out) {
  Facet first = a > 0 ? kHighWall[axis] : kLowWall[axis];
  Facet second = a > 0 ? kLowWall[axis] : kHighWall[axis];
  for (int k = 0; k < std::abs(a); ++k) out.push_back(k % 2 == 0 ? first : second);
}

ImageSource make_image(const RoomSpec& room, const Vec3& source, int a, int b, int c) {
  ImageSource img;
  const std::array<int, 3> idx = {a, b, c};
  for (int axis = 0; axis < 3; ++axis) {
    img.position[axis] = image_coordinate(source[axis], room.dims[axis], idx[axis]);
    append_axis_facets(axis, idx[axis], img.facets);
  }
  img.order = static_cast<int>(img.facets.size());
  img.attenuation = 1.0;
  for (Facet f : img.facets) img.attenuation *= room.beta(f);
  return img;
}

void check_source(const RoomSpec& room, const Vec3& source) {
  room.validate();
  if (!room.strictly_contains(source)) {
    throw InvalidGeometry("source " + format_point(source) + " is on or outside the room walls");
  }
}

}  // namespace

char facet_code(Facet facet) { return kCodes[static_cast<int>(facet)]; }

std::string_view facet_name(Facet facet) { return kNames[static_cast<int>(facet)]; }

std::optional<Facet> facet_from_code(char code) {
  for (Facet f : kAllFacets) {
    if (facet_code(f) == code) return f;
  }
  return std::nullopt;
}

std::optional<Facet> facet_from_name(std::string_view name) {
  for (Facet f : kAllFacets) {
    if (facet_name(f) == name) return f;
  }
  if (name == "ceil") return Facet::kCeiling;
  return std::nullopt;
}

bool is_surface_code(std::string_view code) {
  return code.size() == 6 &&
         std::all_of(code.begin(), code.end(), [](char ch) { return ch == '0' || ch == '1'; });
}

RoomSpec RoomSpec::from_surface_code(const Vec3& dims, std::string_view code,
                                     const SurfaceMaterials& materials, double speed_of_sound) {
  if (!is_surface_code(code)) {
    throw ValidationError("surface code must be six binary digits, got '" + std::string(code) + "'");
  }
  RoomSpec room;
  room.dims = dims;
  room.speed_of_sound = speed_of_sound;
  room.surface_code = std::string(code);
  for (int i = 0; i < 6; ++i) {
    room.reflectivity[i] = code[i] == '1' ? materials.reflective[i] : materials.absorbent[i];
  }
  room.validate();
  return room;
}

Plane RoomSpec::facet_plane(Facet f) const {
  switch (f) {
    case Facet::kFloor: return {Vec3::UnitZ(), 0.0};
    case Facet::kCeiling: return {-Vec3::UnitZ(), -dims.z()};
    case Facet::kWest: return {Vec3::UnitX(), 0.0};
    case Facet::kEast: return {-Vec3::UnitX(), -dims.x()};
    case Facet::kSouth: return {Vec3::UnitY(), 0.0};
    case Facet::kNorth: return {-Vec3::UnitY(), -dims.y()};
  }
  return {};
}

Vec3 RoomSpec::facet_centroid(Facet f) const {
  Vec3 c = 0.5 * dims;
  switch (f) {
    case Facet::kFloor: c.z() = 0.0; break;
    case Facet::kCeiling: c.z() = dims.z(); break;
    case Facet::kWest: c.x() = 0.0; break;
    case Facet::kEast: c.x() = dims.x(); break;
    case Facet::kSouth: c.y() = 0.0; break;
    case Facet::kNorth: c.y() = dims.y(); break;
  }
  return c;
}

bool RoomSpec::strictly_contains(const Vec3& p) const {
  for (int i = 0; i < 3; ++i) {
    if (!(p[i] > 0.0 && p[i] < dims[i])) return false;
  }
  return true;
}

void RoomSpec::validate() const {
  for (int i = 0; i < 3; ++i) {
    if (!(dims[i] > 0.0) || !std::isfinite(dims[i])) {
      throw ValidationError("room dimensions must be positive and finite");
    }
  }
  for (int i = 0; i < 6; ++i) {
    if (!(reflectivity[i] >= 0.0 && reflectivity[i] <= 1.0)) {
      throw ValidationError("reflectivity of " + std::string(kNames[i]) + " must lie in [0, 1]");
    }
  }
  if (!(speed_of_sound > 0.0) || !std::isfinite(speed_of_sound)) {
    throw ValidationError("speed of sound must be positive");
  }
  if (surface_code && !is_surface_code(*surface_code)) {
    throw ValidationError("invalid surface code '" + *surface_code + "'");
  }
}

Vec3 ArrayPose::axis() const {
  return Vec3(std::cos(azimuth_tilt), std::sin(azimuth_tilt), 0.0);
}

Vec3 ArrayPose::mic_position(std::size_t k) const {
  return barycenter + local_offsets.at(k) * axis();
}

std::size_t SceneLayout::mic_count() const {
  std::size_t n = 0;
  for (const auto& a : arrays) n += a.local_offsets.size();
  return n;
}

std::vector<Vec3> SceneLayout::mic_positions() const {
  std::vector<Vec3> out;
  out.reserve(mic_count());
  for (const auto& a : arrays) {
    for (std::size_t k = 0; k < a.local_offsets.size(); ++k) out.push_back(a.mic_position(k));
  }
  return out;
}

MicRef SceneLayout::mic_ref(std::size_t mic) const {
  std::size_t base = 0;
  for (std::size_t a = 0; a < arrays.size(); ++a) {
    const std::size_t n = arrays[a].local_offsets.size();
    if (mic < base + n) return {a, mic - base};
    base += n;
  }
  throw ValidationError("microphone index " + std::to_string(mic) + " out of range");
}

Vec3 SceneLayout::mic_position(std::size_t mic) const {
  const MicRef r = mic_ref(mic);
  return arrays[r.array].mic_position(r.element);
}

std::vector<std::size_t> SceneLayout::array_first_mics() const {
  std::vector<std::size_t> out;
  std::size_t base = 0;
  for (const auto& a : arrays) {
    out.push_back(base);
    base += a.local_offsets.size();
  }
  return out;
}

void SceneLayout::validate(const RoomSpec& room) const {
  room.validate();
  for (std::size_t m = 0; m < mic_count(); ++m) {
    const Vec3 p = mic_position(m);
    if (!room.strictly_contains(p)) {
      throw InvalidGeometry("microphone " + std::to_string(m) + " at " + format_point(p) +
                            " is not strictly inside the room");
    }
  }
  for (std::size_t s = 0; s < sources.size(); ++s) {
    if (!room.strictly_contains(sources[s].position)) {
      throw InvalidGeometry("source " + std::to_string(s) + " at " +
                            format_point(sources[s].position) + " is not strictly inside the room");
    }
  }
}

std::string ImageSource::label() const {
  if (facets.empty()) return "d";
  std::string s;
  for (Facet f : facets) s.push_back(facet_code(f));
  return s;
}

Vec3 mirror_across(const RoomSpec& room, Facet facet, const Vec3& p) {
  return room.facet_plane(facet).reflect(p);
}

std::size_t image_count_for_order(int max_order) {
  if (max_order < 0) return 0;
  const auto n = static_cast<std::size_t>(max_order);
  return (2 * n + 1) * (2 * n * n + 2 * n + 3) / 3;
}

std::vector<ImageSource> enumerate_images(const RoomSpec& room, const Vec3& source, int max_order) {
  if (max_order < 0) throw ValidationError("max_order must be non-negative");
  check_source(room, source);
  std::vector<ImageSource> images;
  images.reserve(image_count_for_order(max_order));
  for (int a = -max_order; a <= max_order; ++a) {
    const int rb = max_order - std::abs(a);
    for (int b = -rb; b <= rb; ++b) {
      const int rc = rb - std::abs(b);
      for (int c = -rc; c <= rc; ++c) images.push_back(make_image(room, source, a, b, c));
    }
  }
  return images;
}

std::vector<ImageSource> enumerate_images_within(const RoomSpec& room, const Vec3& source,
                                                 const Vec3& receiver, double max_distance) {
  check_source(room, source);
  if (!(max_distance >= 0.0)) throw ValidationError("max_distance must be non-negative");
  std::array<int, 3> lo{}, hi{};
  for (int axis = 0; axis < 3; ++axis) {
    const double len = room.dims[axis];
    lo[axis] = static_cast<int>(std::floor((receiver[axis] - max_distance) / len)) - 2;
    hi[axis] = static_cast<int>(std::ceil((receiver[axis] + max_distance) / len)) + 2;
  }
  std::vector<ImageSource> images;
  const double d2max = max_distance * max_distance;
  for (int a = lo[0]; a <= hi[0]; ++a) {
    const double dx = image_coordinate(source.x(), room.dims.x(), a) - receiver.x();
    if (dx * dx > d2max) continue;
    for (int b = lo[1]; b <= hi[1]; ++b) {
      const double dy = image_coordinate(source.y(), room.dims.y(), b) - receiver.y();
      if (dx * dx + dy * dy > d2max) continue;
      for (int c = lo[2]; c <= hi[2]; ++c) {
        const double dz = image_coordinate(source.z(), room.dims.z(), c) - receiver.z();
        if (dx * dx + dy * dy + dz * dz > d2max) continue;
        images.push_back(make_image(room, source, a, b, c));
      }
    }
  }
  return images;
}

const std::vector<Echo>* EchoAnnotation::find(std::size_t mic, std::size_t src) const {
  auto it = entries_.find({mic, src});
  return it == entries_.end() ? nullptr : &it->second;
}

const Echo* EchoAnnotation::find_echo(std::size_t mic, std::size_t src,
                                      std::string_view label) const {
  const auto* list = find(mic, src);
  if (!list) return nullptr;
  for (const auto& e : *list) {
    if (e.label == label) return &e;
  }
  return nullptr;
}

void EchoAnnotation::set(std::size_t mic, std::size_t src, std::vector<Echo> echoes) {
  entries_[{mic, src}] = std::move(echoes);
}

void EchoAnnotation::validate() const {
  for (const auto& [key, echoes] : entries_) {
    const std::string where =
        "mic_" + std::to_string(key.first) + "/src_" + std::to_string(key.second);
    if (echoes.empty() || echoes.front().label != "d") {
      throw ValidationError(where + ": direct path missing or not earliest");
    }
    std::set<std::string> first_order;
    for (std::size_t k = 0; k < echoes.size(); ++k) {
      if (!(echoes[k].toa > 0.0)) throw ValidationError(where + ": TOA must be positive");
      if (k > 0 && echoes[k].toa < echoes[k - 1].toa) {
        throw ValidationError(where + ": TOAs not sorted");
      }
      if (k > 0 && echoes[k].label == "d") throw ValidationError(where + ": duplicate direct path");
      if (echoes[k].order() == 1 && !first_order.insert(echoes[k].label).second) {
        throw ValidationError(where + ": duplicate first-order label " + echoes[k].label);
      }
    }
  }
}

EchoAnnotation predict_echo_annotation(const RoomSpec& room, const SceneLayout& layout,
                                       int max_order) {
  layout.validate(room);
  EchoAnnotation out;
  const auto mics = layout.mic_positions();
  for (std::size_t s = 0; s < layout.sources.size(); ++s) {
    const auto images = enumerate_images(room, layout.sources[s].position, max_order);
    for (std::size_t m = 0; m < mics.size(); ++m) {
      std::vector<Echo> echoes;
      echoes.reserve(images.size());
      for (const auto& img : images) {
        const double d = (mics[m] - img.position).norm();
        if (d <= 0.0) {
          throw InvalidGeometry("microphone " + std::to_string(m) + " coincides with source " +
                                std::to_string(s) + " (distance zero)");
        }
        echoes.push_back({img.label(), d / room.speed_of_sound,
                          img.attenuation / (4.0 * std::numbers::pi * d), {}});
      }
      std::stable_sort(echoes.begin(), echoes.end(),
                       [](const Echo& a, const Echo& b) { return a.toa < b.toa; });
      out.set(m, s, std::move(echoes));
    }
  }
  return out;
}

}  // namespace echoroom
