#include "echoroom/scene_io.hpp"

#include <fstream>
#include <string>

#include "echoroom/errors.hpp"

namespace echoroom {
namespace {

using nlohmann::json;

Vec3 vec3_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(std::string(what) + " must be a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec3_to(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

template <typename F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
}

std::pair<std::size_t, std::size_t> parse_key(const std::string& key) {
  const auto slash = key.find('/');
  if (key.rfind("mic_", 0) != 0 || slash == std::string::npos || key.compare(slash + 1, 4, "src_") != 0) {
    throw ValidationError("annotation key '" + key + "' is not of the form mic_<i>/src_<j>");
  }
  try {
    std::size_t used = 0;
    const auto mic = std::stoul(key.substr(4, slash - 4), &used);
    if (used != slash - 4) throw std::invalid_argument(key);
    const std::string src_part = key.substr(slash + 5);
    const auto src = std::stoul(src_part, &used);
    if (used != src_part.size()) throw std::invalid_argument(key);
    return {mic, src};
  } catch (const std::logic_error&) {
    throw ValidationError("annotation key '" + key + "' has non-numeric indices");
  }
}

}  // namespace

json room_to_json(const RoomSpec& room) {
  json j;
  j["dims"] = vec3_to(room.dims);
  if (room.surface_code) j["surface_code"] = *room.surface_code;
  json refl = json::object();
  for (Facet f : kAllFacets) refl[std::string(facet_name(f))] = room.beta(f);
  j["reflectivity"] = refl;
  j["speed_of_sound"] = room.speed_of_sound;
  return j;
}

RoomSpec room_from_json(const json& j) {
  return guarded([&] {
    const Vec3 dims = vec3_from(j.at("dims"), "room.dims");
    const double c = j.value("speed_of_sound", kDefaultSpeedOfSound);
    RoomSpec room;
    if (j.contains("surface_code")) {
      room = RoomSpec::from_surface_code(dims, j.at("surface_code").get<std::string>(), {}, c);
    } else {
      room.dims = dims;
      room.speed_of_sound = c;
    }
    if (j.contains("reflectivity")) {
      for (const auto& [name, value] : j.at("reflectivity").items()) {
        const auto f = facet_from_name(name);
        if (!f) throw ValidationError("unknown facet '" + name + "'");
        room.reflectivity[static_cast<int>(*f)] = value.get<double>();
      }
    }
    room.validate();
    return room;
  });
}

json layout_to_json(const SceneLayout& layout) {
  json arrays = json::array();
  for (const auto& a : layout.arrays) {
    arrays.push_back({{"barycenter", vec3_to(a.barycenter)}, {"azimuth_tilt", a.azimuth_tilt}, {"offsets", a.local_offsets}});
  }
  json sources = json::array();
  for (const auto& s : layout.sources) sources.push_back({{"position", vec3_to(s.position)}, {"label", s.label}});
  return {{"arrays", arrays}, {"sources", sources}};
}

SceneLayout layout_from_json(const json& j) {
  return guarded([&] {
    SceneLayout layout;
    for (const auto& a : j.at("arrays")) {
      ArrayPose pose;
      pose.barycenter = vec3_from(a.at("barycenter"), "array barycenter");
      pose.azimuth_tilt = a.value("azimuth_tilt", 0.0);
      if (a.contains("offsets")) pose.local_offsets = a.at("offsets").get<std::vector<double>>();
      layout.arrays.push_back(std::move(pose));
    }
    for (const auto& s : j.at("sources")) {
      SourcePose pose;
      pose.position = vec3_from(s.at("position"), "source position");
      pose.label = s.value("label", std::string());
      layout.sources.push_back(std::move(pose));
    }
    return layout;
  });
}

json scene_to_json(const Scene& scene) {
  json j = layout_to_json(scene.layout);
  j["room"] = room_to_json(scene.room);
  return j;
}

Scene scene_from_json(const json& j) {
  Scene s;
  s.room = guarded([&] { return room_from_json(j.at("room")); });
  s.layout = layout_from_json(j);
  s.layout.validate(s.room);
  return s;
}

json annotation_to_json(const EchoAnnotation& annotation) {
  json j = json::object();
  for (const auto& [key, echoes] : annotation.entries()) {
    json list = json::array();
    for (const auto& e : echoes) {
      json item = {{"label", e.label}, {"toa", e.toa}, {"amplitude", e.amplitude}};
      if (!e.ambiguous_with.empty()) item["ambiguous_with"] = e.ambiguous_with;
      list.push_back(std::move(item));
    }
    j["mic_" + std::to_string(key.first) + "/src_" + std::to_string(key.second)] = std::move(list);
  }
  return j;
}

EchoAnnotation annotation_from_json(const json& j) {
  return guarded([&] {
    if (!j.is_object()) throw ValidationError("annotation must be a JSON object");
    EchoAnnotation a;
    for (const auto& [key, list] : j.items()) {
      const auto [mic, src] = parse_key(key);
      std::vector<Echo> echoes;
      for (const auto& item : list) {
        Echo e;
        e.label = item.at("label").get<std::string>();
        e.toa = item.at("toa").get<double>();
        e.amplitude = item.value("amplitude", 0.0);
        if (item.contains("ambiguous_with")) e.ambiguous_with = item.at("ambiguous_with").get<std::vector<std::string>>();
        if (!(e.toa > 0.0)) throw ValidationError("TOA must be positive in entry " + key);
        echoes.push_back(std::move(e));
      }
      a.set(mic, src, std::move(echoes));
    }
    return a;
  });
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

Scene load_scene(const std::filesystem::path& path) { return scene_from_json(read_json(path)); }
void save_scene(const std::filesystem::path& path, const Scene& scene) { write_json(path, scene_to_json(scene)); }
EchoAnnotation load_annotation(const std::filesystem::path& path) { return annotation_from_json(read_json(path)); }
void save_annotation(const std::filesystem::path& path, const EchoAnnotation& annotation) {
  write_json(path, annotation_to_json(annotation));
}

}  // namespace echoroom
