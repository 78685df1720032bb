#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "echoroom/geometry.hpp"

namespace echoroom {

struct Scene {
  RoomSpec room;
  SceneLayout layout;
};

nlohmann::json room_to_json(const RoomSpec& room);
/// Reflectivity comes from "reflectivity" (facet name -> coefficient) when
/// present, else from "surface_code" with the default materials.
RoomSpec room_from_json(const nlohmann::json& j);

nlohmann::json layout_to_json(const SceneLayout& layout);
SceneLayout layout_from_json(const nlohmann::json& j);

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);

/// Keys are "mic_<i>/src_<j>"; values are lists of {label, toa, amplitude, ambiguous_with}.
nlohmann::json annotation_to_json(const EchoAnnotation& annotation);
EchoAnnotation annotation_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

Scene load_scene(const std::filesystem::path& path);
void save_scene(const std::filesystem::path& path, const Scene& scene);
EchoAnnotation load_annotation(const std::filesystem::path& path);
void save_annotation(const std::filesystem::path& path, const EchoAnnotation& annotation);

}  // namespace echoroom
