#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "echoroom/geometry.hpp"
#include "echoroom/ism_synth.hpp"
#include "echoroom/scene_io.hpp"

namespace echoroom {

/// RIRs indexed (sample l, mic i, source j, room configuration d).
///
/// File layout (little endian): 8-byte magic "ECRIRTNS", u32 version (1),
/// u32 reserved (0), u64 L, I, J, D, f64 sample rate, then L*I*J*D float32
/// values with l fastest: offset ((d * J + j) * I + i) * L + l.
struct RirTensor {
  std::size_t samples = 0, mics = 0, sources = 0, rooms = 0;
  double sample_rate = kDefaultSampleRate;
  std::vector<float> data;

  static RirTensor zeros(std::size_t l, std::size_t i, std::size_t j, std::size_t d, double fs);
  std::size_t offset(std::size_t l, std::size_t i, std::size_t j, std::size_t d) const {
    return ((d * sources + j) * mics + i) * samples + l;
  }
  float& at(std::size_t l, std::size_t i, std::size_t j, std::size_t d) { return data[offset(l, i, j, d)]; }
  float at(std::size_t l, std::size_t i, std::size_t j, std::size_t d) const { return data[offset(l, i, j, d)]; }
  Rir rir(std::size_t i, std::size_t j, std::size_t d) const;
  /// Copies `rir` in, zero-padding or truncating to `samples`.
  void set_rir(std::size_t i, std::size_t j, std::size_t d, const Rir& rir);
  bool operator==(const RirTensor&) const = default;
};

inline constexpr std::size_t kTensorHeaderBytes = 56;

void write_tensor(const std::filesystem::path& path, const RirTensor& tensor);
RirTensor read_tensor(const std::filesystem::path& path);

enum class RirStorage { kTensor, kWavDirectory };

struct SessionManifest {
  std::vector<std::string> surface_codes;  // one per room configuration d
  std::string scene;                       // paths relative to the manifest directory
  std::string rirs;
  RirStorage storage = RirStorage::kTensor;
  std::optional<std::string> annotation;
  double sample_rate = kDefaultSampleRate;

  void validate() const;
  nlohmann::json to_json() const;
  static SessionManifest from_json(const nlohmann::json& j);
};

struct Session {
  SessionManifest manifest;
  Scene scene;
  RirTensor rirs;
  std::optional<EchoAnnotation> annotation;

  /// Room description for configuration d (scene geometry, d-th surface code).
  RoomSpec room(std::size_t d) const;
};

/// Reads manifest.json (or the given manifest file) and everything it references.
Session load_bundle(const std::filesystem::path& manifest_path);

/// Writes manifest.json, scene.json, annotation.json (if any) and the RIRs
/// into `directory`. WAV directories hold <code>/src_<j>.wav with one channel
/// per microphone. Returns the manifest path.
std::filesystem::path write_bundle(const std::filesystem::path& directory, const Session& session);

}  // namespace echoroom
