#include "echoroom/bundle.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "echoroom/errors.hpp"
#include "echoroom/wav.hpp"

namespace echoroom {
namespace {

constexpr char kMagic[8] = {'E', 'C', 'R', 'I', 'R', 'T', 'N', 'S'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "tensor I/O assumes a little-endian host");

template <typename T>
void put(std::string& b, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  b.append(bytes, sizeof(T));
}

template <typename T>
T get(const std::string& b, std::size_t pos) {
  T v;
  std::memcpy(&v, b.data() + pos, sizeof(T));
  return v;
}

std::string storage_name(RirStorage s) { return s == RirStorage::kTensor ? "tensor" : "wav_dir"; }

}  // namespace

RirTensor RirTensor::zeros(std::size_t l, std::size_t i, std::size_t j, std::size_t d, double fs) {
  RirTensor t;
  t.samples = l;
  t.mics = i;
  t.sources = j;
  t.rooms = d;
  t.sample_rate = fs;
  t.data.assign(l * i * j * d, 0.0f);
  return t;
}

Rir RirTensor::rir(std::size_t i, std::size_t j, std::size_t d) const {
  if (i >= mics || j >= sources || d >= rooms) throw ValidationError("tensor index out of range");
  Rir r;
  r.sample_rate = sample_rate;
  r.provenance = Provenance::kEstimated;
  const auto begin = data.begin() + static_cast<std::ptrdiff_t>(offset(0, i, j, d));
  r.samples.assign(begin, begin + static_cast<std::ptrdiff_t>(samples));
  return r;
}

void RirTensor::set_rir(std::size_t i, std::size_t j, std::size_t d, const Rir& rir) {
  if (i >= mics || j >= sources || d >= rooms) throw ValidationError("tensor index out of range");
  for (std::size_t l = 0; l < samples; ++l) at(l, i, j, d) = l < rir.size() ? static_cast<float>(rir.samples[l]) : 0.0f;
}

void write_tensor(const std::filesystem::path& path, const RirTensor& t) {
  if (t.data.size() != t.samples * t.mics * t.sources * t.rooms) throw ValidationError("tensor data size mismatch");
  std::string b(kMagic, sizeof(kMagic));
  put<std::uint32_t>(b, kVersion);
  put<std::uint32_t>(b, 0);
  put<std::uint64_t>(b, t.samples);
  put<std::uint64_t>(b, t.mics);
  put<std::uint64_t>(b, t.sources);
  put<std::uint64_t>(b, t.rooms);
  put<double>(b, t.sample_rate);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
  out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  if (!out) throw ValidationError("failed writing " + path.string());
}

RirTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  const std::string b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (b.size() < kTensorHeaderBytes) {
    throw ValidationError(path.string() + ": expected at least " + std::to_string(kTensorHeaderBytes) +
                          " header bytes, found " + std::to_string(b.size()));
  }
  if (std::memcmp(b.data(), kMagic, sizeof(kMagic)) != 0) throw ValidationError(path.string() + ": bad tensor magic");
  if (get<std::uint32_t>(b, 8) != kVersion) throw ValidationError(path.string() + ": unsupported tensor version");
  RirTensor t;
  t.samples = get<std::uint64_t>(b, 16);
  t.mics = get<std::uint64_t>(b, 24);
  t.sources = get<std::uint64_t>(b, 32);
  t.rooms = get<std::uint64_t>(b, 40);
  t.sample_rate = get<double>(b, 48);
  const std::size_t count = t.samples * t.mics * t.sources * t.rooms;
  const std::size_t expected = kTensorHeaderBytes + count * sizeof(float);
  if (b.size() != expected) {
    throw ValidationError(path.string() + ": expected " + std::to_string(expected) + " bytes for shape " +
                          std::to_string(t.samples) + "x" + std::to_string(t.mics) + "x" + std::to_string(t.sources) +
                          "x" + std::to_string(t.rooms) + ", found " + std::to_string(b.size()));
  }
  t.data.resize(count);
  std::memcpy(t.data.data(), b.data() + kTensorHeaderBytes, count * sizeof(float));
  return t;
}

void SessionManifest::validate() const {
  if (surface_codes.empty()) throw ValidationError("manifest lists no surface codes");
  for (const auto& c : surface_codes) {
    if (!is_surface_code(c)) throw ValidationError("manifest surface code '" + c + "' is not six binary digits");
  }
  if (scene.empty() || rirs.empty()) throw ValidationError("manifest must name a scene and RIRs");
  if (!(sample_rate > 0.0)) throw ValidationError("manifest sample rate must be positive");
}

nlohmann::json SessionManifest::to_json() const {
  nlohmann::json j = {{"surface_codes", surface_codes},
                      {"scene", scene},
                      {"rirs", {{"format", storage_name(storage)}, {"path", rirs}}},
                      {"sample_rate", sample_rate}};
  if (annotation) j["annotation"] = *annotation;
  return j;
}

SessionManifest SessionManifest::from_json(const nlohmann::json& j) {
  try {
    SessionManifest m;
    m.surface_codes = j.at("surface_codes").get<std::vector<std::string>>();
    m.scene = j.at("scene").get<std::string>();
    const auto& r = j.at("rirs");
    m.rirs = r.at("path").get<std::string>();
    const auto fmt = r.value("format", std::string("tensor"));
    if (fmt == "tensor") {
      m.storage = RirStorage::kTensor;
    } else if (fmt == "wav_dir") {
      m.storage = RirStorage::kWavDirectory;
    } else {
      throw ValidationError("unknown RIR storage format '" + fmt + "'");
    }
    if (j.contains("annotation")) m.annotation = j.at("annotation").get<std::string>();
    m.sample_rate = j.at("sample_rate").get<double>();
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
}

RoomSpec Session::room(std::size_t d) const {
  if (d >= manifest.surface_codes.size()) throw ValidationError("room configuration index out of range");
  return RoomSpec::from_surface_code(scene.room.dims, manifest.surface_codes[d], {}, scene.room.speed_of_sound);
}

Session load_bundle(const std::filesystem::path& manifest_path) {
  std::filesystem::path mpath = manifest_path;
  if (std::filesystem::is_directory(mpath)) mpath /= "manifest.json";
  const auto base = mpath.parent_path();
  Session s;
  s.manifest = SessionManifest::from_json(read_json(mpath));
  const auto require = [&](const std::string& rel) {
    const auto p = base / rel;
    if (!std::filesystem::exists(p)) throw ValidationError("manifest references missing path " + p.string());
    return p;
  };
  s.scene = load_scene(require(s.manifest.scene));
  const std::size_t mics = s.scene.layout.mic_count();
  const std::size_t srcs = s.scene.layout.source_count();
  const std::size_t rooms = s.manifest.surface_codes.size();

  if (s.manifest.storage == RirStorage::kTensor) {
    s.rirs = read_tensor(require(s.manifest.rirs));
  } else {
    const auto dir = require(s.manifest.rirs);
    std::size_t length = 0;
    std::vector<std::vector<WavData>> wavs(rooms);
    for (std::size_t d = 0; d < rooms; ++d) {
      for (std::size_t j = 0; j < srcs; ++j) {
        const auto p = dir / s.manifest.surface_codes[d] / ("src_" + std::to_string(j) + ".wav");
        if (!std::filesystem::exists(p)) throw ValidationError("missing RIR file " + p.string());
        wavs[d].push_back(read_wav(p));
        const auto& w = wavs[d].back();
        if (w.channels.size() != mics) {
          throw ValidationError(p.string() + ": expected " + std::to_string(mics) + " channels, found " +
                                std::to_string(w.channels.size()));
        }
        if (w.sample_rate != s.manifest.sample_rate) throw ValidationError(p.string() + ": sample rate differs from manifest");
        if (d == 0 && j == 0) length = w.frames();
        if (w.frames() != length) throw ValidationError(p.string() + ": RIR length differs from the other files");
      }
    }
    s.rirs = RirTensor::zeros(length, mics, srcs, rooms, s.manifest.sample_rate);
    for (std::size_t d = 0; d < rooms; ++d) {
      for (std::size_t j = 0; j < srcs; ++j) {
        for (std::size_t i = 0; i < mics; ++i) {
          for (std::size_t l = 0; l < length; ++l) s.rirs.at(l, i, j, d) = static_cast<float>(wavs[d][j].channels[i][l]);
        }
      }
    }
  }
  const auto shape_error = [&](const char* what, std::size_t expected, std::size_t found) {
    throw ValidationError(std::string("tensor ") + what + " count " + std::to_string(found) +
                          " does not match manifest/scene (" + std::to_string(expected) + ")");
  };
  if (s.rirs.mics != mics) shape_error("microphone", mics, s.rirs.mics);
  if (s.rirs.sources != srcs) shape_error("source", srcs, s.rirs.sources);
  if (s.rirs.rooms != rooms) shape_error("room configuration", rooms, s.rirs.rooms);
  if (s.rirs.sample_rate != s.manifest.sample_rate) throw ValidationError("tensor sample rate differs from manifest");
  if (s.manifest.annotation) s.annotation = load_annotation(require(*s.manifest.annotation));
  return s;
}

std::filesystem::path write_bundle(const std::filesystem::path& directory, const Session& session) {
  session.manifest.validate();
  std::filesystem::create_directories(directory);
  save_scene(directory / session.manifest.scene, session.scene);
  if (session.manifest.storage == RirStorage::kTensor) {
    write_tensor(directory / session.manifest.rirs, session.rirs);
  } else {
    const auto& t = session.rirs;
    for (std::size_t d = 0; d < t.rooms; ++d) {
      const auto sub = directory / session.manifest.rirs / session.manifest.surface_codes.at(d);
      std::filesystem::create_directories(sub);
      for (std::size_t j = 0; j < t.sources; ++j) {
        std::vector<std::vector<double>> channels(t.mics, std::vector<double>(t.samples));
        for (std::size_t i = 0; i < t.mics; ++i) {
          for (std::size_t l = 0; l < t.samples; ++l) channels[i][l] = t.at(l, i, j, d);
        }
        write_wav(sub / ("src_" + std::to_string(j) + ".wav"), channels, t.sample_rate);
      }
    }
  }
  if (session.manifest.annotation) {
    if (!session.annotation) throw ValidationError("manifest names an annotation but the session has none");
    save_annotation(directory / *session.manifest.annotation, *session.annotation);
  }
  const auto mpath = directory / "manifest.json";
  write_json(mpath, session.manifest.to_json());
  return mpath;
}

}  // namespace echoroom
