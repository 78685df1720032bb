#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>
#include <png.h>

#include "echoroom/bundle.hpp"
#include "echoroom/errors.hpp"
#include "echoroom/scene_io.hpp"
#include "echoroom/simulation.hpp"
#include "echoroom/tabular.hpp"
#include "echoroom/wav.hpp"

using namespace echoroom;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("echoroom_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

RirTensor random_tensor(std::size_t l, std::size_t i, std::size_t j, std::size_t d, unsigned seed) {
  RirTensor t = RirTensor::zeros(l, i, j, d, 48000.0);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (float& v : t.data) v = u(rng);
  return t;
}

Session small_session(RirStorage storage) {
  Session s;
  s.scene.room = RoomSpec::from_surface_code(Vec3(6, 6, 2.4), "011111");
  s.scene.layout = reference_layout();
  s.manifest.surface_codes = {"011111", "000000"};
  s.manifest.scene = "scene.json";
  s.manifest.rirs = storage == RirStorage::kTensor ? "rirs.bin" : "wav";
  s.manifest.storage = storage;
  s.manifest.annotation = "annotation.json";
  s.annotation = predict_echo_annotation(s.scene.room, s.scene.layout, 1);
  s.rirs = random_tensor(300, s.scene.layout.mic_count(), s.scene.layout.source_count(), 2, 4);
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Tensor, LayoutAndRoundTrip) {
  TempDir dir;
  const RirTensor t = random_tensor(17, 3, 2, 2, 1);
  EXPECT_EQ(t.offset(1, 0, 0, 0), 1u);
  EXPECT_EQ(t.offset(0, 1, 0, 0), 17u);
  EXPECT_EQ(t.offset(0, 0, 1, 0), 51u);
  EXPECT_EQ(t.offset(0, 0, 0, 1), 102u);
  const auto p = dir.path() / "t.bin";
  write_tensor(p, t);
  EXPECT_EQ(fs::file_size(p), kTensorHeaderBytes + t.data.size() * sizeof(float));
  EXPECT_EQ(slurp(p).substr(0, 8), "ECRIRTNS");
  EXPECT_EQ(read_tensor(p), t);
}

TEST(Tensor, TruncatedFileNamesByteCounts) {
  TempDir dir;
  const auto p = dir.path() / "t.bin";
  write_tensor(p, random_tensor(10, 2, 2, 1, 2));
  fs::resize_file(p, fs::file_size(p) - 4);
  try {
    read_tensor(p);
    FAIL() << "no exception";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected 216 bytes"), std::string::npos) << msg;
    EXPECT_NE(msg.find("found 212"), std::string::npos) << msg;
  }
  fs::resize_file(p, 20);
  EXPECT_THROW(read_tensor(p), ValidationError);
  EXPECT_THROW(read_tensor(dir.path() / "missing.bin"), ValidationError);
}

TEST(Tensor, RirAccessPadsAndTruncates) {
  RirTensor t = RirTensor::zeros(5, 1, 1, 1, 16000.0);
  Rir r;
  r.samples = {1, 2, 3, 4, 5, 6, 7};
  t.set_rir(0, 0, 0, r);
  EXPECT_EQ(t.rir(0, 0, 0).samples, (std::vector<double>{1, 2, 3, 4, 5}));
  r.samples = {9};
  t.set_rir(0, 0, 0, r);
  EXPECT_EQ(t.rir(0, 0, 0).samples, (std::vector<double>{9, 0, 0, 0, 0}));
  EXPECT_THROW(t.rir(1, 0, 0), ValidationError);
}

TEST(Bundle, WriteThenLoadIsIdentity) {
  TempDir dir;
  const Session s = small_session(RirStorage::kTensor);
  const Session back = load_bundle(write_bundle(dir.path(), s));
  EXPECT_EQ(back.rirs, s.rirs);
  EXPECT_EQ(back.manifest.surface_codes, s.manifest.surface_codes);
  EXPECT_EQ(scene_to_json(back.scene), scene_to_json(s.scene));
  ASSERT_TRUE(back.annotation.has_value());
  EXPECT_EQ(annotation_to_json(*back.annotation), annotation_to_json(*s.annotation));
  EXPECT_EQ(back.room(1).reflectivity, RoomSpec::from_surface_code(s.scene.room.dims, "000000").reflectivity);
  EXPECT_THROW(back.room(2), ValidationError);
}

TEST(Bundle, WavDirectoryEquivalentToTensor) {
  TempDir dir;
  const Session a = small_session(RirStorage::kTensor);
  Session b = small_session(RirStorage::kWavDirectory);
  const Session la = load_bundle(write_bundle(dir.path() / "a", a));
  const Session lb = load_bundle(write_bundle(dir.path() / "b", b));
  EXPECT_TRUE(fs::exists(dir.path() / "b" / "wav" / "000000" / "src_3.wav"));
  EXPECT_EQ(la.rirs, lb.rirs);

  fs::remove(dir.path() / "b" / "wav" / "000000" / "src_1.wav");
  EXPECT_THROW(load_bundle(dir.path() / "b" / "manifest.json"), ValidationError);
}

TEST(Bundle, TensorShapeMustMatchScene) {
  TempDir dir;
  Session s = small_session(RirStorage::kTensor);
  s.rirs = random_tensor(50, 3, 4, 2, 5);
  EXPECT_THROW(load_bundle(write_bundle(dir.path(), s)), ValidationError);
}

TEST(Manifest, Validation) {
  SessionManifest m;
  m.surface_codes = {"010101"};
  m.scene = "s.json";
  m.rirs = "r.bin";
  EXPECT_NO_THROW(m.validate());
  EXPECT_EQ(SessionManifest::from_json(m.to_json()).to_json(), m.to_json());
  SessionManifest bad = m;
  bad.surface_codes = {"01010"};
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = m;
  bad.surface_codes.clear();
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = m;
  bad.sample_rate = -1.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  auto j = m.to_json();
  j["rirs"]["format"] = "zip";
  EXPECT_THROW(SessionManifest::from_json(j), ValidationError);
  j.erase("scene");
  EXPECT_THROW(SessionManifest::from_json(j), ValidationError);
}

TEST(SceneJson, RoundTrip) {
  TempDir dir;
  Scene s;
  s.room = RoomSpec::from_surface_code(Vec3(6, 6, 3), "100110");
  s.layout = reference_layout();
  save_scene(dir.path() / "scene.json", s);
  const Scene back = load_scene(dir.path() / "scene.json");
  EXPECT_EQ(back.room.reflectivity, s.room.reflectivity);
  EXPECT_EQ(back.room.dims, s.room.dims);
  EXPECT_EQ(back.layout.mic_positions(), s.layout.mic_positions());
  const EchoAnnotation a = predict_echo_annotation(s.room, s.layout, 2);
  save_annotation(dir.path() / "a.json", a);
  EXPECT_EQ(annotation_to_json(load_annotation(dir.path() / "a.json")), annotation_to_json(a));
}

TEST(Wav, FloatRoundTrip) {
  TempDir dir;
  std::vector<std::vector<double>> ch(3, std::vector<double>(1001));
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (auto& c : ch)
    for (double& v : c) v = u(rng);
  write_wav(dir.path() / "x.wav", ch, 44100.0);
  const WavData w = read_wav(dir.path() / "x.wav");
  EXPECT_EQ(w.sample_rate, 44100.0);
  EXPECT_EQ(w.channels, ch);
  EXPECT_THROW(write_wav(dir.path() / "y.wav", {{1.0, 2.0}, {1.0}}, 48000.0), ValidationError);
  EXPECT_THROW(read_wav(dir.path() / "nope.wav"), ValidationError);
}

TEST(Tabular, FormatNumber) {
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(1.0 / 3.0, 3), "0.333");
  EXPECT_EQ(format_number(1e-12), "1e-12");
  EXPECT_EQ(format_number(INFINITY), "inf");
  EXPECT_EQ(format_number(-INFINITY), "-inf");
  EXPECT_EQ(format_number(NAN), "nan");
}

TEST(Tabular, CsvHeaderAndRows) {
  TempDir dir;
  CsvTable t({"design", "isnrr_db"});
  t.add_row({"ds", format_number(2.5)});
  t.add_row({"mvdr-rake", format_number(3.25)});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.to_string(), "design,isnrr_db\nds,2.5\nmvdr-rake,3.25\n");
  EXPECT_THROW(t.add_row({"x"}), ValidationError);
  t.write(dir.path() / "t.csv");
  EXPECT_EQ(slurp(dir.path() / "t.csv"), t.to_string());
}

TEST(Tabular, SkylinePngHasExpectedSize) {
  TempDir dir;
  Rir a, b;
  a.samples = {0.0, 1.0, 0.5, 0.0};
  b.samples = {0.2, 0.0, -1.0};
  const std::vector<Rir> rirs = {a, b};
  const Skyline sky = build_skyline(rirs);
  SkylineImageOptions opt;
  opt.column_width = 3;
  const auto p = dir.path() / "sky.png";
  export_skyline_png(p, sky, opt);

  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  ASSERT_TRUE(png_image_begin_read_from_file(&img, p.c_str()));
  EXPECT_EQ(img.width, 6u);
  EXPECT_EQ(img.height, 4u);
  img.format = PNG_FORMAT_GRAY;
  std::vector<unsigned char> px(PNG_IMAGE_SIZE(img));
  ASSERT_TRUE(png_image_finish_read(&img, nullptr, px.data(), 0, nullptr));
  // Row 1 of the first band is the normalized peak; row 0 is silent.
  EXPECT_EQ(px[1 * 6 + 0], 255);
  EXPECT_EQ(px[0], 0);
  EXPECT_EQ(px[2 * 6 + 3], 255);
}
