#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "echoroom/errors.hpp"
#include "echoroom/experiment.hpp"

using namespace echoroom;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.seed = 42;
  c.snr_db = {10.0};
  c.designs = {Design::kDs, Design::kMvdrRake};
  c.beamforming_scenes = 1;
  c.calibration_trials = 1;
  c.bands = {1000.0};
  c.descriptor_duration = 0.3;
  c.annotation_max_order = 2;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Experiment, ConfigJsonRoundTrip) {
  const ExperimentConfig c = small_config();
  EXPECT_EQ(ExperimentConfig::from_json(c.to_json()).to_json(), c.to_json());
  auto j = c.to_json();
  j["surface_code"] = "0123";
  EXPECT_THROW(ExperimentConfig::from_json(j), ValidationError);
  ExperimentConfig bad = c;
  bad.designs.clear();
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = c;
  bad.annotation_max_order = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Experiment, SameSeedGivesByteIdenticalTables) {
  const fs::path root = fs::temp_directory_path() / "echoroom_experiment_test";
  fs::remove_all(root);
  const ExperimentConfig c = small_config();
  const ExperimentOutputs a = run_experiment(c, root / "a");
  const ExperimentOutputs b = run_experiment(c, root / "b");
  ASSERT_EQ(a.tables.size(), 5u);
  ASSERT_EQ(a.tables.size(), b.tables.size());
  for (std::size_t k = 0; k < a.tables.size(); ++k) {
    EXPECT_EQ(a.tables[k].filename(), b.tables[k].filename());
    const std::string ta = slurp(a.tables[k]);
    EXPECT_FALSE(ta.empty()) << a.tables[k];
    EXPECT_EQ(ta, slurp(b.tables[k])) << a.tables[k];
  }
  for (const char* name : {"annotation.csv", "calibration.csv", "descriptors.csv", "rooge.csv", "beamforming.csv"})
    EXPECT_TRUE(fs::exists(root / "a" / name)) << name;

  ExperimentConfig other = c;
  other.seed = 43;
  const ExperimentOutputs o = run_experiment(other, root / "c");
  bool any_diff = false;
  for (std::size_t k = 0; k < o.tables.size(); ++k) any_diff |= slurp(o.tables[k]) != slurp(a.tables[k]);
  EXPECT_TRUE(any_diff);
  fs::remove_all(root);
}
