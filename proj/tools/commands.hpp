#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace echoroom::cli {

struct Globals {
  std::uint64_t seed = 1;
  std::optional<double> fs;
  std::filesystem::path out_dir = ".";

  double sample_rate(double fallback) const { return fs.value_or(fallback); }
};

struct SimulateArgs {
  std::filesystem::path scene;  // empty: reference layout in the default room
  std::vector<std::string> codes = {"011111"};
  int max_order = -1;
  double duration = 0.3;
  std::string storage = "tensor";
  int annotation_order = 1;
};

struct ProbeGenArgs {
  std::filesystem::path spec;
  std::filesystem::path output = "sweep.wav";
};

struct ProbeEstimateArgs {
  std::filesystem::path recording;
  std::filesystem::path reference;
  std::filesystem::path spec;  // when given, `reference` may hold the full repeated probe
  std::optional<std::size_t> loopback;
  double rir_seconds = 1.0;
  double reg_eps = 1e-4;
  std::filesystem::path output = "rir.wav";
};

struct BundleArgs {
  std::filesystem::path manifest;
  std::size_t room = 0;
  std::filesystem::path annotation;  // overrides the bundle's annotation
};

struct AnnotateArgs {
  BundleArgs bundle;
  bool equalize = false;
  double tolerance_ms = 0.5;
  bool skyline = false;  // one PNG per source in the output directory
};

struct CalibrateArgs {
  BundleArgs bundle;
  std::string mode = "dcmds";
  int max_iterations = 200;
};

struct DescriptorsArgs {
  BundleArgs bundle;
  std::vector<double> bands;
};

struct BeamformArgs {
  std::filesystem::path scene;
  std::string code = "011111";
  std::size_t array = 0;
  std::size_t source = 0;
  std::vector<double> snr_db = {10.0};
  std::vector<std::string> designs;
  int trials = 1;
};

struct RoogeArgs {
  BundleArgs bundle;
  std::vector<std::size_t> sources;
};

struct ExperimentArgs {
  std::filesystem::path config;
  bool seed_given = false;
};

void run_simulate(const Globals& g, const SimulateArgs& a);
void run_probe_gen(const Globals& g, const ProbeGenArgs& a);
void run_probe_estimate(const Globals& g, const ProbeEstimateArgs& a);
void run_annotate(const Globals& g, const AnnotateArgs& a);
void run_calibrate(const Globals& g, const CalibrateArgs& a);
void run_descriptors(const Globals& g, const DescriptorsArgs& a);
void run_beamform(const Globals& g, const BeamformArgs& a);
void run_rooge(const Globals& g, const RoogeArgs& a);
void run_experiment_cmd(const Globals& g, const ExperimentArgs& a);

}  // namespace echoroom::cli
