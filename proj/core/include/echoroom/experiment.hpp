#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "echoroom/beamform.hpp"

namespace echoroom {

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string surface_code = "011111";
  double sample_rate = 48000.0;
  std::vector<double> snr_db = {0.0, 10.0, 20.0};
  std::vector<Design> designs = {kAllDesigns.begin(), kAllDesigns.end()};
  std::size_t beamforming_scenes = 2;
  std::size_t calibration_trials = 2;
  double toa_noise_std = 0.05e-3;  // s
  std::vector<double> gom_thresholds = {0.5e-3, 0.1e-3, 0.05e-3};
  std::vector<double> bands = {500.0, 1000.0, 2000.0, 4000.0};
  double descriptor_duration = 0.5;  // s of simulated RIR for descriptors
  int annotation_max_order = 3;

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

struct ExperimentOutputs {
  std::vector<std::filesystem::path> tables;
};

/// Synthesis, annotation, calibration, descriptors, room geometry and
/// beamforming on the reference layout. Writes annotation.csv,
/// calibration.csv, descriptors.csv, rooge.csv and beamforming.csv into
/// `out_dir`. All randomness derives from `config.seed`.
ExperimentOutputs run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

}  // namespace echoroom
