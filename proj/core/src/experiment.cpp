#include "echoroom/experiment.hpp"

#include <cmath>
#include <numeric>

#include "echoroom/annotate.hpp"
#include "echoroom/calibrate.hpp"
#include "echoroom/descriptors.hpp"
#include "echoroom/errors.hpp"
#include "echoroom/rooge.hpp"
#include "echoroom/simulation.hpp"
#include "echoroom/tabular.hpp"

namespace echoroom {
namespace {

std::string num(double v) { return format_number(v); }
std::string idx(std::size_t v) { return std::to_string(v); }

SceneLayout perturb_layout(const SceneLayout& truth, double sigma_pos, double sigma_tilt, Rng& rng) {
  std::normal_distribution<double> gp(0.0, sigma_pos), gt(0.0, sigma_tilt);
  SceneLayout init = truth;
  for (std::size_t a = 0; a < init.arrays.size(); ++a) {
    auto& arr = init.arrays[a];
    // Array 0 carries the gauge (x, y, tilt); only its height is free.
    if (a == 0) {
      arr.barycenter.z() += gp(rng);
      continue;
    }
    arr.barycenter += Vec3(gp(rng), gp(rng), gp(rng));
    arr.azimuth_tilt += gt(rng);
  }
  for (auto& s : init.sources) s.position += Vec3(gp(rng), gp(rng), gp(rng));
  return init;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!is_surface_code(surface_code)) throw ValidationError("surface code must be six binary digits");
  if (!(sample_rate > 0.0)) throw ValidationError("sample rate must be positive");
  if (designs.empty()) throw ValidationError("at least one beamformer design required");
  if (toa_noise_std < 0.0) throw ValidationError("TOA noise must be non-negative");
  if (!(descriptor_duration > 0.0)) throw ValidationError("descriptor duration must be positive");
  if (annotation_max_order < 1) throw ValidationError("annotation order must be at least 1");
  for (double t : gom_thresholds) {
    if (!(t > 0.0)) throw ValidationError("GoM thresholds must be positive");
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  std::vector<std::string> names;
  for (Design d : designs) names.emplace_back(design_name(d));
  return {{"seed", seed},
          {"surface_code", surface_code},
          {"sample_rate", sample_rate},
          {"snr_db", snr_db},
          {"designs", names},
          {"beamforming_scenes", beamforming_scenes},
          {"calibration_trials", calibration_trials},
          {"toa_noise_std", toa_noise_std},
          {"gom_thresholds", gom_thresholds},
          {"bands", bands},
          {"descriptor_duration", descriptor_duration},
          {"annotation_max_order", annotation_max_order}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  try {
    ExperimentConfig c;
    c.seed = j.value("seed", c.seed);
    c.surface_code = j.value("surface_code", c.surface_code);
    c.sample_rate = j.value("sample_rate", c.sample_rate);
    c.snr_db = j.value("snr_db", c.snr_db);
    if (j.contains("designs")) {
      c.designs.clear();
      for (const auto& n : j.at("designs")) {
        const auto d = design_from_name(n.get<std::string>());
        if (!d) throw ValidationError("unknown beamformer design '" + n.get<std::string>() + "'");
        c.designs.push_back(*d);
      }
    }
    c.beamforming_scenes = j.value("beamforming_scenes", c.beamforming_scenes);
    c.calibration_trials = j.value("calibration_trials", c.calibration_trials);
    c.toa_noise_std = j.value("toa_noise_std", c.toa_noise_std);
    c.gom_thresholds = j.value("gom_thresholds", c.gom_thresholds);
    c.bands = j.value("bands", c.bands);
    c.descriptor_duration = j.value("descriptor_duration", c.descriptor_duration);
    c.annotation_max_order = j.value("annotation_max_order", c.annotation_max_order);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed experiment config: ") + e.what());
  }
}

ExperimentOutputs run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  Rng rng(config.seed);
  ExperimentOutputs outputs;
  const auto save = [&](const CsvTable& t, const char* name) {
    const auto p = out_dir / name;
    t.write(p);
    outputs.tables.push_back(p);
  };

  const RoomSpec room = RoomSpec::from_surface_code(Vec3(6.0, 6.0, 2.4), config.surface_code);
  const SceneLayout truth = reference_layout();

  // Synthesis and annotation.
  SimulationOptions short_sim;
  short_sim.sample_rate = config.sample_rate;
  short_sim.max_order = config.annotation_max_order;
  const auto rirs = simulate_scene(room, truth, short_sim);
  const AnnotationRun run = annotate_rirs(rirs, room, truth);
  const EchoAnnotation geometric = predict_echo_annotation(room, truth, 1);
  {
    CsvTable t({"mic", "src", "label", "toa_geometric_s", "toa_observed_s", "error_samples"});
    for (const auto& [key, echoes] : geometric.entries()) {
      for (const auto& e : echoes) {
        const Echo* o = run.annotation.find_echo(key.first, key.second, e.label);
        t.add_row({idx(key.first), idx(key.second), e.label, num(e.toa), o ? num(o->toa) : "nan",
                   o ? num((o->toa - e.toa) * config.sample_rate) : "nan"});
      }
    }
    save(t, "annotation.csv");
  }

  // Calibration from noisy annotated TOAs.
  SceneLayout calibrated = truth;
  {
    std::vector<std::string> header = {"trial", "mode", "geometric_avg_cm", "geometric_max_cm", "geometric_std_cm",
                                       "signal_avg_cm", "signal_max_cm", "signal_std_cm"};
    for (double th : config.gom_thresholds) header.push_back("gom_" + format_number(th * 1e3) + "ms_fraction");
    header.push_back("cost_m2");
    header.push_back("converged");
    CsvTable t(header);
    for (std::size_t trial = 0; trial < config.calibration_trials; ++trial) {
      const EchoAnnotation noisy = perturb_annotation(run.annotation, config.toa_noise_std, rng);
      const SceneLayout init = perturb_layout(truth, 0.05, 0.05, rng);
      const CalibrationProblem problem = CalibrationProblem::from_annotation(noisy, init, room);
      for (MdsMode mode : {MdsMode::kDirect, MdsMode::kDirectCeiling}) {
        const CalibrationResult res = solve_mds(problem, init, mode);
        const MismatchReport rep = mismatch_report(res.layout, room, noisy, &truth, config.gom_thresholds);
        std::vector<std::string> row = {idx(trial), mode == MdsMode::kDirect ? "dMDS" : "dcMDS",
                                        num(rep.geometric.mean), num(rep.geometric.max), num(rep.geometric.std),
                                        num(rep.signal.mean), num(rep.signal.max), num(rep.signal.std)};
        for (double th : config.gom_thresholds) row.push_back(num(rep.gom.at(th)));
        row.push_back(num(res.cost));
        row.push_back(res.converged ? "1" : "0");
        t.add_row(std::move(row));
        if (trial == 0 && mode == MdsMode::kDirectCeiling) calibrated = res.layout;
      }
    }
    save(t, "calibration.csv");
  }

  // Descriptors on longer RIRs, one microphone per array.
  {
    CsvTable t({"mic", "src", "room_code", "band_hz", "rt60_s", "set", "drr_db", "der_db"});
    SimulationOptions long_sim;
    long_sim.sample_rate = config.sample_rate;
    long_sim.duration = config.descriptor_duration;
    for (std::size_t m : truth.array_first_mics()) {
      for (std::size_t s = 0; s < truth.source_count(); ++s) {
        const Rir rir = simulate_rir(room, truth.sources[s].position, truth.mic_position(m), long_sim);
        const auto* echoes = geometric.find(m, s);
        const DescriptorSet d = compute_descriptors(rir, *echoes, config.bands);
        for (const auto& [band, est] : d.rt60) {
          t.add_row({idx(m), idx(s), config.surface_code, num(band), est ? num(est->seconds) : "nan",
                     est ? (est->set == ReliabilitySet::kA ? "A" : "B") : "B", num(d.drr.db), num(d.der.db)});
        }
      }
    }
    save(t, "descriptors.csv");
  }

  // Room geometry from the annotation and the calibrated layout.
  {
    CsvTable t({"facet", "de_cm", "ae_deg", "sources"});
    std::vector<std::size_t> all(truth.source_count());
    std::iota(all.begin(), all.end(), 0);
    RoomEstimateOptions opts;
    opts.speed_of_sound = room.speed_of_sound;
    const RoomEstimate est = estimate_room(run.annotation, calibrated, all, opts);
    const GeometryScore score = score_geometry(est.planes, room);
    for (const auto& p : est.planes) {
      const auto& fs = score.facets.at(*p.facet);
      std::string support;
      for (std::size_t s : p.support) support += (support.empty() ? "" : ";") + idx(s);
      t.add_row({std::string(facet_name(*p.facet)), num(fs.de_cm), num(fs.ae_deg), support});
    }
    for (Facet f : est.missing) t.add_row({std::string(facet_name(f)), "nan", "nan", ""});
    save(t, "rooge.csv");
  }

  // Beamforming.
  {
    CsvTable t({"scene", "array", "src", "snr_db", "design", "isnrr_db", "isnrr_jittered_db"});
    BeamformingTrialConfig bcfg;
    bcfg.stft.sample_rate = config.sample_rate;
    for (std::size_t scene = 0; scene < config.beamforming_scenes; ++scene) {
      const std::size_t array = scene % truth.arrays.size();
      const std::size_t src = (scene / truth.arrays.size() + scene) % truth.source_count();
      for (double snr : config.snr_db) {
        bcfg.snr_db = snr;
        const BeamformingTrial trial = run_beamforming_trial(room, truth, array, src, bcfg, rng);
        for (Design d : config.designs) {
          const auto jit = trial.jittered.find(d);
          t.add_row({idx(scene), idx(array), idx(src), num(snr), std::string(design_name(d)), num(trial.isnrr.at(d).db),
                     jit == trial.jittered.end() ? "nan" : num(jit->second.db)});
        }
      }
    }
    save(t, "beamforming.csv");
  }
  return outputs;
}

}  // namespace echoroom
