#include "commands.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>

#include "echoroom/annotate.hpp"
#include "echoroom/beamform.hpp"
#include "echoroom/bundle.hpp"
#include "echoroom/calibrate.hpp"
#include "echoroom/descriptors.hpp"
#include "echoroom/errors.hpp"
#include "echoroom/experiment.hpp"
#include "echoroom/probe.hpp"
#include "echoroom/rooge.hpp"
#include "echoroom/scene_io.hpp"
#include "echoroom/simulation.hpp"
#include "echoroom/tabular.hpp"
#include "echoroom/wav.hpp"

namespace echoroom::cli {
namespace fs = std::filesystem;

namespace {

std::string num(double v) { return format_number(v); }
std::string idx(std::size_t v) { return std::to_string(v); }

fs::path under(const Globals& g, const fs::path& p) {
  if (p.is_absolute()) return p;
  fs::create_directories(g.out_dir);
  return g.out_dir / p;
}

void note(const fs::path& p) { std::cout << "wrote " << p.string() << "\n"; }

struct Loaded {
  Session session;
  RoomSpec room;
  std::optional<EchoAnnotation> annotation;

  std::vector<std::vector<Rir>> rirs(std::size_t d) const {
    const auto& t = session.rirs;
    std::vector<std::vector<Rir>> out(t.mics, std::vector<Rir>(t.sources));
    for (std::size_t i = 0; i < t.mics; ++i)
      for (std::size_t j = 0; j < t.sources; ++j) out[i][j] = t.rir(i, j, d);
    return out;
  }
};

Loaded load(const BundleArgs& a) {
  Loaded l{load_bundle(a.manifest), {}, {}};
  l.room = l.session.room(a.room);
  l.annotation = l.session.annotation;
  if (!a.annotation.empty()) l.annotation = load_annotation(a.annotation);
  return l;
}

const EchoAnnotation& require_annotation(const Loaded& l) {
  if (!l.annotation) throw ValidationError("no annotation: the bundle has none and --annotation was not given");
  return *l.annotation;
}

SweepSpec read_sweep_spec(const fs::path& path, double fs_default) {
  SweepSpec s;
  s.sample_rate = fs_default;
  if (path.empty()) return s;
  const auto j = read_json(path);
  try {
    s.duration = j.value("duration", s.duration);
    s.f_start = j.value("f_start", s.f_start);
    s.f_stop = j.value("f_stop", s.f_stop);
    s.fade = j.value("fade", s.fade);
    s.repetitions = j.value("repetitions", s.repetitions);
    s.gap = j.value("gap", s.gap);
    s.sample_rate = j.value("sample_rate", s.sample_rate);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed sweep spec " + path.string() + ": " + e.what());
  }
  return s;
}

}  // namespace

void run_simulate(const Globals& g, const SimulateArgs& a) {
  Scene scene;
  if (a.scene.empty()) {
    scene.room = RoomSpec::from_surface_code(Vec3(6.0, 6.0, 2.4), a.codes.front());
    scene.layout = reference_layout();
  } else {
    scene = load_scene(a.scene);
  }
  if (a.codes.empty()) throw ValidationError("at least one surface code required");
  SimulationOptions opt;
  opt.sample_rate = g.sample_rate(kDefaultSampleRate);
  opt.max_order = a.max_order;
  opt.duration = a.duration;

  Session s;
  s.scene = scene;
  s.manifest.surface_codes = a.codes;
  s.manifest.scene = "scene.json";
  s.manifest.sample_rate = opt.sample_rate;
  if (a.storage == "tensor") {
    s.manifest.storage = RirStorage::kTensor;
    s.manifest.rirs = "rirs.bin";
  } else if (a.storage == "wav") {
    s.manifest.storage = RirStorage::kWavDirectory;
    s.manifest.rirs = "rirs";
  } else {
    throw ValidationError("storage must be 'tensor' or 'wav'");
  }
  s.manifest.validate();

  std::vector<std::vector<std::vector<Rir>>> per_room;
  std::size_t length = 0;
  for (const auto& code : a.codes) {
    const RoomSpec room = RoomSpec::from_surface_code(scene.room.dims, code, {}, scene.room.speed_of_sound);
    per_room.push_back(simulate_scene(room, scene.layout, opt));
    for (const auto& row : per_room.back())
      for (const auto& r : row) length = std::max(length, r.size());
  }
  s.rirs = RirTensor::zeros(length, scene.layout.mic_count(), scene.layout.source_count(), a.codes.size(),
                            opt.sample_rate);
  for (std::size_t d = 0; d < per_room.size(); ++d)
    for (std::size_t i = 0; i < per_room[d].size(); ++i)
      for (std::size_t j = 0; j < per_room[d][i].size(); ++j) s.rirs.set_rir(i, j, d, per_room[d][i][j]);

  if (a.annotation_order >= 0) {
    s.manifest.annotation = "annotation.json";
    s.annotation = predict_echo_annotation(s.room(0), scene.layout, a.annotation_order);
  }
  fs::create_directories(g.out_dir);
  note(write_bundle(g.out_dir, s));
}

void run_probe_gen(const Globals& g, const ProbeGenArgs& a) {
  const SweepSpec spec = read_sweep_spec(a.spec, g.sample_rate(kDefaultSampleRate));
  spec.validate();
  const auto out = under(g, a.output);
  write_wav(out, {generate_ess(spec)}, spec.sample_rate);
  note(out);
}

void run_probe_estimate(const Globals& g, const ProbeEstimateArgs& a) {
  const WavData rec = read_wav(a.recording);
  const WavData ref = read_wav(a.reference);
  if (rec.channels.empty() || ref.channels.empty()) throw ValidationError("empty WAV input");
  if (rec.sample_rate != ref.sample_rate) throw ValidationError("recording and reference sample rates differ");
  const double fs = rec.sample_rate;

  DeconvolutionOptions opt;
  opt.reg_eps = a.reg_eps;
  opt.rir_length = static_cast<std::size_t>(std::lround(a.rir_seconds * fs));
  std::vector<double> sweep = ref.channels.front();
  if (!a.spec.empty()) {
    SweepSpec spec = read_sweep_spec(a.spec, fs);
    spec.sample_rate = fs;
    spec.validate();
    sweep = generate_sweep(spec);
    opt.repetitions = spec.repetitions;
    opt.period = spec.period_samples();
  }

  std::vector<std::vector<double>> channels = rec.channels;
  if (a.loopback) {
    // The emitted signal starts with the first sweep of the reference file.
    const LoopbackAlignment al = align_by_loopback(channels, *a.loopback, sweep);
    std::cerr << "loopback onset " << al.onset << " samples, correlation " << num(al.peak_correlation) << "\n";
    channels = al.channels;
    channels.erase(channels.begin() + static_cast<std::ptrdiff_t>(*a.loopback));
  }
  std::vector<std::vector<double>> out;
  for (std::size_t c = 0; c < channels.size(); ++c) {
    if (is_clipped(channels[c])) std::cerr << "warning: channel " << c << " is clipped\n";
    out.push_back(estimate_rir(channels[c], sweep, fs, opt).samples);
  }
  const auto path = under(g, a.output);
  write_wav(path, out, fs);
  note(path);
}

void run_annotate(const Globals& g, const AnnotateArgs& a) {
  const Loaded l = load(a.bundle);
  const auto& layout = l.session.scene.layout;
  AnnotationOptions opt;
  opt.equalize = a.equalize;
  opt.match.tolerance = a.tolerance_ms * 1e-3;
  const auto rirs = l.rirs(a.bundle.room);
  const AnnotationRun run = annotate_rirs(rirs, l.room, layout, opt);
  const EchoAnnotation geometric = predict_echo_annotation(l.room, layout, 1);

  const auto json_path = under(g, "annotation.json");
  save_annotation(json_path, run.annotation);
  note(json_path);

  CsvTable t({"mic", "src", "label", "toa_geometric_s", "toa_observed_s", "error_samples"});
  for (const auto& [key, echoes] : geometric.entries()) {
    for (const auto& e : echoes) {
      const Echo* o = run.annotation.find_echo(key.first, key.second, e.label);
      t.add_row({idx(key.first), idx(key.second), e.label, num(e.toa), o ? num(o->toa) : "nan",
                 o ? num((o->toa - e.toa) * l.session.rirs.sample_rate) : "nan"});
    }
  }
  const auto csv = under(g, "annotation.csv");
  t.write(csv);
  note(csv);
  for (double th : {0.5e-3, 0.1e-3, 0.05e-3})
    std::cout << "GoM at " << num(th * 1e3) << " ms: " << num(goodness_of_match(run.annotation, geometric, th)) << "\n";

  if (a.skyline) {
    for (std::size_t j = 0; j < layout.source_count(); ++j) {
      std::vector<Rir> column;
      for (std::size_t i = 0; i < layout.mic_count(); ++i) column.push_back(rirs[i][j]);
      const auto png = under(g, "skyline_src" + idx(j) + ".png");
      export_skyline_png(png, build_skyline(column));
      note(png);
    }
  }
}

void run_calibrate(const Globals& g, const CalibrateArgs& a) {
  const Loaded l = load(a.bundle);
  const EchoAnnotation& ann = require_annotation(l);
  MdsMode mode;
  if (a.mode == "dmds") {
    mode = MdsMode::kDirect;
  } else if (a.mode == "dcmds") {
    mode = MdsMode::kDirectCeiling;
  } else {
    throw ValidationError("mode must be 'dmds' or 'dcmds'");
  }
  const SceneLayout& init = l.session.scene.layout;
  const CalibrationProblem problem = CalibrationProblem::from_annotation(ann, init, l.room);
  SolverOptions opt;
  opt.max_iterations = a.max_iterations;
  const CalibrationResult res = solve_mds(problem, init, mode, opt);
  const MismatchReport rep = mismatch_report(res.layout, l.room, ann, &init);

  Scene out{l.session.scene.room, res.layout};
  const auto scene_path = under(g, "calibrated_scene.json");
  save_scene(scene_path, out);
  note(scene_path);

  std::vector<std::string> header = {"mode", "geometric_avg_cm", "geometric_max_cm", "geometric_std_cm",
                                     "signal_avg_cm", "signal_max_cm", "signal_std_cm"};
  for (const auto& [th, v] : rep.gom) header.push_back("gom_" + num(th * 1e3) + "ms_fraction");
  header.insert(header.end(), {"cost_m2", "iterations", "converged"});
  CsvTable t(header);
  std::vector<std::string> row = {a.mode, num(rep.geometric.mean), num(rep.geometric.max), num(rep.geometric.std),
                                  num(rep.signal.mean), num(rep.signal.max), num(rep.signal.std)};
  for (const auto& [th, v] : rep.gom) row.push_back(num(v));
  row.insert(row.end(), {num(res.cost), std::to_string(res.iterations), res.converged ? "1" : "0"});
  t.add_row(row);
  const auto csv = under(g, "calibration.csv");
  t.write(csv);
  note(csv);
  if (!res.converged) throw NumericalError("calibration did not converge; best iterate written");
}

void run_descriptors(const Globals& g, const DescriptorsArgs& a) {
  const Loaded l = load(a.bundle);
  const auto& layout = l.session.scene.layout;
  const EchoAnnotation predicted = predict_echo_annotation(l.room, layout, 1);
  const EchoAnnotation& ann = l.annotation ? *l.annotation : predicted;
  const std::vector<double>& bands = a.bands.empty() ? kDefaultOctaveBands : a.bands;
  const auto code = l.session.manifest.surface_codes.at(a.bundle.room);
  CsvTable t({"mic", "src", "room_code", "band_hz", "rt60_s", "set", "drr_db", "der_db"});
  for (std::size_t i = 0; i < layout.mic_count(); ++i) {
    for (std::size_t j = 0; j < layout.source_count(); ++j) {
      const auto* echoes = ann.find(i, j);
      if (!echoes || echoes->empty()) continue;
      const DescriptorSet d = compute_descriptors(l.session.rirs.rir(i, j, a.bundle.room), *echoes, bands);
      for (const auto& [band, est] : d.rt60) {
        t.add_row({idx(i), idx(j), code, num(band), est ? num(est->seconds) : "nan",
                   est && est->set == ReliabilitySet::kA ? "A" : "B", num(d.drr.db), num(d.der.db)});
      }
    }
  }
  const auto csv = under(g, "descriptors.csv");
  t.write(csv);
  note(csv);
}

void run_beamform(const Globals& g, const BeamformArgs& a) {
  Scene scene;
  if (a.scene.empty()) {
    scene.room = RoomSpec::from_surface_code(Vec3(6.0, 6.0, 2.4), a.code);
    scene.layout = reference_layout();
  } else {
    scene = load_scene(a.scene);
  }
  std::vector<Design> designs;
  for (const auto& name : a.designs) {
    const auto d = design_from_name(name);
    if (!d) throw ValidationError("unknown design '" + name + "'");
    designs.push_back(*d);
  }
  if (designs.empty()) designs.assign(kAllDesigns.begin(), kAllDesigns.end());
  if (a.array >= scene.layout.arrays.size()) throw ValidationError("array index out of range");
  if (a.source >= scene.layout.source_count()) throw ValidationError("source index out of range");
  if (a.trials < 1) throw ValidationError("at least one trial required");

  Rng rng(g.seed);
  BeamformingTrialConfig cfg;
  cfg.stft.sample_rate = g.sample_rate(kDefaultSampleRate);
  CsvTable t({"trial", "snr_db", "design", "isnrr_db", "isnrr_jittered_db", "distortion", "flagged_bins"});
  for (int trial = 0; trial < a.trials; ++trial) {
    for (double snr : a.snr_db) {
      cfg.snr_db = snr;
      const BeamformingTrial r = run_beamforming_trial(scene.room, scene.layout, a.array, a.source, cfg, rng);
      for (Design d : designs) {
        const auto jit = r.jittered.find(d);
        t.add_row({std::to_string(trial), num(snr), std::string(design_name(d)), num(r.isnrr.at(d).db),
                   jit == r.jittered.end() ? "nan" : num(jit->second.db), num(r.distortion.at(d)),
                   idx(r.flagged_bins.at(d))});
      }
    }
  }
  const auto csv = under(g, "beamforming.csv");
  t.write(csv);
  note(csv);
}

void run_rooge(const Globals& g, const RoogeArgs& a) {
  const Loaded l = load(a.bundle);
  const EchoAnnotation& ann = require_annotation(l);
  const auto& layout = l.session.scene.layout;
  std::vector<std::size_t> sources = a.sources;
  if (sources.empty()) {
    sources.resize(layout.source_count());
    std::iota(sources.begin(), sources.end(), 0);
  }
  RoomEstimateOptions opt;
  opt.speed_of_sound = l.room.speed_of_sound;
  const RoomEstimate est = estimate_room(ann, layout, sources, opt);
  const GeometryScore score = score_geometry(est.planes, l.room);
  CsvTable t({"facet", "normal_x", "normal_y", "normal_z", "offset_m", "de_cm", "ae_deg", "residual_m", "sources"});
  for (const auto& p : est.planes) {
    const auto& s = score.facets.at(*p.facet);
    std::string support;
    for (std::size_t j : p.support) support += (support.empty() ? "" : ";") + idx(j);
    t.add_row({std::string(facet_name(*p.facet)), num(p.plane.normal.x()), num(p.plane.normal.y()),
               num(p.plane.normal.z()), num(p.plane.offset), num(s.de_cm), num(s.ae_deg), num(p.residual), support});
  }
  for (Facet f : est.missing) t.add_row({std::string(facet_name(f)), "nan", "nan", "nan", "nan", "nan", "nan", "nan", ""});
  const auto csv = under(g, "rooge.csv");
  t.write(csv);
  note(csv);
  std::cout << "mean DE " << num(score.mean_de_cm) << " cm, mean AE " << num(score.mean_ae_deg) << " deg\n";
}

void run_experiment_cmd(const Globals& g, const ExperimentArgs& a) {
  ExperimentConfig c;
  if (!a.config.empty()) c = ExperimentConfig::from_json(read_json(a.config));
  if (a.seed_given) c.seed = g.seed;
  if (g.fs) c.sample_rate = *g.fs;
  const ExperimentOutputs out = run_experiment(c, g.out_dir);
  for (const auto& p : out.tables) note(p);
}

}  // namespace echoroom::cli
