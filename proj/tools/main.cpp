#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "echoroom/errors.hpp"

using namespace echoroom::cli;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

void add_bundle_options(CLI::App* cmd, BundleArgs& b, bool annotation) {
  cmd->add_option("--bundle", b.manifest, "Bundle manifest (manifest.json)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--room", b.room, "Room configuration index d");
  if (annotation) cmd->add_option("--annotation", b.annotation, "Annotation JSON overriding the bundle's")->check(CLI::ExistingFile);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Echo-aware room acoustics toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  double fs = 0.0;
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed of the random generator");
  auto* fs_opt = app.add_option("--fs", fs, "Sample rate (Hz)")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "Output directory");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Synthesize RIRs into a bundle");
  simulate->add_option("--scene", sim.scene, "Scene JSON (default: reference layout)")->check(CLI::ExistingFile);
  simulate->add_option("--codes", sim.codes, "Surface codes, one per room configuration")->delimiter(',');
  simulate->add_option("--max-order", sim.max_order, "Reflection order limit (-1: by duration)");
  simulate->add_option("--duration", sim.duration, "RIR duration (s) when no order limit is set");
  simulate->add_option("--storage", sim.storage, "tensor or wav")->check(CLI::IsMember({"tensor", "wav"}));
  simulate->add_option("--annotation-order", sim.annotation_order, "Order of the predicted annotation (-1: none)");

  auto* probe = app.add_subcommand("probe", "Sweep generation and RIR estimation");
  probe->require_subcommand(1);
  ProbeGenArgs pgen;
  auto* gen = probe->add_subcommand("gen", "Write the repeated sweep probe");
  gen->add_option("--spec", pgen.spec, "Sweep spec JSON")->check(CLI::ExistingFile);
  gen->add_option("-o,--output", pgen.output, "Output WAV");
  ProbeEstimateArgs pest;
  auto* est = probe->add_subcommand("estimate", "Deconvolve a recording");
  est->add_option("--rec", pest.recording, "Recorded WAV")->required()->check(CLI::ExistingFile);
  est->add_option("--ref", pest.reference, "Reference sweep WAV")->required()->check(CLI::ExistingFile);
  est->add_option("--spec", pest.spec, "Sweep spec JSON; enables averaging over repetitions")->check(CLI::ExistingFile);
  est->add_option("--loopback", pest.loopback, "Index of the loop-back channel in the recording");
  est->add_option("--rir-length", pest.rir_seconds, "RIR length (s)")->check(CLI::PositiveNumber);
  est->add_option("--reg-eps", pest.reg_eps, "Relative regularization of the spectral division");
  est->add_option("-o,--output", pest.output, "Output WAV");

  AnnotateArgs ann;
  auto* annotate = app.add_subcommand("annotate", "Label direct and first-order echoes");
  add_bundle_options(annotate, ann.bundle, false);
  annotate->add_flag("--equalize", ann.equalize, "Deconvolve the direct-path kernel first");
  annotate->add_option("--tolerance-ms", ann.tolerance_ms, "Matching tolerance (ms)");
  annotate->add_flag("--skyline", ann.skyline, "Export one skyline PNG per source");

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "Refine array and source positions from TOAs");
  add_bundle_options(calibrate, cal.bundle, true);
  calibrate->add_option("--mode", cal.mode, "dmds or dcmds")->check(CLI::IsMember({"dmds", "dcmds"}));
  calibrate->add_option("--max-iterations", cal.max_iterations, "Solver iteration limit");

  DescriptorsArgs desc;
  auto* descriptors = app.add_subcommand("descriptors", "RT60, DRR and DER per RIR");
  add_bundle_options(descriptors, desc.bundle, true);
  descriptors->add_option("--bands", desc.bands, "Octave band centers (Hz)")->delimiter(',');

  BeamformArgs bf;
  auto* beamform = app.add_subcommand("beamform", "Simulated beamforming trial");
  beamform->add_option("--scene", bf.scene, "Scene JSON (default: reference layout)")->check(CLI::ExistingFile);
  beamform->add_option("--code", bf.code, "Surface code when no scene is given");
  beamform->add_option("--array", bf.array, "Array index");
  beamform->add_option("--source", bf.source, "Source index");
  beamform->add_option("--snr", bf.snr_db, "Input SNR values (dB)")->delimiter(',');
  beamform->add_option("--designs", bf.designs, "Designs, e.g. ds,mvdr-rake (default: all)")->delimiter(',');
  beamform->add_option("--trials", bf.trials, "Trials per SNR");

  RoogeArgs rg;
  auto* rooge = app.add_subcommand("rooge", "Estimate room facets from first-order echoes");
  add_bundle_options(rooge, rg.bundle, true);
  rooge->add_option("--sources", rg.sources, "Source indices (default: all)")->delimiter(',');

  ExperimentArgs ex;
  auto* experiment = app.add_subcommand("experiment", "Full pipeline on the reference layout");
  experiment->add_option("--config", ex.config, "Experiment config JSON")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  if (*fs_opt) g.fs = fs;
  ex.seed_given = static_cast<bool>(*seed_opt);

  try {
    if (*simulate) run_simulate(g, sim);
    else if (*gen) run_probe_gen(g, pgen);
    else if (*est) run_probe_estimate(g, pest);
    else if (*annotate) run_annotate(g, ann);
    else if (*calibrate) run_calibrate(g, cal);
    else if (*descriptors) run_descriptors(g, desc);
    else if (*beamform) run_beamform(g, bf);
    else if (*rooge) run_rooge(g, rg);
    else if (*experiment) run_experiment_cmd(g, ex);
  } catch (const echoroom::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const echoroom::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
