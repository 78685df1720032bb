#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "echoroom/geometry.hpp"
#include "echoroom/ism_synth.hpp"
#include "echoroom/stft.hpp"

namespace echoroom {

enum class SteeringModel { kDirectPath, kRake, kRetf };
enum class NoiseModel { kWhite, kDiffuse, kWhitePlusLate, kDiffusePlusLate };

enum class Design {
  kDs,
  kMvdrDp,
  kMvdrRetf,
  kMvdrRake,
  kMvdrDpLate,
  kMvdrRetfLate,
  kMvdrRakeLate,
};

inline constexpr std::array<Design, 7> kAllDesigns = {
    Design::kDs,         Design::kMvdrDp,       Design::kMvdrRetf,    Design::kMvdrRake,
    Design::kMvdrDpLate, Design::kMvdrRetfLate, Design::kMvdrRakeLate};

/// Lower-case CLI names: ds, mvdr-dp, mvdr-retf, mvdr-rake, mvdr-dp-late, ...
std::string_view design_name(Design design);
std::optional<Design> design_from_name(std::string_view name);

struct BeamformerSpec {
  SteeringModel steering = SteeringModel::kDirectPath;
  NoiseModel noise = NoiseModel::kWhite;
  std::size_t reference = 0;
  int rake_echoes = 4;

  static BeamformerSpec from_design(Design design, std::size_t reference = 0);
};

/// Rows are frequency bins, columns are channels.
using SteeringMatrix = Eigen::MatrixXcd;
/// One I x I Hermitian matrix per frequency bin.
using NoiseCovariance = std::vector<Eigen::MatrixXcd>;

/// Unit-modulus phases exp(-j 2 pi f (tau_i - tau_ref)).
SteeringMatrix steering_dp(std::span<const double> direct_toas, std::span<const double> freqs,
                           std::size_t reference);
SteeringMatrix steering_dp(const std::vector<Vec3>& mics, const Vec3& source, std::span<const double> freqs,
                           double speed_of_sound, std::size_t reference);

/// Echo-model response of each channel divided by that of the reference channel.
SteeringMatrix steering_rake(const EchoModelParams& params, std::span<const double> freqs, std::size_t reference);

/// Principal generalized eigenvector v of (noisy, noise), mapped to noise * v
/// and scaled so that its reference entry is 1. A noise covariance that is
/// not positive definite gets diagonal loading; `loaded` reports it.
Eigen::VectorXcd estimate_retf_gevd(const Eigen::MatrixXcd& noisy_cov, const Eigen::MatrixXcd& noise_cov,
                                    std::size_t reference, bool* loaded = nullptr);

struct RetfEstimate {
  SteeringMatrix retf;
  std::vector<bool> loaded;
};

RetfEstimate estimate_retf_gevd(const NoiseCovariance& noisy_cov, const NoiseCovariance& noise_cov,
                                std::size_t reference);

/// sin(2 pi f d_ij / c) / (2 pi f d_ij / c), unit diagonal.
NoiseCovariance diffuse_coherence(const std::vector<Vec3>& mics, std::span<const double> freqs, double speed_of_sound);

/// Adds relative_loading * trace / I to the diagonal.
void diagonal_load(Eigen::MatrixXcd& m, double relative_loading);

/// Per-bin average of x x^H over frames, loaded by `relative_loading`.
NoiseCovariance sample_covariance(const std::vector<Spectrogram>& channels, double relative_loading = 1e-6);

/// Mean over frames of |S(t, f)|^2.
std::vector<double> power_spectrum(const Spectrogram& s);

/// Per-bin power of the late reverberation: |H_late(f)|^2 averaged over the
/// channels and over the STFT bin width, times the source power.
std::vector<double> late_power_estimate(const std::vector<std::vector<double>>& late_tails,
                                        std::span<const double> source_power, const StftSpec& spec);

struct MvdrWeights {
  Eigen::MatrixXcd weights;  // bins x channels
  std::vector<bool> flagged;
};

/// w = phi^{-1} h / (h^H phi^{-1} h). When h^H phi^{-1} h < 1e-12 the bin is
/// flagged and the reference-channel selector is returned.
Eigen::VectorXcd mvdr_weights(const Eigen::VectorXcd& h, const Eigen::MatrixXcd& phi, std::size_t reference,
                              bool* flagged = nullptr);
MvdrWeights mvdr_weights(const SteeringMatrix& h, const NoiseCovariance& phi, std::size_t reference);

/// h / |h|^2 per bin.
Eigen::MatrixXcd ds_weights(const SteeringMatrix& h);

/// max over bins of |w(f)^H h(f) - 1|, skipping `flagged` bins.
double distortionless_error(const Eigen::MatrixXcd& weights, const SteeringMatrix& h,
                            const std::vector<bool>& flagged = {});

/// y(t, f) = w(f)^H x(t, f).
Spectrogram apply_weights(const Eigen::MatrixXcd& weights, const std::vector<Spectrogram>& channels);

struct BeamformerInputs {
  std::vector<Spectrogram> mixture;
  NoiseCovariance noise_cov;  // estimate of the (diffuse) noise statistics
  NoiseCovariance coherence;  // diffuse coherence used for the late field
  std::vector<double> late_power;
  SteeringMatrix dp;
  SteeringMatrix rake;  // empty when no echo model is available
};

struct BeamformerOutput {
  SteeringMatrix steering;  // the vector the weights are distortionless for
  Eigen::MatrixXcd weights;
  std::vector<bool> flagged;
  Spectrogram enhanced;
};

BeamformerOutput run_beamformer(const BeamformerSpec& spec, const BeamformerInputs& inputs);

struct IsnrrResult {
  double db = 0.0;
  bool infinite = false;
  double snrr_in = 0.0;
  double snrr_out = 0.0;
};

/// 10 log10(|target|^2 / |signal - target|^2); +inf when signal == target.
double snrr_db(std::span<const double> signal, std::span<const double> target);

/// Output SNRR minus input SNRR. At the input the target is the early part
/// of the reference channel; at the output it is `enhanced` minus
/// `residual`, the late reverberation and noise passed through the same
/// filter. Rescaling the filter leaves the result unchanged.
IsnrrResult evaluate_isnrr(std::span<const double> enhanced, std::span<const double> residual,
                           std::span<const double> input_reference, std::span<const double> reference_target);

}  // namespace echoroom
