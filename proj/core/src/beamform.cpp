#include "echoroom/beamform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "echoroom/errors.hpp"
#include "echoroom/fft.hpp"

namespace echoroom {
namespace {

using Cplx = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct DesignRow {
  Design design;
  std::string_view name;
  SteeringModel steering;
  NoiseModel noise;
};

constexpr std::array<DesignRow, 7> kDesignTable = {{
    {Design::kDs, "ds", SteeringModel::kDirectPath, NoiseModel::kWhite},
    {Design::kMvdrDp, "mvdr-dp", SteeringModel::kDirectPath, NoiseModel::kDiffuse},
    {Design::kMvdrRetf, "mvdr-retf", SteeringModel::kRetf, NoiseModel::kDiffuse},
    {Design::kMvdrRake, "mvdr-rake", SteeringModel::kRake, NoiseModel::kDiffuse},
    {Design::kMvdrDpLate, "mvdr-dp-late", SteeringModel::kDirectPath, NoiseModel::kWhitePlusLate},
    {Design::kMvdrRetfLate, "mvdr-retf-late", SteeringModel::kRetf, NoiseModel::kDiffusePlusLate},
    {Design::kMvdrRakeLate, "mvdr-rake-late", SteeringModel::kRake, NoiseModel::kDiffusePlusLate},
}};

const DesignRow& row(Design d) {
  for (const auto& r : kDesignTable) {
    if (r.design == d) return r;
  }
  throw ValidationError("unknown beamformer design");
}

void check_reference(std::size_t reference, Eigen::Index channels) {
  if (reference >= static_cast<std::size_t>(channels)) throw ValidationError("reference channel out of range");
}

Eigen::VectorXcd selector(Eigen::Index n, std::size_t reference) {
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
  e(static_cast<Eigen::Index>(reference)) = 1.0;
  return e;
}

}  // namespace

std::string_view design_name(Design design) { return row(design).name; }

std::optional<Design> design_from_name(std::string_view name) {
  for (const auto& r : kDesignTable) {
    if (r.name == name) return r.design;
  }
  return std::nullopt;
}

BeamformerSpec BeamformerSpec::from_design(Design design, std::size_t reference) {
  const DesignRow& r = row(design);
  BeamformerSpec s;
  s.steering = r.steering;
  s.noise = r.noise;
  s.reference = reference;
  return s;
}

SteeringMatrix steering_dp(std::span<const double> direct_toas, std::span<const double> freqs,
                           std::size_t reference) {
  const auto channels = static_cast<Eigen::Index>(direct_toas.size());
  check_reference(reference, channels);
  SteeringMatrix h(static_cast<Eigen::Index>(freqs.size()), channels);
  for (Eigen::Index k = 0; k < h.rows(); ++k) {
    for (Eigen::Index i = 0; i < channels; ++i) {
      const double dt = direct_toas[static_cast<std::size_t>(i)] - direct_toas[reference];
      h(k, i) = std::polar(1.0, -kTwoPi * freqs[static_cast<std::size_t>(k)] * dt);
    }
  }
  return h;
}

SteeringMatrix steering_dp(const std::vector<Vec3>& mics, const Vec3& source, std::span<const double> freqs,
                           double speed_of_sound, std::size_t reference) {
  if (!(speed_of_sound > 0.0)) throw ValidationError("speed of sound must be positive");
  std::vector<double> toas;
  for (const auto& m : mics) toas.push_back((m - source).norm() / speed_of_sound);
  return steering_dp(toas, freqs, reference);
}

SteeringMatrix steering_rake(const EchoModelParams& params, std::span<const double> freqs, std::size_t reference) {
  SteeringMatrix h = echo_model_frequency_response(params, freqs);
  check_reference(reference, h.cols());
  const Eigen::Index r = static_cast<Eigen::Index>(reference);
  for (Eigen::Index k = 0; k < h.rows(); ++k) {
    const Cplx ref = h(k, r);
    if (std::abs(ref) < 1e-300) {
      h.row(k) = selector(h.cols(), reference).transpose();
    } else {
      h.row(k) /= ref;
    }
  }
  return h;
}

Eigen::VectorXcd estimate_retf_gevd(const Eigen::MatrixXcd& noisy_cov, const Eigen::MatrixXcd& noise_cov,
                                    std::size_t reference, bool* loaded) {
  const Eigen::Index n = noisy_cov.rows();
  if (noisy_cov.cols() != n || noise_cov.rows() != n || noise_cov.cols() != n) {
    throw ValidationError("covariance shapes differ");
  }
  check_reference(reference, n);
  if (loaded) *loaded = false;
  if (n == 1) return Eigen::VectorXcd::Ones(1);

  Eigen::MatrixXcd b = noise_cov;
  double level = 1e-6;
  for (int attempt = 0;; ++attempt) {
    Eigen::LLT<Eigen::MatrixXcd> llt(b);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().real().minCoeff() > 0.0) break;
    if (attempt >= 8) throw NumericalError("noise covariance cannot be made positive definite");
    b = noise_cov;
    diagonal_load(b, level);
    if (b.trace().real() <= 0.0) b += level * Eigen::MatrixXcd::Identity(n, n);
    level *= 10.0;
    if (loaded) *loaded = true;
  }
  const Eigen::MatrixXcd a = 0.5 * (noisy_cov + noisy_cov.adjoint());
  b = 0.5 * (b + b.adjoint());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> ges(a, b);
  if (ges.info() != Eigen::Success) throw NumericalError("generalized eigendecomposition failed");
  const Eigen::VectorXcd v = ges.eigenvectors().col(n - 1);
  Eigen::VectorXcd h = b * v;
  const Cplx ref = h(static_cast<Eigen::Index>(reference));
  if (std::abs(ref) < 1e-300) throw NumericalError("relative transfer function has a null reference entry");
  return h / ref;
}

RetfEstimate estimate_retf_gevd(const NoiseCovariance& noisy_cov, const NoiseCovariance& noise_cov,
                                std::size_t reference) {
  if (noisy_cov.size() != noise_cov.size()) throw ValidationError("covariance lists differ in length");
  RetfEstimate out;
  if (noisy_cov.empty()) return out;
  out.retf.resize(static_cast<Eigen::Index>(noisy_cov.size()), noisy_cov.front().rows());
  out.loaded.resize(noisy_cov.size());
  for (std::size_t k = 0; k < noisy_cov.size(); ++k) {
    bool loaded = false;
    out.retf.row(static_cast<Eigen::Index>(k)) =
        estimate_retf_gevd(noisy_cov[k], noise_cov[k], reference, &loaded).transpose();
    out.loaded[k] = loaded;
  }
  return out;
}

NoiseCovariance diffuse_coherence(const std::vector<Vec3>& mics, std::span<const double> freqs,
                                  double speed_of_sound) {
  if (!(speed_of_sound > 0.0)) throw ValidationError("speed of sound must be positive");
  const auto n = static_cast<Eigen::Index>(mics.size());
  NoiseCovariance out;
  out.reserve(freqs.size());
  for (double f : freqs) {
    Eigen::MatrixXcd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double x = kTwoPi * f * (mics[static_cast<std::size_t>(i)] - mics[static_cast<std::size_t>(j)]).norm() /
                         speed_of_sound;
        g(i, j) = (x == 0.0) ? 1.0 : std::sin(x) / x;
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

void diagonal_load(Eigen::MatrixXcd& m, double relative_loading) {
  const double tr = m.trace().real() / static_cast<double>(m.rows());
  m.diagonal().array() += relative_loading * tr;
}

NoiseCovariance sample_covariance(const std::vector<Spectrogram>& channels, double relative_loading) {
  if (channels.empty()) throw ValidationError("no channels");
  const std::size_t frames = channels.front().frames;
  const std::size_t bins = channels.front().bins;
  for (const auto& c : channels) {
    if (c.frames != frames || c.bins != bins) throw ValidationError("channel spectrograms differ in shape");
  }
  if (frames == 0) throw ValidationError("empty spectrogram");
  const auto n = static_cast<Eigen::Index>(channels.size());
  NoiseCovariance out(bins, Eigen::MatrixXcd::Zero(n, n));
  Eigen::MatrixXcd x(n, static_cast<Eigen::Index>(frames));
  for (std::size_t f = 0; f < bins; ++f) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < frames; ++t) x(i, static_cast<Eigen::Index>(t)) = channels[static_cast<std::size_t>(i)](t, f);
    }
    Eigen::MatrixXcd c = x * x.adjoint() / static_cast<double>(frames);
    c = 0.5 * (c + c.adjoint());
    diagonal_load(c, relative_loading);
    out[f] = std::move(c);
  }
  return out;
}

std::vector<double> power_spectrum(const Spectrogram& s) {
  std::vector<double> p(s.bins, 0.0);
  for (std::size_t t = 0; t < s.frames; ++t) {
    for (std::size_t f = 0; f < s.bins; ++f) p[f] += std::norm(s(t, f));
  }
  if (s.frames > 0) {
    for (double& v : p) v /= static_cast<double>(s.frames);
  }
  return p;
}

std::vector<double> late_power_estimate(const std::vector<std::vector<double>>& late_tails,
                                        std::span<const double> source_power, const StftSpec& spec) {
  spec.validate();
  if (source_power.size() != spec.bins()) throw ValidationError("source power must have one value per bin");
  std::vector<double> out(spec.bins(), 0.0);
  if (late_tails.empty()) return out;
  std::size_t longest = spec.length;
  for (const auto& t : late_tails) longest = std::max(longest, t.size());
  const std::size_t nfft = dsp::next_pow2(longest);
  const std::size_t ratio = nfft / spec.length;
  for (const auto& tail : late_tails) {
    const auto h = dsp::rfft(tail, nfft);
    for (std::size_t k = 0; k < spec.bins(); ++k) {
      const std::size_t c = k * ratio;
      const std::size_t lo = c >= ratio / 2 ? c - ratio / 2 : 0;
      const std::size_t hi = std::min(h.size() - 1, c + ratio / 2);
      double acc = 0.0;
      for (std::size_t j = lo; j <= hi; ++j) acc += std::norm(h[j]);
      out[k] += acc / static_cast<double>(hi - lo + 1);
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = out[k] / static_cast<double>(late_tails.size()) * source_power[k];
  }
  return out;
}

Eigen::VectorXcd mvdr_weights(const Eigen::VectorXcd& h, const Eigen::MatrixXcd& phi, std::size_t reference,
                              bool* flagged) {
  const Eigen::Index n = h.size();
  if (phi.rows() != n || phi.cols() != n) throw ValidationError("covariance and steering sizes differ");
  check_reference(reference, n);
  if (flagged) *flagged = false;
  Eigen::LDLT<Eigen::MatrixXcd> ldlt(phi);
  Eigen::VectorXcd u;
  if (ldlt.info() == Eigen::Success) u = ldlt.solve(h);
  const Cplx denom = (ldlt.info() == Eigen::Success) ? h.dot(u) : Cplx(0.0);
  if (!(denom.real() >= 1e-12) || !u.allFinite()) {
    if (flagged) *flagged = true;
    return selector(n, reference);
  }
  return u / denom;
}

MvdrWeights mvdr_weights(const SteeringMatrix& h, const NoiseCovariance& phi, std::size_t reference) {
  if (static_cast<std::size_t>(h.rows()) != phi.size()) throw ValidationError("one covariance per bin required");
  MvdrWeights out;
  out.weights.resize(h.rows(), h.cols());
  out.flagged.resize(phi.size());
  for (Eigen::Index k = 0; k < h.rows(); ++k) {
    bool flag = false;
    out.weights.row(k) = mvdr_weights(h.row(k).transpose(), phi[static_cast<std::size_t>(k)], reference, &flag).transpose();
    out.flagged[static_cast<std::size_t>(k)] = flag;
  }
  return out;
}

Eigen::MatrixXcd ds_weights(const SteeringMatrix& h) {
  Eigen::MatrixXcd w = h;
  for (Eigen::Index k = 0; k < h.rows(); ++k) w.row(k) /= h.row(k).squaredNorm();
  return w;
}

double distortionless_error(const Eigen::MatrixXcd& weights, const SteeringMatrix& h,
                            const std::vector<bool>& flagged) {
  if (weights.rows() != h.rows() || weights.cols() != h.cols()) throw ValidationError("weight and steering shapes differ");
  double worst = 0.0;
  for (Eigen::Index k = 0; k < h.rows(); ++k) {
    if (!flagged.empty() && flagged[static_cast<std::size_t>(k)]) continue;
    const Cplx g = weights.row(k).dot(h.row(k));
    worst = std::max(worst, std::abs(g - 1.0));
  }
  return worst;
}

Spectrogram apply_weights(const Eigen::MatrixXcd& weights, const std::vector<Spectrogram>& channels) {
  if (channels.empty()) throw ValidationError("no channels");
  if (weights.cols() != static_cast<Eigen::Index>(channels.size()) ||
      weights.rows() != static_cast<Eigen::Index>(channels.front().bins)) {
    throw ValidationError("weight matrix does not match the spectrograms");
  }
  Spectrogram y;
  y.frames = channels.front().frames;
  y.bins = channels.front().bins;
  y.data.assign(y.frames * y.bins, Cplx(0.0));
  for (std::size_t i = 0; i < channels.size(); ++i) {
    for (std::size_t t = 0; t < y.frames; ++t) {
      for (std::size_t f = 0; f < y.bins; ++f) {
        y(t, f) += std::conj(weights(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(i))) * channels[i](t, f);
      }
    }
  }
  return y;
}

BeamformerOutput run_beamformer(const BeamformerSpec& spec, const BeamformerInputs& in) {
  if (in.mixture.empty()) throw ValidationError("empty mixture");
  const std::size_t bins = in.mixture.front().bins;
  const auto n = static_cast<Eigen::Index>(in.mixture.size());
  check_reference(spec.reference, n);
  const bool late = spec.noise == NoiseModel::kWhitePlusLate || spec.noise == NoiseModel::kDiffusePlusLate;
  const bool diffuse = spec.noise == NoiseModel::kDiffuse || spec.noise == NoiseModel::kDiffusePlusLate;
  if (diffuse || spec.steering == SteeringModel::kRetf || spec.noise == NoiseModel::kWhitePlusLate) {
    if (in.noise_cov.size() != bins) throw ValidationError("noise covariance missing or of wrong length");
  }
  if (late && (in.coherence.size() != bins || in.late_power.size() != bins)) {
    throw ValidationError("late reverberation statistics missing or of wrong length");
  }

  SteeringMatrix h;
  switch (spec.steering) {
    case SteeringModel::kDirectPath: h = in.dp; break;
    case SteeringModel::kRake:
      if (in.rake.size() == 0) throw ValidationError("rake steering requires an echo model");
      h = in.rake;
      break;
    case SteeringModel::kRetf: h = estimate_retf_gevd(sample_covariance(in.mixture), in.noise_cov, spec.reference).retf; break;
  }
  if (h.rows() != static_cast<Eigen::Index>(bins) || h.cols() != n) throw ValidationError("steering matrix shape mismatch");

  BeamformerOutput out;
  if (spec.noise == NoiseModel::kWhite) {
    out.weights = ds_weights(h);
    out.flagged.assign(bins, false);
  } else {
    NoiseCovariance phi(bins);
    for (std::size_t k = 0; k < bins; ++k) {
      if (diffuse) {
        phi[k] = in.noise_cov[k];
      } else {
        const double sigma2 = in.noise_cov[k].trace().real() / static_cast<double>(n);
        phi[k] = sigma2 * Eigen::MatrixXcd::Identity(n, n);
      }
      if (late) phi[k] += in.late_power[k] * in.coherence[k];
    }
    auto mv = mvdr_weights(h, phi, spec.reference);
    out.weights = std::move(mv.weights);
    out.flagged = std::move(mv.flagged);
  }
  out.steering = std::move(h);
  out.enhanced = apply_weights(out.weights, in.mixture);
  return out;
}

double snrr_db(std::span<const double> signal, std::span<const double> target) {
  if (signal.size() != target.size()) throw ValidationError("signal and target lengths differ");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < signal.size(); ++i) {
    num += target[i] * target[i];
    den += (signal[i] - target[i]) * (signal[i] - target[i]);
  }
  if (!(num > 0.0)) throw NumericalError("target signal has no energy");
  if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(num / den);
}

IsnrrResult evaluate_isnrr(std::span<const double> enhanced, std::span<const double> residual,
                           std::span<const double> input_reference, std::span<const double> reference_target) {
  if (residual.size() != enhanced.size()) throw ValidationError("enhanced and residual lengths differ");
  std::vector<double> target_out(enhanced.size());
  for (std::size_t i = 0; i < enhanced.size(); ++i) target_out[i] = enhanced[i] - residual[i];
  IsnrrResult r;
  r.snrr_in = snrr_db(input_reference, reference_target);
  r.snrr_out = snrr_db(enhanced, target_out);
  if (std::isinf(r.snrr_out) && !std::isinf(r.snrr_in)) {
    r.infinite = true;
    r.db = std::numeric_limits<double>::infinity();
  } else if (std::isinf(r.snrr_out) && std::isinf(r.snrr_in)) {
    r.db = 0.0;
  } else {
    r.db = r.snrr_out - r.snrr_in;
  }
  return r;
}

}  // namespace echoroom
