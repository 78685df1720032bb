#include "echoroom/calibrate.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "echoroom/annotate.hpp"
#include "echoroom/errors.hpp"

namespace echoroom {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Vec3 ceiling_image(const Vec3& s, double height) { return Vec3(s.x(), s.y(), 2.0 * height - s.z()); }

// Offsets of the free parameters of each array / source in the packed vector.
struct Layout {
  std::vector<Eigen::Index> array_offset;  // array 0: z only
  std::vector<Eigen::Index> source_offset;
  Eigen::Index total = 0;
};

Layout parameter_layout(std::size_t arrays, std::size_t sources) {
  Layout l;
  Eigen::Index k = 0;
  for (std::size_t a = 0; a < arrays; ++a) {
    l.array_offset.push_back(k);
    k += (a == 0) ? 1 : 4;
  }
  for (std::size_t s = 0; s < sources; ++s) {
    l.source_offset.push_back(k);
    k += 3;
  }
  l.total = k;
  return l;
}

}  // namespace

CalibrationProblem CalibrationProblem::from_annotation(const EchoAnnotation& annotation,
                                                       const SceneLayout& layout,
                                                       const RoomSpec& room) {
  const auto nm = static_cast<Eigen::Index>(layout.mic_count());
  const auto ns = static_cast<Eigen::Index>(layout.source_count());
  CalibrationProblem p;
  p.toa_direct = Eigen::MatrixXd::Constant(nm, ns, kNaN);
  Eigen::MatrixXd ceiling = Eigen::MatrixXd::Constant(nm, ns, kNaN);
  bool any_ceiling = false;
  for (Eigen::Index m = 0; m < nm; ++m) {
    for (Eigen::Index s = 0; s < ns; ++s) {
      if (const Echo* d = annotation.find_echo(m, s, "d")) p.toa_direct(m, s) = d->toa;
      if (const Echo* c = annotation.find_echo(m, s, "c")) {
        ceiling(m, s) = c->toa;
        any_ceiling = true;
      }
    }
  }
  if (any_ceiling) p.toa_ceiling = ceiling;
  p.ceiling_height = room.dims.z();
  p.speed_of_sound = room.speed_of_sound;
  return p;
}

std::size_t CalibrationProblem::unknown_count(const SceneLayout& layout) {
  return 4 * layout.arrays.size() + 3 * layout.sources.size();
}

void CalibrationProblem::validate(const SceneLayout& layout, MdsMode mode) const {
  const auto nm = static_cast<Eigen::Index>(layout.mic_count());
  const auto ns = static_cast<Eigen::Index>(layout.source_count());
  if (layout.arrays.empty()) throw ValidationError("calibration needs at least one array");
  if (toa_direct.rows() != nm || toa_direct.cols() != ns) {
    throw ValidationError("direct TOA matrix shape does not match the layout");
  }
  auto check = [](const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double v = m.data()[i];
      if (!std::isnan(v) && !(v > 0.0)) throw ValidationError("TOAs must be positive");
    }
  };
  check(toa_direct);
  if (mode == MdsMode::kDirectCeiling) {
    if (!toa_ceiling) throw ValidationError("dcMDS requires ceiling TOAs");
    if (toa_ceiling->rows() != nm || toa_ceiling->cols() != ns) {
      throw ValidationError("ceiling TOA matrix shape does not match the layout");
    }
    check(*toa_ceiling);
    if (!(ceiling_height > 0.0)) throw ValidationError("ceiling height must be positive");
  }
  if (!(speed_of_sound > 0.0)) throw ValidationError("speed of sound must be positive");
}

MdsObjective::MdsObjective(const CalibrationProblem& problem, const SceneLayout& init, MdsMode mode)
    : problem_(&problem), template_(init) {
  problem.validate(init, mode);
  for (std::size_t m = 0; m < init.mic_count(); ++m) mic_refs_.push_back(init.mic_ref(m));
  const double c = problem.speed_of_sound;
  for (std::size_t m = 0; m < init.mic_count(); ++m) {
    for (std::size_t s = 0; s < init.source_count(); ++s) {
      const auto mi = static_cast<Eigen::Index>(m);
      const auto si = static_cast<Eigen::Index>(s);
      const double td = problem.toa_direct(mi, si);
      if (!std::isnan(td)) terms_.push_back({m, s, false, c * td});
      if (mode == MdsMode::kDirectCeiling) {
        const double tc = (*problem.toa_ceiling)(mi, si);
        if (!std::isnan(tc)) terms_.push_back({m, s, true, c * tc});
      }
    }
  }
  parameter_count_ = parameter_layout(init.arrays.size(), init.sources.size()).total;
}

Eigen::VectorXd MdsObjective::pack(const SceneLayout& layout) const {
  const Layout pl = parameter_layout(layout.arrays.size(), layout.sources.size());
  Eigen::VectorXd x(pl.total);
  for (std::size_t a = 0; a < layout.arrays.size(); ++a) {
    const auto& arr = layout.arrays[a];
    const Eigen::Index o = pl.array_offset[a];
    if (a == 0) {
      x(o) = arr.barycenter.z();
    } else {
      x.segment<3>(o) = arr.barycenter;
      x(o + 3) = arr.azimuth_tilt;
    }
  }
  for (std::size_t s = 0; s < layout.sources.size(); ++s) {
    x.segment<3>(pl.source_offset[s]) = layout.sources[s].position;
  }
  return x;
}

SceneLayout MdsObjective::unpack(const Eigen::VectorXd& x) const {
  const Layout pl = parameter_layout(template_.arrays.size(), template_.sources.size());
  SceneLayout out = template_;
  for (std::size_t a = 0; a < out.arrays.size(); ++a) {
    auto& arr = out.arrays[a];
    const Eigen::Index o = pl.array_offset[a];
    if (a == 0) {
      arr.barycenter.z() = x(o);
    } else {
      arr.barycenter = x.segment<3>(o);
      arr.azimuth_tilt = x(o + 3);
    }
  }
  for (std::size_t s = 0; s < out.sources.size(); ++s) {
    out.sources[s].position = x.segment<3>(pl.source_offset[s]);
  }
  return out;
}

Eigen::VectorXd MdsObjective::residuals(const Eigen::VectorXd& x) const {
  const SceneLayout layout = unpack(x);
  const auto mics = layout.mic_positions();
  Eigen::VectorXd r(residual_count());
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    const Term& t = terms_[k];
    const Vec3& s = layout.sources[t.src].position;
    const Vec3 target = t.ceiling ? ceiling_image(s, problem_->ceiling_height) : s;
    const double w = t.ceiling ? problem_->ceiling_weight : 1.0;
    r(static_cast<Eigen::Index>(k)) = w * (t.range - (mics[t.mic] - target).norm());
  }
  return r;
}

Eigen::MatrixXd MdsObjective::jacobian(const Eigen::VectorXd& x) const {
  const SceneLayout layout = unpack(x);
  const Layout pl = parameter_layout(layout.arrays.size(), layout.sources.size());
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(residual_count(), parameter_count_);
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    const Term& t = terms_[k];
    const auto row = static_cast<Eigen::Index>(k);
    const MicRef ref = mic_refs_[t.mic];
    const ArrayPose& arr = layout.arrays[ref.array];
    const Vec3 mic = arr.mic_position(ref.element);
    const Vec3& s = layout.sources[t.src].position;
    const Vec3 target = t.ceiling ? ceiling_image(s, problem_->ceiling_height) : s;
    const double w = t.ceiling ? problem_->ceiling_weight : 1.0;
    const Vec3 diff = mic - target;
    const double d = diff.norm();
    if (d == 0.0) continue;
    const Vec3 u = diff / d;
    // r = w (range - |mic - target|), so dr = -w d|.|.
    const Eigen::Index ao = pl.array_offset[ref.array];
    if (ref.array == 0) {
      j(row, ao) = -w * u.z();
    } else {
      j.block<1, 3>(row, ao) = -w * u.transpose();
      const double off = arr.local_offsets[ref.element];
      const Vec3 dmic_dtheta(-off * std::sin(arr.azimuth_tilt), off * std::cos(arr.azimuth_tilt), 0.0);
      j(row, ao + 3) = -w * u.dot(dmic_dtheta);
    }
    Vec3 ds = -u;
    if (t.ceiling) ds.z() = u.z();
    j.block<1, 3>(row, pl.source_offset[t.src]) = -w * ds.transpose();
  }
  return j;
}

double calibration_cost(const CalibrationProblem& problem, const SceneLayout& layout, MdsMode mode) {
  const MdsObjective obj(problem, layout, mode);
  return obj.cost(obj.pack(layout));
}

CalibrationResult solve_mds(const CalibrationProblem& problem, const SceneLayout& init, MdsMode mode,
                            const SolverOptions& options) {
  const MdsObjective obj(problem, init, mode);
  Eigen::VectorXd x = obj.pack(init);
  Eigen::VectorXd r = obj.residuals(x);
  double cost = r.squaredNorm();
  double lambda = options.initial_damping;
  const Eigen::Index n = obj.parameter_count();

  CalibrationResult result;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const Eigen::MatrixXd jac = obj.jacobian(x);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    bool accepted = false;
    double step_norm = 0.0;
    while (!accepted && lambda < 1e16) {
      const Eigen::MatrixXd a = jtj + lambda * Eigen::MatrixXd::Identity(n, n);
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      step_norm = step.norm();
      const Eigen::VectorXd xn = x + step;
      const Eigen::VectorXd rn = obj.residuals(xn);
      const double cn = rn.squaredNorm();
      if (std::isfinite(cn) && cn < cost) {
        x = xn;
        r = rn;
        cost = cn;
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
      } else {
        lambda *= 10.0;
        if (step_norm < options.step_tolerance) break;
      }
    }
    if (step_norm < options.step_tolerance || !accepted) {
      result.converged = true;
      break;
    }
  }
  result.iterations = it;
  result.layout = obj.unpack(x);
  result.cost = cost;

  // Split residuals by kind for reporting.
  const MdsObjective direct_only(problem, result.layout, MdsMode::kDirect);
  result.residuals_direct = direct_only.residuals(direct_only.pack(result.layout));
  if (mode == MdsMode::kDirectCeiling) {
    std::vector<double> ceil;
    std::size_t k = 0;
    for (std::size_t m = 0; m < init.mic_count(); ++m) {
      for (std::size_t s = 0; s < init.source_count(); ++s) {
        const auto mi = static_cast<Eigen::Index>(m);
        const auto si = static_cast<Eigen::Index>(s);
        if (!std::isnan(problem.toa_direct(mi, si))) ++k;
        if (!std::isnan((*problem.toa_ceiling)(mi, si))) ceil.push_back(r(static_cast<Eigen::Index>(k++)));
      }
    }
    result.residuals_ceiling = Eigen::Map<Eigen::VectorXd>(ceil.data(), static_cast<Eigen::Index>(ceil.size()));
  }
  return result;
}

MismatchStats summarize(const std::vector<double>& values) {
  MismatchStats st;
  st.count = values.size();
  if (values.empty()) return st;
  double sum = 0.0;
  for (double v : values) {
    st.max = std::max(st.max, v);
    sum += v;
  }
  st.mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - st.mean) * (v - st.mean);
  st.std = std::sqrt(var / static_cast<double>(values.size()));
  return st;
}

SceneLayout align_gauge(const SceneLayout& layout, const SceneLayout& reference) {
  if (reference.mic_count() != layout.mic_count() || reference.source_count() != layout.source_count()) {
    throw ValidationError("reference layout shape differs from the layout to align");
  }
  std::vector<Eigen::Vector2d> p, q;
  for (std::size_t m = 0; m < layout.mic_count(); ++m) {
    p.push_back(layout.mic_position(m).head<2>());
    q.push_back(reference.mic_position(m).head<2>());
  }
  for (std::size_t s = 0; s < layout.source_count(); ++s) {
    p.push_back(layout.sources[s].position.head<2>());
    q.push_back(reference.sources[s].position.head<2>());
  }
  Eigen::Vector2d pc = Eigen::Vector2d::Zero(), qc = Eigen::Vector2d::Zero();
  for (std::size_t k = 0; k < p.size(); ++k) {
    pc += p[k];
    qc += q[k];
  }
  pc /= static_cast<double>(p.size());
  qc /= static_cast<double>(q.size());
  double sc = 0.0, ss = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const Eigen::Vector2d a = p[k] - pc, b = q[k] - qc;
    sc += a.dot(b);
    ss += a.x() * b.y() - a.y() * b.x();
  }
  const double theta = std::atan2(ss, sc);
  const Eigen::Rotation2Dd rot(theta);
  const auto move = [&](Vec3& v) {
    const Eigen::Vector2d xy = rot * (v.head<2>() - pc) + qc;
    v.head<2>() = xy;
  };
  SceneLayout out = layout;
  for (auto& a : out.arrays) {
    move(a.barycenter);
    a.azimuth_tilt += theta;
  }
  for (auto& s : out.sources) move(s.position);
  return out;
}

MismatchReport mismatch_report(const SceneLayout& layout, const RoomSpec& room,
                               const EchoAnnotation& observed, const SceneLayout* reference,
                               const std::vector<double>& gom_thresholds) {
  MismatchReport report;
  const EchoAnnotation predicted = predict_echo_annotation(room, layout, 1);
  const double c = room.speed_of_sound;
  for (const auto& [key, echoes] : predicted.entries()) {
    for (const auto& pred : echoes) {
      const Echo* obs = observed.find_echo(key.first, key.second, pred.label);
      if (!obs) {
        ++report.skipped;
        continue;
      }
      const double signed_cm = 100.0 * (c * obs->toa - c * pred.toa);
      report.signal_signed_cm.push_back(signed_cm);
      report.signal_cm.push_back(std::abs(signed_cm));
    }
  }
  if (reference) {
    if (reference->mic_count() != layout.mic_count() ||
        reference->source_count() != layout.source_count()) {
      throw ValidationError("reference layout shape differs from the calibrated layout");
    }
    for (std::size_t m = 0; m < layout.mic_count(); ++m) {
      report.geometric_cm.push_back(100.0 * (layout.mic_position(m) - reference->mic_position(m)).norm());
    }
    for (std::size_t s = 0; s < layout.source_count(); ++s) {
      report.geometric_cm.push_back(
          100.0 * (layout.sources[s].position - reference->sources[s].position).norm());
    }
  }
  report.signal = summarize(report.signal_cm);
  report.geometric = summarize(report.geometric_cm);
  for (double tol : gom_thresholds) report.gom[tol] = goodness_of_match(observed, predicted, tol);
  return report;
}

}  // namespace echoroom
