#include "endotrack/metrics.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

#include "endotrack/format.hpp"

namespace endotrack {

namespace {
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
}

double ate(const Posed& gt, const Posed& est) { return (gt.t - est.t).norm(); }

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);  // [-pi, pi]
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

double ce(const Posed& gt, const Posed& est) {
  const Vector3<double> d = euler_from_rotmat(gt.R) - euler_from_rotmat(est.R);
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) sum += 1.0 - std::cos(wrap_angle(d[i]));
  return sum / 3.0;
}

// Both angles below are evaluated as atan2(sin, cos). This is the acos of the
// clamped cosine, without acos's loss of precision near 0 and 180 degrees.

double de(const Posed& gt, const Posed& est) {
  const Vector3<double> a = est.R.col(0), b = gt.R.col(0);
  return std::atan2(a.cross(b).norm(), a.dot(b)) * kRadToDeg;
}

double rte(const Posed& gt_rel, const Posed& est_rel) {
  return pose_compose(pose_inverse(gt_rel), est_rel).t.norm();
}

double rot(const Posed& gt_rel, const Posed& est_rel) {
  const Matrix3<double> err = gt_rel.R.transpose() * est_rel.R;
  const Vector3<double> axis(err(2, 1) - err(1, 2), err(0, 2) - err(2, 0), err(1, 0) - err(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (err.trace() - 1.0)) * kRadToDeg;
}

void require_same_unit(LengthUnit a, LengthUnit b) {
  if (a != b) {
    throw Error(ErrorCode::UnitMismatch,
                "trajectories use different units (" + std::string(to_string(a)) + " vs " + std::string(to_string(b)) + ")");
  }
}

MetricSummary summarize(std::span<const double> values) {
  if (values.empty()) return {};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var)};
}

MetricReport evaluate(const Trajectory& gt, const Trajectory& est) {
  require_same_unit(gt.unit, est.unit);
  if (gt.stride != est.stride) {
    throw Error(ErrorCode::AlignmentError, "trajectories use different strides (" + std::to_string(gt.stride) +
                                               " vs " + std::to_string(est.stride) + ")");
  }
  if (gt.size() != est.size()) {
    throw Error(ErrorCode::AlignmentError, "trajectories have " + std::to_string(gt.size()) + " and " +
                                               std::to_string(est.size()) + " frames");
  }
  MetricReport r;
  r.unit = gt.unit;
  r.stride = gt.stride;
  const std::size_t n = gt.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (gt.frames[i].index != est.frames[i].index) {
      throw Error(ErrorCode::AlignmentError, "frame index " + std::to_string(gt.frames[i].index) + " vs " +
                                                 std::to_string(est.frames[i].index));
    }
    r.frame_indices.push_back(gt.frames[i].index);
    r.ate.push_back(ate(gt.pose(i), est.pose(i)));
    r.ce.push_back(ce(gt.pose(i), est.pose(i)));
    r.de.push_back(de(gt.pose(i), est.pose(i)));
    if (i > 0) {
      const Posed gt_rel = relative_pose(gt.pose(i - 1), gt.pose(i));
      const Posed est_rel = relative_pose(est.pose(i - 1), est.pose(i));
      r.rte.push_back(rte(gt_rel, est_rel));
      r.rot.push_back(rot(gt_rel, est_rel));
    }
  }
  r.ate_summary = summarize(r.ate);
  r.ce_summary = summarize(r.ce);
  r.de_summary = summarize(r.de);
  r.rte_summary = summarize(r.rte);
  r.rot_summary = summarize(r.rot);
  return r;
}

void write_report(std::ostream& os, const MetricReport& r) {
  const std::string u(to_string(r.unit));
  os << "# metric report unit=" << u << " stride=" << r.stride << " frames=" << r.frame_indices.size() << "\n";
  os << "# ROT is the geodesic angle acos((tr(R_err)-1)/2) in degrees\n";
  os << "frame ATE[" << u << "] CE DE[deg] RTE[" << u << "] ROT[deg]\n";
  for (std::size_t i = 0; i < r.frame_indices.size(); ++i) {
    os << r.frame_indices[i] << ' ' << format_double(r.ate[i]) << ' ' << format_double(r.ce[i]) << ' '
       << format_double(r.de[i]) << ' ';
    if (i == 0) {
      os << "- -";
    } else {
      os << format_double(r.rte[i - 1]) << ' ' << format_double(r.rot[i - 1]);
    }
    os << "\n";
  }
  const auto line = [&os](const std::string& name, const MetricSummary& s) {
    os << name << ' ' << format_fixed(s.mean, 6) << "±" << format_fixed(s.stddev, 6) << "\n";
  };
  os << "# summary mean±std (population std)\n";
  line("ATE[" + u + "]", r.ate_summary);
  line("CE", r.ce_summary);
  line("DE[deg]", r.de_summary);
  line("RTE[" + u + "]", r.rte_summary);
  line("ROT[deg]", r.rot_summary);
}

}  // namespace endotrack
