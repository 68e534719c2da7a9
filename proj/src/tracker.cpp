#include "endotrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "endotrack/random.hpp"

namespace endotrack {

std::string_view to_string(LengthUnit unit) {
  return unit == LengthUnit::Millimetre ? "mm" : "cm";
}

LengthUnit parse_length_unit(std::string_view text) {
  if (text == "mm") return LengthUnit::Millimetre;
  if (text == "cm") return LengthUnit::Centimetre;
  throw Error(ErrorCode::ParseError, "unknown length unit '" + std::string(text) + "'");
}

void Trajectory::validate() const {
  if (stride < 1) throw Error(ErrorCode::AlignmentError, "stride must be >= 1");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (i > 0 && frames[i].index != frames[i - 1].index + stride) {
      throw Error(ErrorCode::AlignmentError, "frame " + std::to_string(frames[i].index) +
                                                 " does not follow frame " + std::to_string(frames[i - 1].index) +
                                                 " by stride " + std::to_string(stride));
    }
    if (!is_valid(frames[i].pose, Se3Tolerance<double>::rotation_check)) {
      throw Error(ErrorCode::InvalidPose, "frame " + std::to_string(frames[i].index) + " is not a rigid transform");
    }
  }
}

namespace {

Posed step(const Posed& prev, const Posed& rel, std::size_t count) {
  Posed next = pose_compose(prev, rel);
  if (count % kReorthonormalizeEvery == 0) next.R = reorthonormalize(next.R);
  return next;
}

}  // namespace

Trajectory chain_absolute(const Posed& p0, const std::vector<Posed>& rels, int stride, LengthUnit unit,
                          long first_index) {
  Trajectory out;
  out.stride = stride;
  out.unit = unit;
  out.frames.reserve(rels.size() + 1);
  out.frames.push_back({first_index, p0});
  for (std::size_t i = 0; i < rels.size(); ++i) {
    out.frames.push_back({first_index + static_cast<long>(i + 1) * stride, step(out.frames.back().pose, rels[i], i + 1)});
  }
  return out;
}

Trajectory chain_rebased(const Trajectory& gt, const std::vector<Posed>& rels) {
  if (gt.empty() || rels.size() + 1 != gt.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(rels.size()) + " relatives for a trajectory of " +
                                               std::to_string(gt.size()) + " poses");
  }
  Trajectory out;
  out.stride = gt.stride;
  out.unit = gt.unit;
  out.frames.reserve(gt.size());
  out.frames.push_back(gt.frames.front());
  for (std::size_t i = 0; i < rels.size(); ++i) {
    out.frames.push_back({gt.frames[i + 1].index, pose_compose(gt.frames[i].pose, rels[i])});
  }
  return out;
}

std::vector<Posed> relative_poses(const Trajectory& traj) {
  std::vector<Posed> rels;
  if (traj.size() < 2) return rels;
  rels.reserve(traj.size() - 1);
  for (std::size_t i = 1; i < traj.size(); ++i) rels.push_back(relative_pose(traj.pose(i - 1), traj.pose(i)));
  return rels;
}

namespace {

Vector3<double> gaussian3(Rng& rng, std::normal_distribution<double>& n) {
  const double x = n(rng), y = n(rng), z = n(rng);
  return {x, y, z};
}

Matrix3<double> axis_angle(const Vector3<double>& rotvec) {
  const double angle = rotvec.norm();
  if (angle == 0.0) return Matrix3<double>::Identity();
  return Eigen::AngleAxisd(angle, rotvec / angle).toRotationMatrix();
}

}  // namespace

Trajectory synth_trajectory(std::size_t n, const SynthOptions& opt) {
  if (n < 2) throw Error(ErrorCode::LengthMismatch, "a synthetic trajectory needs at least two poses");
  const double smooth = std::clamp(opt.smoothness, 0.0, 0.999);
  Rng rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Advance mostly along the camera's x axis with a slowly varying heading.
  Vector3<double> direction = Vector3<double>::UnitX();
  Vector3<double> spin = Vector3<double>::Zero();
  std::vector<Posed> rels;
  rels.reserve(n - 1);
  for (std::size_t i = 1; i < n; ++i) {
    direction = smooth * direction + (1.0 - smooth) * (Vector3<double>::UnitX() + 0.5 * gaussian3(rng, normal));
    if (direction.norm() < 1e-6) direction = Vector3<double>::UnitX();
    direction.normalize();
    const double length = opt.step_length * (1.0 + 0.5 * uniform(rng, -1.0, 1.0));

    spin = smooth * spin + (1.0 - smooth) * opt.max_rotation * gaussian3(rng, normal);
    if (spin.norm() > opt.max_rotation) spin *= opt.max_rotation / spin.norm();

    rels.push_back(Posed{axis_angle(spin), length * direction});
  }
  return chain_absolute(Posed::Identity(), rels, opt.stride, opt.unit, 0);
}

std::vector<Posed> perturb_relatives(const Trajectory& gt, const NoiseSpec& noise) {
  if (noise.sigma_t < 0.0 || noise.sigma_r < 0.0) throw Error(ErrorCode::ConfigError, "noise std must be >= 0");
  std::vector<Posed> rels = relative_poses(gt);
  Rng rng(noise.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Posed& rel : rels) {
    const Vector3<double> dt = gaussian3(rng, normal);
    const Vector3<double> axis_draw = gaussian3(rng, normal);
    const double angle = std::abs(noise.sigma_r * normal(rng));
    rel.t += noise.bias_t + noise.sigma_t * dt;
    if (angle > 0.0 && axis_draw.norm() > 0.0) {
      rel.R = rel.R * Eigen::AngleAxisd(angle, axis_draw.normalized()).toRotationMatrix();
    }
  }
  return rels;
}

}  // namespace endotrack
