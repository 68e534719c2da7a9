#pragma once

// Quaternion and rigid-transform algebra.
//
// Quaternions are Eigen::Quaternion (Hamilton convention, w = real part).
// A pose maps camera coordinates into world coordinates: x_w = R * x_c + t.

#include <algorithm>
#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "endotrack/errors.hpp"

namespace endotrack {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;
template <typename Scalar>
using Quaternion = Eigen::Quaternion<Scalar>;

/// Numeric thresholds used by the algebra, per scalar type.
template <typename Scalar>
struct Se3Tolerance;

template <>
struct Se3Tolerance<double> {
  static constexpr double zero_norm = 1e-12;
  static constexpr double log_threshold = 1e-8;
  static constexpr double orthonormal_drift = 1e-9;
  static constexpr double rotation_check = 1e-6;
  static constexpr double gimbal = 1e-9;
};

template <>
struct Se3Tolerance<float> {
  static constexpr float zero_norm = 1e-12f;
  static constexpr float log_threshold = 1e-6f;
  static constexpr float orthonormal_drift = 1e-5f;
  static constexpr float rotation_check = 1e-4f;
  static constexpr float gimbal = 1e-6f;
};

template <typename Scalar>
Scalar clamp_unit(Scalar x) {
  return std::clamp(x, Scalar(-1), Scalar(1));
}

// ---------------------------------------------------------------------------
// Quaternions
// ---------------------------------------------------------------------------

/// Flips the sign so that w >= 0. Both signs describe the same rotation.
template <typename Scalar>
Quaternion<Scalar> quat_canonical(const Quaternion<Scalar>& q) {
  if (q.w() < Scalar(0)) return Quaternion<Scalar>(-q.coeffs());
  return q;
}

/// Unit norm with w >= 0. Throws ZeroQuaternion when ||q|| <= 1e-12.
template <typename Scalar>
Quaternion<Scalar> quat_normalize(const Quaternion<Scalar>& q) {
  const Scalar n = q.norm();
  if (!(n > Se3Tolerance<Scalar>::zero_norm)) {
    throw Error(ErrorCode::ZeroQuaternion, "quaternion norm is zero");
  }
  return quat_canonical(Quaternion<Scalar>(q.coeffs() / n));
}

template <typename Scalar>
bool is_unit(const Quaternion<Scalar>& q, Scalar tol) {
  return std::abs(q.norm() - Scalar(1)) <= tol;
}

/// Quaternion logarithm: (v / |v|) * acos(w), or zero when |v| is below the
/// degenerate threshold. Expects a unit, canonical quaternion.
template <typename Scalar>
Vector3<Scalar> quat_log(const Quaternion<Scalar>& q) {
  const Vector3<Scalar> v = q.vec();
  const Scalar vn = v.norm();
  if (vn <= Se3Tolerance<Scalar>::log_threshold) return Vector3<Scalar>::Zero();
  return v / vn * std::acos(clamp_unit(q.w()));
}

template <typename Scalar>
Matrix3<Scalar> quat_to_rotmat(const Quaternion<Scalar>& q) {
  return q.toRotationMatrix();
}

/// Max-abs entry of R^T R - I.
template <typename Scalar>
Scalar orthonormality_error(const Matrix3<Scalar>& R) {
  return (R.transpose() * R - Matrix3<Scalar>::Identity()).cwiseAbs().maxCoeff();
}

template <typename Scalar>
bool is_rotation(const Matrix3<Scalar>& R, Scalar tol) {
  return R.allFinite() && orthonormality_error(R) <= tol && std::abs(R.determinant() - Scalar(1)) <= tol;
}

/// Throws NotARotation if R is not orthonormal within 1e-6 or det(R) != 1.
template <typename Scalar>
Quaternion<Scalar> rotmat_to_quat(const Matrix3<Scalar>& R) {
  if (!is_rotation(R, Se3Tolerance<Scalar>::rotation_check)) {
    throw Error(ErrorCode::NotARotation, "matrix is not a proper rotation");
  }
  // Eigen's matrix constructor uses the largest-diagonal branch.
  return quat_normalize(Quaternion<Scalar>(R));
}

/// Nearest rotation in the Frobenius sense (polar factor via SVD).
template <typename Scalar>
Matrix3<Scalar> reorthonormalize(const Matrix3<Scalar>& R) {
  Eigen::JacobiSVD<Matrix3<Scalar>> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3<Scalar> U = svd.matrixU();
  const Matrix3<Scalar> V = svd.matrixV();
  if ((U * V.transpose()).determinant() < Scalar(0)) U.col(2) *= Scalar(-1);
  return U * V.transpose();
}

// ---------------------------------------------------------------------------
// Poses
// ---------------------------------------------------------------------------

template <typename Scalar>
struct Pose {
  Matrix3<Scalar> R = Matrix3<Scalar>::Identity();
  Vector3<Scalar> t = Vector3<Scalar>::Zero();

  static Pose Identity() { return Pose{}; }

  Matrix4<Scalar> matrix() const {
    Matrix4<Scalar> m = Matrix4<Scalar>::Identity();
    m.template topLeftCorner<3, 3>() = R;
    m.template topRightCorner<3, 1>() = t;
    return m;
  }

  static Pose FromMatrix(const Matrix4<Scalar>& m) {
    return Pose{m.template topLeftCorner<3, 3>(), m.template topRightCorner<3, 1>()};
  }

  template <typename Other>
  Pose<Other> cast() const {
    return Pose<Other>{R.template cast<Other>(), t.template cast<Other>()};
  }
};

/// Translation followed by a unit quaternion; the layout a pose regressor emits.
template <typename Scalar>
struct PoseVec {
  Vector3<Scalar> t = Vector3<Scalar>::Zero();
  Quaternion<Scalar> q = Quaternion<Scalar>::Identity();
};

using Posed = Pose<double>;
using PoseVecd = PoseVec<double>;

template <typename Scalar>
bool is_valid(const Pose<Scalar>& p, Scalar tol = Se3Tolerance<Scalar>::orthonormal_drift) {
  return p.t.allFinite() && is_rotation(p.R, tol);
}

/// a * b: R = Ra Rb, t = Ra tb + ta. Re-orthonormalizes R when drift exceeds
/// the tolerance.
template <typename Scalar>
Pose<Scalar> pose_compose(const Pose<Scalar>& a, const Pose<Scalar>& b) {
  Pose<Scalar> out{a.R * b.R, a.R * b.t + a.t};
  if (orthonormality_error(out.R) > Se3Tolerance<Scalar>::orthonormal_drift) {
    out.R = reorthonormalize(out.R);
  }
  return out;
}

template <typename Scalar>
Pose<Scalar> pose_inverse(const Pose<Scalar>& p) {
  const Matrix3<Scalar> Rt = p.R.transpose();
  return Pose<Scalar>{Rt, -(Rt * p.t)};
}

/// prev^-1 * cur: the motion from the previous camera frame to the current one.
template <typename Scalar>
Pose<Scalar> relative_pose(const Pose<Scalar>& prev, const Pose<Scalar>& cur) {
  return pose_compose(pose_inverse(prev), cur);
}

template <typename Scalar>
Pose<Scalar> operator*(const Pose<Scalar>& a, const Pose<Scalar>& b) {
  return pose_compose(a, b);
}

template <typename Scalar>
Pose<Scalar> to_pose(const PoseVec<Scalar>& v) {
  return Pose<Scalar>{quat_to_rotmat(v.q), v.t};
}

template <typename Scalar>
PoseVec<Scalar> to_pose_vec(const Pose<Scalar>& p) {
  return PoseVec<Scalar>{p.t, rotmat_to_quat(p.R)};
}

/// Geodesic angle of a rotation, radians in [0, pi].
template <typename Scalar>
Scalar rotation_angle(const Matrix3<Scalar>& R) {
  return std::acos(clamp_unit((R.trace() - Scalar(1)) / Scalar(2)));
}

// ---------------------------------------------------------------------------
// Euler angles
// ---------------------------------------------------------------------------
//
// Extrinsic X-Y-Z: rotate about world x by rx, then world y by ry, then world z
// by rz, i.e. R = Rz(rz) * Ry(ry) * Rx(rx).

template <typename Scalar>
Matrix3<Scalar> rotmat_from_euler(const Vector3<Scalar>& rxyz) {
  using AA = Eigen::AngleAxis<Scalar>;
  return (AA(rxyz.z(), Vector3<Scalar>::UnitZ()) * AA(rxyz.y(), Vector3<Scalar>::UnitY()) *
          AA(rxyz.x(), Vector3<Scalar>::UnitX()))
      .toRotationMatrix();
}

/// Returns (rx, ry, rz). At gimbal lock (|R(2,0)| >= 1 - 1e-9) rz is fixed to 0.
template <typename Scalar>
Vector3<Scalar> euler_from_rotmat(const Matrix3<Scalar>& R) {
  const Scalar s = -R(2, 0);
  const Scalar ry = std::asin(clamp_unit(s));
  if (std::abs(R(2, 0)) >= Scalar(1) - Se3Tolerance<Scalar>::gimbal) {
    // R = Ry(+-pi/2) * Rx(rx); rows 1 hold (0, cos rx, -sin rx).
    return Vector3<Scalar>(std::atan2(-R(1, 2), R(1, 1)), ry, Scalar(0));
  }
  return Vector3<Scalar>(std::atan2(R(2, 1), R(2, 2)), ry, std::atan2(R(1, 0), R(0, 0)));
}

}  // namespace endotrack
