#include <doctest.h>

#include "endotrack/se3.hpp"
#include "oracles.hpp"

using namespace endotrack;

namespace {

double quat_distance(const Quaternion<double>& a, const Quaternion<double>& b) {
  return std::min((a.coeffs() - b.coeffs()).cwiseAbs().maxCoeff(), (a.coeffs() + b.coeffs()).cwiseAbs().maxCoeff());
}

double pose_distance(const Posed& a, const Posed& b) {
  return std::max((a.R - b.R).cwiseAbs().maxCoeff(), (a.t - b.t).cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("quat_normalize canonicalizes and scales") {
  const auto a = quat_normalize(Quaternion<double>(1, 0, 0, 0));
  const auto b = quat_normalize(Quaternion<double>(-1, 0, 0, 0));
  const auto c = quat_normalize(Quaternion<double>(2, 0, 0, 0));
  for (const auto& q : {a, b, c}) {
    CHECK(q.w() == 1.0);
    CHECK(q.vec().isZero(0.0));
  }
  const auto d = quat_normalize(Quaternion<double>(-0.5, 1.0, 2.0, -3.0));
  CHECK(d.w() >= 0.0);
  CHECK(d.norm() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("quat_normalize rejects near-zero input") {
  CHECK_THROWS_AS(quat_normalize(Quaternion<double>(0, 0, 0, 0)), Error);
  CHECK_THROWS_AS(quat_normalize(Quaternion<double>(1e-13, 0, 0, 0)), Error);
  try {
    quat_normalize(Quaternion<double>(0, 0, 0, 0));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroQuaternion);
  }
}

TEST_CASE("quat_log examples") {
  CHECK(quat_log(Quaternion<double>(1, 0, 0, 0)) == Vector3<double>::Zero());

  const double h = oracle::kPi / 6;
  const Vector3<double> v = quat_log(Quaternion<double>(std::cos(h), std::sin(h), 0, 0));
  CHECK(v.x() == doctest::Approx(h).epsilon(1e-14));
  CHECK(v.y() == 0.0);
  CHECK(v.z() == 0.0);

  // Half-turn about x: angle from the rotation matrix is pi, log norm pi/2.
  const Vector3<double> w = quat_log(Quaternion<double>(0, 1, 0, 0));
  CHECK(w.x() == doctest::Approx(oracle::kPi / 2).epsilon(1e-14));
  const auto R = oracle::quat_matrix(0, 1, 0, 0);
  CHECK(2 * w.norm() == doctest::Approx(oracle::rotation_angle(R)).epsilon(1e-12));
}

TEST_CASE("quat_log degenerate branch below threshold") {
  const auto q = Quaternion<double>(1.0, 1e-9, 0, 0).normalized();
  CHECK(quat_log(q) == Vector3<double>::Zero());
  const auto r = Quaternion<double>(std::cos(1e-7), std::sin(1e-7), 0, 0);
  CHECK(quat_log(r).x() == doctest::Approx(1e-7).epsilon(1e-9));
}

TEST_CASE("property: quat_log norm bound and angle agreement") {
  oracle::Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto q = oracle::random_quat(rng);
    const Vector3<double> v = quat_log(q);
    CHECK(v.norm() <= oracle::kPi + 1e-15);
    const auto R = oracle::quat_matrix(q.w(), q.x(), q.y(), q.z());
    CHECK(std::abs(2 * v.norm() - oracle::rotation_angle(R)) <= 1e-6);
  }
}

TEST_CASE("quat_to_rotmat against axis-angle oracle") {
  const double s = std::sqrt(0.5);
  const Matrix3<double> R = quat_to_rotmat(Quaternion<double>(s, 0, 0, s));
  CHECK(R(0, 1) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(R(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(quat_to_rotmat(Quaternion<double>(1, 0, 0, 0)) == Matrix3<double>::Identity());

  oracle::Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto q = oracle::random_quat(rng);
    const auto expect = oracle::quat_matrix(q.w(), q.x(), q.y(), q.z());
    CHECK(oracle::max_abs_diff(oracle::to_array(quat_to_rotmat(q)), expect) <= 1e-12);
  }
}

TEST_CASE("property: quaternion and rotation matrix round trip") {
  oracle::Rng rng(5);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto q = oracle::random_quat(rng);
    const auto back = rotmat_to_quat(quat_to_rotmat(q));
    CHECK(back.w() >= 0.0);
    worst = std::max(worst, quat_distance(q, back));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("rotmat_to_quat near half turns uses a stable branch") {
  for (const oracle::Vec3& axis : {oracle::Vec3{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}}) {
    const auto R = oracle::to_eigen(oracle::axis_angle(axis, oracle::kPi - 1e-10));
    const auto q = rotmat_to_quat(R);
    CHECK((quat_to_rotmat(q) - R).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("rotmat_to_quat rejects non-rotations") {
  Matrix3<double> R = Matrix3<double>::Identity();
  R(0, 0) = 1.01;
  CHECK_THROWS_AS(rotmat_to_quat(R), Error);
  Matrix3<double> reflect = Matrix3<double>::Identity();
  reflect(2, 2) = -1;
  CHECK_THROWS_AS(rotmat_to_quat(reflect), Error);
}

TEST_CASE("pose_compose examples") {
  oracle::Rng rng(17);
  const Posed P = oracle::random_pose(rng);
  CHECK(pose_distance(pose_compose(Posed::Identity(), P), P) == 0.0);
  CHECK(pose_distance(pose_compose(P, pose_inverse(P)), Posed::Identity()) <= 1e-9);
  for (int i = 0; i < 200; ++i) {
    const Posed a = oracle::random_pose(rng), b = oracle::random_pose(rng);
    const auto expect = oracle::matmul(oracle::to_array(a), oracle::to_array(b));
    CHECK(oracle::max_abs_diff(oracle::to_array(pose_compose(a, b)), expect) <= 1e-12);
  }
}

TEST_CASE("pose_inverse examples") {
  CHECK(pose_distance(pose_inverse(Posed::Identity()), Posed::Identity()) == 0.0);
  oracle::Rng rng(19);
  for (int i = 0; i < 200; ++i) {
    const Posed P = oracle::random_pose(rng);
    CHECK(pose_distance(pose_inverse(pose_inverse(P)), P) <= 1e-12);
    const auto expect = oracle::inverse(oracle::to_array(P));
    CHECK(oracle::max_abs_diff(oracle::to_array(pose_inverse(P)), expect) <= 1e-12);
  }
}

TEST_CASE("relative_pose examples") {
  oracle::Rng rng(23);
  const Posed P = oracle::random_pose(rng);
  CHECK(pose_distance(relative_pose(P, P), Posed::Identity()) <= 1e-12);
  CHECK(pose_distance(relative_pose(Posed::Identity(), P), P) <= 1e-12);
  for (int i = 0; i < 200; ++i) {
    const Posed a = oracle::random_pose(rng), b = oracle::random_pose(rng);
    CHECK(pose_distance(pose_compose(a, relative_pose(a, b)), b) <= 1e-9);
  }
}

TEST_CASE("property: composition is associative") {
  oracle::Rng rng(29);
  for (int i = 0; i < 1000; ++i) {
    const Posed a = oracle::random_pose(rng), b = oracle::random_pose(rng), c = oracle::random_pose(rng);
    CHECK(pose_distance(pose_compose(pose_compose(a, b), c), pose_compose(a, pose_compose(b, c))) <= 1e-9);
  }
}

TEST_CASE("composition keeps the rotation orthonormal over long chains") {
  oracle::Rng rng(31);
  Posed acc = Posed::Identity();
  for (int i = 0; i < 20000; ++i) acc = pose_compose(acc, oracle::random_pose(rng, 1.0));
  CHECK(is_valid(acc));
  CHECK(std::abs(acc.R.determinant() - 1.0) <= 1e-9);
}

TEST_CASE("reorthonormalize projects onto the nearest rotation") {
  oracle::Rng rng(37);
  const Posed P = oracle::random_pose(rng);
  Matrix3<double> noisy = P.R;
  noisy(0, 1) += 1e-5;
  noisy(2, 0) -= 2e-5;
  const Matrix3<double> R = reorthonormalize(noisy);
  CHECK(orthonormality_error(R) <= 1e-12);
  CHECK(R.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((R - P.R).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("property: PoseVec round trip") {
  oracle::Rng rng(41);
  for (int i = 0; i < 1000; ++i) {
    const auto q = oracle::random_quat(rng);
    PoseVecd v{Vector3<double>(rng() % 100 - 50.0, 0.25, -3.5), q};
    const PoseVecd back = to_pose_vec(to_pose(v));
    CHECK(back.t == v.t);
    CHECK(quat_distance(back.q, v.q) <= 1e-9);
  }
}

TEST_CASE("euler_from_rotmat examples") {
  CHECK(euler_from_rotmat(Matrix3<double>(Matrix3<double>::Identity())) == Vector3<double>::Zero());
  const auto e = euler_from_rotmat(oracle::to_eigen(oracle::euler_xyz(oracle::kPi / 6, 0, 0)));
  CHECK(e.x() == doctest::Approx(oracle::kPi / 6).epsilon(1e-14));
  CHECK(std::abs(e.y()) <= 1e-15);
  CHECK(std::abs(e.z()) <= 1e-15);
}

TEST_CASE("property: Euler recomposition away from gimbal lock") {
  oracle::Rng rng(43);
  std::uniform_real_distribution<double> u(-oracle::kPi, oracle::kPi), v(-1.5, 1.5);
  for (int i = 0; i < 1000; ++i) {
    const double rx = u(rng), ry = v(rng), rz = u(rng);
    const Matrix3<double> R = oracle::to_eigen(oracle::euler_xyz(rx, ry, rz));
    const Vector3<double> e = euler_from_rotmat(R);
    CHECK(e.x() == doctest::Approx(rx).epsilon(1e-9));
    CHECK(e.y() == doctest::Approx(ry).epsilon(1e-9));
    CHECK(e.z() == doctest::Approx(rz).epsilon(1e-9));
    CHECK((rotmat_from_euler(e) - R).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("euler_from_rotmat gimbal lock sets rz to zero") {
  for (double sign : {1.0, -1.0}) {
    const Matrix3<double> R = oracle::to_eigen(oracle::euler_xyz(0.3, sign * oracle::kPi / 2, 0.4));
    const Vector3<double> e = euler_from_rotmat(R);
    CHECK(e.z() == 0.0);
    CHECK((rotmat_from_euler(e) - R).cwiseAbs().maxCoeff() <= 1e-9);
  }
}
