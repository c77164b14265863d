#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace am {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline constexpr double kDefaultGravity = 9.81;

/// Maps a 3-vector to its skew-symmetric cross-product matrix.
inline Mat3 hat(const Vec3& r) {
  Mat3 s;
  s << 0.0, -r.z(), r.y(),
       r.z(), 0.0, -r.x(),
      -r.y(), r.x(), 0.0;
  return s;
}

/// Inverse of hat(); takes the skew part if the argument is not exactly skew.
inline Vec3 vee(const Mat3& s) {
  return Vec3(0.5 * (s(2, 1) - s(1, 2)),
              0.5 * (s(0, 2) - s(2, 0)),
              0.5 * (s(1, 0) - s(0, 1)));
}

/// Rotation about an arbitrary unit axis (Rodrigues).
inline Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

inline Mat3 rot_x(double a) { return axis_angle(Vec3::UnitX(), a); }
inline Mat3 rot_y(double a) { return axis_angle(Vec3::UnitY(), a); }
inline Mat3 rot_z(double a) { return axis_angle(Vec3::UnitZ(), a); }

/// SO(3) exponential. Safe at small angles.
inline Mat3 so3_exp(const Vec3& w) {
  const double th = w.norm();
  if (th < 1e-12) {
    return Mat3::Identity() + hat(w);
  }
  return Eigen::AngleAxisd(th, w / th).toRotationMatrix();
}

/// SO(3) logarithm, returned as a rotation vector.
inline Vec3 so3_log(const Mat3& R) {
  Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

/// Nearest rotation matrix in the Frobenius sense (polar projection).
inline Mat3 project_to_so3(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  Mat3 V = svd.matrixV();
  Mat3 res = U * V.transpose();
  if (res.determinant() < 0.0) {
    U.col(2) *= -1.0;
    res = U * V.transpose();
  }
  return res;
}

inline double rotation_defect(const Mat3& R) {
  return (R.transpose() * R - Mat3::Identity()).norm() +
         std::abs(R.determinant() - 1.0);
}

inline bool is_rotation(const Mat3& R, double tol = 1e-9) {
  return rotation_defect(R) < tol;
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// 2-norm condition number of a (small dense) matrix.
inline double condition_number(const MatX& A) {
  Eigen::JacobiSVD<MatX> svd(A);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(sv.size() - 1) <= 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return sv(0) / sv(sv.size() - 1);
}

/// Thrown when a matrix inversion is requested beyond the conditioning guard.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr double kCondWarn = 1e8;
inline constexpr double kCondError = 1e12;

/// Dense inverse with a condition-number guard (warn above 1e8, throw above
/// 1e12). Matrices here are at most (n+6)x(n+6), so dense is fine.
inline MatX guarded_inverse(const MatX& A, const char* name,
                            double* cond_out = nullptr) {
  const double c = condition_number(A);
  if (cond_out != nullptr) {
    *cond_out = c;
  }
  if (!(c < kCondError)) {
    throw NumericalError(std::string(name) +
                         ": condition number " + std::to_string(c) +
                         " exceeds hard limit");
  }
  return A.inverse();
}

/// Seventh-order smoothstep segment: position, velocity, acceleration and
/// jerk all vanish at both endpoints, so references built from it keep the
/// thrust-derived desired attitude rate continuous.
struct SmoothSegment {
  double t0 = 0.0;
  double t1 = 1.0;
  VecX start;
  VecX end;

  void eval(double t, VecX& p, VecX& v, VecX& a) const {
    if (t <= t0) {
      p = start;
      v = VecX::Zero(start.size());
      a = VecX::Zero(start.size());
      return;
    }
    if (t >= t1) {
      p = end;
      v = VecX::Zero(start.size());
      a = VecX::Zero(start.size());
      return;
    }
    const double T = t1 - t0;
    const double s = (t - t0) / T;
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double s4 = s3 * s;
    const double s5 = s4 * s;
    const double s6 = s5 * s;
    const double s7 = s6 * s;
    const double b = 35.0 * s4 - 84.0 * s5 + 70.0 * s6 - 20.0 * s7;
    const double bd = (140.0 * s3 - 420.0 * s4 + 420.0 * s5 - 140.0 * s6) / T;
    const double bdd = (420.0 * s2 - 1680.0 * s3 + 2100.0 * s4 - 840.0 * s5) / (T * T);
    const VecX d = end - start;
    p = start + b * d;
    v = bd * d;
    a = bdd * d;
  }
};

}  // namespace am
