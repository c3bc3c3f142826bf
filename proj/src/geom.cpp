#include "ofa/geom.hpp"

#include <Eigen/LU>

#include <cmath>
#include <stdexcept>

namespace ofa {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

// Flip so the first component that is not (numerically) zero is positive.
Vec3 canonical_sign(const Vec3& axis) {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(axis[i]) > 1e-12) {
      return axis[i] > 0.0 ? axis : Vec3(-axis);
    }
  }
  return axis;
}
}  // namespace

Rotation Rotation::from_matrix(const Mat3& m) {
  Rotation r(m, Trusted{});
  if (r.orthonormality_error() > 1e-7) {
    throw std::invalid_argument("Rotation::from_matrix: matrix is not orthonormal");
  }
  return r;
}

Rotation Rotation::rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return Rotation(m, Trusted{});
}

Rotation Rotation::rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, 0, s,
       0, 1, 0,
       -s, 0, c;
  return Rotation(m, Trusted{});
}

Rotation Rotation::rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return Rotation(m, Trusted{});
}

double Rotation::orthonormality_error() const {
  const Mat3 g = m_.transpose() * m_ - Mat3::Identity();
  return g.cwiseAbs().maxCoeff() + std::abs(m_.determinant() - 1.0);
}

AxisAngle::AxisAngle(const Vec3& v) : v_(v) {
  double angle = v_.norm();
  if (angle <= kPi) {
    if (std::abs(angle - kPi) < 1e-12 && angle > 0.0) {
      v_ = canonical_sign(v_ / angle) * angle;
    }
    return;
  }
  const Vec3 axis = v_ / angle;
  angle = std::fmod(angle, 2.0 * kPi);
  if (angle > kPi) {
    v_ = -axis * (2.0 * kPi - angle);
  } else {
    v_ = axis * angle;
  }
  if (std::abs(v_.norm() - kPi) < 1e-12) {
    v_ = canonical_sign(v_ / v_.norm()) * v_.norm();
  }
}

Pose compose(const Pose& a, const Pose& b) {
  return Pose{a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Pose inverse(const Pose& p) {
  const Rotation rt = p.rotation.transposed();
  return Pose{rt, -(rt * p.translation)};
}

Rotation rot_update(const Rotation& base, const Rotation& delta) {
  return base * delta;
}

AxisAngle to_axis_angle(const Rotation& r) {
  const Mat3& m = r.matrix();
  const Vec3 vee(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  const double s = 0.5 * vee.norm();                       // sin(angle)
  const double c = 0.5 * (m.trace() - 1.0);                // cos(angle)
  const double angle = std::atan2(s, c);

  if (angle < 1e-12) {
    return AxisAngle(Vec3::Zero());
  }
  if (kPi - angle > 1e-6) {
    return AxisAngle(vee / (2.0 * s) * angle);
  }

  // Near pi the vee part loses precision; recover the axis from the
  // symmetric part, outer = (R + I)/2 = axis axis^T at exactly pi.
  const Mat3 outer = 0.5 * (m + Mat3::Identity());
  int k = 0;
  for (int i = 1; i < 3; ++i) {
    if (outer(i, i) > outer(k, k)) k = i;
  }
  Vec3 axis;
  axis[k] = std::sqrt(std::max(outer(k, k), 0.0));
  for (int i = 0; i < 3; ++i) {
    if (i != k) axis[i] = outer(i, k) / axis[k];
  }
  axis.normalize();
  return AxisAngle(canonical_sign(axis) * angle);
}

Rotation from_axis_angle(const AxisAngle& aa) {
  const double angle = aa.angle();
  if (angle < 1e-12) {
    const Mat3 k = skew(aa.vector());
    return Rotation::from_matrix(Mat3::Identity() + k);  // first order; angle ~ 0
  }
  const Vec3 axis = aa.vector() / angle;
  const Mat3 k = skew(axis);
  const Mat3 m = Mat3::Identity() + std::sin(angle) * k +
                 (1.0 - std::cos(angle)) * (k * k);
  return Rotation::from_matrix(m);
}

RelativePose relative_pose(const Pose& reference, const Pose& target) {
  RelativePose rel;
  rel.delta_p = target.translation - reference.translation;
  rel.delta_omega = to_axis_angle(target.rotation * reference.rotation.transposed());
  return rel;
}

Pose apply_relative(const Pose& reference, const Vec3& delta_p,
                    const AxisAngle& delta_omega) {
  return Pose{from_axis_angle(delta_omega) * reference.rotation,
              reference.translation + delta_p};
}

std::array<double, 12> pose_to_array(const Pose& p) {
  std::array<double, 12> a;
  const Mat3& m = p.rotation.matrix();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) a[static_cast<std::size_t>(i * 3 + j)] = m(i, j);
  }
  a[9] = p.translation.x();
  a[10] = p.translation.y();
  a[11] = p.translation.z();
  return a;
}

Pose pose_from_array(const std::array<double, 12>& a) {
  Mat3 m;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = a[static_cast<std::size_t>(i * 3 + j)];
  }
  return Pose{Rotation::from_matrix(m), Vec3(a[9], a[10], a[11])};
}

}  // namespace ofa
