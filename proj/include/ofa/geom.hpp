#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>

namespace ofa {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Proper rotation (3x3 orthonormal, det +1). Construction through
/// `from_matrix` validates; group operations stay closed.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  /// Validates orthonormality and det(+1); throws std::invalid_argument.
  static Rotation from_matrix(const Mat3& m);

  static Rotation rot_x(double angle);
  static Rotation rot_y(double angle);
  static Rotation rot_z(double angle);

  const Mat3& matrix() const { return m_; }
  Rotation transposed() const { return Rotation(m_.transpose(), Trusted{}); }

  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  Rotation operator*(const Rotation& other) const {
    return Rotation(m_ * other.m_, Trusted{});
  }

  /// Max elementwise deviation of R^T R from identity plus |det - 1|.
  double orthonormality_error() const;

 private:
  struct Trusted {};
  Rotation(const Mat3& m, Trusted) : m_(m) {}
  Mat3 m_;
};

/// Rotation vector: unit axis scaled by angle in radians. Magnitudes above
/// pi are folded back into [0, pi] on construction (flipping the axis).
class AxisAngle {
 public:
  AxisAngle() : v_(Vec3::Zero()) {}
  explicit AxisAngle(const Vec3& v);

  const Vec3& vector() const { return v_; }
  double angle() const { return v_.norm(); }

 private:
  Vec3 v_;
};

/// Rigid transform: rotation followed by translation, meters.
struct Pose {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return Pose{}; }
  static Pose from_rt(const Rotation& r, const Vec3& t) { return Pose{r, t}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

/// base * delta: the delta is expressed in the base rotation's body frame.
Rotation rot_update(const Rotation& base, const Rotation& delta);

/// Logarithm to axis-angle. Zero rotation maps to the zero vector; at angle
/// pi the axis sign is canonical (first nonzero component positive).
AxisAngle to_axis_angle(const Rotation& r);

/// Rodrigues' formula.
Rotation from_axis_angle(const AxisAngle& aa);

struct RelativePose {
  Vec3 delta_p;          // t_target - t_reference, reference frame of the common base
  AxisAngle delta_omega; // log(R_target * R_reference^T)
};

/// Pose of `target` relative to `reference`, base-frame convention: the
/// translation delta is a plain difference and the rotation delta is a
/// left-multiplied update. Inverse of `apply_relative`.
RelativePose relative_pose(const Pose& reference, const Pose& target);

Pose apply_relative(const Pose& reference, const Vec3& delta_p,
                    const AxisAngle& delta_omega);

/// Wire layout used by every file format: row-major 3x3 rotation, then
/// translation, 12 doubles.
std::array<double, 12> pose_to_array(const Pose& p);
Pose pose_from_array(const std::array<double, 12>& a);

}  // namespace ofa
