#pragma once

#include "ofa/geom.hpp"

#include <array>
#include <string>
#include <vector>

namespace ofa {

inline constexpr int kArmDof = 6;
inline constexpr int kHandDof = 6;

using ArmJoints = std::array<double, kArmDof>;
using HandJoints = std::array<double, kHandDof>;

struct CollisionSphere {
  Vec3 center = Vec3::Zero();  // in the owning link frame
  double radius = 0.0;
};

struct JointLimits {
  double lower = 0.0;
  double upper = 0.0;
};

/// One revolute joint: fixed parent-to-joint transform, rotation axis in the
/// joint frame, then the link geometry riding on the rotated frame.
struct RevoluteLink {
  std::string name;
  Pose origin;
  Vec3 axis = Vec3::UnitZ();
  JointLimits limits;
  std::vector<CollisionSphere> spheres;
};

/// A finger chain rooted at the wrist: one joint per finger, two for the thumb.
struct FingerChain {
  std::string name;
  std::vector<RevoluteLink> joints;
};

/// Serial 6-DoF arm plus a 6-joint dexterous hand, with per-link collision
/// spheres. Immutable after load; all queries are pure.
struct RobotModel {
  std::string name;
  std::array<RevoluteLink, kArmDof> arm;
  Pose tool;  // last arm frame -> wrist frame
  std::vector<CollisionSphere> palm_spheres;  // fixed to the wrist frame
  std::vector<FingerChain> hand;              // chains; 6 joints in total

  int hand_joint_count() const;
  std::size_t hand_sphere_count() const;
  std::size_t arm_sphere_count() const;

  void validate() const;  // throws ConfigError on structural violations
};

struct PlacedSphere {
  Vec3 center = Vec3::Zero();  // world frame
  double radius = 0.0;
};

/// Loads the declarative robot description (JSON). Parse errors carry the
/// line number; structural errors name the offending field.
RobotModel load_robot_model(const std::string& path);

/// Wrist pose in the arm base frame. Throws std::out_of_range naming the
/// joint when q violates its limits.
Pose wrist_pose(const RobotModel& model, const ArmJoints& q);

/// World-frame hand collision spheres for a given wrist pose and finger
/// joints. Count and radii do not depend on the joint values.
std::vector<PlacedSphere> hand_sphere_centers(const RobotModel& model,
                                              const Pose& wrist,
                                              const HandJoints& j);

std::vector<PlacedSphere> arm_sphere_centers(const RobotModel& model,
                                             const ArmJoints& q);

/// Geometric Jacobian of the wrist: columns are [v; w] per arm joint,
/// linear on top. Used by the damped least-squares solver.
Eigen::Matrix<double, 6, kArmDof> wrist_jacobian(const RobotModel& model,
                                                 const ArmJoints& q);

void check_arm_limits(const RobotModel& model, const ArmJoints& q);
void check_hand_limits(const RobotModel& model, const HandJoints& j);

ArmJoints clamp_to_limits(const RobotModel& model, const ArmJoints& q);
HandJoints clamp_hand_to_limits(const RobotModel& model, const HandJoints& j);

}  // namespace ofa
