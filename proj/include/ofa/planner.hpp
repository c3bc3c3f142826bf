#pragma once

#include "ofa/geom.hpp"
#include "ofa/kinematics.hpp"
#include "ofa/rng.hpp"
#include "ofa/shapes.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ofa {

struct PlannerParams {
  double collision_margin = 0.005;   // m added around every obstacle
  double sample_step = 0.05;         // rad, max per-joint step between waypoints
  double edge_resolution = 0.01;     // rad, collision validation resolution
  int shortcut_iterations = 200;
  int max_samples = 50000;
  double timeout_seconds = 5.0;
  double timestep = 0.1;             // s between emitted waypoints
  double goal_bias = 0.1;
};

struct IkParams {
  double position_tolerance = 1e-3;  // m
  double rotation_tolerance = 0.01;  // rad
  int max_iterations = 200;
  int restarts = 8;
  double damping = 0.05;
};

/// True when any robot sphere (arm + hand at the given wrist) comes within
/// margin of any obstacle.
bool collision_check(const RobotModel& model, const ArmJoints& q, const HandJoints& hand,
                     const std::vector<Obstacle>& obstacles, double margin);

struct IkResult {
  bool success = false;
  ArmJoints joints{};
  double position_residual = 0.0;
  double rotation_residual = 0.0;
};

/// Damped least-squares pose IK with seeded random restarts. On failure the
/// result carries the best residual reached.
IkResult solve_ik(const RobotModel& model, const Pose& target_wrist, const ArmJoints& q_init,
                  const IkParams& params = {}, std::uint64_t restart_seed = 7);

struct JointTrajectory {
  std::vector<ArmJoints> waypoints;
  std::vector<double> timestamps;  // uniform, strictly increasing
};

enum class PlanStatus { Success, IkFailure, GoalInCollision, StartInCollision, Timeout };

struct PlanResult {
  PlanStatus status = PlanStatus::Timeout;
  JointTrajectory trajectory;   // valid when status == Success
  ArmJoints goal_joints{};
  double best_ik_residual = 0.0;
};

/// Collision-free joint-space plan from q_start to an IK solution of the
/// target wrist pose: bidirectional RRT with greedy connection, then
/// shortcut smoothing. Deterministic under the seed.
PlanResult plan(const RobotModel& model, const ArmJoints& q_start, const Pose& target_wrist,
                const HandJoints& hand, const std::vector<Obstacle>& obstacles,
                const PlannerParams& params = {}, std::uint64_t seed = 1);

/// Joint-space path length (sum of step norms); smoothing may only shrink it.
double path_length(const std::vector<ArmJoints>& waypoints);

}  // namespace ofa
