#pragma once

#include "ofa/camera.hpp"
#include "ofa/dataset.hpp"
#include "ofa/kinematics.hpp"
#include "ofa/perception.hpp"
#include "ofa/planner.hpp"
#include "ofa/policy.hpp"
#include "ofa/render.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ofa {

enum class TaskTemplate { SideGrasp, HandleGrasp, TopPinch, BimanualLift };

TaskTemplate template_from_string(const std::string& name);
std::string template_to_string(TaskTemplate t);

/// Shape of the scripted end trajectory: advance along the palm normal,
/// close the listed finger joints, lift vertically.
struct ExpertProfile {
  double approach_travel = 0.075;  // m along the staged frame's palm axis
  double lift_height = 0.12;       // m along world z
  int approach_steps = 16;
  int close_steps = 10;
  int lift_steps = 16;
  HandJoints open_pose{};
  HandJoints closed_pose{};
};

struct TaskSpec {
  std::string name;
  TaskTemplate tmpl = TaskTemplate::SideGrasp;
  Category category = Category::CylinderGraspable;
  std::string object_name;
  ShapeType object_shape = ShapeType::Cylinder;
  Vec3 object_dims = Vec3::Zero();
  Rgb object_color = {200, 60, 60};
  std::array<double, 4> placement_rect{};  // x_min, x_max, y_min, y_max
  std::array<double, 2> yaw_range{0.0, 6.283185307179586};
  ExpertProfile expert;

  bool bimanual() const { return tmpl == TaskTemplate::BimanualLift; }
};

/// Everything the simulator needs that is not per-scene: robot, rig,
/// furniture, category tables, tolerances.
struct SimConfig {
  RobotModel robot;
  StereoRig rig;
  CropOptions crop;
  CategoryOffsetTable offsets_right;
  CategoryOffsetTable offsets_left;
  NoiseModel noise;
  PlannerParams planner;

  Obstacle table;
  Rgb table_color = {158, 118, 76};
  Pose right_base;
  Pose left_base;
  ArmJoints home_q{};
  HandJoints hand_open{};

  double control_dt = 0.1;
  double contact_band = 0.01;     // m beyond sphere surface that counts as touch
  double grasp_lift = 0.05;       // m
  double pinch_lift = 0.02;       // m
  double tray_lift = 0.05;        // m
  double tray_tilt_deg = 10.0;
  int max_rollout_steps = 150;
  double jitter_translation = 0.003;  // m, per waypoint (bounded)
  double jitter_rotation = 0.015;     // rad, per waypoint (bounded)

  std::map<std::string, TaskSpec> tasks;

  const TaskSpec& task(const std::string& name) const;
  double table_top_z() const;
};

struct SceneConfig {
  std::string task;
  std::array<double, 4> placement_rect{};  // zeros: use the task default
  Vec3 placement_offset = Vec3::Zero();
  BackgroundSpec background;
  std::uint64_t seed = 0;
};

struct Scene {
  TaskSpec task;
  ObjectInstance object;   // true_pose holds the initial placement
  BackgroundSpec background;
  std::uint64_t seed = 0;
  std::string digest;
  double rest_z = 0.0;     // object center height at rest
};

/// Mutable simulator state: one or two arms plus the object.
struct ArmState {
  Pose base;
  std::string hand_name;  // "right" | "left"
  ArmJoints q{};
  HandJoints hand{};
};

struct SimState {
  std::vector<ArmState> arms;
  Pose object_pose;
  bool attached = false;
  Pose attach_offset;  // grab frame -> object, frozen at attach time

  Pose wrist_world(const RobotModel& model, std::size_t arm) const;
};

Scene build_scene(const SimConfig& config, const SceneConfig& scene_config);

SimState initial_state(const SimConfig& config, const Scene& scene);

/// Stereo render of the current state (ids: 1 table, 2 object, 3+2i/4+2i
/// arm/hand spheres of arm i).
struct StereoRender {
  RenderOutput left;
  RenderOutput right;
};
StereoRender render_scene(const SimConfig& config, const Scene& scene, const SimState& state);

inline constexpr std::uint16_t kTableEntity = 1;
inline constexpr std::uint16_t kObjectEntity = 2;

/// Canonical representative of a rotation-symmetric pose: cylinders keep
/// their axis, the spin about it is reset against the world x direction.
Pose canonicalize_symmetric_pose(const Pose& pose, ShapeType shape);

/// Contact + lift predicates per task template; evaluated on ground truth.
bool success_check(const SimConfig& config, const Scene& scene, const SimState& state);

/// Object rigidly follows the grasp frame once the contact predicate holds.
void update_attachment(const SimConfig& config, const Scene& scene, SimState& state);

struct ExpertResult {
  bool success = false;
  std::string failure;  // empty on success
  std::vector<RecordedEpisode> episodes;  // one per hand
};

/// Demonstration oracle: ground-truth staging, planned arrival, then the
/// task's parametric end trajectory with bounded seeded jitter. Emits only
/// validated episodes covering the post-arrival segment.
ExpertResult scripted_expert(const SimConfig& config, const Scene& scene,
                             std::uint64_t seed);

enum class FailureReason { None, Timeout, Dropped, PlannerFailure, PerceptionFailure };
std::string failure_to_string(FailureReason r);

struct RolloutResult {
  bool success = false;
  FailureReason failure = FailureReason::None;
  int steps = 0;
  Pose final_object_pose;
  Pose final_wrist_pose;
};

struct RolloutOptions {
  int max_steps = 150;
  std::uint64_t seed = 0;
  std::string log_dir;  // empty: no logging
};

/// Full evaluation pipeline: perception, staged-pose arrival, then the
/// policy loop with chunk blending. Bimanual tasks take one policy per
/// hand (right first).
RolloutResult execute_rollout(const SimConfig& config, const Scene& scene,
                              const std::vector<const PolicyParams*>& policies,
                              const RolloutOptions& options);

}  // namespace ofa
