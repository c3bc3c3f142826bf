#include "ofa/env.hpp"

#include "ofa/digest.hpp"
#include "ofa/errors.hpp"
#include "ofa/nn.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ofa {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

const Rgb kArmColor = {92, 96, 104};
const Rgb kHandColor = {176, 178, 182};

Pose to_base_frame(const Pose& base, const Pose& world) {
  return compose(inverse(base), world);
}

Pose to_world_frame(const Pose& base, const Pose& local) { return compose(base, local); }

}  // namespace

TaskTemplate template_from_string(const std::string& name) {
  if (name == "side-grasp") return TaskTemplate::SideGrasp;
  if (name == "handle-grasp") return TaskTemplate::HandleGrasp;
  if (name == "top-pinch") return TaskTemplate::TopPinch;
  if (name == "bimanual-lift") return TaskTemplate::BimanualLift;
  throw ConfigError("unknown task template '" + name + "'");
}

std::string template_to_string(TaskTemplate t) {
  switch (t) {
    case TaskTemplate::SideGrasp: return "side-grasp";
    case TaskTemplate::HandleGrasp: return "handle-grasp";
    case TaskTemplate::TopPinch: return "top-pinch";
    case TaskTemplate::BimanualLift: return "bimanual-lift";
  }
  return "side-grasp";
}

const TaskSpec& SimConfig::task(const std::string& name) const {
  const auto it = tasks.find(name);
  if (it == tasks.end()) throw ConfigError("unknown task '" + name + "'");
  return it->second;
}

double SimConfig::table_top_z() const {
  return table.pose.translation.z() + 0.5 * table.dims.z();
}

Pose SimState::wrist_world(const RobotModel& model, std::size_t arm) const {
  return compose(arms[arm].base, wrist_pose(model, arms[arm].q));
}

Scene build_scene(const SimConfig& config, const SceneConfig& scene_config) {
  const TaskSpec& task = config.task(scene_config.task);

  std::array<double, 4> rect = scene_config.placement_rect;
  if (rect == std::array<double, 4>{}) rect = task.placement_rect;
  if (!(rect[0] < rect[1]) || !(rect[2] < rect[3])) {
    throw ConfigError("build_scene: empty placement rectangle for task " + task.name);
  }

  Rng rng(scene_config.seed);
  const double x = rng.uniform(rect[0], rect[1]) + scene_config.placement_offset.x();
  const double y = rng.uniform(rect[2], rect[3]) + scene_config.placement_offset.y();
  const double yaw = rng.uniform(task.yaw_range[0], task.yaw_range[1]);

  Scene scene;
  scene.task = task;
  scene.background = scene_config.background;
  scene.seed = scene_config.seed;

  const double half_height =
      task.object_shape == ShapeType::Cylinder ? task.object_dims.y() : 0.5 * task.object_dims.z();
  scene.rest_z = config.table_top_z() + half_height;

  scene.object.name = task.object_name;
  scene.object.category = task.category;
  scene.object.shape = task.object_shape;
  scene.object.dims = task.object_dims;
  scene.object.true_pose = Pose{Rotation::rot_z(yaw), Vec3(x, y, scene.rest_z)};
  scene.object.validate();

  std::ostringstream os;
  os << task.name << "|" << scene_config.seed << "|" << rect[0] << "," << rect[1] << ","
     << rect[2] << "," << rect[3] << "|" << scene_config.placement_offset.x() << ","
     << scene_config.placement_offset.y() << "|" << background_to_string(scene.background.id);
  scene.digest = digest_string(os.str());
  return scene;
}

SimState initial_state(const SimConfig& config, const Scene& scene) {
  SimState state;
  ArmState right{config.right_base, "right", config.home_q, config.hand_open};
  state.arms.push_back(right);
  if (scene.task.bimanual()) {
    ArmState left{config.left_base, "left", config.home_q, config.hand_open};
    state.arms.push_back(left);
  }
  state.object_pose = scene.object.true_pose;
  return state;
}

StereoRender render_scene(const SimConfig& config, const Scene& scene, const SimState& state) {
  std::vector<DrawPrimitive> prims;
  prims.push_back({config.table, config.table_color, kTableEntity});
  prims.push_back({Obstacle{scene.object.shape, state.object_pose, scene.object.dims},
                   scene.task.object_color, kObjectEntity});

  for (std::size_t i = 0; i < state.arms.size(); ++i) {
    const auto& arm = state.arms[i];
    const Pose wrist = state.wrist_world(config.robot, i);
    const auto arm_id = static_cast<std::uint16_t>(3 + 2 * i);
    const auto hand_id = static_cast<std::uint16_t>(4 + 2 * i);
    for (const auto& s : arm_sphere_centers(config.robot, arm.q)) {
      prims.push_back({Obstacle::sphere(arm.base.apply(s.center), s.radius), kArmColor, arm_id});
    }
    for (const auto& s : hand_sphere_centers(config.robot, wrist, arm.hand)) {
      prims.push_back({Obstacle::sphere(s.center, s.radius), kHandColor, hand_id});
    }
  }

  StereoRender out;
  out.left = render_view(config.rig.left, config.rig.left_extrinsic, prims, scene.background);
  out.right = render_view(config.rig.right, config.rig.right_extrinsic, prims, scene.background);
  return out;
}

Pose canonicalize_symmetric_pose(const Pose& pose, ShapeType shape) {
  if (shape != ShapeType::Cylinder) return pose;
  // Keep the cylinder axis, reset the spin: x axis aligned with world x
  // projected onto the plane normal to the axis.
  const Vec3 axis = pose.rotation.matrix().col(2);
  Vec3 x = Vec3::UnitX() - Vec3::UnitX().dot(axis) * axis;
  if (x.norm() < 1e-6) {
    x = Vec3::UnitY() - Vec3::UnitY().dot(axis) * axis;
  }
  x.normalize();
  const Vec3 y = axis.cross(x);
  Mat3 m;
  m.col(0) = x;
  m.col(1) = y;
  m.col(2) = axis;
  return Pose{Rotation::from_matrix(m), pose.translation};
}

namespace {

struct ChainRanges {
  std::pair<std::size_t, std::size_t> thumb{0, 0};   // [begin, end)
  std::pair<std::size_t, std::size_t> index{0, 0};
  std::vector<std::pair<std::size_t, std::size_t>> fingers;  // non-thumb chains
};

ChainRanges chain_sphere_ranges(const RobotModel& model) {
  ChainRanges ranges;
  std::size_t cursor = model.palm_spheres.size();
  bool index_seen = false;
  for (const auto& chain : model.hand) {
    std::size_t count = 0;
    for (const auto& joint : chain.joints) count += joint.spheres.size();
    const std::pair<std::size_t, std::size_t> range{cursor, cursor + count};
    if (chain.name.find("thumb") != std::string::npos) {
      ranges.thumb = range;
    } else {
      ranges.fingers.push_back(range);
      if (!index_seen) {
        ranges.index = range;
        index_seen = true;
      }
    }
    cursor += count;
  }
  return ranges;
}

bool any_contact(const std::vector<PlacedSphere>& spheres,
                 std::pair<std::size_t, std::size_t> range, const Obstacle& object,
                 double band) {
  for (std::size_t i = range.first; i < range.second; ++i) {
    if (obstacle_distance(object, spheres[i].center) - spheres[i].radius <= band) return true;
  }
  return false;
}

bool hand_contact(const SimConfig& config, const Scene& scene, const SimState& state,
                  std::size_t arm_index) {
  const Obstacle object{scene.object.shape, state.object_pose, scene.object.dims};
  const Pose wrist = state.wrist_world(config.robot, arm_index);
  const auto spheres =
      hand_sphere_centers(config.robot, wrist, state.arms[arm_index].hand);
  static thread_local std::map<const RobotModel*, ChainRanges> cache;
  auto it = cache.find(&config.robot);
  if (it == cache.end()) it = cache.emplace(&config.robot, chain_sphere_ranges(config.robot)).first;
  const ChainRanges& ranges = it->second;

  if (!any_contact(spheres, ranges.thumb, object, config.contact_band)) return false;
  if (scene.task.tmpl == TaskTemplate::TopPinch) {
    return any_contact(spheres, ranges.index, object, config.contact_band);
  }
  for (const auto& r : ranges.fingers) {
    if (any_contact(spheres, r, object, config.contact_band)) return true;
  }
  return false;
}

Pose two_hand_frame(const Pose& right_wrist, const Pose& left_wrist) {
  Vec3 x = right_wrist.translation - left_wrist.translation;
  if (x.norm() < 1e-9) x = Vec3::UnitX();
  x.normalize();
  Vec3 z = Vec3::UnitZ() - Vec3::UnitZ().dot(x) * x;
  if (z.norm() < 1e-9) z = right_wrist.rotation.matrix().col(2);
  z.normalize();
  const Vec3 y = z.cross(x);
  Mat3 m;
  m.col(0) = x;
  m.col(1) = y;
  m.col(2) = z;
  return Pose{Rotation::from_matrix(m),
              0.5 * (right_wrist.translation + left_wrist.translation)};
}

Pose grab_frame(const SimConfig& config, const SimState& state) {
  if (state.arms.size() == 1) return state.wrist_world(config.robot, 0);
  return two_hand_frame(state.wrist_world(config.robot, 0),
                        state.wrist_world(config.robot, 1));
}

bool contact_predicate(const SimConfig& config, const Scene& scene, const SimState& state) {
  for (std::size_t i = 0; i < state.arms.size(); ++i) {
    if (!hand_contact(config, scene, state, i)) return false;
  }
  return true;
}

}  // namespace

void update_attachment(const SimConfig& config, const Scene& scene, SimState& state) {
  if (!state.attached) {
    if (contact_predicate(config, scene, state)) {
      state.attached = true;
      state.attach_offset = compose(inverse(grab_frame(config, state)), state.object_pose);
    }
    return;
  }
  state.object_pose = compose(grab_frame(config, state), state.attach_offset);
}

bool success_check(const SimConfig& config, const Scene& scene, const SimState& state) {
  if (!contact_predicate(config, scene, state)) return false;
  const double lift = state.object_pose.translation.z() - scene.rest_z;
  switch (scene.task.tmpl) {
    case TaskTemplate::SideGrasp:
    case TaskTemplate::HandleGrasp:
      return lift >= config.grasp_lift;
    case TaskTemplate::TopPinch:
      return lift >= config.pinch_lift;
    case TaskTemplate::BimanualLift: {
      if (lift < config.tray_lift) return false;
      const Vec3 up = state.object_pose.rotation.matrix().col(2);
      const double tilt = std::acos(std::clamp(up.dot(Vec3::UnitZ()), -1.0, 1.0));
      return tilt < config.tray_tilt_deg * kPi / 180.0;
    }
  }
  return false;
}

namespace {

/// Staged wrist poses (world frame), one per arm, nearest-side assignment
/// for the bimanual task.
std::vector<Pose> staged_poses(const SimConfig& config, const Scene& scene,
                               const Pose& object_estimate, const SimState& state) {
  const Pose canonical = canonicalize_symmetric_pose(object_estimate, scene.object.shape);
  std::vector<Pose> out;
  if (!scene.task.bimanual()) {
    out.push_back(
        pre_manipulation_pose(canonical, config.offsets_right, scene.task.category));
    return out;
  }
  const Pose a = pre_manipulation_pose(canonical, config.offsets_right, scene.task.category);
  const Pose b = pre_manipulation_pose(canonical, config.offsets_left, scene.task.category);
  const Vec3 rb = state.arms[0].base.translation;
  const Vec3 lb = state.arms[1].base.translation;
  const double straight = (a.translation - rb).squaredNorm() + (b.translation - lb).squaredNorm();
  const double crossed = (b.translation - rb).squaredNorm() + (a.translation - lb).squaredNorm();
  if (straight <= crossed) {
    out.push_back(a);
    out.push_back(b);
  } else {
    out.push_back(b);
    out.push_back(a);
  }
  return out;
}

std::vector<Obstacle> planning_obstacles(const SimConfig& config, const Scene& scene,
                                         const SimState& state, const Pose& into_base) {
  std::vector<Obstacle> out;
  Obstacle table = config.table;
  table.pose = compose(into_base, table.pose);
  out.push_back(table);
  Obstacle object{scene.object.shape, compose(into_base, state.object_pose),
                  scene.object.dims};
  out.push_back(object);
  return out;
}

/// Plans every arm to its staged pose and teleports through the result.
/// Returns false when any plan fails.
bool arrive_at_staged(const SimConfig& config, const Scene& scene, SimState& state,
                      const std::vector<Pose>& staged_world, std::uint64_t seed) {
  for (std::size_t i = 0; i < state.arms.size(); ++i) {
    auto& arm = state.arms[i];
    const Pose into_base = inverse(arm.base);
    const Pose target = compose(into_base, staged_world[i]);
    const auto obstacles = planning_obstacles(config, scene, state, into_base);
    const PlanResult plan_result =
        plan(config.robot, arm.q, target, arm.hand, obstacles, config.planner,
             derive_seed(seed, 900 + i));
    if (plan_result.status != PlanStatus::Success) return false;
    arm.q = plan_result.trajectory.waypoints.back();
  }
  return true;
}

IkParams tracking_ik() {
  IkParams p;
  p.restarts = 0;
  p.max_iterations = 100;
  return p;
}

/// Nominal end-trajectory wrist pose at step t (world frame).
Pose expert_waypoint(const TaskSpec& task, const Pose& staged_world, int t) {
  const auto& e = task.expert;
  const int total = e.approach_steps + e.close_steps + e.lift_steps;
  const int tt = std::clamp(t, 0, total);
  double advance = 0.0;
  double lift = 0.0;
  if (tt <= e.approach_steps) {
    advance = e.approach_travel * static_cast<double>(tt) / e.approach_steps;
  } else {
    advance = e.approach_travel;
    if (tt > e.approach_steps + e.close_steps) {
      lift = task.expert.lift_height *
             static_cast<double>(tt - e.approach_steps - e.close_steps) / e.lift_steps;
    }
  }
  Pose out = staged_world;
  out.translation += staged_world.rotation * Vec3(advance, 0, 0) + Vec3(0, 0, lift);
  return out;
}

HandJoints expert_hand(const TaskSpec& task, int t) {
  const auto& e = task.expert;
  const int begin = e.approach_steps;
  const int end = e.approach_steps + e.close_steps;
  double s = 0.0;
  if (t >= end) {
    s = 1.0;
  } else if (t > begin) {
    s = static_cast<double>(t - begin) / e.close_steps;
  }
  HandJoints out{};
  for (int i = 0; i < kHandDof; ++i) {
    out[static_cast<std::size_t>(i)] =
        e.open_pose[static_cast<std::size_t>(i)] +
        s * (e.closed_pose[static_cast<std::size_t>(i)] - e.open_pose[static_cast<std::size_t>(i)]);
  }
  return out;
}

Pose jittered(const Pose& pose, double max_t, double max_r, Rng& rng) {
  Pose out = pose;
  out.translation += Vec3(rng.uniform(-max_t, max_t), rng.uniform(-max_t, max_t),
                          rng.uniform(-max_t, max_t));
  Vec3 axis(rng.gaussian(), rng.gaussian(), rng.gaussian());
  while (axis.norm() < 1e-9) axis = Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
  axis.normalize();
  out.rotation = from_axis_angle(AxisAngle(axis * rng.uniform(-max_r, max_r))) * out.rotation;
  return out;
}

}  // namespace

ExpertResult scripted_expert(const SimConfig& config, const Scene& scene,
                             std::uint64_t seed) {
  ExpertResult result;
  SimState state = initial_state(config, scene);

  const auto staged = staged_poses(config, scene, scene.object.true_pose, state);
  if (!arrive_at_staged(config, scene, state, staged, seed)) {
    result.failure = "planner";
    return result;
  }

  const auto& e = scene.task.expert;
  const int total_steps = e.approach_steps + e.close_steps + e.lift_steps;
  Rng jitter_rng(derive_seed(seed, 71));

  // Snap exactly onto the staged pose before recording: the plan endpoint
  // is only within the planner's IK tolerance.
  for (std::size_t i = 0; i < state.arms.size(); ++i) {
    auto& arm = state.arms[i];
    const Pose target = to_base_frame(arm.base, expert_waypoint(scene.task, staged[i], 0));
    const IkResult snap = solve_ik(config.robot, target, arm.q, tracking_ik(),
                                   derive_seed(seed, 60 + i));
    if (!snap.success) {
      result.failure = "ik";
      return result;
    }
    arm.q = snap.joints;
    arm.hand = expert_hand(scene.task, 0);
  }

  std::vector<RecordedEpisode> episodes(state.arms.size());
  for (std::size_t i = 0; i < state.arms.size(); ++i) {
    episodes[i].meta.task = scene.task.name;
    episodes[i].meta.hand = state.arms[i].hand_name;
    episodes[i].meta.pre_manip_pose = to_base_frame(state.arms[i].base, staged[i]);
    episodes[i].meta.object = scene.object;
    episodes[i].meta.scene_digest = scene.digest;
  }

  for (int t = 0; t <= total_steps; ++t) {
    const StereoRender frames = render_scene(config, scene, state);

    // Commanded targets leading out of this step, shared across arms so the
    // recorded data stays synchronized.
    std::vector<Pose> next_targets(state.arms.size());
    const HandJoints next_hand = expert_hand(scene.task, std::min(t + 1, total_steps));
    for (std::size_t i = 0; i < state.arms.size(); ++i) {
      Pose nominal = expert_waypoint(scene.task, staged[i], std::min(t + 1, total_steps));
      if (t + 1 <= total_steps) {
        nominal = jittered(nominal, config.jitter_translation, config.jitter_rotation,
                           jitter_rng);
      }
      next_targets[i] = nominal;
    }

    for (std::size_t i = 0; i < state.arms.size(); ++i) {
      StepData step;
      step.wrist_pose = wrist_pose(config.robot, state.arms[i].q);
      step.arm_joints = state.arms[i].q;
      step.hand_joints = state.arms[i].hand;
      step.action_wrist_pose = to_base_frame(state.arms[i].base, next_targets[i]);
      step.action_hand_joints = next_hand;
      step.timestamp = static_cast<double>(t) * config.control_dt;
      episodes[i].meta.steps.push_back(step);
      episodes[i].left_frames.push_back(frames.left.image);
      episodes[i].right_frames.push_back(frames.right.image);
    }

    if (t == total_steps) break;

    for (std::size_t i = 0; i < state.arms.size(); ++i) {
      auto& arm = state.arms[i];
      const Pose target = to_base_frame(arm.base, next_targets[i]);
      const IkResult ik = solve_ik(config.robot, target, arm.q, tracking_ik(),
                                   derive_seed(seed, 600 + static_cast<std::uint64_t>(t) * 4 + i));
      if (!ik.success) {
        result.failure = "ik";
        return result;
      }
      arm.q = ik.joints;
      arm.hand = clamp_hand_to_limits(config.robot, next_hand);
    }
    update_attachment(config, scene, state);
  }

  if (!success_check(config, scene, state)) {
    result.failure = "success-check";
    return result;
  }
  result.success = true;
  result.episodes = std::move(episodes);
  return result;
}

std::string failure_to_string(FailureReason r) {
  switch (r) {
    case FailureReason::None: return "none";
    case FailureReason::Timeout: return "timeout";
    case FailureReason::Dropped: return "dropped";
    case FailureReason::PlannerFailure: return "planner-failure";
    case FailureReason::PerceptionFailure: return "perception-failure";
  }
  return "none";
}

namespace {

Observation make_observation(const SimConfig& config, const SimState& state,
                             std::size_t arm_index, const StereoRender& frames,
                             const PolicyParams& params, const Pose& staged_base) {
  Observation obs;
  const auto& arm = state.arms[arm_index];
  const Pose wrist_base = wrist_pose(config.robot, arm.q);

  CropOptions crop = config.crop;
  crop.crop_size = params.config.crop_size;
  if (params.config.hand_focus) {
    const Pose wrist_world = compose(arm.base, wrist_base);
    auto focus = extract_hand_focus(config.rig, config.robot, wrist_world, arm.hand,
                                    frames.left.image, frames.right.image, crop);
    obs.left = std::move(focus.left_crop);
    obs.right = std::move(focus.right_crop);
  } else {
    obs.left = bilinear_resize(frames.left.image, 0, 0, frames.left.image.width - 1,
                               frames.left.image.height - 1, crop.crop_size, crop.crop_size);
    obs.right = bilinear_resize(frames.right.image, 0, 0, frames.right.image.width - 1,
                                frames.right.image.height - 1, crop.crop_size, crop.crop_size);
  }

  StepData pseudo;
  pseudo.wrist_pose = wrist_base;
  pseudo.hand_joints = arm.hand;
  obs.proprio = params.config.relative ? encode_relative_proprio(pseudo, staged_base)
                                       : encode_absolute_proprio(pseudo);
  return obs;
}

Pose action_to_target(const std::array<float, kActionDim>& action, bool relative,
                      const Pose& staged_base) {
  const Vec3 dp(action[0], action[1], action[2]);
  const AxisAngle dw(Vec3(action[3], action[4], action[5]));
  if (relative) return apply_relative(staged_base, dp, dw);
  return Pose{from_axis_angle(dw), dp};
}

}  // namespace

RolloutResult execute_rollout(const SimConfig& config, const Scene& scene,
                              const std::vector<const PolicyParams*>& policies,
                              const RolloutOptions& options) {
  RolloutResult result;
  SimState state = initial_state(config, scene);

  const std::size_t arm_count = state.arms.size();
  if (policies.size() != arm_count) {
    throw ConfigError("execute_rollout: task needs " + std::to_string(arm_count) +
                      " policies, got " + std::to_string(policies.size()));
  }
  for (const auto* p : policies) {
    if (!p->trained) throw DataError("execute_rollout: untrained policy parameters");
  }
  const bool arrival = policies[0]->config.arrival;

  std::vector<Pose> staged_base(arm_count, Pose::identity());
  Mask perception_mask;
  if (arrival) {
    Rng locate_rng(derive_seed(options.seed, 11));
    const StereoRender first = render_scene(config, scene, state);
    std::vector<SceneEntity> entities = {{&scene.object, kObjectEntity}};
    const LocateResult located =
        locate_object(entities, first.left, scene.object.name, config.noise, locate_rng);
    if (located.status != LocateStatus::Found) {
      result.failure = FailureReason::PerceptionFailure;
      return result;
    }
    perception_mask = located.estimate.pixel_mask;

    const auto staged_world = staged_poses(config, scene, located.estimate.pose, state);
    if (!arrive_at_staged(config, scene, state, staged_world, options.seed)) {
      result.failure = FailureReason::PlannerFailure;
      return result;
    }
    for (std::size_t i = 0; i < arm_count; ++i) {
      staged_base[i] = to_base_frame(state.arms[i].base, staged_world[i]);
    }
  }

  std::vector<PolicyRuntime> runtimes;
  std::vector<ChunkAggregator> aggregators;
  runtimes.reserve(arm_count);
  for (std::size_t i = 0; i < arm_count; ++i) {
    runtimes.emplace_back(*policies[i]);
    aggregators.emplace_back(policies[i]->config.k, policies[i]->config.aggregate_m);
  }

  RecordedEpisode log;  // populated only when logging
  const bool logging = !options.log_dir.empty();

  const int max_steps = options.max_steps > 0 ? options.max_steps : config.max_rollout_steps;
  for (int t = 0; t < max_steps; ++t) {
    const StereoRender frames = render_scene(config, scene, state);

    for (std::size_t i = 0; i < arm_count; ++i) {
      const PolicyParams& params = *policies[i];
      const Observation obs =
          make_observation(config, state, i, frames, params, staged_base[i]);

      aggregators[i].push(t, runtimes[i].infer(obs));
      const auto action = aggregators[i].action_at(t);

      auto& arm = state.arms[i];
      const Pose target = action_to_target(action, params.config.relative, staged_base[i]);
      if (logging && i == 0) {
        StepData step;
        step.wrist_pose = wrist_pose(config.robot, arm.q);
        step.arm_joints = arm.q;
        step.hand_joints = arm.hand;
        step.action_wrist_pose = target;
        step.action_hand_joints = arm.hand;
        step.timestamp = static_cast<double>(t) * config.control_dt;
        log.meta.steps.push_back(step);
        log.left_frames.push_back(frames.left.image);
        log.right_frames.push_back(frames.right.image);
      }

      const IkResult ik = solve_ik(config.robot, target, arm.q, tracking_ik(),
                                   derive_seed(options.seed, 7000 + static_cast<std::uint64_t>(t) * 4 + i));
      if (ik.success) arm.q = ik.joints;  // on failure: hold position

      HandJoints fingers{};
      for (int j = 0; j < kHandDof; ++j) {
        fingers[static_cast<std::size_t>(j)] = action[static_cast<std::size_t>(6 + j)];
      }
      arm.hand = clamp_hand_to_limits(config.robot, fingers);
    }

    update_attachment(config, scene, state);
    result.steps = t + 1;
    if (success_check(config, scene, state)) {
      result.success = true;
      break;
    }
  }

  if (!result.success) result.failure = FailureReason::Timeout;
  result.final_object_pose = state.object_pose;
  result.final_wrist_pose = state.wrist_world(config.robot, 0);

  if (logging) {
    fs::create_directories(options.log_dir);
    if (log.meta.steps.size() >= 2) {
      log.meta.task = scene.task.name;
      log.meta.hand = "right";
      log.meta.pre_manip_pose = staged_base[0];
      log.meta.object = scene.object;
      log.meta.scene_digest = scene.digest;
      save_episode(options.log_dir, log);
    }
    if (perception_mask.width > 0) {
      write_mask_png((fs::path(options.log_dir) / "object_mask.png").string(),
                     perception_mask);
    }
    nlohmann::json manifest{
        {"success", result.success},
        {"failure_reason", failure_to_string(result.failure)},
        {"steps", result.steps},
        {"final_object_pose", pose_to_array(result.final_object_pose)},
        {"final_wrist_pose", pose_to_array(result.final_wrist_pose)},
        {"seed", options.seed},
        {"scene_digest", scene.digest}};
    std::ofstream out((fs::path(options.log_dir) / "result.json").string());
    out << manifest.dump(2) << "\n";
  }
  return result;
}

}  // namespace ofa
