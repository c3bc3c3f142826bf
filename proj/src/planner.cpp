#include "ofa/planner.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>

namespace ofa {

namespace {

bool spheres_collide(const std::vector<PlacedSphere>& spheres,
                     const std::vector<Obstacle>& obstacles, double margin) {
  for (const auto& s : spheres) {
    for (const auto& o : obstacles) {
      if (obstacle_distance(o, s.center) < s.radius + margin) return true;
    }
  }
  return false;
}

double max_joint_delta(const ArmJoints& a, const ArmJoints& b) {
  double m = 0.0;
  for (int i = 0; i < kArmDof; ++i) {
    m = std::max(m, std::abs(a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]));
  }
  return m;
}

ArmJoints lerp_joints(const ArmJoints& a, const ArmJoints& b, double t) {
  ArmJoints out{};
  for (int i = 0; i < kArmDof; ++i) {
    out[static_cast<std::size_t>(i)] =
        a[static_cast<std::size_t>(i)] +
        t * (b[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace

bool collision_check(const RobotModel& model, const ArmJoints& q, const HandJoints& hand,
                     const std::vector<Obstacle>& obstacles, double margin) {
  if (obstacles.empty()) return false;
  if (spheres_collide(arm_sphere_centers(model, q), obstacles, margin)) return true;
  const Pose wrist = wrist_pose(model, q);
  return spheres_collide(hand_sphere_centers(model, wrist, hand), obstacles, margin);
}

IkResult solve_ik(const RobotModel& model, const Pose& target_wrist, const ArmJoints& q_init,
                  const IkParams& params, std::uint64_t restart_seed) {
  Rng rng(restart_seed);
  IkResult best;
  best.position_residual = std::numeric_limits<double>::infinity();
  best.rotation_residual = std::numeric_limits<double>::infinity();

  auto attempt = [&](ArmJoints q) -> bool {
    for (int it = 0; it < params.max_iterations; ++it) {
      const Pose current = wrist_pose(model, q);
      const Vec3 pos_err = target_wrist.translation - current.translation;
      const AxisAngle rot_err =
          to_axis_angle(target_wrist.rotation * current.rotation.transposed());

      if (pos_err.norm() < params.position_tolerance &&
          rot_err.angle() < params.rotation_tolerance) {
        best.success = true;
        best.joints = q;
        best.position_residual = pos_err.norm();
        best.rotation_residual = rot_err.angle();
        return true;
      }

      Eigen::Matrix<double, 6, 1> twist;
      twist.head<3>() = pos_err;
      twist.tail<3>() = rot_err.vector();

      const auto jac = wrist_jacobian(model, q);
      const Eigen::Matrix<double, 6, 6> jjt =
          jac * jac.transpose() +
          params.damping * params.damping * Eigen::Matrix<double, 6, 6>::Identity();
      const Eigen::Matrix<double, 6, 1> dq = jac.transpose() * jjt.ldlt().solve(twist);

      // Cap the step; DLS can overshoot near singularities.
      const double step = dq.cwiseAbs().maxCoeff();
      const double scale = step > 0.3 ? 0.3 / step : 1.0;
      for (int i = 0; i < kArmDof; ++i) {
        q[static_cast<std::size_t>(i)] += scale * dq(i);
      }
      q = clamp_to_limits(model, q);
    }
    const Pose current = wrist_pose(model, q);
    const double pr = (target_wrist.translation - current.translation).norm();
    const double rr =
        to_axis_angle(target_wrist.rotation * current.rotation.transposed()).angle();
    if (pr + rr < best.position_residual + best.rotation_residual) {
      best.joints = q;
      best.position_residual = pr;
      best.rotation_residual = rr;
    }
    return false;
  };

  if (attempt(clamp_to_limits(model, q_init))) return best;
  for (int r = 0; r < params.restarts; ++r) {
    ArmJoints q{};
    for (int i = 0; i < kArmDof; ++i) {
      const auto& lim = model.arm[static_cast<std::size_t>(i)].limits;
      q[static_cast<std::size_t>(i)] = rng.uniform(lim.lower, lim.upper);
    }
    if (attempt(q)) return best;
  }
  return best;
}

namespace {

struct Tree {
  std::vector<ArmJoints> nodes;
  std::vector<int> parents;

  int nearest(const ArmJoints& q) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      double d = 0.0;
      for (int j = 0; j < kArmDof; ++j) {
        const double dj = nodes[i][static_cast<std::size_t>(j)] - q[static_cast<std::size_t>(j)];
        d += dj * dj;
      }
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  }

  std::vector<ArmJoints> path_to_root(int leaf) const {
    std::vector<ArmJoints> out;
    for (int i = leaf; i >= 0; i = parents[static_cast<std::size_t>(i)]) {
      out.push_back(nodes[static_cast<std::size_t>(i)]);
    }
    return out;
  }
};

}  // namespace

double path_length(const std::vector<ArmJoints>& waypoints) {
  double total = 0.0;
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    double d = 0.0;
    for (int j = 0; j < kArmDof; ++j) {
      const double dj = waypoints[i][static_cast<std::size_t>(j)] -
                        waypoints[i - 1][static_cast<std::size_t>(j)];
      d += dj * dj;
    }
    total += std::sqrt(d);
  }
  return total;
}

PlanResult plan(const RobotModel& model, const ArmJoints& q_start, const Pose& target_wrist,
                const HandJoints& hand, const std::vector<Obstacle>& obstacles,
                const PlannerParams& params, std::uint64_t seed) {
  PlanResult result;

  auto in_collision = [&](const ArmJoints& q) {
    return collision_check(model, q, hand, obstacles, params.collision_margin);
  };
  auto edge_free = [&](const ArmJoints& a, const ArmJoints& b, double resolution) {
    const double span = max_joint_delta(a, b);
    const int steps = std::max(1, static_cast<int>(std::ceil(span / resolution)));
    for (int s = 1; s <= steps; ++s) {
      if (in_collision(lerp_joints(a, b, static_cast<double>(s) / steps))) return false;
    }
    return true;
  };

  if (in_collision(q_start)) {
    result.status = PlanStatus::StartInCollision;
    return result;
  }

  const IkResult ik = solve_ik(model, target_wrist, q_start, IkParams{}, derive_seed(seed, 101));
  result.best_ik_residual = ik.position_residual + ik.rotation_residual;
  if (!ik.success) {
    result.status = PlanStatus::IkFailure;
    return result;
  }
  result.goal_joints = ik.joints;
  if (in_collision(ik.joints)) {
    // One retry from a perturbed start sometimes finds an alternative branch.
    bool found = false;
    Rng retry_rng(derive_seed(seed, 202));
    for (int attempt = 0; attempt < 4 && !found; ++attempt) {
      ArmJoints q{};
      for (int i = 0; i < kArmDof; ++i) {
        const auto& lim = model.arm[static_cast<std::size_t>(i)].limits;
        q[static_cast<std::size_t>(i)] = retry_rng.uniform(lim.lower, lim.upper);
      }
      const IkResult alt = solve_ik(model, target_wrist, q, IkParams{}, derive_seed(seed, 300 + static_cast<std::uint64_t>(attempt)));
      if (alt.success && !in_collision(alt.joints)) {
        result.goal_joints = alt.joints;
        found = true;
      }
    }
    if (!found) {
      result.status = PlanStatus::GoalInCollision;
      return result;
    }
  }
  const ArmJoints& q_goal = result.goal_joints;

  Rng rng(seed);
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(params.timeout_seconds));

  Tree start_tree{{q_start}, {-1}};
  Tree goal_tree{{q_goal}, {-1}};
  Tree* a = &start_tree;
  Tree* b = &goal_tree;
  bool a_is_start = true;

  const double extend_step = 0.15;  // rad per tree extension

  auto extend = [&](Tree& tree, const ArmJoints& target) -> int {
    const int near = tree.nearest(target);
    const ArmJoints& from = tree.nodes[static_cast<std::size_t>(near)];
    const double span = max_joint_delta(from, target);
    ArmJoints next =
        span <= extend_step ? target : lerp_joints(from, target, extend_step / span);
    if (!edge_free(from, next, params.edge_resolution)) return -1;
    tree.nodes.push_back(next);
    tree.parents.push_back(near);
    return static_cast<int>(tree.nodes.size()) - 1;
  };

  std::vector<ArmJoints> raw_path;
  for (int iter = 0; iter < params.max_samples; ++iter) {
    if (std::chrono::steady_clock::now() > deadline) break;

    ArmJoints sample{};
    if (rng.uniform() < params.goal_bias) {
      sample = a_is_start ? q_goal : q_start;
    } else {
      for (int i = 0; i < kArmDof; ++i) {
        const auto& lim = model.arm[static_cast<std::size_t>(i)].limits;
        sample[static_cast<std::size_t>(i)] = rng.uniform(lim.lower, lim.upper);
      }
    }

    const int new_a = extend(*a, sample);
    if (new_a >= 0) {
      // Greedily connect the other tree toward the new node.
      const ArmJoints& target = a->nodes[static_cast<std::size_t>(new_a)];
      int last = -1;
      while (true) {
        const int n = extend(*b, target);
        if (n < 0) break;
        last = n;
        if (max_joint_delta(b->nodes[static_cast<std::size_t>(n)], target) < 1e-9) {
          // Trees met; stitch the two root paths together.
          auto path_a = a->path_to_root(new_a);
          std::reverse(path_a.begin(), path_a.end());
          auto path_b = b->path_to_root(last);
          std::vector<ArmJoints> full;
          if (a_is_start) {
            full = path_a;
            full.insert(full.end(), path_b.begin() + 1, path_b.end());
          } else {
            full = path_b;
            std::reverse(full.begin(), full.end());
            std::reverse(path_a.begin(), path_a.end());
            full.insert(full.end(), path_a.begin() + 1, path_a.end());
          }
          raw_path = std::move(full);
          break;
        }
      }
      if (!raw_path.empty()) break;
    }
    std::swap(a, b);
    a_is_start = !a_is_start;
  }

  if (raw_path.empty()) {
    result.status = PlanStatus::Timeout;
    return result;
  }

  // Shortcut smoothing: replace random sub-segments by straight edges.
  Rng smooth_rng(derive_seed(seed, 404));
  for (int it = 0; it < params.shortcut_iterations && raw_path.size() > 2; ++it) {
    const std::size_t i = smooth_rng.uniform_index(raw_path.size() - 1);
    const std::size_t j = i + 1 + smooth_rng.uniform_index(raw_path.size() - i - 1);
    if (j <= i + 1) continue;
    if (edge_free(raw_path[i], raw_path[j], params.edge_resolution)) {
      raw_path.erase(raw_path.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                     raw_path.begin() + static_cast<std::ptrdiff_t>(j));
    }
  }

  // Densify to the waypoint step and attach uniform timestamps.
  JointTrajectory traj;
  traj.waypoints.push_back(raw_path.front());
  for (std::size_t i = 1; i < raw_path.size(); ++i) {
    const double span = max_joint_delta(raw_path[i - 1], raw_path[i]);
    const int steps = std::max(1, static_cast<int>(std::ceil(span / params.sample_step)));
    for (int s = 1; s <= steps; ++s) {
      traj.waypoints.push_back(
          lerp_joints(raw_path[i - 1], raw_path[i], static_cast<double>(s) / steps));
    }
  }
  traj.timestamps.resize(traj.waypoints.size());
  for (std::size_t i = 0; i < traj.timestamps.size(); ++i) {
    traj.timestamps[i] = static_cast<double>(i) * params.timestep;
  }

  result.trajectory = std::move(traj);
  result.status = PlanStatus::Success;
  return result;
}

}  // namespace ofa
