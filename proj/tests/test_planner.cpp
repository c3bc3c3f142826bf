#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ofa/planner.hpp"
#include "ofa/rng.hpp"

#include <cmath>

using namespace ofa;

namespace {

const RobotModel& test_model() {
  static RobotModel model = load_robot_model(std::string(OFA_CONFIG_DIR) + "/reference_arm.json");
  return model;
}

ArmJoints random_arm_config(const RobotModel& model, Rng& rng, double shrink = 1.0) {
  ArmJoints q{};
  for (int i = 0; i < kArmDof; ++i) {
    const auto& lim = model.arm[static_cast<std::size_t>(i)].limits;
    const double mid = 0.5 * (lim.lower + lim.upper);
    const double half = 0.5 * (lim.upper - lim.lower) * shrink;
    q[static_cast<std::size_t>(i)] = rng.uniform(mid - half, mid + half);
  }
  return q;
}

// Samples points on a primitive's surface; used as an independent check of
// the closest-distance collision verdicts.
std::vector<Vec3> surface_samples(const Obstacle& o, int n, Rng& rng) {
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Vec3 local;
    switch (o.type) {
      case ShapeType::Sphere: {
        Vec3 dir(rng.gaussian(), rng.gaussian(), rng.gaussian());
        dir.normalize();
        local = dir * o.dims.x();
        break;
      }
      case ShapeType::Cylinder: {
        const double a = rng.uniform(0, 2 * 3.14159265358979);
        const double which = rng.uniform();
        if (which < 0.6) {  // lateral surface
          local = Vec3(o.dims.x() * std::cos(a), o.dims.x() * std::sin(a),
                       rng.uniform(-o.dims.y(), o.dims.y()));
        } else {  // caps
          const double r = o.dims.x() * std::sqrt(rng.uniform());
          local = Vec3(r * std::cos(a), r * std::sin(a), which < 0.8 ? o.dims.y() : -o.dims.y());
        }
        break;
      }
      case ShapeType::Box: {
        const Vec3 h = 0.5 * o.dims;
        const int face = static_cast<int>(rng.uniform_index(6));
        local = Vec3(rng.uniform(-h.x(), h.x()), rng.uniform(-h.y(), h.y()),
                     rng.uniform(-h.z(), h.z()));
        local[face / 2] = (face % 2 == 0) ? h[face / 2] : -h[face / 2];
        break;
      }
    }
    out.push_back(o.pose.apply(local));
  }
  return out;
}

}  // namespace

TEST_CASE("signed distances to the primitives") {
  const auto sphere = Obstacle::sphere(Vec3(1, 0, 0), 0.5);
  CHECK(obstacle_distance(sphere, Vec3(3, 0, 0)) == doctest::Approx(1.5));
  CHECK(obstacle_distance(sphere, Vec3(1, 0, 0)) == doctest::Approx(-0.5));

  const auto box = Obstacle::box(Pose::identity(), Vec3(2, 2, 2));
  CHECK(obstacle_distance(box, Vec3(2, 0, 0)) == doctest::Approx(1.0));
  CHECK(obstacle_distance(box, Vec3(0, 0, 0)) == doctest::Approx(-1.0));
  CHECK(obstacle_distance(box, Vec3(2, 2, 0)) == doctest::Approx(std::sqrt(2.0)));

  const auto cyl = Obstacle::cylinder(Pose::identity(), 1.0, 0.5);
  CHECK(obstacle_distance(cyl, Vec3(2, 0, 0)) == doctest::Approx(1.0));
  CHECK(obstacle_distance(cyl, Vec3(0, 0, 2)) == doctest::Approx(1.5));
  CHECK(obstacle_distance(cyl, Vec3(2, 0, 1.5)) == doctest::Approx(std::sqrt(2.0)));

  // Rotated box: distance follows the pose.
  const auto tilted = Obstacle::box(
      Pose{Rotation::rot_z(3.14159265358979 / 4.0), Vec3(0, 0, 0)}, Vec3(2, 2, 2));
  CHECK(obstacle_distance(tilted, Vec3(std::sqrt(2.0) + 1.0, 0, 0)) == doctest::Approx(1.0));
}

TEST_CASE("collision_check: empty scene and direct hit") {
  const RobotModel& model = test_model();
  CHECK_FALSE(collision_check(model, ArmJoints{}, HandJoints{}, {}, 0.005));

  // An obstacle centered on a hand sphere collides for sure.
  const Pose wrist = wrist_pose(model, ArmJoints{});
  const auto spheres = hand_sphere_centers(model, wrist, HandJoints{});
  const auto hit = Obstacle::sphere(spheres.front().center, 0.01);
  CHECK(collision_check(model, ArmJoints{}, HandJoints{}, {hit}, 0.005));
}

TEST_CASE("collision verdicts agree with a surface-sampling oracle") {
  const RobotModel& model = test_model();
  Rng rng(606);
  int disagreements = 0;
  int checked = 0;

  for (int trial = 0; trial < 1000; ++trial) {
    const ArmJoints q = random_arm_config(model, rng, 0.7);
    Obstacle obstacle;
    const double pick = rng.uniform();
    const Pose pose{from_axis_angle(AxisAngle(
                        Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian()).normalized() *
                        rng.uniform(0, 3.0))),
                    Vec3(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.3, 1.2))};
    if (pick < 0.34) {
      obstacle = Obstacle::sphere(pose.translation, rng.uniform(0.05, 0.3));
    } else if (pick < 0.67) {
      obstacle = Obstacle::cylinder(pose, rng.uniform(0.05, 0.25), rng.uniform(0.05, 0.3));
    } else {
      obstacle = Obstacle::box(pose, Vec3(rng.uniform(0.05, 0.5), rng.uniform(0.05, 0.5),
                                          rng.uniform(0.05, 0.5)));
    }

    const double margin = 0.0;
    const bool verdict = collision_check(model, q, HandJoints{}, {obstacle}, margin);

    // Oracle: any robot sphere within radius of the sampled surface, or
    // with its center inside the primitive.
    auto spheres = arm_sphere_centers(model, q);
    const auto hand = hand_sphere_centers(model, wrist_pose(model, q), HandJoints{});
    spheres.insert(spheres.end(), hand.begin(), hand.end());

    const auto samples = surface_samples(obstacle, 4000, rng);
    bool oracle_hit = false;
    double closest = std::numeric_limits<double>::infinity();
    for (const auto& s : spheres) {
      if (obstacle_distance(obstacle, s.center) < 0.0) {  // center inside
        oracle_hit = true;
        closest = -1.0;
        break;
      }
      for (const auto& p : samples) {
        const double d = (p - s.center).norm() - s.radius;
        closest = std::min(closest, d);
        if (d < 0.0) {
          oracle_hit = true;
          break;
        }
      }
      if (oracle_hit) break;
    }

    // Skip the boundary band where sampling density decides the verdict.
    if (std::abs(closest) < 1e-4) continue;
    ++checked;
    if (verdict != oracle_hit) ++disagreements;
  }
  CHECK(disagreements == 0);
  CHECK(checked > 800);
}

TEST_CASE("IK reaches poses generated by FK") {
  const RobotModel& model = test_model();
  Rng rng(1818);
  int successes = 0;
  for (int i = 0; i < 100; ++i) {
    const ArmJoints q_true = random_arm_config(model, rng, 0.75);
    const Pose target = wrist_pose(model, q_true);
    const ArmJoints q_init = random_arm_config(model, rng, 0.5);
    const IkResult r = solve_ik(model, target, q_init, IkParams{}, derive_seed(9, static_cast<std::uint64_t>(i)));
    if (!r.success) continue;
    ++successes;
    const Pose reached = wrist_pose(model, r.joints);
    CHECK((reached.translation - target.translation).norm() < 1e-3);
    CHECK(to_axis_angle(target.rotation * reached.rotation.transposed()).angle() < 0.01);
  }
  CHECK(successes >= 95);
}

TEST_CASE("IK reports failure for an unreachable target") {
  const RobotModel& model = test_model();
  const Pose far{Rotation(), Vec3(10, 0, 0)};
  const IkResult r = solve_ik(model, far, ArmJoints{});
  CHECK_FALSE(r.success);
  CHECK(r.position_residual > 5.0);
}

TEST_CASE("plan: obstacle-free scene reaches a nearby pose") {
  const RobotModel& model = test_model();
  ArmJoints start{0.0, 0.5, 1.2, 0.0, 0.6, 0.0};
  ArmJoints goal_q{0.5, 0.7, 1.0, 0.3, 0.4, 0.2};
  const Pose target = wrist_pose(model, goal_q);

  const PlanResult r = plan(model, start, target, HandJoints{}, {}, PlannerParams{}, 3);
  REQUIRE(r.status == PlanStatus::Success);
  REQUIRE(!r.trajectory.waypoints.empty());

  // Endpoint satisfies the IK tolerance.
  const Pose end = wrist_pose(model, r.trajectory.waypoints.back());
  CHECK((end.translation - target.translation).norm() < 1.5e-3);

  // Waypoints obey the step bound and timestamps increase uniformly.
  for (std::size_t i = 1; i < r.trajectory.waypoints.size(); ++i) {
    for (int j = 0; j < kArmDof; ++j) {
      CHECK(std::abs(r.trajectory.waypoints[i][static_cast<std::size_t>(j)] -
                     r.trajectory.waypoints[i - 1][static_cast<std::size_t>(j)]) <= 0.05 + 1e-12);
    }
    CHECK(r.trajectory.timestamps[i] > r.trajectory.timestamps[i - 1]);
  }
}

TEST_CASE("plan: goal inside an obstacle fails cleanly") {
  const RobotModel& model = test_model();
  ArmJoints start{0.0, 0.5, 1.2, 0.0, 0.6, 0.0};
  ArmJoints goal_q{0.5, 0.7, 1.0, 0.3, 0.4, 0.2};
  const Pose target = wrist_pose(model, goal_q);
  // Big ball swallowing the goal wrist region.
  const auto blocker = Obstacle::sphere(target.translation, 0.25);
  const PlanResult r = plan(model, start, target, HandJoints{}, {blocker}, PlannerParams{}, 3);
  CHECK(r.status != PlanStatus::Success);
}

TEST_CASE("plan is deterministic under the seed") {
  const RobotModel& model = test_model();
  ArmJoints start{0.0, 0.5, 1.2, 0.0, 0.6, 0.0};
  ArmJoints goal_q{-0.4, 0.9, 0.8, 0.2, 0.5, -0.1};
  const Pose target = wrist_pose(model, goal_q);
  const auto pillar = Obstacle::cylinder(Pose{Rotation(), Vec3(0.35, 0.28, 0.3)}, 0.06, 0.4);

  const PlanResult a = plan(model, start, target, HandJoints{}, {pillar}, PlannerParams{}, 11);
  const PlanResult b = plan(model, start, target, HandJoints{}, {pillar}, PlannerParams{}, 11);
  REQUIRE(a.status == PlanStatus::Success);
  REQUIRE(b.status == PlanStatus::Success);
  REQUIRE(a.trajectory.waypoints.size() == b.trajectory.waypoints.size());
  for (std::size_t i = 0; i < a.trajectory.waypoints.size(); ++i) {
    for (int j = 0; j < kArmDof; ++j) {
      CHECK(a.trajectory.waypoints[i][static_cast<std::size_t>(j)] ==
            b.trajectory.waypoints[i][static_cast<std::size_t>(j)]);
    }
  }
}

TEST_CASE("cluttered solvable scenes: high success, dense re-validation clean") {
  const RobotModel& model = test_model();
  Rng scene_rng(2222);
  int solved = 0;
  int attempted = 0;

  for (int scene = 0; scene < 50; ++scene) {
    const std::uint64_t seed = derive_seed(31337, static_cast<std::uint64_t>(scene));
    Rng rng(seed);

    ArmJoints start = random_arm_config(model, rng, 0.55);
    ArmJoints goal_q = random_arm_config(model, rng, 0.55);
    const Pose target = wrist_pose(model, goal_q);

    // Corridor construction: sample clutter, keep only obstacles that stay
    // clear of the straight joint-space guide path, so a solution exists.
    std::vector<ArmJoints> guide;
    for (int s = 0; s <= 40; ++s) {
      ArmJoints q{};
      for (int j = 0; j < kArmDof; ++j) {
        q[static_cast<std::size_t>(j)] =
            start[static_cast<std::size_t>(j)] +
            (goal_q[static_cast<std::size_t>(j)] - start[static_cast<std::size_t>(j)]) * s / 40.0;
      }
      guide.push_back(q);
    }

    std::vector<Obstacle> obstacles;
    for (int o = 0; o < 6; ++o) {
      const Obstacle candidate = Obstacle::sphere(
          Vec3(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9), rng.uniform(0.0, 1.2)),
          rng.uniform(0.04, 0.12));
      bool blocks = false;
      for (const auto& q : guide) {
        if (collision_check(model, q, HandJoints{}, {candidate}, 0.02)) {
          blocks = true;
          break;
        }
      }
      if (!blocks) obstacles.push_back(candidate);
    }
    if (collision_check(model, start, HandJoints{}, obstacles, 0.005)) continue;
    ++attempted;

    PlannerParams params;
    const PlanResult r = plan(model, start, target, HandJoints{}, obstacles, params, seed);
    if (r.status != PlanStatus::Success) continue;
    ++solved;

    // Dense re-validation at 4x finer resolution than planning used.
    const double fine = params.edge_resolution / 4.0;
    bool clean = true;
    for (std::size_t i = 1; i < r.trajectory.waypoints.size() && clean; ++i) {
      const auto& a = r.trajectory.waypoints[i - 1];
      const auto& b = r.trajectory.waypoints[i];
      double span = 0.0;
      for (int j = 0; j < kArmDof; ++j) {
        span = std::max(span, std::abs(b[static_cast<std::size_t>(j)] -
                                       a[static_cast<std::size_t>(j)]));
      }
      const int steps = std::max(1, static_cast<int>(std::ceil(span / fine)));
      for (int s = 0; s <= steps; ++s) {
        ArmJoints q{};
        for (int j = 0; j < kArmDof; ++j) {
          q[static_cast<std::size_t>(j)] =
              a[static_cast<std::size_t>(j)] +
              (b[static_cast<std::size_t>(j)] - a[static_cast<std::size_t>(j)]) * s / steps;
        }
        if (collision_check(model, q, HandJoints{}, obstacles, params.collision_margin)) {
          clean = false;
          break;
        }
      }
    }
    CHECK(clean);
  }
  CHECK(attempted >= 40);
  CHECK(static_cast<double>(solved) >= 0.95 * attempted);
}

TEST_CASE("shortcutting never lengthens the path") {
  const RobotModel& model = test_model();
  Rng rng(5150);
  for (int trial = 0; trial < 10; ++trial) {
    const ArmJoints start = random_arm_config(model, rng, 0.5);
    const ArmJoints goal_q = random_arm_config(model, rng, 0.5);
    const Pose target = wrist_pose(model, goal_q);

    PlannerParams no_smooth;
    no_smooth.shortcut_iterations = 0;
    PlannerParams smooth;

    const std::uint64_t seed = derive_seed(777, static_cast<std::uint64_t>(trial));
    const PlanResult raw = plan(model, start, target, HandJoints{}, {}, no_smooth, seed);
    const PlanResult opt = plan(model, start, target, HandJoints{}, {}, smooth, seed);
    if (raw.status != PlanStatus::Success || opt.status != PlanStatus::Success) continue;
    CHECK(path_length(opt.trajectory.waypoints) <=
          path_length(raw.trajectory.waypoints) + 1e-9);
  }
}
