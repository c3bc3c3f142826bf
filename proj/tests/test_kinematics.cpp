#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ofa/errors.hpp"
#include "ofa/kinematics.hpp"
#include "ofa/rng.hpp"

#include "oracles.hpp"

#include <cmath>
#include <fstream>

using namespace ofa;

namespace {

constexpr double kPi = 3.14159265358979323846;

const RobotModel& test_model() {
  static RobotModel model = load_robot_model(std::string(OFA_CONFIG_DIR) + "/reference_arm.json");
  return model;
}

ArmJoints random_arm_config(const RobotModel& model, Rng& rng) {
  ArmJoints q{};
  for (int i = 0; i < kArmDof; ++i) {
    const auto& lim = model.arm[static_cast<std::size_t>(i)].limits;
    q[static_cast<std::size_t>(i)] = rng.uniform(lim.lower, lim.upper);
  }
  return q;
}

HandJoints random_hand_config(const RobotModel& model, Rng& rng) {
  HandJoints j{};
  int idx = 0;
  for (const auto& chain : model.hand) {
    for (const auto& joint : chain.joints) {
      j[static_cast<std::size_t>(idx++)] = rng.uniform(joint.limits.lower, joint.limits.upper);
    }
  }
  return j;
}

// Reference FK: multiplies raw 4x4 matrices built directly from the link
// description, no shared code with the library chain.
oracle::Mat4 oracle_fk(const RobotModel& model, const ArmJoints& q) {
  auto rotation_about = [](const Vec3& axis_in, double angle) {
    const Vec3 axis = axis_in.normalized();
    const double c = std::cos(angle), s = std::sin(angle);
    oracle::Mat4 m = oracle::identity4();
    const double x = axis.x(), y = axis.y(), z = axis.z();
    m[0][0] = c + x * x * (1 - c);
    m[0][1] = x * y * (1 - c) - z * s;
    m[0][2] = x * z * (1 - c) + y * s;
    m[1][0] = y * x * (1 - c) + z * s;
    m[1][1] = c + y * y * (1 - c);
    m[1][2] = y * z * (1 - c) - x * s;
    m[2][0] = z * x * (1 - c) - y * s;
    m[2][1] = z * y * (1 - c) + x * s;
    m[2][2] = c + z * z * (1 - c);
    return m;
  };

  oracle::Mat4 t = oracle::identity4();
  for (int i = 0; i < kArmDof; ++i) {
    const auto& link = model.arm[static_cast<std::size_t>(i)];
    t = oracle::multiply(t, oracle::from_pose_array(pose_to_array(link.origin)));
    t = oracle::multiply(t, rotation_about(link.axis, q[static_cast<std::size_t>(i)]));
  }
  return oracle::multiply(t, oracle::from_pose_array(pose_to_array(model.tool)));
}

}  // namespace

TEST_CASE("reference model loads and is structurally sound") {
  const RobotModel& model = test_model();
  CHECK(model.hand_joint_count() == kHandDof);
  CHECK(model.hand_sphere_count() > 0);
  CHECK(model.arm_sphere_count() > 0);
}

TEST_CASE("zero configuration gives the canonical straight-up wrist pose") {
  const RobotModel& model = test_model();
  const Pose wrist = wrist_pose(model, ArmJoints{});
  // Sum of the link offsets plus the tool: documented rest pose. The tool
  // turns the palm axis onto the flange axis, so the rest rotation is the
  // -90 degree pitch of the mount.
  CHECK((wrist.translation - Vec3(0, 0, 1.025)).norm() < 1e-12);
  CHECK((wrist.rotation.matrix() - Rotation::rot_y(-kPi / 2.0).matrix()).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("base joint rotation spins the wrist about z") {
  const RobotModel& model = test_model();
  ArmJoints bent{};
  bent[1] = 0.8;  // tilt away from the z axis so the test is not degenerate
  const Pose reference = wrist_pose(model, bent);

  ArmJoints spun = bent;
  spun[0] = 0.7;
  const Pose rotated = wrist_pose(model, spun);

  const Vec3 expected = Rotation::rot_z(0.7) * reference.translation;
  CHECK((rotated.translation - expected).norm() < 1e-12);
}

TEST_CASE("wrist pose matches a raw matrix-chain oracle on 100 seeded configurations") {
  const RobotModel& model = test_model();
  Rng rng(404);
  for (int i = 0; i < 100; ++i) {
    const ArmJoints q = random_arm_config(model, rng);
    const Pose wrist = wrist_pose(model, q);
    const auto expect = oracle_fk(model, q);
    CHECK(oracle::max_abs_diff(oracle::from_pose_array(pose_to_array(wrist)), expect) < 1e-9);
  }
}

TEST_CASE("joint limit violations name the joint") {
  const RobotModel& model = test_model();
  ArmJoints q{};
  q[2] = 99.0;
  try {
    wrist_pose(model, q);
    FAIL("expected out_of_range");
  } catch (const std::out_of_range& e) {
    CHECK(std::string(e.what()).find("elbow_pitch") != std::string::npos);
  }
}

TEST_CASE("hand spheres: rest pose, rigid transport, count stability") {
  const RobotModel& model = test_model();
  const auto rest = hand_sphere_centers(model, Pose::identity(), HandJoints{});
  CHECK(rest.size() == model.hand_sphere_count());

  // First palm sphere sits at its configured offset when the wrist is identity.
  CHECK((rest[0].center - model.palm_spheres[0].center).norm() < 1e-15);

  // Translating the wrist translates every center by exactly that offset.
  const Vec3 shift(0.3, -0.2, 0.5);
  const auto moved = hand_sphere_centers(model, Pose{Rotation(), shift}, HandJoints{});
  for (std::size_t i = 0; i < rest.size(); ++i) {
    CHECK((moved[i].center - rest[i].center - shift).norm() < 1e-12);
    CHECK(moved[i].radius == rest[i].radius);
  }

  Rng rng(7);
  const auto closed = hand_sphere_centers(model, Pose::identity(), random_hand_config(model, rng));
  CHECK(closed.size() == rest.size());
}

TEST_CASE("hand spheres: rigid transport with rotation on seeded poses") {
  const RobotModel& model = test_model();
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    Vec3 axis(rng.gaussian(), rng.gaussian(), rng.gaussian());
    axis.normalize();
    const Pose g{from_axis_angle(AxisAngle(axis * rng.uniform(0.0, 3.0))),
                 Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))};
    const Pose w{from_axis_angle(AxisAngle(Vec3(0, 1, 0) * rng.uniform(0.0, 1.0))),
                 Vec3(0.4, 0.1, 0.2)};
    const HandJoints j = random_hand_config(model, rng);

    const auto direct = hand_sphere_centers(model, compose(g, w), j);
    const auto transported = hand_sphere_centers(model, w, j);
    for (std::size_t i = 0; i < direct.size(); ++i) {
      CHECK((direct[i].center - g.apply(transported[i].center)).norm() < 1e-9);
    }
  }
}

TEST_CASE("hand sphere chain positions match a per-chain oracle") {
  const RobotModel& model = test_model();
  // Closed index finger: root at (0.015,-0.030,0.036), first sphere 0.022
  // along the rotated x axis.
  HandJoints j{};
  j[0] = 0.9;
  const auto spheres = hand_sphere_centers(model, Pose::identity(), j);
  const std::size_t index_first = model.palm_spheres.size();
  const Vec3 expected = Vec3(0.015, -0.030, 0.036) +
                        Rotation::rot_z(0.9) * Vec3(0.022, 0, 0);
  CHECK((spheres[index_first].center - expected).norm() < 1e-12);
}

TEST_CASE("arm spheres: rest pose and seeded oracle") {
  const RobotModel& model = test_model();
  const auto rest = arm_sphere_centers(model, ArmJoints{});
  CHECK(rest.size() == model.arm_sphere_count());
  // First sphere belongs to the base link: its offset plus the base origin.
  CHECK((rest[0].center - Vec3(0, 0, 0.07)).norm() < 1e-12);

  // Base rotation symmetry: all centers rotate rigidly about z.
  ArmJoints spun{};
  spun[0] = 1.1;
  const auto rotated = arm_sphere_centers(model, spun);
  for (std::size_t i = 0; i < rest.size(); ++i) {
    CHECK((rotated[i].center - Rotation::rot_z(1.1) * rest[i].center).norm() < 1e-12);
  }
}

TEST_CASE("FK is continuous under small joint perturbations") {
  const RobotModel& model = test_model();
  Rng rng(13);
  const ArmJoints q = random_arm_config(model, rng);
  const HandJoints j = random_hand_config(model, rng);
  const Pose w = wrist_pose(model, q);
  const auto base_arm = arm_sphere_centers(model, q);
  const auto base_hand = hand_sphere_centers(model, w, j);

  for (int joint = 0; joint < kArmDof; ++joint) {
    ArmJoints qp = q;
    qp[static_cast<std::size_t>(joint)] += 1e-6;
    qp = clamp_to_limits(model, qp);
    const auto pa = arm_sphere_centers(model, qp);
    const auto ph = hand_sphere_centers(model, wrist_pose(model, qp), j);
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK((pa[i].center - base_arm[i].center).norm() < 1e-4);
    }
    for (std::size_t i = 0; i < ph.size(); ++i) {
      CHECK((ph[i].center - base_hand[i].center).norm() < 1e-4);
    }
  }
}

TEST_CASE("robot description parse errors report the line number") {
  const std::string path = "/tmp/ofa_broken_robot.json";
  {
    std::ofstream out(path);
    out << "{\n  \"name\": \"x\",\n  \"arm\": [\n    { broken\n  ]\n}\n";
  }
  try {
    load_robot_model(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(":4") != std::string::npos);
  }
}

TEST_CASE("jacobian matches finite differences of the wrist pose") {
  const RobotModel& model = test_model();
  Rng rng(21);
  const ArmJoints q = random_arm_config(model, rng);
  const auto jac = wrist_jacobian(model, q);
  const Pose base = wrist_pose(model, q);

  const double h = 1e-7;
  for (int i = 0; i < kArmDof; ++i) {
    ArmJoints qp = q;
    qp[static_cast<std::size_t>(i)] += h;
    if (qp[static_cast<std::size_t>(i)] > model.arm[static_cast<std::size_t>(i)].limits.upper) {
      qp[static_cast<std::size_t>(i)] -= 2 * h;
    }
    const double sign = qp[static_cast<std::size_t>(i)] > q[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
    const Pose moved = wrist_pose(model, qp);
    const Vec3 v = sign * (moved.translation - base.translation) / h;
    CHECK((v - jac.block<3, 1>(0, i)).norm() < 1e-4);

    const AxisAngle dw = to_axis_angle(moved.rotation * base.rotation.transposed());
    const Vec3 w = sign * dw.vector() / h;
    CHECK((w - jac.block<3, 1>(3, i)).norm() < 1e-4);
  }
}
