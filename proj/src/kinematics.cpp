#include "ofa/kinematics.hpp"

#include "ofa/errors.hpp"

#include <Eigen/Geometry>

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ofa {

using nlohmann::json;

namespace {

Rotation axis_rotation(const Vec3& axis, double angle) {
  return from_axis_angle(AxisAngle(axis.normalized() * angle));
}

Pose joint_transform(const RevoluteLink& link, double q) {
  return compose(link.origin, Pose{axis_rotation(link.axis, q), Vec3::Zero()});
}

[[noreturn]] void limit_error(const std::string& joint, double value,
                              const JointLimits& limits) {
  std::ostringstream os;
  os << "joint '" << joint << "' value " << value << " outside limits ["
     << limits.lower << ", " << limits.upper << "]";
  throw std::out_of_range(os.str());
}

Pose parse_pose(const json& node, const std::string& where) {
  if (!node.is_array() || node.size() != 12) {
    throw ConfigError(where + ": pose must be an array of 12 numbers");
  }
  std::array<double, 12> a{};
  for (std::size_t i = 0; i < 12; ++i) a[i] = node[i].get<double>();
  try {
    return pose_from_array(a);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

std::vector<CollisionSphere> parse_spheres(const json& node, const std::string& where) {
  std::vector<CollisionSphere> out;
  for (std::size_t i = 0; i < node.size(); ++i) {
    const json& s = node[i];
    CollisionSphere sphere;
    const json& c = s.at("center");
    sphere.center = Vec3(c[0].get<double>(), c[1].get<double>(), c[2].get<double>());
    sphere.radius = s.at("radius").get<double>();
    if (sphere.radius <= 0.0) {
      throw ConfigError(where + ": sphere radius must be positive");
    }
    out.push_back(sphere);
  }
  return out;
}

RevoluteLink parse_link(const json& node, const std::string& where) {
  RevoluteLink link;
  link.name = node.at("name").get<std::string>();
  link.origin = parse_pose(node.at("origin"), where + "/" + link.name);
  const json& ax = node.at("axis");
  link.axis = Vec3(ax[0].get<double>(), ax[1].get<double>(), ax[2].get<double>());
  if (link.axis.norm() < 1e-9) {
    throw ConfigError(where + "/" + link.name + ": zero joint axis");
  }
  const json& lim = node.at("limits");
  link.limits = {lim[0].get<double>(), lim[1].get<double>()};
  if (node.contains("spheres")) {
    link.spheres = parse_spheres(node["spheres"], where + "/" + link.name);
  }
  return link;
}

}  // namespace

int RobotModel::hand_joint_count() const {
  int n = 0;
  for (const auto& chain : hand) n += static_cast<int>(chain.joints.size());
  return n;
}

std::size_t RobotModel::hand_sphere_count() const {
  std::size_t n = palm_spheres.size();
  for (const auto& chain : hand) {
    for (const auto& joint : chain.joints) n += joint.spheres.size();
  }
  return n;
}

std::size_t RobotModel::arm_sphere_count() const {
  std::size_t n = 0;
  for (const auto& link : arm) n += link.spheres.size();
  return n;
}

void RobotModel::validate() const {
  if (hand_joint_count() != kHandDof) {
    throw ConfigError("robot model '" + name + "': hand must have exactly 6 joints, got " +
                      std::to_string(hand_joint_count()));
  }
  auto check_limits = [&](const RevoluteLink& link) {
    if (!(link.limits.lower < link.limits.upper)) {
      throw ConfigError("robot model '" + name + "': joint '" + link.name +
                        "' limits must satisfy lower < upper");
    }
  };
  for (const auto& link : arm) check_limits(link);
  for (const auto& chain : hand) {
    for (const auto& joint : chain.joints) check_limits(joint);
  }
}

RobotModel load_robot_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("robot model: cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    // nlohmann reports the byte offset; convert it to a line number.
    std::ifstream again(path);
    std::string text((std::istreambuf_iterator<char>(again)),
                     std::istreambuf_iterator<char>());
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw ConfigError("robot model " + path + ":" + std::to_string(line) + ": " + e.what());
  }

  RobotModel model;
  try {
    model.name = doc.at("name").get<std::string>();
    const json& arm = doc.at("arm");
    if (!arm.is_array() || arm.size() != kArmDof) {
      throw ConfigError("robot model: 'arm' must list exactly 6 joints");
    }
    for (int i = 0; i < kArmDof; ++i) {
      model.arm[static_cast<std::size_t>(i)] = parse_link(arm[static_cast<std::size_t>(i)], "arm");
    }
    model.tool = parse_pose(doc.at("tool"), "tool");
    if (doc.contains("palm_spheres")) {
      model.palm_spheres = parse_spheres(doc["palm_spheres"], "palm_spheres");
    }
    for (const json& chain_node : doc.at("hand")) {
      FingerChain chain;
      chain.name = chain_node.at("name").get<std::string>();
      for (const json& joint_node : chain_node.at("joints")) {
        chain.joints.push_back(parse_link(joint_node, "hand/" + chain.name));
      }
      model.hand.push_back(std::move(chain));
    }
  } catch (const json::exception& e) {
    throw ConfigError("robot model " + path + ": " + e.what());
  }
  model.validate();
  return model;
}

void check_arm_limits(const RobotModel& model, const ArmJoints& q) {
  for (int i = 0; i < kArmDof; ++i) {
    const auto& link = model.arm[static_cast<std::size_t>(i)];
    if (q[static_cast<std::size_t>(i)] < link.limits.lower - 1e-9 ||
        q[static_cast<std::size_t>(i)] > link.limits.upper + 1e-9) {
      limit_error(link.name, q[static_cast<std::size_t>(i)], link.limits);
    }
  }
}

void check_hand_limits(const RobotModel& model, const HandJoints& j) {
  int idx = 0;
  for (const auto& chain : model.hand) {
    for (const auto& joint : chain.joints) {
      const double v = j[static_cast<std::size_t>(idx)];
      if (v < joint.limits.lower - 1e-9 || v > joint.limits.upper + 1e-9) {
        limit_error(joint.name, v, joint.limits);
      }
      ++idx;
    }
  }
}

ArmJoints clamp_to_limits(const RobotModel& model, const ArmJoints& q) {
  ArmJoints out = q;
  for (int i = 0; i < kArmDof; ++i) {
    const auto& lim = model.arm[static_cast<std::size_t>(i)].limits;
    out[static_cast<std::size_t>(i)] =
        std::clamp(out[static_cast<std::size_t>(i)], lim.lower, lim.upper);
  }
  return out;
}

HandJoints clamp_hand_to_limits(const RobotModel& model, const HandJoints& j) {
  HandJoints out = j;
  int idx = 0;
  for (const auto& chain : model.hand) {
    for (const auto& joint : chain.joints) {
      out[static_cast<std::size_t>(idx)] =
          std::clamp(out[static_cast<std::size_t>(idx)], joint.limits.lower, joint.limits.upper);
      ++idx;
    }
  }
  return out;
}

Pose wrist_pose(const RobotModel& model, const ArmJoints& q) {
  check_arm_limits(model, q);
  Pose t = Pose::identity();
  for (int i = 0; i < kArmDof; ++i) {
    t = compose(t, joint_transform(model.arm[static_cast<std::size_t>(i)],
                                   q[static_cast<std::size_t>(i)]));
  }
  return compose(t, model.tool);
}

std::vector<PlacedSphere> arm_sphere_centers(const RobotModel& model, const ArmJoints& q) {
  check_arm_limits(model, q);
  std::vector<PlacedSphere> out;
  out.reserve(model.arm_sphere_count());
  Pose t = Pose::identity();
  for (int i = 0; i < kArmDof; ++i) {
    const auto& link = model.arm[static_cast<std::size_t>(i)];
    t = compose(t, joint_transform(link, q[static_cast<std::size_t>(i)]));
    for (const auto& s : link.spheres) {
      out.push_back({t.apply(s.center), s.radius});
    }
  }
  return out;
}

std::vector<PlacedSphere> hand_sphere_centers(const RobotModel& model, const Pose& wrist,
                                              const HandJoints& j) {
  check_hand_limits(model, j);
  std::vector<PlacedSphere> out;
  out.reserve(model.hand_sphere_count());
  for (const auto& s : model.palm_spheres) {
    out.push_back({wrist.apply(s.center), s.radius});
  }
  int idx = 0;
  for (const auto& chain : model.hand) {
    Pose t = wrist;
    for (const auto& joint : chain.joints) {
      t = compose(t, joint_transform(joint, j[static_cast<std::size_t>(idx)]));
      for (const auto& s : joint.spheres) {
        out.push_back({t.apply(s.center), s.radius});
      }
      ++idx;
    }
  }
  return out;
}

Eigen::Matrix<double, 6, kArmDof> wrist_jacobian(const RobotModel& model, const ArmJoints& q) {
  // Joint frames and world axes along the chain.
  std::array<Vec3, kArmDof> axes;
  std::array<Vec3, kArmDof> origins;
  Pose t = Pose::identity();
  for (int i = 0; i < kArmDof; ++i) {
    const auto& link = model.arm[static_cast<std::size_t>(i)];
    Pose joint_frame = compose(t, link.origin);
    axes[static_cast<std::size_t>(i)] = joint_frame.rotation * link.axis.normalized();
    origins[static_cast<std::size_t>(i)] = joint_frame.translation;
    t = compose(t, joint_transform(link, q[static_cast<std::size_t>(i)]));
  }
  const Vec3 tip = compose(t, model.tool).translation;

  Eigen::Matrix<double, 6, kArmDof> jac;
  for (int i = 0; i < kArmDof; ++i) {
    const Vec3& w = axes[static_cast<std::size_t>(i)];
    jac.block<3, 1>(0, i) = w.cross(tip - origins[static_cast<std::size_t>(i)]);
    jac.block<3, 1>(3, i) = w;
  }
  return jac;
}

}  // namespace ofa
