#pragma once

#include "ofa/geom.hpp"

namespace ofa {

enum class ShapeType { Box, Cylinder, Sphere };

/// Convex primitive with a pose. Boxes store full extents (x, y, z);
/// cylinders store (radius, half-height) along local z; spheres a radius.
struct Obstacle {
  ShapeType type = ShapeType::Box;
  Pose pose;
  Vec3 dims = Vec3::Zero();  // box: extents; cylinder: (r, half_h, unused); sphere: (r,..)

  static Obstacle box(const Pose& pose, const Vec3& extents);
  static Obstacle cylinder(const Pose& pose, double radius, double half_height);
  static Obstacle sphere(const Vec3& center, double radius);
};

/// Signed distance from a world point to the obstacle surface (negative
/// inside).
double obstacle_distance(const Obstacle& obstacle, const Vec3& point);

}  // namespace ofa
