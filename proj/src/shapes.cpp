#include "ofa/shapes.hpp"

#include <cmath>

namespace ofa {

Obstacle Obstacle::box(const Pose& pose, const Vec3& extents) {
  return Obstacle{ShapeType::Box, pose, extents};
}

Obstacle Obstacle::cylinder(const Pose& pose, double radius, double half_height) {
  return Obstacle{ShapeType::Cylinder, pose, Vec3(radius, half_height, 0.0)};
}

Obstacle Obstacle::sphere(const Vec3& center, double radius) {
  return Obstacle{ShapeType::Sphere, Pose{Rotation(), center}, Vec3(radius, 0.0, 0.0)};
}

double obstacle_distance(const Obstacle& obstacle, const Vec3& point) {
  const Vec3 local = inverse(obstacle.pose).apply(point);
  switch (obstacle.type) {
    case ShapeType::Sphere:
      return local.norm() - obstacle.dims.x();
    case ShapeType::Cylinder: {
      const double radial = std::hypot(local.x(), local.y()) - obstacle.dims.x();
      const double axial = std::abs(local.z()) - obstacle.dims.y();
      if (radial <= 0.0 && axial <= 0.0) return std::max(radial, axial);
      const double dr = std::max(radial, 0.0);
      const double dz = std::max(axial, 0.0);
      return std::hypot(dr, dz);
    }
    case ShapeType::Box: {
      const Vec3 half = 0.5 * obstacle.dims;
      const Vec3 d = local.cwiseAbs() - half;
      const Vec3 outside = d.cwiseMax(0.0);
      const double inside = std::min(0.0, d.maxCoeff());
      return outside.norm() + inside;
    }
  }
  return 0.0;
}

}  // namespace ofa
