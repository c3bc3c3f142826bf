#pragma once

#include "ofa/geom.hpp"
#include "ofa/image.hpp"
#include "ofa/render.hpp"
#include "ofa/rng.hpp"
#include "ofa/shapes.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ofa {

enum class Category { CylinderGraspable, HandleGraspable, TopPinchable, FlatLiftable };

Category category_from_string(const std::string& name);
std::string category_to_string(Category c);

/// An object the simulator knows about: named primitive with ground truth.
struct ObjectInstance {
  std::string name;
  Category category = Category::CylinderGraspable;
  ShapeType shape = ShapeType::Cylinder;
  Vec3 dims = Vec3::Zero();  // cylinder: (r, half_h); box: extents
  Pose true_pose;

  Obstacle as_obstacle() const { return Obstacle{shape, true_pose, dims}; }
  void validate() const;  // positive dims, category/shape consistency
};

struct PoseEstimate {
  Pose pose;
  Mask pixel_mask;  // segmentation in the reference (left) view
};

/// Fixed wrist offset per object category: rotation applied on the body
/// side, translation carried in the configured frame.
struct CategoryOffset {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();
};

enum class OffsetFrame { Object, World };

struct CategoryOffsetTable {
  std::map<Category, CategoryOffset> offsets;
  OffsetFrame translation_frame = OffsetFrame::Object;

  void validate() const;  // every category present
  const CategoryOffset& at(Category c) const;
};

struct NoiseModel {
  double translation_sigma = 0.005;  // m, per axis
  double rotation_sigma = 0.02;      // rad, about a uniform random axis
  std::uint64_t seed = 0;
};

enum class LocateStatus { Found, NotFound, Occluded };

struct LocateResult {
  LocateStatus status = LocateStatus::NotFound;
  PoseEstimate estimate;
};

/// Entity registry passed to the detector stand-in: names plus id-buffer
/// labels of a rendered scene.
struct SceneEntity {
  const ObjectInstance* object = nullptr;
  std::uint16_t entity_id = 0;
};

/// Simulated detector + pose estimator: exact segmentation from the id
/// buffer, ground-truth pose perturbed by the noise model (per-axis Gaussian
/// translation; rotation by a Gaussian angle about a uniform random axis,
/// applied on the world side).
LocateResult locate_object(const std::vector<SceneEntity>& entities,
                           const RenderOutput& reference_view, const std::string& name,
                           const NoiseModel& noise, Rng& rng);

/// Wrist pose at the category's fixed offset from an object pose estimate.
/// Rotation composes on the body side; the translation offset is rotated
/// into the world when the table is object-frame, or added verbatim when
/// world-frame. Throws ConfigError when the category is missing.
Pose pre_manipulation_pose(const Pose& estimate, const CategoryOffsetTable& table,
                           Category category);

}  // namespace ofa
